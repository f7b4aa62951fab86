use std::collections::BTreeSet;
use std::path::PathBuf;

use nli_explain::quality::{validate_annotation, UNVERIFIABLE};
use nli_explain::text::{read_corpus, ColumnMap, Label, Split};

fn fixture() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/annotation_cases.csv")
}

#[test]
fn fixture_cases_match_expected_codes() {
    let load = read_corpus(&fixture(), &ColumnMap::default(), Split::Train, true).unwrap();
    assert_eq!(load.examples.len(), 20);
    let mut rdr = csv::Reader::from_path(fixture()).unwrap();
    let expected: Vec<(String, String)> =
        rdr.records().map(|r| r.unwrap()).map(|r| (r[0].to_string(), r[7].to_string())).collect();

    let mut labels = BTreeSet::new();
    let mut codes_seen = BTreeSet::new();
    for (e, (id, want)) in load.examples.iter().zip(&expected) {
        assert_eq!(&e.id, id);
        labels.insert(e.label);
        let report = validate_annotation(e);
        let mut got: BTreeSet<String> = report.codes().iter().map(|c| c.to_string()).collect();
        if !report.unverifiable.is_empty() {
            got.insert(UNVERIFIABLE.to_string());
        }
        let want: BTreeSet<String> = want.split(';').filter(|s| !s.is_empty()).map(String::from).collect();
        assert_eq!(got, want, "{id}: {report:?}");
        assert_eq!(report.pass, report.violations.is_empty());
        codes_seen.extend(got);
    }
    assert_eq!(labels.len(), Label::ALL.len());
    for code in [
        "R1_TOO_SHORT",
        "R2_COPY",
        "R3_PREMISE_HIGHLIGHT_REQUIRED",
        "R3_HYPOTHESIS_HIGHLIGHT_REQUIRED",
        "R3_PREMISE_HIGHLIGHT_FORBIDDEN",
        "R4_HIGHLIGHT_USAGE",
        "R5_NO_NEW_WORDS",
        UNVERIFIABLE,
    ] {
        assert!(codes_seen.contains(code), "fixture never exercises {code}");
    }
}
