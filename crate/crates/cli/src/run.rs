//! Run directories: `<root>/<YYYYmmdd-HHMMSS>-seed<N>/` holding `manifest.toml`,
//! `checkpoints/`, `reports/` and `dumps/`.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::config::{Config, Provenance};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(run_root: &Path, seed: u64) -> Result<RunDir> {
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        let base = format!("{stamp}-seed{seed}");
        let mut root = run_root.join(&base);
        let mut n = 1;
        while root.exists() {
            n += 1;
            root = run_root.join(format!("{base}-{n}"));
        }
        for sub in ["checkpoints", "reports", "dumps"] {
            fs::create_dir_all(root.join(sub)).with_context(|| format!("creating {}", root.join(sub).display()))?;
        }
        Ok(RunDir { root })
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn dumps(&self) -> PathBuf {
        self.root.join("dumps")
    }

    /// Write the resolved config plus provenance. Each input file (or every
    /// file directly inside an input directory) is hashed.
    pub fn write_manifest(&self, cfg: &Config, argv: &[String], inputs: &[&Path]) -> Result<()> {
        let mut prov = Provenance {
            command: argv.to_vec(),
            started: chrono::Local::now().to_rfc3339(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Default::default()
        };
        for p in inputs {
            if p.is_dir() {
                let mut files: Vec<PathBuf> =
                    fs::read_dir(p)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|f| f.is_file()).collect();
                files.sort();
                for f in files {
                    prov.inputs.insert(f.display().to_string(), sha256_file(&f)?);
                }
            } else if p.is_file() {
                prov.inputs.insert(p.display().to_string(), sha256_file(p)?);
            }
        }
        let mut out = cfg.clone();
        out.provenance = Some(prov);
        fs::write(self.root.join(MANIFEST_FILE), out.to_toml()?)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let a = RunDir::create(tmp.path(), 9).unwrap();
        let b = RunDir::create(tmp.path(), 9).unwrap();
        assert_ne!(a.root, b.root);
        assert!(a.root.file_name().unwrap().to_str().unwrap().contains("-seed9"));
        assert!(a.checkpoints().is_dir() && a.reports().is_dir() && a.dumps().is_dir());

        let input = tmp.path().join("in.txt");
        fs::write(&input, "abc").unwrap();
        a.write_manifest(&Config::default(), &["x".into()], &[&input]).unwrap();
        let text = fs::read_to_string(a.root.join(MANIFEST_FILE)).unwrap();
        // sha256("abc")
        assert!(text.contains("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"));
        let back = Config::load(Some(&a.root.join(MANIFEST_FILE))).unwrap();
        assert_eq!(back, Config::default());
    }
}
