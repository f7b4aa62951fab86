/// Character-level Levenshtein distance with unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    bounded(&a, &b, usize::MAX).expect("unbounded distance always resolves")
}

/// Levenshtein distance if it is below `limit`, otherwise `None`.
///
/// Runs the two-row DP over the shorter string and stops as soon as every
/// cell in a row reaches `limit`.
pub fn edit_distance_below(a: &str, b: &str, limit: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    bounded(&a, &b, limit)
}

fn bounded(a: &[char], b: &[char], limit: usize) -> Option<usize> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if long.len() - short.len() >= limit {
        return None;
    }
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (j, &lc) in long.iter().enumerate() {
        cur[0] = j + 1;
        let mut row_min = cur[0];
        for i in 1..=short.len() {
            let sub = prev[i - 1] + usize::from(short[i - 1] != lc);
            cur[i] = sub.min(prev[i] + 1).min(cur[i - 1] + 1);
            row_min = row_min.min(cur[i]);
        }
        if row_min >= limit {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[short.len()];
    (d < limit).then_some(d)
}
