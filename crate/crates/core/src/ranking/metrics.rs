//! Truncated average precision over per-patient rankings.

use std::cmp::Ordering;

use crate::ontology::TermId;

/// Descending score, ties to the smaller id.
pub fn rank_cmp(a: (f64, &TermId), b: (f64, &TermId)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Indices of `items` in ranked order.
pub fn rank_order(scores: &[f64], ids: &[&TermId]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| rank_cmp((scores[i], ids[i]), (scores[j], ids[j])));
    order
}

/// AP@k for a ranked relevance list with `relevant` positives in total,
/// normalized by `min(relevant, k)`. Zero when there is nothing relevant.
pub fn average_precision_at_k(ranked: &[bool], relevant: usize, k: usize) -> f64 {
    let denom = relevant.min(k);
    if denom == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &rel) in ranked.iter().take(k).enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / denom as f64
}

/// Mean AP@k over groups of (score, id, label); groups without a positive
/// are skipped.
pub fn mean_average_precision<'a, G>(groups: G, k: usize) -> f64
where
    G: IntoIterator<Item = Vec<(f64, &'a TermId, bool)>>,
{
    let mut total = 0.0;
    let mut n = 0usize;
    for mut g in groups {
        let relevant = g.iter().filter(|x| x.2).count();
        if relevant == 0 {
            continue;
        }
        g.sort_by(|a, b| rank_cmp((a.0, a.1), (b.0, b.1)));
        let ranked: Vec<bool> = g.iter().map(|x| x.2).collect();
        total += average_precision_at_k(&ranked, relevant, k);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_examples() {
        let ap = average_precision_at_k(&[true, false, true], 2, 3);
        assert!((ap - 0.5 * (1.0 + 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(average_precision_at_k(&[true, true, false], 2, 30), 1.0);
        assert_eq!(average_precision_at_k(&[false, false, true], 1, 2), 0.0);
        assert_eq!(average_precision_at_k(&[false], 0, 2), 0.0);
    }

    #[test]
    fn ties_break_by_id() {
        let a = TermId::parse("HP:0000002").unwrap();
        let b = TermId::parse("HP:0000001").unwrap();
        assert_eq!(rank_order(&[0.5, 0.5], &[&a, &b]), vec![1, 0]);
        let map = mean_average_precision(vec![vec![(0.5, &a, true), (0.5, &b, false)]], 30);
        assert_eq!(map, 0.5);
    }
}
