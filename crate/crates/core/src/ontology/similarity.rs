//! Resnik-style MICA and Lin similarity over information content.

use std::collections::BTreeSet;

use super::{Ontology, OntologyStats, TermId};
use crate::error::{Error, Result};

fn mica_idx(o: &Ontology, s: &OntologyStats, a: usize, b: usize) -> usize {
    let (xa, xb) = (o.ancestor_idx(a), o.ancestor_idx(b));
    let (mut i, mut j) = (0, 0);
    let mut best: Option<usize> = None;
    // both lists ascending; the first maximum seen is the smallest id
    while i < xa.len() && j < xb.len() {
        match xa[i].cmp(&xb[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                let t = xa[i];
                if best.is_none_or(|m| s.ic_at(t) > s.ic_at(m)) {
                    best = Some(t);
                }
                i += 1;
                j += 1;
            }
        }
    }
    best.expect("live terms share the root")
}

fn lin_idx(o: &Ontology, s: &OntologyStats, a: usize, b: usize) -> f64 {
    let denom = s.ic_at(a) + s.ic_at(b);
    if denom == 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let m = mica_idx(o, s, a, b);
    (2.0 * s.ic_at(m) / denom).clamp(0.0, 1.0)
}

/// Most informative common ancestor (ancestor-or-self) of `a` and `b`.
pub fn mica(o: &Ontology, s: &OntologyStats, a: &TermId, b: &TermId) -> Result<TermId> {
    let (ia, ib) = (o.live_idx(a)?, o.live_idx(b)?);
    Ok(o.id_at(mica_idx(o, s, ia, ib)).clone())
}

/// `2 ic(mica) / (ic(a) + ic(b))`.
pub fn lin_similarity(o: &Ontology, s: &OntologyStats, a: &TermId, b: &TermId) -> Result<f64> {
    let (ia, ib) = (o.live_idx(a)?, o.live_idx(b)?);
    Ok(lin_idx(o, s, ia, ib))
}

/// Symmetric best-match average of pairwise Lin similarity.
pub fn set_similarity(
    o: &Ontology,
    s: &OntologyStats,
    predicted: &BTreeSet<TermId>,
    gold: &BTreeSet<TermId>,
) -> Result<f64> {
    if predicted.is_empty() || gold.is_empty() {
        return Err(Error::UndefinedSimilarity("empty term set".into()));
    }
    let rows: Vec<TermId> = predicted.iter().cloned().collect();
    let cols: Vec<TermId> = gold.iter().cloned().collect();
    let m = LinMatrix::new(o, s, &rows, &cols)?;
    Ok(m.best_match_average(&(0..rows.len()).collect::<Vec<_>>()))
}

/// Pairwise Lin similarities between a candidate list and a gold set, so
/// that many subsets of the candidates can be scored cheaply.
#[derive(Debug, Clone)]
pub struct LinMatrix {
    cols: usize,
    values: Vec<f64>,
}

impl LinMatrix {
    pub fn new(o: &Ontology, s: &OntologyStats, rows: &[TermId], cols: &[TermId]) -> Result<Self> {
        let ri: Vec<usize> = rows.iter().map(|t| o.live_idx(t)).collect::<Result<_>>()?;
        let ci: Vec<usize> = cols.iter().map(|t| o.live_idx(t)).collect::<Result<_>>()?;
        let values = ri
            .iter()
            .flat_map(|&r| ci.iter().map(move |&c| (r, c)))
            .map(|(r, c)| lin_idx(o, s, r, c))
            .collect();
        Ok(LinMatrix {
            cols: ci.len(),
            values,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    /// BMA between the selected rows and all columns; 0 when either side is
    /// empty.
    pub fn best_match_average(&self, rows: &[usize]) -> f64 {
        if rows.is_empty() || self.cols == 0 {
            return 0.0;
        }
        let row_side: f64 = rows
            .iter()
            .map(|&r| (0..self.cols).map(|c| self.get(r, c)).fold(0.0, f64::max))
            .sum::<f64>()
            / rows.len() as f64;
        let col_side: f64 = (0..self.cols)
            .map(|c| rows.iter().map(|&r| self.get(r, c)).fold(0.0, f64::max))
            .sum::<f64>()
            / self.cols as f64;
        0.5 * (row_side + col_side)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::tests::toy_kb;
    use crate::ontology::compute_stats;
    use crate::ontology::toy::*;

    fn set(ids: &[&str]) -> BTreeSet<TermId> {
        ids.iter().map(|s| id(s)).collect()
    }

    #[test]
    fn toy_mica() {
        let o = toy();
        let s = compute_stats(&o, &toy_kb(&o)).unwrap();
        assert_eq!(mica(&o, &s, &id(A1), &id(A1)).unwrap(), id(A1));
        assert_eq!(mica(&o, &s, &id(A1A), &id(A2)).unwrap(), id(A));
        assert_eq!(mica(&o, &s, &id(A1A), &id(B1)).unwrap(), id(R));
    }

    #[test]
    fn toy_lin() {
        let o = toy();
        let s = compute_stats(&o, &toy_kb(&o)).unwrap();
        assert_eq!(lin_similarity(&o, &s, &id(A1), &id(A1)).unwrap(), 1.0);
        // 2 ln(4/3) / (2 ln 4)
        let expected = (4.0f64 / 3.0).ln() / 4f64.ln();
        let got = lin_similarity(&o, &s, &id(A1A), &id(A2)).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.2075).abs() < 1e-4);
        assert_eq!(lin_similarity(&o, &s, &id(A1A), &id(B1)).unwrap(), 0.0);
        // root against itself: both ic zero
        assert_eq!(lin_similarity(&o, &s, &id(R), &id(R)).unwrap(), 1.0);
    }

    #[test]
    fn toy_set_similarity() {
        let o = toy();
        let s = compute_stats(&o, &toy_kb(&o)).unwrap();
        assert_eq!(set_similarity(&o, &s, &set(&[A1]), &set(&[A1])).unwrap(), 1.0);
        let pair = lin_similarity(&o, &s, &id(A1A), &id(A2)).unwrap();
        let got = set_similarity(&o, &s, &set(&[A1A]), &set(&[A2])).unwrap();
        assert!((got - pair).abs() < 1e-12);

        let b1_a1 = lin_similarity(&o, &s, &id(B1), &id(A1)).unwrap();
        let expected = 0.5 * ((1.0 + b1_a1) / 2.0 + 1.0);
        let got = set_similarity(&o, &s, &set(&[A1, B1]), &set(&[A1])).unwrap();
        assert!((got - expected).abs() < 1e-12);

        assert!(matches!(
            set_similarity(&o, &s, &BTreeSet::new(), &set(&[A1])),
            Err(Error::UndefinedSimilarity(_))
        ));
    }
}
