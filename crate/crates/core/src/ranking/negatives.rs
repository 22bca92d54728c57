//! Ontology-distance stratified negative pools and sampling.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, TermId};
use crate::seed::substream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeClass {
    None,
    Difficult,
    Medium,
    Easy,
    Implausible,
}

impl NegativeClass {
    pub const SAMPLED: [NegativeClass; 4] = [
        NegativeClass::Difficult,
        NegativeClass::Medium,
        NegativeClass::Easy,
        NegativeClass::Implausible,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    pub medium_min: usize,
    pub medium_max: usize,
    /// Minimum lineage distance for an ancestor or descendant to be easy.
    pub easy_min_distance: usize,
    /// Ancestors within this many edges (self included) count as close
    /// ancestry.
    pub close_ancestry: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            medium_min: 3,
            medium_max: 5,
            easy_min_distance: 3,
            close_ancestry: 2,
        }
    }
}

/// Disjoint pools, each sorted by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NegativePools {
    pub difficult: Vec<TermId>,
    pub medium: Vec<TermId>,
    pub easy: Vec<TermId>,
    pub implausible: Vec<TermId>,
}

impl NegativePools {
    pub fn get(&self, class: NegativeClass) -> &[TermId] {
        match class {
            NegativeClass::Difficult => &self.difficult,
            NegativeClass::Medium => &self.medium,
            NegativeClass::Easy => &self.easy,
            NegativeClass::Implausible => &self.implausible,
            NegativeClass::None => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        NegativeClass::SAMPLED.iter().all(|c| self.get(*c).is_empty())
    }
}

pub fn negative_pools(o: &Ontology, positives: &BTreeSet<TermId>, cfg: &PoolConfig) -> Result<NegativePools> {
    let n = o.len();
    let pos: Vec<usize> = positives.iter().map(|t| o.live_idx(t)).collect::<Result<_>>()?;
    let mut class = vec![NegativeClass::None; n];
    let assign = |i: usize, c: NegativeClass, class: &mut Vec<NegativeClass>| {
        if class[i] == NegativeClass::None || c < class[i] {
            class[i] = c;
        }
    };

    for &p in &pos {
        let parents: BTreeSet<usize> = o.parent_idx(p).iter().copied().collect();
        let grandparents: BTreeSet<usize> = parents.iter().flat_map(|&q| o.parent_idx(q).iter().copied()).collect();
        for &par in &parents {
            for &sib in o.child_idx(par) {
                assign(sib, NegativeClass::Difficult, &mut class);
            }
        }
        for &gp in &grandparents {
            for &aunt in o.child_idx(gp) {
                for &cousin in o.child_idx(aunt) {
                    let shares_parent = o.parent_idx(cousin).iter().any(|q| parents.contains(q));
                    if !shares_parent {
                        assign(cousin, NegativeClass::Difficult, &mut class);
                    }
                }
            }
        }

        let up = o.bfs_up(p, None);
        let down = o.bfs_down(p, None);
        let mut lineal = vec![false; n];
        for &(q, d) in up.iter().chain(&down) {
            lineal[q] = true;
            if d >= cfg.easy_min_distance {
                assign(q, NegativeClass::Easy, &mut class);
            }
        }
        let dist = o.bfs_undirected(p, Some(cfg.medium_max));
        for q in 0..n {
            if (cfg.medium_min..=cfg.medium_max).contains(&dist[q]) && !lineal[q] {
                assign(q, NegativeClass::Medium, &mut class);
            }
        }
    }

    let close: BTreeSet<usize> = pos
        .iter()
        .flat_map(|&p| o.bfs_up(p, Some(cfg.close_ancestry)))
        .map(|(q, _)| q)
        .collect();
    for q in 0..n {
        if o.is_live_idx(q)
            && o
                .bfs_up(q, Some(cfg.close_ancestry))
                .iter()
                .all(|(a, _)| !close.contains(a))
        {
            assign(q, NegativeClass::Implausible, &mut class);
        }
    }

    let mut pools = NegativePools::default();
    for &p in &pos {
        class[p] = NegativeClass::None;
    }
    for (q, c) in class.iter().enumerate() {
        if !o.is_live_idx(q) {
            continue;
        }
        let id = o.id_at(q).clone();
        match c {
            NegativeClass::Difficult => pools.difficult.push(id),
            NegativeClass::Medium => pools.medium.push(id),
            NegativeClass::Easy => pools.easy.push(id),
            NegativeClass::Implausible => pools.implausible.push(id),
            NegativeClass::None => {}
        }
    }
    Ok(pools)
}

/// Draws up to `per_class * positives` terms per class without
/// replacement. Output is grouped by class, ids ascending within a class.
pub fn sample_negatives(
    pools: &NegativePools,
    positives: &BTreeSet<TermId>,
    per_class: usize,
    seed: u64,
) -> Result<Vec<(TermId, NegativeClass)>> {
    if pools.is_empty() {
        return Err(Error::Sampling("every negative pool is empty".into()));
    }
    let mut out = Vec::new();
    for (k, class) in NegativeClass::SAMPLED.iter().enumerate() {
        let pool: Vec<&TermId> = pools.get(*class).iter().filter(|t| !positives.contains(*t)).collect();
        let want = (per_class * positives.len()).min(pool.len());
        let mut rng = substream(seed, "negatives", k as u64);
        let mut picked: Vec<TermId> = pool.choose_multiple(&mut rng, want).map(|t| (*t).clone()).collect();
        picked.sort();
        out.extend(picked.into_iter().map(|t| (t, *class)));
    }
    Ok(out)
}
