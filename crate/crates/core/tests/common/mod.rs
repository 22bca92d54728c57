//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use phenoprio::annotations::AnnotationKB;
use phenoprio::ontology::{compute_stats, Ontology, OntologyStats, TermId, TermRecord};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const R: &str = "HP:0000001";
pub const A: &str = "HP:0000010";
pub const A1: &str = "HP:0000011";
pub const A2: &str = "HP:0000012";
pub const A1A: &str = "HP:0000111";
pub const B: &str = "HP:0000020";
pub const B1: &str = "HP:0000021";

pub fn id(s: &str) -> TermId {
    TermId::parse(s).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Root R; A, B under R; A1, A2 under A; A1a under A1; B1 under B.
pub fn toy() -> Ontology {
    Ontology::from_records(vec![
        TermRecord::new(R, "All", &[]).unwrap(),
        TermRecord::new(A, "Alpha", &[R]).unwrap(),
        TermRecord::new(B, "Beta", &[R]).unwrap(),
        TermRecord::new(A1, "Alpha one", &[A]).unwrap(),
        TermRecord::new(A2, "Alpha two", &[A]).unwrap(),
        TermRecord::new(A1A, "Alpha one a", &[A1]).unwrap(),
        TermRecord::new(B1, "Beta one", &[B]).unwrap(),
    ])
    .unwrap()
}

/// D1 on A1a, D2 on A1, D3 on A2, D4 on B1.
pub fn toy_diseases() -> String {
    format!("{A1A}\tD1\tomim\n{A1}\tD2\tomim\n{A2}\tD3\tomim\n{B1}\tD4\tomim\n")
}

pub fn toy_stats(o: &Ontology) -> OntologyStats {
    compute_stats(o, &AnnotationKB::load(&toy_diseases(), "", o).unwrap()).unwrap()
}

/// A random single-rooted DAG as plain data, for both the library and the
/// oracles.
#[derive(Clone, Debug)]
pub struct RandomDag {
    pub ids: Vec<TermId>,
    /// Parent positions per node; node 0 is the root.
    pub parents: Vec<Vec<usize>>,
    pub obsolete: Vec<bool>,
    /// (node, disease) annotation pairs.
    pub annotations: Vec<(usize, String)>,
}

impl RandomDag {
    pub fn generate(seed: u64, max_terms: usize) -> Self {
        let mut r = rng(seed);
        let n = r.gen_range(8..=max_terms);
        let mut numbers: Vec<u32> = (0..n as u32).map(|i| 100 + i * 3).collect();
        numbers[1..].shuffle(&mut r);
        let ids: Vec<TermId> = numbers.iter().map(|k| id(&format!("HP:{k:07}"))).collect();
        let mut parents = vec![Vec::new()];
        let mut obsolete = vec![false];
        for i in 1..n {
            if i > 3 && r.gen_bool(0.06) {
                obsolete.push(true);
                parents.push(Vec::new());
                continue;
            }
            obsolete.push(false);
            let live: Vec<usize> = (0..i).filter(|&j| !obsolete[j]).collect();
            let k = r.gen_range(1..=3.min(live.len()));
            let mut ps: Vec<usize> = live.choose_multiple(&mut r, k).copied().collect();
            ps.sort_unstable();
            parents.push(ps);
        }
        let live: Vec<usize> = (1..n).filter(|&j| !obsolete[j]).collect();
        let mut annotations = Vec::new();
        for d in 0..r.gen_range(3..20) {
            for _ in 0..r.gen_range(1..=3) {
                annotations.push((*live.choose(&mut r).unwrap(), format!("D{d}")));
            }
        }
        RandomDag { ids, parents, obsolete, annotations }
    }

    pub fn ontology(&self) -> Ontology {
        let records = (0..self.ids.len())
            .map(|i| TermRecord {
                id: self.ids[i].clone(),
                name: format!("term {i}"),
                synonyms: Vec::new(),
                definition: String::new(),
                parents: self.parents[i].iter().map(|&p| self.ids[p].clone()).collect(),
                obsolete: self.obsolete[i],
            })
            .collect();
        Ontology::from_records(records).unwrap()
    }

    pub fn disease_tsv(&self) -> String {
        self.annotations
            .iter()
            .map(|(t, d)| format!("{}\t{d}\tomim\n", self.ids[*t]))
            .collect()
    }

    pub fn live(&self) -> Vec<usize> {
        (0..self.ids.len()).filter(|&i| !self.obsolete[i]).collect()
    }
}

/// Independent reference computations over a `RandomDag`.
pub struct Oracle<'a> {
    pub dag: &'a RandomDag,
    /// Ancestor-or-self with shortest upward distance.
    pub up: Vec<BTreeMap<usize, usize>>,
    pub ic: Vec<f64>,
    pub dist: Vec<Vec<usize>>,
}

impl<'a> Oracle<'a> {
    pub fn new(dag: &'a RandomDag) -> Self {
        let n = dag.ids.len();
        let up: Vec<BTreeMap<usize, usize>> = (0..n)
            .map(|s| {
                let mut seen = BTreeMap::from([(s, 0)]);
                let mut q = VecDeque::from([s]);
                while let Some(x) = q.pop_front() {
                    for &p in &dag.parents[x] {
                        if !seen.contains_key(&p) {
                            seen.insert(p, seen[&x] + 1);
                            q.push_back(p);
                        }
                    }
                }
                seen
            })
            .collect();

        let mut by_disease: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (t, d) in &dag.annotations {
            by_disease.entry(d.as_str()).or_default().insert(*t);
        }
        let total = by_disease.len();
        let ic = (0..n)
            .map(|t| {
                let count = by_disease
                    .values()
                    .filter(|terms| terms.iter().any(|x| up[*x].contains_key(&t)))
                    .count();
                if count == 0 {
                    ((total + 1) as f64).ln()
                } else {
                    -(count as f64 / total as f64).ln()
                }
            })
            .collect();

        // Floyd-Warshall over live nodes with undirected edges
        const INF: usize = usize::MAX / 4;
        let mut dist = vec![vec![INF; n]; n];
        for (i, ps) in dag.parents.iter().enumerate() {
            dist[i][i] = 0;
            for &p in ps {
                dist[i][p] = 1;
                dist[p][i] = 1;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if dist[i][k] + dist[k][j] < dist[i][j] {
                        dist[i][j] = dist[i][k] + dist[k][j];
                    }
                }
            }
        }
        Oracle { dag, up, ic, dist }
    }

    pub fn is_ancestor(&self, a: usize, t: usize) -> bool {
        self.up[t].contains_key(&a)
    }

    pub fn mica(&self, a: usize, b: usize) -> usize {
        let mut common: Vec<usize> = self.up[a].keys().filter(|x| self.up[b].contains_key(x)).copied().collect();
        common.sort_by(|&x, &y| self.ic[y].total_cmp(&self.ic[x]).then(self.dag.ids[x].cmp(&self.dag.ids[y])));
        common[0]
    }

    pub fn lin(&self, a: usize, b: usize) -> f64 {
        let denom = self.ic[a] + self.ic[b];
        if denom == 0.0 {
            return if a == b { 1.0 } else { 0.0 };
        }
        2.0 * self.ic[self.mica(a, b)] / denom
    }

    fn within2(&self, t: usize) -> BTreeSet<usize> {
        self.up[t].iter().filter(|(_, d)| **d <= 2).map(|(a, _)| *a).collect()
    }

    fn parent_set(&self, t: usize) -> BTreeSet<usize> {
        self.dag.parents[t].iter().copied().collect()
    }

    fn grandparent_set(&self, t: usize) -> BTreeSet<usize> {
        self.dag.parents[t].iter().flat_map(|&p| self.dag.parents[p].iter().copied()).collect()
    }

    /// Pools by the written definitions with precedence
    /// difficult > medium > easy > implausible.
    pub fn pools(&self, positives: &BTreeSet<usize>) -> [BTreeSet<usize>; 4] {
        let mut out: [BTreeSet<usize>; 4] = Default::default();
        for q in self.dag.live() {
            if positives.contains(&q) {
                continue;
            }
            let difficult = positives.iter().any(|&p| {
                let shared_parent = !self.parent_set(p).is_disjoint(&self.parent_set(q));
                let shared_grand = !self.grandparent_set(p).is_disjoint(&self.grandparent_set(q));
                shared_parent || shared_grand
            });
            let lineal = |p: usize| self.is_ancestor(p, q) || self.is_ancestor(q, p);
            let medium = positives
                .iter()
                .any(|&p| (3..=5).contains(&self.dist[p][q]) && !lineal(p));
            let easy = positives.iter().any(|&p| {
                let d = self.up[p].get(&q).or_else(|| self.up[q].get(&p));
                d.is_some_and(|d| *d >= 3)
            });
            let implausible = positives.iter().all(|&p| self.within2(p).is_disjoint(&self.within2(q)));
            if difficult {
                out[0].insert(q);
            } else if medium {
                out[1].insert(q);
            } else if easy {
                out[2].insert(q);
            } else if implausible {
                out[3].insert(q);
            }
        }
        out
    }
}

/// AP@k by the textbook sum, one prefix at a time.
pub fn ap_oracle(relevant_flags: &[bool], relevant_total: usize, k: usize) -> f64 {
    if relevant_total == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 1..=k.min(relevant_flags.len()) {
        if relevant_flags[i - 1] {
            let hits = relevant_flags[..i].iter().filter(|x| **x).count();
            sum += hits as f64 / i as f64;
        }
    }
    sum / relevant_total.min(k) as f64
}
