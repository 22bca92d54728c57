//! HPO-style ontology: term records, validated is_a graph and graph queries.
//!
//! Terms are stored sorted by identifier so that internal indices order the
//! same way identifiers do; every "smallest id" tie-break reduces to a
//! comparison of indices.

mod obo;
mod similarity;
mod stats;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use similarity::{lin_similarity, mica, set_similarity, LinMatrix};
pub use stats::{compute_stats, ic_from_count, OntologyStats};

/// Ontology identifier of the form `HP:` followed by seven digits.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TermId(String);

impl TermId {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let valid = s.len() == 10
            && s.starts_with("HP:")
            && s.as_bytes()[3..].iter().all(u8::is_ascii_digit);
        if valid {
            Ok(TermId(s.to_string()))
        } else {
            Err(Error::UnknownTerm(format!("malformed identifier {s:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TermId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        TermId::parse(&s)
    }
}

impl From<TermId> for String {
    fn from(t: TermId) -> String {
        t.0
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for TermId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TermId::parse(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub id: TermId,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default, rename = "def")]
    pub definition: String,
    #[serde(default, rename = "is_a")]
    pub parents: Vec<TermId>,
    #[serde(default, rename = "is_obsolete")]
    pub obsolete: bool,
}

impl TermRecord {
    pub fn new(id: &str, name: &str, parents: &[&str]) -> Result<Self> {
        Ok(TermRecord {
            id: TermId::parse(id)?,
            name: name.to_string(),
            synonyms: Vec::new(),
            definition: String::new(),
            parents: parents
                .iter()
                .map(|p| TermId::parse(p))
                .collect::<Result<_>>()?,
            obsolete: false,
        })
    }
}

/// Validated ontology. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Ontology {
    terms: Vec<TermRecord>,
    index: HashMap<TermId, usize>,
    root: usize,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    // ancestor-or-self, sorted ascending; empty for obsolete terms
    ancestors: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Ontology {
    pub fn parse_obo(text: &str) -> Result<Self> {
        Self::from_records(obo::parse_obo_records(text)?)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        Self::from_records(obo::parse_json_records(text)?)
    }

    /// Loads an OBO or JSON ontology, picking the format by the first
    /// non-blank character.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim_start().starts_with('[') && !text.trim_start().starts_with("[Term]") {
            Self::parse_json(&text)
        } else {
            Self::parse_obo(&text)
        }
    }

    pub fn from_records(mut records: Vec<TermRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Structure("ontology has no terms".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if !r.obsolete && r.name.trim().is_empty() {
                return Err(Error::Stanza {
                    stanza: i + 1,
                    message: format!("term {} has an empty name", r.id),
                });
            }
        }
        records.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::Structure(format!("duplicate term {}", r.id)));
            }
        }

        let n = records.len();
        let mut all_parents = vec![Vec::new(); n];
        for (i, r) in records.iter().enumerate() {
            for p in &r.parents {
                let &j = index.get(p).ok_or_else(|| {
                    Error::Structure(format!("dangling is_a target {p} on {}", r.id))
                })?;
                if !r.obsolete && records[j].obsolete {
                    return Err(Error::Structure(format!(
                        "term {} has obsolete parent {p}",
                        r.id
                    )));
                }
                if !all_parents[i].contains(&j) {
                    all_parents[i].push(j);
                }
            }
            all_parents[i].sort_unstable();
        }

        let order = topological_order(&all_parents)
            .map_err(|member| Error::Cycle(records[member].id.to_string()))?;

        let roots: Vec<usize> = (0..n)
            .filter(|&i| !records[i].obsolete && all_parents[i].is_empty())
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::Structure("no root term".into())),
            many => {
                let ids: Vec<String> = many.iter().map(|&i| records[i].id.to_string()).collect();
                return Err(Error::Structure(format!(
                    "multiple root terms: {}",
                    ids.join(", ")
                )));
            }
        };

        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for i in 0..n {
            if records[i].obsolete {
                continue;
            }
            parents[i] = all_parents[i].clone();
            for &p in &all_parents[i] {
                children[p].push(i);
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }

        // ancestors in topological order: parents are finished before children
        let mut ancestors: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &i in &order {
            if records[i].obsolete {
                continue;
            }
            let mut acc = vec![i];
            for &p in &parents[i] {
                acc.extend_from_slice(&ancestors[p]);
            }
            acc.sort_unstable();
            acc.dedup();
            ancestors[i] = acc;
        }

        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                if depth[c] == usize::MAX {
                    depth[c] = depth[u] + 1;
                    queue.push_back(c);
                }
            }
        }

        Ok(Ontology {
            terms: records,
            index,
            root,
            parents,
            children,
            ancestors,
            depth,
        })
    }

    pub fn root(&self) -> &TermId {
        &self.terms[self.root].id
    }

    /// Number of terms including obsolete ones.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.terms.iter().filter(|t| !t.obsolete).count()
    }

    /// Any term, obsolete included.
    pub fn term(&self, id: &TermId) -> Result<&TermRecord> {
        self.index
            .get(id)
            .map(|&i| &self.terms[i])
            .ok_or_else(|| Error::UnknownTerm(id.to_string()))
    }

    pub fn contains(&self, id: &TermId) -> bool {
        self.index.contains_key(id)
    }

    pub fn is_live(&self, id: &TermId) -> bool {
        self.index.get(id).is_some_and(|&i| !self.terms[i].obsolete)
    }

    /// Non-obsolete terms in identifier order.
    pub fn live_terms(&self) -> impl Iterator<Item = &TermRecord> + '_ {
        self.terms.iter().filter(|t| !t.obsolete)
    }

    pub fn parents(&self, id: &TermId) -> Result<Vec<&TermId>> {
        let i = self.live_idx(id)?;
        Ok(self.parents[i].iter().map(|&p| &self.terms[p].id).collect())
    }

    pub fn children(&self, id: &TermId) -> Result<Vec<&TermId>> {
        let i = self.live_idx(id)?;
        Ok(self.children[i].iter().map(|&c| &self.terms[c].id).collect())
    }

    /// Ancestors including the term itself, in identifier order.
    pub fn ancestors(&self, id: &TermId) -> Result<Vec<&TermId>> {
        let i = self.live_idx(id)?;
        Ok(self.ancestors[i].iter().map(|&a| &self.terms[a].id).collect())
    }

    /// Descendants including the term itself, in identifier order.
    pub fn descendants(&self, id: &TermId) -> Result<Vec<&TermId>> {
        let i = self.live_idx(id)?;
        let mut out = self.descendant_idx(i);
        out.sort_unstable();
        Ok(out.into_iter().map(|d| &self.terms[d].id).collect())
    }

    /// Shortest is_a path from the root.
    pub fn depth(&self, id: &TermId) -> Result<usize> {
        Ok(self.depth[self.live_idx(id)?])
    }

    /// Length of the shortest path between `a` and `b` with is_a edges
    /// treated as undirected.
    pub fn undirected_distance(&self, a: &TermId, b: &TermId) -> Result<usize> {
        let (ia, ib) = (self.live_idx(a)?, self.live_idx(b)?);
        let dist = self.bfs_undirected(ia, None);
        Ok(dist[ib])
    }

    pub(crate) fn live_idx(&self, id: &TermId) -> Result<usize> {
        match self.index.get(id) {
            Some(&i) if self.terms[i].obsolete => Err(Error::ObsoleteTerm(id.to_string())),
            Some(&i) => Ok(i),
            None => Err(Error::UnknownTerm(id.to_string())),
        }
    }

    pub(crate) fn id_at(&self, i: usize) -> &TermId {
        &self.terms[i].id
    }

    pub(crate) fn is_live_idx(&self, i: usize) -> bool {
        !self.terms[i].obsolete
    }

    pub(crate) fn parent_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn child_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub(crate) fn ancestor_idx(&self, i: usize) -> &[usize] {
        &self.ancestors[i]
    }

    pub(crate) fn descendant_idx(&self, i: usize) -> Vec<usize> {
        let mut seen = vec![false; self.terms.len()];
        let mut out = vec![i];
        seen[i] = true;
        let mut k = 0;
        while k < out.len() {
            let u = out[k];
            k += 1;
            for &c in &self.children[u] {
                if !seen[c] {
                    seen[c] = true;
                    out.push(c);
                }
            }
        }
        out
    }

    /// Undirected BFS distances from `src`; `usize::MAX` for unreachable or
    /// obsolete terms. Stops expanding past `limit` when given.
    pub(crate) fn bfs_undirected(&self, src: usize, limit: Option<usize>) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.terms.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if limit.is_some_and(|l| dist[u] >= l) {
                continue;
            }
            for &v in self.parents[u].iter().chain(&self.children[u]) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Directed distances walking only towards ancestors.
    pub(crate) fn bfs_up(&self, src: usize, limit: Option<usize>) -> Vec<(usize, usize)> {
        self.bfs_directed(src, limit, &self.parents)
    }

    /// Directed distances walking only towards descendants.
    pub(crate) fn bfs_down(&self, src: usize, limit: Option<usize>) -> Vec<(usize, usize)> {
        self.bfs_directed(src, limit, &self.children)
    }

    fn bfs_directed(
        &self,
        src: usize,
        limit: Option<usize>,
        adj: &[Vec<usize>],
    ) -> Vec<(usize, usize)> {
        let mut dist: HashMap<usize, usize> = HashMap::from([(src, 0)]);
        let mut out = vec![(src, 0)];
        let mut k = 0;
        while k < out.len() {
            let (u, d) = out[k];
            k += 1;
            if limit.is_some_and(|l| d >= l) {
                continue;
            }
            for &v in &adj[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(v) {
                    e.insert(d + 1);
                    out.push((v, d + 1));
                }
            }
        }
        out
    }

    /// Counts, per term, the items whose annotated terms (or their
    /// descendants) include it. Each item counts at most once per term.
    pub(crate) fn propagated_counts<I>(&self, items: I) -> Vec<usize>
    where
        I: IntoIterator,
        I::Item: AsRef<[usize]>,
    {
        let n = self.terms.len();
        let mut counts = vec![0usize; n];
        let mut stamp = vec![usize::MAX; n];
        for (k, item) in items.into_iter().enumerate() {
            for &t in item.as_ref() {
                for &a in &self.ancestors[t] {
                    if stamp[a] != k {
                        stamp[a] = k;
                        counts[a] += 1;
                    }
                }
            }
        }
        counts
    }
}

/// Kahn's algorithm over parent lists. On failure returns a term that lies
/// on a cycle.
fn topological_order(parents: &[Vec<usize>]) -> std::result::Result<Vec<usize>, usize> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (i, ps) in parents.iter().enumerate() {
        indegree[i] = ps.len();
        for &p in ps {
            children[p].push(i);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &c in &children[u] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // walk up through unfinished parents until a term repeats
    let mut cur = (0..n).find(|&i| indegree[i] > 0).expect("unfinished term");
    let mut visited = vec![false; n];
    while !visited[cur] {
        visited[cur] = true;
        cur = *parents[cur]
            .iter()
            .find(|&&p| indegree[p] > 0)
            .expect("unfinished term has an unfinished parent");
    }
    Err(cur)
}
