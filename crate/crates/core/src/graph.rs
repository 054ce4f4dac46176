//! Interaction graph: sites are linked when some term has a strictly
//! negative mixed partial in them at every probe configuration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Field, InteractionSpec};
use crate::site::{Site, SiteSet};

pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct InteractionGraph {
    window: SiteSet,
    adjacency: BTreeMap<Site, BTreeSet<Site>>,
    range_bound: u64,
    translation_invariant: bool,
    /// How the edges were certified.
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitivityReport {
    pub transitive: bool,
    pub components: usize,
    /// `Some` when the model declares translation invariance.
    pub pattern_invariant: Option<bool>,
}

/// Builds the graph on `window`; terms reaching outside the window are
/// evaluated too, but only edges between window sites are kept.
pub fn build_graph<F: Field>(
    spec: &InteractionSpec,
    probes: &[F],
    window: &SiteSet,
    edge_threshold: f64,
) -> Result<InteractionGraph> {
    if probes.is_empty() {
        return Err(Error::Contract("graph construction needs at least one probe".into()));
    }
    let mut adjacency: BTreeMap<Site, BTreeSet<Site>> =
        window.iter().map(|s| (*s, BTreeSet::new())).collect();
    let mut buf = Vec::new();
    for a in spec.terms_touching(window) {
        let cell = a.term.cell();
        let n = cell.len();
        if n < 2 {
            continue;
        }
        let mut worst = vec![f64::NEG_INFINITY; n * n];
        for u in probes {
            a.gather(u, &mut buf);
            for p in 0..n {
                for q in (p + 1)..n {
                    let h = a.term.hess(&a.base, &buf, p, q);
                    worst[p * n + q] = worst[p * n + q].max(h);
                }
            }
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if worst[p * n + q] > -edge_threshold {
                    continue;
                }
                let sp = a.base.add(&cell[p]);
                let sq = a.base.add(&cell[q]);
                if window.contains(&sp) && window.contains(&sq) {
                    adjacency.get_mut(&sp).expect("window").insert(sq);
                    adjacency.get_mut(&sq).expect("window").insert(sp);
                }
            }
        }
    }
    Ok(InteractionGraph {
        window: window.clone(),
        adjacency,
        range_bound: spec.range_bound(),
        translation_invariant: spec.translation_invariant(),
        provenance: format!(
            "per-term mixed partials <= -{edge_threshold:e} at all {} probe configurations",
            probes.len()
        ),
    })
}

impl InteractionGraph {
    pub fn window(&self) -> &SiteSet {
        &self.window
    }

    pub fn neighbors(&self, s: &Site) -> impl Iterator<Item = &Site> {
        self.adjacency.get(s).into_iter().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(|v| v.len()).sum::<usize>() / 2
    }

    fn check_in(&self, s: &Site) -> Result<()> {
        if self.window.contains(s) {
            Ok(())
        } else {
            Err(Error::Contract(format!("site {s} is outside the graph window")))
        }
    }

    /// Breadth-first search from `sources`, expanding neighbors in
    /// lexicographic order. Returns distances and first-discovery parents.
    fn bfs(&self, sources: &SiteSet) -> (BTreeMap<Site, u64>, BTreeMap<Site, Site>) {
        let mut dist = BTreeMap::new();
        let mut parent = BTreeMap::new();
        let mut queue = VecDeque::new();
        for s in sources {
            dist.insert(*s, 0);
            queue.push_back(*s);
        }
        while let Some(p) = queue.pop_front() {
            let dp = dist[&p];
            for q in self.neighbors(&p) {
                if !dist.contains_key(q) {
                    dist.insert(*q, dp + 1);
                    parent.insert(*q, p);
                    queue.push_back(*q);
                }
            }
        }
        (dist, parent)
    }

    /// Graph distance, or `None` when `j` is unreachable from `i`.
    pub fn distance(&self, i: &Site, j: &Site) -> Result<Option<u64>> {
        self.check_in(i)?;
        self.check_in(j)?;
        let (dist, _) = self.bfs(&std::iter::once(*i).collect());
        Ok(dist.get(j).copied())
    }

    /// `min_{j∈S} d(i, j)`.
    pub fn distance_to_set(&self, i: &Site, set: &SiteSet) -> Result<Option<u64>> {
        self.check_in(i)?;
        if set.is_empty() {
            return Err(Error::Contract("distance to an empty set".into()));
        }
        for s in set {
            self.check_in(s)?;
        }
        let (dist, _) = self.bfs(set);
        Ok(dist.get(i).copied())
    }

    /// `{i : d(i, S) ≤ 1}`.
    pub fn frontier(&self, set: &SiteSet) -> Result<SiteSet> {
        for s in set {
            self.check_in(s)?;
        }
        let mut out = set.clone();
        for s in set {
            out.extend(self.neighbors(s).copied());
        }
        Ok(out)
    }

    /// For a connected graph and `S` a proper nonempty subset of the window,
    /// whether the frontier adds a site outside `S`. `None` when the check
    /// does not apply.
    pub fn frontier_grows(&self, set: &SiteSet) -> Result<Option<bool>> {
        if set.is_empty() || set.len() == self.window.len() || self.components() != 1 {
            return Ok(None);
        }
        let f = self.frontier(set)?;
        Ok(Some(f.len() > set.len()))
    }

    /// Shortest path from `i` to `j` with lexicographic tie-breaking.
    pub fn shortest_path(&self, i: &Site, j: &Site) -> Result<Vec<Site>> {
        self.check_in(i)?;
        self.check_in(j)?;
        let (dist, parent) = self.bfs(&std::iter::once(*i).collect());
        if !dist.contains_key(j) {
            return Err(Error::Unreachable { from: *i, to: *j });
        }
        let mut path = vec![*j];
        let mut cur = *j;
        while cur != *i {
            cur = parent[&cur];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// `Con(B)`: the union of the chosen shortest paths between all pairs of `B`.
    pub fn connected_hull(&self, set: &SiteSet) -> Result<SiteSet> {
        let mut out = set.clone();
        let items: Vec<Site> = set.iter().copied().collect();
        for (a, i) in items.iter().enumerate() {
            self.check_in(i)?;
            let (dist, parent) = self.bfs(&std::iter::once(*i).collect());
            for j in &items[a + 1..] {
                if !dist.contains_key(j) {
                    return Err(Error::Unreachable { from: *i, to: *j });
                }
                let mut cur = *j;
                while cur != *i {
                    out.insert(cur);
                    cur = parent[&cur];
                }
            }
        }
        assert!(out.is_superset(set), "connected hull must contain its seed");
        assert!(self.induced_components(&out) <= 1, "connected hull must be connected");
        Ok(out)
    }

    fn induced_components(&self, set: &SiteSet) -> usize {
        let mut seen = SiteSet::new();
        let mut count = 0;
        for s in set {
            if seen.contains(s) {
                continue;
            }
            count += 1;
            let mut stack = vec![*s];
            seen.insert(*s);
            while let Some(p) = stack.pop() {
                for q in self.neighbors(&p) {
                    if set.contains(q) && seen.insert(*q) {
                        stack.push(*q);
                    }
                }
            }
        }
        count
    }

    pub fn components(&self) -> usize {
        self.induced_components(&self.window)
    }

    /// Connected components of the subgraph induced on `set`.
    pub fn components_of(&self, set: &SiteSet) -> Vec<SiteSet> {
        let mut seen = SiteSet::new();
        let mut out = Vec::new();
        for s in set {
            if !seen.insert(*s) {
                continue;
            }
            let mut comp = SiteSet::new();
            comp.insert(*s);
            let mut stack = vec![*s];
            while let Some(p) = stack.pop() {
                for q in self.neighbors(&p) {
                    if set.contains(q) && seen.insert(*q) {
                        comp.insert(*q);
                        stack.push(*q);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Connectivity of the window graph, plus, for translation-invariant
    /// models, agreement of the edge-offset pattern at every site whose
    /// full interaction ball lies inside the window.
    pub fn is_transitive(&self) -> TransitivityReport {
        let components = self.components();
        let pattern_invariant = self.translation_invariant.then(|| {
            let reach = self.range_bound as i64;
            let mut pattern: Option<BTreeSet<Site>> = None;
            for p in &self.window {
                let interior = crate::site::cube(p.dim(), -reach, reach)
                    .iter()
                    .all(|o| self.window.contains(&p.add(o)));
                if !interior {
                    continue;
                }
                let offs: BTreeSet<Site> = self.neighbors(p).map(|q| q.sub(p)).collect();
                match &pattern {
                    None => pattern = Some(offs),
                    Some(pt) if *pt != offs => return false,
                    _ => {}
                }
            }
            true
        });
        TransitivityReport {
            transitive: components == 1 && !self.window.is_empty() && pattern_invariant != Some(false),
            components,
            pattern_invariant,
        }
    }

    /// One edge `p q` per line, sorted.
    pub fn edge_list_text(&self) -> String {
        let mut out = String::new();
        for (p, qs) in &self.adjacency {
            for q in qs.range(*p..) {
                if q != p {
                    let _ = writeln!(out, "{p} {q}");
                }
            }
        }
        out
    }
}
