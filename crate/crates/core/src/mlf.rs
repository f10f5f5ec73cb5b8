//! Monotone-light factorization of a piecewise-linear field on a graph.
//!
//! For a field `f` on a 1-complex every regular level set is a finite set of
//! points, so the contour quotient is obtained by collapsing each connected
//! cluster of constant edges to a point. The middle space is that quotient with
//! regular points (one edge up, one edge down) suppressed into edge interiors;
//! its vertices are exactly the extrema and saddles.

use std::collections::{HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DomainGraph, FieldError, ScalarField};
use crate::subdivision::{MiddleFunction, RefinedDomain};
use crate::union_find::DisjointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Minimum,
    Maximum,
    Saddle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiddleVertex {
    pub level: f64,
    pub kind: Criticality,
    pub component: usize,
}

/// Edge of the middle space, oriented from the lower to the upper endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MiddleEdge {
    pub lower: usize,
    pub upper: usize,
}

/// A point of the middle space. Points inside an edge are addressed by their
/// light-factor value, which is strictly monotone along the edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MiddlePoint {
    Vertex { vertex: usize },
    Edge { edge: usize, level: f64 },
}

/// A domain component on which the field is constant; its contour quotient is a
/// single point, which is kept out of the middle space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateComponent {
    pub domain_component: usize,
    pub level: f64,
}

#[derive(Debug, Clone)]
pub struct MiddleSpace {
    vertices: Vec<MiddleVertex>,
    edges: Vec<MiddleEdge>,
    incidence: Vec<Vec<usize>>,
    component_count: usize,
    degenerate: Vec<DegenerateComponent>,
    fingerprint: u64,
}

impl MiddleSpace {
    fn assemble(
        vertices: Vec<MiddleVertex>,
        edges: Vec<MiddleEdge>,
        component_count: usize,
        degenerate: Vec<DegenerateComponent>,
    ) -> Self {
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            incidence[edge.lower].push(e);
            incidence[edge.upper].push(e);
        }
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for v in &vertices {
            v.level.to_bits().hash(&mut hasher);
            v.kind.hash(&mut hasher);
            v.component.hash(&mut hasher);
        }
        for e in &edges {
            (e.lower, e.upper).hash(&mut hasher);
        }
        Self {
            vertices,
            edges,
            incidence,
            component_count,
            degenerate,
            fingerprint: hasher.finish(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[MiddleVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[MiddleEdge] {
        &self.edges
    }

    pub fn vertex(&self, v: usize) -> &MiddleVertex {
        &self.vertices[v]
    }

    pub fn edge(&self, e: usize) -> MiddleEdge {
        self.edges[e]
    }

    pub fn level(&self, v: usize) -> f64 {
        self.vertices[v].level
    }

    /// `(lower level, upper level)` of an edge.
    pub fn edge_levels(&self, e: usize) -> (f64, f64) {
        let edge = self.edges[e];
        (self.vertices[edge.lower].level, self.vertices[edge.upper].level)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (lo, hi) = self.edge_levels(e);
        hi - lo
    }

    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    pub fn edge_component(&self, e: usize) -> usize {
        self.vertices[self.edges[e].lower].component
    }

    pub fn degenerate_components(&self) -> &[DegenerateComponent] {
        &self.degenerate
    }

    /// Content hash identifying this middle space.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn point_level(&self, p: MiddlePoint) -> f64 {
        match p {
            MiddlePoint::Vertex { vertex } => self.vertices[vertex].level,
            MiddlePoint::Edge { level, .. } => level,
        }
    }

    pub fn point_component(&self, p: MiddlePoint) -> usize {
        match p {
            MiddlePoint::Vertex { vertex } => self.vertices[vertex].component,
            MiddlePoint::Edge { edge, .. } => self.edge_component(edge),
        }
    }

    /// Number of points of the middle space at light-factor value `level`.
    pub fn points_at_level(&self, level: f64) -> usize {
        let on_vertices = self.vertices.iter().filter(|v| v.level == level).count();
        let inside_edges = (0..self.edges.len())
            .filter(|&e| {
                let (lo, hi) = self.edge_levels(e);
                lo < level && level < hi
            })
            .count();
        on_vertices + inside_edges
    }

    /// Vertices with exactly one edge up and one edge down; never present in a
    /// factorization output.
    pub fn suppressible_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&v| {
                let (up, down) = self.updown(v);
                up == 1 && down == 1
            })
            .collect()
    }

    /// Counts of edges leaving `v` upward and downward.
    pub fn updown(&self, v: usize) -> (usize, usize) {
        let up = self.incidence[v]
            .iter()
            .filter(|&&e| self.edges[e].lower == v)
            .count();
        (up, self.incidence[v].len() - up)
    }

    pub fn is_acyclic(&self) -> bool {
        self.edges.len() + self.component_count == self.vertices.len()
    }

    /// Sorted vertex levels and sorted `(lower, upper)` edge level pairs; two
    /// middle spaces related by relabeling share this signature.
    pub fn signature(&self) -> Signature {
        let mut levels: Vec<f64> = self.vertices.iter().map(|v| v.level).collect();
        levels.sort_by(f64::total_cmp);
        let mut edges: Vec<(f64, f64)> = (0..self.edges.len()).map(|e| self.edge_levels(e)).collect();
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Signature { levels, edges }
    }
}

/// Relabeling-invariant summary of a middle space.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub levels: Vec<f64>,
    pub edges: Vec<(f64, f64)>,
}

impl Signature {
    /// Largest deviation between matched entries, or `None` when the vertex or
    /// edge counts differ.
    pub fn distance(&self, other: &Signature) -> Option<f64> {
        if self.levels.len() != other.levels.len() || self.edges.len() != other.edges.len() {
            return None;
        }
        let mut worst = 0.0_f64;
        for (a, b) in self.levels.iter().zip(&other.levels) {
            worst = worst.max((a - b).abs());
        }
        for (a, b) in self.edges.iter().zip(&other.edges) {
            worst = worst.max((a.0 - b.0).abs()).max((a.1 - b.1).abs());
        }
        Some(worst)
    }
}

/// Image of a domain edge under the monotone factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeImage {
    /// Constant edge: collapses onto a single point (`None` inside a degenerate component).
    Point(Option<MiddlePoint>),
    /// Non-constant edge: covers a sub-interval of one middle edge.
    Span { edge: usize },
}

/// The quotient map from domain vertices to middle-space points.
#[derive(Debug, Clone)]
pub struct MonotoneFactor {
    graph: Arc<DomainGraph>,
    locations: Vec<Option<MiddlePoint>>,
    edge_images: Vec<EdgeImage>,
    middle_fingerprint: u64,
}

impl MonotoneFactor {
    pub fn graph(&self) -> &Arc<DomainGraph> {
        &self.graph
    }

    /// Middle-space location of a domain vertex (`None` in a degenerate component).
    pub fn location(&self, vertex: usize) -> Option<MiddlePoint> {
        self.locations[vertex]
    }

    pub fn locations(&self) -> &[Option<MiddlePoint>] {
        &self.locations
    }

    pub fn edge_image(&self, edge: usize) -> EdgeImage {
        self.edge_images[edge]
    }

    pub fn middle_fingerprint(&self) -> u64 {
        self.middle_fingerprint
    }

    /// Overrides one vertex location. Used to exercise the factorization checks.
    pub fn set_location(&mut self, vertex: usize, location: Option<MiddlePoint>) {
        self.locations[vertex] = location;
    }
}

/// Computes the middle space and monotone factor of `field`.
pub fn factorize(field: &ScalarField) -> (MiddleSpace, MonotoneFactor) {
    let graph = field.graph();
    let f = field.values();
    let n = graph.vertex_count();

    let mut ds = DisjointSet::new(n);
    for &[a, b] in graph.edges() {
        if f[a] == f[b] {
            ds.union(a, b);
        }
    }
    let (cluster, cluster_count) = ds.labels();

    // Per-cluster representative (smallest vertex), level and edge directions.
    let mut rep = vec![usize::MAX; cluster_count];
    for v in 0..n {
        if rep[cluster[v]] == usize::MAX {
            rep[cluster[v]] = v;
        }
    }
    let mut up = vec![0usize; cluster_count];
    let mut down = vec![0usize; cluster_count];
    let mut regular_up = vec![usize::MAX; cluster_count];
    for (e, &[a, b]) in graph.edges().iter().enumerate() {
        if f[a] == f[b] {
            continue;
        }
        let (lo, hi) = if f[a] < f[b] { (a, b) } else { (b, a) };
        up[cluster[lo]] += 1;
        regular_up[cluster[lo]] = e;
        down[cluster[hi]] += 1;
    }
    let critical: Vec<bool> = (0..cluster_count)
        .map(|c| up[c] + down[c] > 0 && !(up[c] == 1 && down[c] == 1))
        .collect();

    // Middle vertices ordered by (level, representative vertex).
    let mut crit_clusters: Vec<usize> = (0..cluster_count).filter(|&c| critical[c]).collect();
    crit_clusters.sort_by(|&x, &y| f[rep[x]].total_cmp(&f[rep[y]]).then(rep[x].cmp(&rep[y])));
    let mut middle_of_cluster = vec![usize::MAX; cluster_count];
    for (m, &c) in crit_clusters.iter().enumerate() {
        middle_of_cluster[c] = m;
    }

    // Components numbered by first appearance along the sorted vertex list.
    let mut comp_map = vec![usize::MAX; graph.component_count()];
    let mut component_count = 0;
    let mut vertices = Vec::with_capacity(crit_clusters.len());
    for &c in &crit_clusters {
        let dc = graph.component_of(rep[c]);
        if comp_map[dc] == usize::MAX {
            comp_map[dc] = component_count;
            component_count += 1;
        }
        let kind = if up[c] > 0 && down[c] > 0 {
            Criticality::Saddle
        } else if up[c] == 0 {
            Criticality::Maximum
        } else {
            Criticality::Minimum
        };
        vertices.push(MiddleVertex {
            level: f[rep[c]],
            kind,
            component: comp_map[dc],
        });
    }

    // Trace each monotone chain of domain edges from a critical cluster upward.
    let mut incident_up: Vec<Vec<usize>> = vec![Vec::new(); cluster_count];
    for (e, &[a, b]) in graph.edges().iter().enumerate() {
        if f[a] != f[b] {
            let lo = if f[a] < f[b] { a } else { b };
            if critical[cluster[lo]] {
                incident_up[cluster[lo]].push(e);
            }
        }
    }
    let upper_end = |e: usize| {
        let [a, b] = graph.endpoints(e);
        if f[a] < f[b] {
            b
        } else {
            a
        }
    };
    struct Chain {
        lower: usize,
        upper: usize,
        first: usize,
        domain_edges: Vec<usize>,
        regular: Vec<usize>,
    }
    let mut chains = Vec::new();
    for &c in &crit_clusters {
        for &e0 in &incident_up[c] {
            let mut domain_edges = vec![e0];
            let mut regular = Vec::new();
            let mut next = cluster[upper_end(e0)];
            while !critical[next] {
                regular.push(next);
                let e = regular_up[next];
                domain_edges.push(e);
                next = cluster[upper_end(e)];
            }
            chains.push(Chain {
                lower: middle_of_cluster[c],
                upper: middle_of_cluster[next],
                first: e0,
                domain_edges,
                regular,
            });
        }
    }
    chains.sort_by_key(|ch| (ch.lower, ch.upper, ch.first));

    let mut cluster_location: Vec<Option<MiddlePoint>> = (0..cluster_count)
        .map(|c| {
            critical[c].then(|| MiddlePoint::Vertex {
                vertex: middle_of_cluster[c],
            })
        })
        .collect();
    let mut edge_images = vec![EdgeImage::Point(None); graph.edge_count()];
    let mut edges = Vec::with_capacity(chains.len());
    for (m, ch) in chains.iter().enumerate() {
        edges.push(MiddleEdge {
            lower: ch.lower,
            upper: ch.upper,
        });
        for &c in &ch.regular {
            cluster_location[c] = Some(MiddlePoint::Edge {
                edge: m,
                level: f[rep[c]],
            });
        }
        for &e in &ch.domain_edges {
            edge_images[e] = EdgeImage::Span { edge: m };
        }
    }
    for (e, &[a, b]) in graph.edges().iter().enumerate() {
        if f[a] == f[b] {
            edge_images[e] = EdgeImage::Point(cluster_location[cluster[a]]);
        }
    }
    let locations: Vec<Option<MiddlePoint>> = (0..n).map(|v| cluster_location[cluster[v]]).collect();

    let mut degenerate = Vec::new();
    for c in 0..cluster_count {
        if up[c] + down[c] == 0 {
            degenerate.push(DegenerateComponent {
                domain_component: graph.component_of(rep[c]),
                level: f[rep[c]],
            });
        }
    }
    degenerate.sort_by_key(|d| d.domain_component);

    let ms = MiddleSpace::assemble(vertices, edges, component_count, degenerate);
    let mf = MonotoneFactor {
        graph: field.shared_graph().clone(),
        locations,
        edge_images,
        middle_fingerprint: ms.fingerprint(),
    };
    (ms, mf)
}

/// Number of connected components of `{x : f(x) = level}`, by direct traversal
/// of the domain.
pub fn count_contours(field: &ScalarField, level: f64) -> usize {
    let graph = field.graph();
    let f = field.values();
    let mut crossings = 0;
    for &[a, b] in graph.edges() {
        let (lo, hi) = if f[a] <= f[b] { (f[a], f[b]) } else { (f[b], f[a]) };
        if lo < level && level < hi {
            crossings += 1;
        }
    }
    let mut seen = vec![false; graph.vertex_count()];
    let mut clusters = 0;
    let mut queue = VecDeque::new();
    for s in 0..graph.vertex_count() {
        if seen[s] || f[s] != level {
            continue;
        }
        clusters += 1;
        seen[s] = true;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &e in graph.incident_edges(v) {
                let [a, b] = graph.endpoints(e);
                let w = if a == v { b } else { a };
                if !seen[w] && f[w] == level {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    crossings + clusters
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PullBackError {
    #[error("function is defined on a different middle space")]
    ForeignMiddleSpace,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `gamma ∘ μ` as a field on the domain subdivided at the breakpoints of `gamma`.
///
/// Original domain vertices keep their indices; values there are exact.
/// Vertices of degenerate components receive 0.
pub fn pull_back(
    ms: &MiddleSpace,
    mf: &MonotoneFactor,
    gamma: &MiddleFunction,
) -> Result<ScalarField, PullBackError> {
    let sub = gamma.subdivision();
    if sub.middle_fingerprint() != ms.fingerprint() || mf.middle_fingerprint() != ms.fingerprint() {
        return Err(PullBackError::ForeignMiddleSpace);
    }
    let domain = RefinedDomain::new(ms, mf, sub)?;
    Ok(domain.pull_back(gamma)?)
}

/// Result of checking a factorization against the independent level-set oracle.
#[derive(Debug, Clone, Default)]
pub struct FactorizationReport {
    pub violations: Vec<String>,
    pub degenerate_components: Vec<usize>,
    pub levels_checked: usize,
}

impl FactorizationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Regular levels between consecutive distinct vertex values (at most `limit`),
/// plus one level below and one above the range.
pub fn regular_levels(field: &ScalarField, limit: usize) -> Vec<f64> {
    let mut values: Vec<f64> = field.values().to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mids: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut levels = Vec::new();
    if let (Some(&lo), Some(&hi)) = (values.first(), values.last()) {
        levels.push(lo - 1.0);
        levels.push(hi + 1.0);
    }
    if mids.len() <= limit {
        levels.extend(mids);
    } else {
        let stride = mids.len() as f64 / limit as f64;
        levels.extend((0..limit).map(|k| mids[(k as f64 * stride) as usize]));
    }
    levels
}

/// Checks `λ∘μ = f` at every vertex, middle-space minimality, and agreement of
/// contour counts with middle-space point counts at sampled regular levels.
pub fn verify_factorization(
    field: &ScalarField,
    ms: &MiddleSpace,
    mf: &MonotoneFactor,
) -> FactorizationReport {
    let mut report = FactorizationReport::default();
    let graph = field.graph();
    let degenerate: HashSet<usize> = ms
        .degenerate_components()
        .iter()
        .map(|d| d.domain_component)
        .collect();
    report.degenerate_components = {
        let mut d: Vec<usize> = degenerate.iter().copied().collect();
        d.sort_unstable();
        d
    };

    for v in 0..graph.vertex_count() {
        let id = graph.vertex_id(v);
        match mf.location(v) {
            None if degenerate.contains(&graph.component_of(v)) => {}
            None => report
                .violations
                .push(format!("vertex `{id}` has no middle-space image")),
            Some(p) => {
                if let MiddlePoint::Edge { edge, level } = p {
                    if edge >= ms.edge_count() {
                        report
                            .violations
                            .push(format!("vertex `{id}` maps to missing edge {edge}"));
                        continue;
                    }
                    let (lo, hi) = ms.edge_levels(edge);
                    if !(lo < level && level < hi) {
                        report
                            .violations
                            .push(format!("vertex `{id}` maps outside the interior of edge {edge}"));
                    }
                }
                if let MiddlePoint::Vertex { vertex } = p {
                    if vertex >= ms.vertex_count() {
                        report
                            .violations
                            .push(format!("vertex `{id}` maps to missing vertex {vertex}"));
                        continue;
                    }
                }
                let lambda = ms.point_level(p);
                if lambda != field.value(v) {
                    report
                        .violations
                        .push(format!("λ(μ({id})) = {lambda} but f({id}) = {}", field.value(v)));
                }
            }
        }
    }

    for e in 0..ms.edge_count() {
        let MiddleEdge { lower, upper } = ms.edge(e);
        if lower == upper {
            report.violations.push(format!("middle edge {e} is a self-loop"));
        }
        if !(ms.level(lower) < ms.level(upper)) {
            report
                .violations
                .push(format!("middle edge {e} is not strictly increasing"));
        }
    }
    for v in ms.suppressible_vertices() {
        report
            .violations
            .push(format!("middle vertex {v} is a regular point"));
    }
    if ms.component_count() + degenerate.len() != graph.component_count() {
        report.violations.push(format!(
            "{} middle components + {} degenerate != {} domain components",
            ms.component_count(),
            degenerate.len(),
            graph.component_count()
        ));
    }

    let levels = regular_levels(field, 100);
    report.levels_checked = levels.len();
    for y in levels {
        let contours = count_contours(field, y);
        let points = ms.points_at_level(y);
        if contours != points {
            report.violations.push(format!(
                "level {y}: {contours} contours but {points} middle points"
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::load_series;

    fn field_on(ids: &[&str], edges: &[(&str, &str, &str)], values: Vec<f64>) -> ScalarField {
        let g = DomainGraph::from_ids(
            ids.iter().map(|s| s.to_string()).collect(),
            edges
                .iter()
                .map(|(e, a, b)| (e.to_string(), a.to_string(), b.to_string()))
                .collect(),
        )
        .unwrap();
        ScalarField::new(Arc::new(g), values).unwrap()
    }

    #[test]
    fn monotone_series_is_single_edge() {
        let f = load_series(&[0.0, 1.0]).unwrap();
        let (ms, mf) = factorize(&f);
        assert_eq!(ms.vertex_count(), 2);
        assert_eq!(ms.edge_count(), 1);
        assert_eq!(ms.edge_levels(0), (0.0, 1.0));
        assert_eq!(mf.location(0), Some(MiddlePoint::Vertex { vertex: 0 }));
        assert_eq!(mf.location(1), Some(MiddlePoint::Vertex { vertex: 1 }));
    }

    #[test]
    fn worked_example_is_four_edge_chain() {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        let (ms, mf) = factorize(&f);
        assert_eq!(ms.vertex_count(), 5);
        assert_eq!(ms.edge_count(), 4);
        assert!(ms.is_acyclic());
        let along: Vec<f64> = (0..5).map(|v| ms.point_level(mf.location(v).unwrap())).collect();
        assert_eq!(along, vec![0.0, 2.0, 1.0, 3.0, 0.0]);
        let kinds: Vec<Criticality> = (0..5)
            .map(|v| match mf.location(v).unwrap() {
                MiddlePoint::Vertex { vertex } => ms.vertex(vertex).kind,
                _ => panic!("all chain vertices are critical"),
            })
            .collect();
        use Criticality::*;
        assert_eq!(kinds, vec![Minimum, Maximum, Minimum, Maximum, Minimum]);
        assert!(verify_factorization(&f, &ms, &mf).passed());
    }

    #[test]
    fn regular_vertices_are_suppressed() {
        let f = load_series(&[0.0, 1.0, 2.0, 3.0, 1.5]).unwrap();
        let (ms, mf) = factorize(&f);
        assert_eq!(ms.vertex_count(), 3);
        assert_eq!(ms.edge_count(), 2);
        assert!(matches!(mf.location(1), Some(MiddlePoint::Edge { level, .. }) if level == 1.0));
        assert!(ms.suppressible_vertices().is_empty());
    }

    #[test]
    fn constant_edge_on_cycle_collapses() {
        let f = field_on(
            &["a", "b", "c"],
            &[("x", "a", "b"), ("y", "b", "c"), ("z", "c", "a")],
            vec![0.0, 1.0, 1.0],
        );
        let (ms, mf) = factorize(&f);
        // Two parallel edges from 0 up to the collapsed {b, c} contour.
        assert_eq!(ms.vertex_count(), 2);
        assert_eq!(ms.edge_count(), 2);
        assert_eq!(mf.location(1), mf.location(2));
        assert_eq!(mf.edge_image(1), EdgeImage::Point(mf.location(1)));
        assert!(verify_factorization(&f, &ms, &mf).passed());
    }

    #[test]
    fn contour_counts() {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        assert_eq!(count_contours(&f, 0.5), 2);
        assert_eq!(count_contours(&f, 1.5), 4);
        assert_eq!(count_contours(&f, 1.0), 3);
        assert_eq!(count_contours(&f, 9.0), 0);
        assert_eq!(count_contours(&f, 0.0), 2);
    }

    #[test]
    fn perturbed_factor_is_detected() {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        let (ms, mut mf) = factorize(&f);
        mf.set_location(2, Some(MiddlePoint::Vertex { vertex: 4 }));
        assert!(!verify_factorization(&f, &ms, &mf).passed());
    }

    #[test]
    fn constant_component_is_reported() {
        let f = field_on(
            &["a", "b", "c", "d"],
            &[("x", "a", "b"), ("y", "c", "d")],
            vec![0.0, 1.0, 4.0, 4.0],
        );
        let (ms, mf) = factorize(&f);
        assert_eq!(ms.component_count(), 1);
        assert_eq!(ms.degenerate_components().len(), 1);
        assert_eq!(ms.degenerate_components()[0].level, 4.0);
        assert_eq!(mf.location(2), None);
        let report = verify_factorization(&f, &ms, &mf);
        assert!(report.passed());
        assert_eq!(report.degenerate_components, vec![1]);
    }

    #[test]
    fn saddle_on_tree() {
        // Star with centre 1 and leaves 0, 2, 3.
        let f = field_on(
            &["c", "l1", "l2", "l3"],
            &[("a", "c", "l1"), ("b", "c", "l2"), ("d", "c", "l3")],
            vec![1.0, 0.0, 2.0, 3.0],
        );
        let (ms, _) = factorize(&f);
        assert_eq!(ms.vertex_count(), 4);
        assert!(ms.is_acyclic());
        let saddle = ms
            .vertices()
            .iter()
            .find(|v| v.kind == Criticality::Saddle)
            .unwrap();
        assert_eq!(saddle.level, 1.0);
    }
}
