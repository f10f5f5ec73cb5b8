//! Middle spaces refined at cut points, functions on them, and the matching
//! subdivision of the domain.
//!
//! Lens regions cut middle-space edges at interior points. Refining every edge
//! at those points turns each region and support into a union of whole refined
//! edges, and every function built from the lens into a piecewise-linear
//! function given by its refined-vertex values.

use std::sync::Arc;

use thiserror::Error;

use crate::field::{DomainGraph, FieldError, ScalarField};
use crate::mlf::{EdgeImage, MiddlePoint, MiddleSpace, MonotoneFactor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubdivisionError {
    #[error("cut at level {level} is not inside middle edge {edge}")]
    CutOutsideEdge { edge: usize, level: f64 },
    #[error("middle edge {0} does not exist")]
    UnknownEdge(usize),
}

/// Where a middle-space point falls in a subdivision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Located {
    Vertex(usize),
    Inside { edge: usize, level: f64 },
}

/// A middle space with extra vertices at cut points.
///
/// Refined vertices `0..ms.vertex_count()` are the middle-space vertices; cut
/// vertices follow, ordered by (middle edge, level). Refined edges are oriented
/// lower → upper and listed per middle edge in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdivision {
    middle_fingerprint: u64,
    base_vertices: usize,
    levels: Vec<f64>,
    origins: Vec<MiddlePoint>,
    components: Vec<usize>,
    edges: Vec<[usize; 2]>,
    parent: Vec<usize>,
    pieces: Vec<Vec<usize>>,
    incidence: Vec<Vec<usize>>,
}

impl Subdivision {
    /// Refines `ms` at the given `(middle edge, level)` cut points. Duplicates
    /// are merged; every level must lie strictly inside its edge.
    pub fn new(
        ms: &MiddleSpace,
        cuts: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self, SubdivisionError> {
        let mut per_edge: Vec<Vec<f64>> = vec![Vec::new(); ms.edge_count()];
        for (edge, level) in cuts {
            if edge >= ms.edge_count() {
                return Err(SubdivisionError::UnknownEdge(edge));
            }
            let (lo, hi) = ms.edge_levels(edge);
            if !(lo < level && level < hi) {
                return Err(SubdivisionError::CutOutsideEdge { edge, level });
            }
            per_edge[edge].push(level);
        }
        let mut levels: Vec<f64> = ms.vertices().iter().map(|v| v.level).collect();
        let mut origins: Vec<MiddlePoint> = (0..ms.vertex_count())
            .map(|vertex| MiddlePoint::Vertex { vertex })
            .collect();
        let mut components: Vec<usize> = ms.vertices().iter().map(|v| v.component).collect();
        let mut edges = Vec::with_capacity(ms.edge_count());
        let mut parent = Vec::with_capacity(ms.edge_count());
        let mut pieces = Vec::with_capacity(ms.edge_count());
        for (e, cuts) in per_edge.iter_mut().enumerate() {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let me = ms.edge(e);
            let mut prev = me.lower;
            let mut list = Vec::with_capacity(cuts.len() + 1);
            for &level in cuts.iter() {
                let v = levels.len();
                levels.push(level);
                origins.push(MiddlePoint::Edge { edge: e, level });
                components.push(ms.edge_component(e));
                list.push(edges.len());
                edges.push([prev, v]);
                parent.push(e);
                prev = v;
            }
            list.push(edges.len());
            edges.push([prev, me.upper]);
            parent.push(e);
            pieces.push(list);
        }
        let mut incidence = vec![Vec::new(); levels.len()];
        for (re, &[a, b]) in edges.iter().enumerate() {
            incidence[a].push(re);
            incidence[b].push(re);
        }
        Ok(Self {
            middle_fingerprint: ms.fingerprint(),
            base_vertices: ms.vertex_count(),
            levels,
            origins,
            components,
            edges,
            parent,
            pieces,
            incidence,
        })
    }

    /// The middle space itself, with no cuts.
    pub fn trivial(ms: &MiddleSpace) -> Self {
        Self::new(ms, std::iter::empty()).expect("no cuts")
    }

    pub fn middle_fingerprint(&self) -> u64 {
        self.middle_fingerprint
    }

    pub fn vertex_count(&self) -> usize {
        self.levels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn base_vertex_count(&self) -> usize {
        self.base_vertices
    }

    pub fn level(&self, v: usize) -> f64 {
        self.levels[v]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn origin(&self, v: usize) -> MiddlePoint {
        self.origins[v]
    }

    pub fn vertex_component(&self, v: usize) -> usize {
        self.components[v]
    }

    pub fn edge_component(&self, e: usize) -> usize {
        self.components[self.edges[e][0]]
    }

    /// `[lower, upper]` refined vertices of a refined edge.
    pub fn endpoints(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        self.levels[b] - self.levels[a]
    }

    /// Middle edge containing a refined edge.
    pub fn parent_edge(&self, e: usize) -> usize {
        self.parent[e]
    }

    /// Refined edges of a middle edge, ascending.
    pub fn pieces(&self, middle_edge: usize) -> &[usize] {
        &self.pieces[middle_edge]
    }

    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.incidence[v]
    }

    pub fn other_end(&self, e: usize, v: usize) -> usize {
        let [a, b] = self.edges[e];
        if a == v {
            b
        } else {
            a
        }
    }

    pub fn is_cut_vertex(&self, v: usize) -> bool {
        v >= self.base_vertices
    }

    /// Cut levels strictly inside a middle edge, ascending.
    pub fn cuts(&self, middle_edge: usize) -> impl Iterator<Item = f64> + '_ {
        let list = &self.pieces[middle_edge];
        list[..list.len() - 1]
            .iter()
            .map(move |&re| self.levels[self.edges[re][1]])
    }

    pub fn locate(&self, p: MiddlePoint) -> Located {
        match p {
            MiddlePoint::Vertex { vertex } => Located::Vertex(vertex),
            MiddlePoint::Edge { edge, level } => {
                let list = &self.pieces[edge];
                // First piece whose upper level is >= level.
                let k = list.partition_point(|&re| self.levels[self.edges[re][1]] < level);
                let re = list[k.min(list.len() - 1)];
                let [a, b] = self.edges[re];
                if self.levels[a] == level {
                    Located::Vertex(a)
                } else if self.levels[b] == level {
                    Located::Vertex(b)
                } else {
                    Located::Inside { edge: re, level }
                }
            }
        }
    }

    /// Refined edges covering the closed interval `[lo, hi]` of a middle edge,
    /// when both ends are refined vertices.
    pub fn edges_between(&self, middle_edge: usize, lo: f64, hi: f64) -> Option<Vec<usize>> {
        let list = &self.pieces[middle_edge];
        let start = list.iter().position(|&re| self.levels[self.edges[re][0]] == lo)?;
        let end = list.iter().position(|&re| self.levels[self.edges[re][1]] == hi)?;
        (start <= end).then(|| list[start..=end].to_vec())
    }
}

/// Piecewise-linear function on a subdivided middle space, affine in the light
/// factor along every refined edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MiddleFunction {
    subdivision: Arc<Subdivision>,
    values: Vec<f64>,
}

impl MiddleFunction {
    pub fn new(subdivision: Arc<Subdivision>, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            subdivision.vertex_count(),
            "one value per refined vertex"
        );
        Self { subdivision, values }
    }

    /// The light factor λ itself.
    pub fn light_factor(subdivision: Arc<Subdivision>) -> Self {
        let values = subdivision.levels.clone();
        Self { subdivision, values }
    }

    pub fn zero(subdivision: Arc<Subdivision>) -> Self {
        let values = vec![0.0; subdivision.vertex_count()];
        Self { subdivision, values }
    }

    pub fn subdivision(&self) -> &Arc<Subdivision> {
        &self.subdivision
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, v: usize) -> f64 {
        self.values[v]
    }

    pub fn evaluate(&self, p: MiddlePoint) -> f64 {
        self.evaluate_located(self.subdivision.locate(p))
    }

    pub fn evaluate_located(&self, at: Located) -> f64 {
        match at {
            Located::Vertex(v) => self.values[v],
            Located::Inside { edge, level } => {
                let [a, b] = self.subdivision.edges[edge];
                let (la, lb) = (self.subdivision.levels[a], self.subdivision.levels[b]);
                let (va, vb) = (self.values[a], self.values[b]);
                if va == vb {
                    va
                } else if va == la && vb == lb {
                    level
                } else {
                    va + (vb - va) * ((level - la) / (lb - la))
                }
            }
        }
    }

    /// Change of value along a refined edge, upper minus lower.
    pub fn rise(&self, e: usize) -> f64 {
        let [a, b] = self.subdivision.edges[e];
        self.values[b] - self.values[a]
    }

    /// Sum of `|rise|` over the given refined edges.
    pub fn variation_on(&self, edges: impl IntoIterator<Item = usize>) -> f64 {
        edges.into_iter().map(|e| self.rise(e).abs()).sum()
    }
}

/// The domain graph subdivided so that every cut point of a [`Subdivision`]
/// is the image of a domain vertex.
#[derive(Debug, Clone)]
pub struct RefinedDomain {
    base: Arc<DomainGraph>,
    graph: Arc<DomainGraph>,
    base_vertices: usize,
    located: Vec<Option<Located>>,
    cut_levels: Vec<f64>,
    positions: Vec<Option<(usize, f64)>>,
    inserted: Vec<Vec<usize>>,
    middle_fingerprint: u64,
}

impl RefinedDomain {
    pub fn new(ms: &MiddleSpace, mf: &MonotoneFactor, sub: &Subdivision) -> Result<Self, FieldError> {
        let base = mf.graph();
        let n = base.vertex_count();
        let level_of = |v: usize| mf.location(v).map(|p| ms.point_level(p));

        let mut new_ids: Vec<String> = Vec::new();
        let mut new_levels: Vec<f64> = Vec::new();
        let mut new_positions: Vec<(usize, f64)> = Vec::new();
        let mut new_located: Vec<Located> = Vec::new();
        let mut edges: Vec<(String, usize, usize)> = Vec::with_capacity(base.edge_count());
        let mut any_cut = false;
        let mut inserted_per_edge: Vec<Vec<usize>> = vec![Vec::new(); base.edge_count()];

        for (e, inserted) in inserted_per_edge.iter_mut().enumerate() {
            let [a, b] = base.endpoints(e);
            let EdgeImage::Span { edge: me } = mf.edge_image(e) else {
                edges.push((base.edge_id(e).to_string(), a, b));
                continue;
            };
            let (fa, fb) = (level_of(a).unwrap_or(0.0), level_of(b).unwrap_or(0.0));
            let (lo, hi) = if fa < fb { (fa, fb) } else { (fb, fa) };
            let mut inside: Vec<(f64, usize)> = Vec::new();
            for re in sub.pieces(me).iter().skip(1) {
                let cv = sub.endpoints(*re)[0];
                let y = sub.level(cv);
                if lo < y && y < hi {
                    inside.push((y, cv));
                }
            }
            if inside.is_empty() {
                edges.push((base.edge_id(e).to_string(), a, b));
                continue;
            }
            any_cut = true;
            if fa > fb {
                inside.reverse();
            }
            let mut prev = a;
            for (k, &(y, cv)) in inside.iter().enumerate() {
                let v = n + new_ids.len();
                new_ids.push(format!("{}~{}", base.edge_id(e), k + 1));
                new_levels.push(y);
                new_positions.push((e, (y - fa) / (fb - fa)));
                new_located.push(Located::Vertex(cv));
                edges.push((format!("{}/{}", base.edge_id(e), k), prev, v));
                inserted.push(v);
                prev = v;
            }
            edges.push((format!("{}/{}", base.edge_id(e), inside.len()), prev, b));
        }

        let graph = if any_cut {
            let mut ids: Vec<String> = base.vertex_ids().to_vec();
            ids.extend(new_ids);
            Arc::new(DomainGraph::new(ids, edges)?)
        } else {
            base.clone()
        };
        let mut located: Vec<Option<Located>> =
            (0..n).map(|v| mf.location(v).map(|p| sub.locate(p))).collect();
        located.extend(new_located.into_iter().map(Some));
        let mut positions = vec![None; n];
        positions.extend(new_positions.into_iter().map(Some));
        Ok(Self {
            base: base.clone(),
            graph,
            base_vertices: n,
            located,
            cut_levels: new_levels,
            positions,
            inserted: inserted_per_edge,
            middle_fingerprint: sub.middle_fingerprint(),
        })
    }

    pub fn graph(&self) -> &Arc<DomainGraph> {
        &self.graph
    }

    /// Number of vertices of the unrefined domain; they come first.
    pub fn base_vertex_count(&self) -> usize {
        self.base_vertices
    }

    /// `(original edge, parameter)` of an inserted vertex.
    pub fn position(&self, v: usize) -> Option<(usize, f64)> {
        self.positions[v]
    }

    /// Vertices inserted on an original edge, in order from its first endpoint.
    pub fn inserted(&self, edge: usize) -> &[usize] {
        &self.inserted[edge]
    }

    /// Drops inserted vertices for which `keep` is false, joining their
    /// neighbors directly. Only meaningful when the field is affine across
    /// every dropped vertex.
    pub fn coarsen(
        &self,
        field: &ScalarField,
        keep: impl Fn(usize) -> bool,
    ) -> Result<ScalarField, FieldError> {
        let n = self.base_vertices;
        if self.graph.vertex_count() == n {
            return ScalarField::new(self.graph.clone(), field.values().to_vec());
        }
        let base = &self.base;
        let mut ids: Vec<String> = self.graph.vertex_ids()[..n].to_vec();
        let mut values: Vec<f64> = field.values()[..n].to_vec();
        let mut edges = Vec::with_capacity(base.edge_count());
        for e in 0..base.edge_count() {
            let eid = base.edge_id(e);
            let [a, b] = base.endpoints(e);
            let kept: Vec<usize> = self.inserted[e].iter().copied().filter(|&v| keep(v)).collect();
            if kept.is_empty() {
                edges.push((eid.to_string(), a, b));
                continue;
            }
            let mut prev = a;
            for (k, &v) in kept.iter().enumerate() {
                let idx = ids.len();
                ids.push(self.graph.vertex_id(v).to_string());
                values.push(field.value(v));
                edges.push((format!("{eid}/{k}"), prev, idx));
                prev = idx;
            }
            edges.push((format!("{eid}/{}", kept.len()), prev, b));
        }
        ScalarField::new(Arc::new(DomainGraph::new(ids, edges)?), values)
    }

    pub fn located(&self, v: usize) -> Option<Located> {
        self.located[v]
    }

    /// `f` carried over to the refined domain; inserted vertices take their
    /// cut level exactly.
    pub fn lift(&self, field: &ScalarField) -> Result<ScalarField, FieldError> {
        let mut values = field.values().to_vec();
        values.extend_from_slice(&self.cut_levels);
        ScalarField::new(self.graph.clone(), values)
    }

    /// `gamma ∘ μ`; vertices of degenerate components receive 0.
    pub fn pull_back(&self, gamma: &MiddleFunction) -> Result<ScalarField, FieldError> {
        debug_assert_eq!(gamma.subdivision().middle_fingerprint(), self.middle_fingerprint);
        let values = self
            .located
            .iter()
            .map(|at| at.map_or(0.0, |at| gamma.evaluate_located(at)))
            .collect();
        ScalarField::new(self.graph.clone(), values)
    }
}
