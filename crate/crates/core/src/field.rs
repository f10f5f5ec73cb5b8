//! Piecewise-linear scalar fields on finite graphs.
//!
//! A field assigns a finite real to every vertex of a [`DomainGraph`] and is
//! affine along every edge. Graphs may have parallel edges but no self-loops
//! and no isolated vertices.

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::union_find::DisjointSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("a series needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("value at vertex `{0}` is not finite")]
    NonFinite(String),
    #[error("domain graph has no vertices")]
    EmptyDomain,
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdge(String),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    DanglingVertex { edge: String, vertex: String },
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("vertex `{0}` has no incident edges")]
    IsolatedVertex(String),
    #[error("expected {expected} values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("fields are defined on different domains")]
    DomainMismatch,
    #[error("{fields} fields but {coeffs} coefficients")]
    LengthMismatch { fields: usize, coeffs: usize },
    #[error("linear combination of an empty field list")]
    EmptyCombination,
    #[error("domain is not a chain graph")]
    NotAChain,
}

/// Finite undirected multigraph with stable string ids for vertices and edges.
#[derive(Debug, Clone)]
pub struct DomainGraph {
    vertex_ids: Vec<String>,
    edge_ids: Vec<String>,
    edges: Vec<[usize; 2]>,
    incidence: Vec<Vec<usize>>,
    component: Vec<usize>,
    component_count: usize,
    index: HashMap<String, usize>,
}

impl PartialEq for DomainGraph {
    fn eq(&self, other: &Self) -> bool {
        self.vertex_ids == other.vertex_ids && self.edge_ids == other.edge_ids && self.edges == other.edges
    }
}

impl DomainGraph {
    /// Builds a graph from vertex ids and `(edge id, endpoint, endpoint)` triples
    /// whose endpoints are indices into `vertex_ids`.
    pub fn new(vertex_ids: Vec<String>, edges: Vec<(String, usize, usize)>) -> Result<Self, FieldError> {
        if vertex_ids.is_empty() {
            return Err(FieldError::EmptyDomain);
        }
        let mut index = HashMap::with_capacity(vertex_ids.len());
        for (i, id) in vertex_ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(FieldError::DuplicateVertex(id.clone()));
            }
        }
        let n = vertex_ids.len();
        let mut edge_ids = Vec::with_capacity(edges.len());
        let mut endpoints = Vec::with_capacity(edges.len());
        let mut seen_edges = std::collections::HashSet::with_capacity(edges.len());
        let mut incidence = vec![Vec::new(); n];
        for (id, a, b) in edges {
            for x in [a, b] {
                if x >= n {
                    return Err(FieldError::DanglingVertex {
                        edge: id,
                        vertex: format!("#{x}"),
                    });
                }
            }
            if a == b {
                return Err(FieldError::SelfLoop(id));
            }
            if !seen_edges.insert(id.clone()) {
                return Err(FieldError::DuplicateEdge(id));
            }
            let e = endpoints.len();
            incidence[a].push(e);
            incidence[b].push(e);
            endpoints.push([a, b]);
            edge_ids.push(id);
        }
        if let Some(v) = incidence.iter().position(|inc| inc.is_empty()) {
            return Err(FieldError::IsolatedVertex(vertex_ids[v].clone()));
        }
        let mut ds = DisjointSet::new(n);
        for &[a, b] in &endpoints {
            ds.union(a, b);
        }
        let (component, component_count) = ds.labels();
        Ok(Self {
            vertex_ids,
            edge_ids,
            edges: endpoints,
            incidence,
            component,
            component_count,
            index,
        })
    }

    /// Builds a graph where edges name their endpoints by vertex id.
    pub fn from_ids(
        vertex_ids: Vec<String>,
        edges: Vec<(String, String, String)>,
    ) -> Result<Self, FieldError> {
        let lookup: HashMap<&str, usize> = vertex_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut resolved = Vec::with_capacity(edges.len());
        for (id, a, b) in edges {
            let ia = *lookup.get(a.as_str()).ok_or_else(|| FieldError::DanglingVertex {
                edge: id.clone(),
                vertex: a.clone(),
            })?;
            let ib = *lookup.get(b.as_str()).ok_or_else(|| FieldError::DanglingVertex {
                edge: id.clone(),
                vertex: b.clone(),
            })?;
            resolved.push((id, ia, ib));
        }
        Self::new(vertex_ids, resolved)
    }

    /// Path graph on `n >= 2` vertices with ids `"0".."n-1"`; edge `k` joins `k` and `k+1`.
    pub fn chain(n: usize) -> Result<Self, FieldError> {
        if n < 2 {
            return Err(FieldError::TooFewSamples(n));
        }
        let ids = (0..n).map(|i| i.to_string()).collect();
        let edges = (0..n - 1).map(|k| (k.to_string(), k, k + 1)).collect();
        Self::new(ids, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn endpoints(&self, edge: usize) -> [usize; 2] {
        self.edges[edge]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn incident_edges(&self, vertex: usize) -> &[usize] {
        &self.incidence[vertex]
    }

    pub fn vertex_id(&self, vertex: usize) -> &str {
        &self.vertex_ids[vertex]
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertex_ids
    }

    pub fn edge_id(&self, edge: usize) -> &str {
        &self.edge_ids[edge]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn component_of(&self, vertex: usize) -> usize {
        self.component[vertex]
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Vertex order along the graph when it is a simple path.
    ///
    /// The walk starts at the lower-indexed endpoint.
    pub fn chain_order(&self) -> Option<Vec<usize>> {
        let n = self.vertex_count();
        if self.component_count != 1 || self.edges.len() != n - 1 {
            return None;
        }
        if self.incidence.iter().any(|inc| inc.len() > 2) {
            return None;
        }
        let start = (0..n).find(|&v| self.incidence[v].len() == 1)?;
        let mut order = Vec::with_capacity(n);
        let mut prev_edge = usize::MAX;
        let mut v = start;
        loop {
            order.push(v);
            let next = self.incidence[v].iter().copied().find(|&e| e != prev_edge);
            match next {
                Some(e) => {
                    let [a, b] = self.edges[e];
                    v = if a == v { b } else { a };
                    prev_edge = e;
                }
                None => break,
            }
            if order.len() > n {
                return None;
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// A point of the domain: a vertex, or an edge parameter strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgePoint {
    Vertex(usize),
    Edge { edge: usize, t: f64 },
}

impl EdgePoint {
    /// Canonical point at parameter `t` along `edge`; `t` is clamped to `[0, 1]`
    /// and the endpoints collapse to vertex form.
    pub fn on_edge(graph: &DomainGraph, edge: usize, t: f64) -> Self {
        let [a, b] = graph.endpoints(edge);
        if t <= 0.0 {
            EdgePoint::Vertex(a)
        } else if t >= 1.0 {
            EdgePoint::Vertex(b)
        } else {
            EdgePoint::Edge { edge, t }
        }
    }
}

/// Real values on the vertices of a domain graph, interpolated affinely along edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    graph: Arc<DomainGraph>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(graph: Arc<DomainGraph>, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != graph.vertex_count() {
            return Err(FieldError::ValueCount {
                expected: graph.vertex_count(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().position(|x| !x.is_finite()) {
            return Err(FieldError::NonFinite(graph.vertex_id(v).to_string()));
        }
        Ok(Self { graph, values })
    }

    pub fn graph(&self) -> &DomainGraph {
        &self.graph
    }

    pub fn shared_graph(&self) -> &Arc<DomainGraph> {
        &self.graph
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, vertex: usize) -> f64 {
        self.values[vertex]
    }

    pub fn evaluate(&self, point: EdgePoint) -> f64 {
        match point {
            EdgePoint::Vertex(v) => self.values[v],
            EdgePoint::Edge { edge, t } => {
                let [a, b] = self.graph.endpoints(edge);
                (1.0 - t) * self.values[a] + t * self.values[b]
            }
        }
    }

    pub fn same_domain(&self, other: &ScalarField) -> bool {
        Arc::ptr_eq(&self.graph, &other.graph) || *self.graph == *other.graph
    }

    /// Largest absolute vertex value.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

/// Field on a chain graph taking `samples[k]` at vertex `k`.
pub fn load_series(samples: &[f64]) -> Result<ScalarField, FieldError> {
    if samples.len() < 2 {
        return Err(FieldError::TooFewSamples(samples.len()));
    }
    if let Some(k) = samples.iter().position(|x| !x.is_finite()) {
        return Err(FieldError::NonFinite(k.to_string()));
    }
    let graph = DomainGraph::chain(samples.len())?;
    ScalarField::new(Arc::new(graph), samples.to_vec())
}

/// Vertex-wise `sum coeffs[k] * fields[k]` over a shared domain.
pub fn linear_combination(fields: &[&ScalarField], coeffs: &[f64]) -> Result<ScalarField, FieldError> {
    if fields.len() != coeffs.len() {
        return Err(FieldError::LengthMismatch {
            fields: fields.len(),
            coeffs: coeffs.len(),
        });
    }
    let first = fields.first().ok_or(FieldError::EmptyCombination)?;
    if fields.iter().any(|f| !first.same_domain(f)) {
        return Err(FieldError::DomainMismatch);
    }
    let mut values = vec![0.0; first.values.len()];
    for (field, &c) in fields.iter().zip(coeffs) {
        if c == 0.0 {
            continue;
        }
        for (acc, x) in values.iter_mut().zip(&field.values) {
            *acc += c * x;
        }
    }
    ScalarField::new(first.graph.clone(), values)
}

/// Classical total variation of a field on a chain: `sum |f(v_{k+1}) - f(v_k)|`.
pub fn classic_tv_1d(field: &ScalarField) -> Result<f64, FieldError> {
    let order = field.graph.chain_order().ok_or(FieldError::NotAChain)?;
    Ok(crate::ttv::accurate_sum(
        order
            .windows(2)
            .map(|w| (field.values[w[1]] - field.values[w[0]]).abs()),
    ))
}
