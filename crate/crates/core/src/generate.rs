//! Random fields, lenses and coefficient vectors for property checks.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::field::{DomainGraph, ScalarField};
use crate::lens::{branch_pairs, build_branch_lens, build_threshold_lens, Direction, Lens, ThresholdCut};
use crate::mlf::{MiddlePoint, MiddleSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Chain,
    Tree,
    Cyclic,
    Multigraph,
    Disconnected,
}

impl GraphKind {
    pub const ALL: [GraphKind; 5] = [
        GraphKind::Chain,
        GraphKind::Tree,
        GraphKind::Cyclic,
        GraphKind::Multigraph,
        GraphKind::Disconnected,
    ];
}

/// Edges `(a, b)` of a connected graph on vertices `offset..offset + n`.
fn connected_edges<R: Rng>(rng: &mut R, kind: GraphKind, n: usize, offset: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    match kind {
        GraphKind::Chain => edges.extend((0..n - 1).map(|k| (k, k + 1))),
        _ => edges.extend((1..n).map(|k| (rng.gen_range(0..k), k))),
    }
    match kind {
        GraphKind::Cyclic => {
            for _ in 0..(n / 4 + 1) {
                let a = rng.gen_range(0..n);
                let b = rng.gen_range(0..n);
                if a != b {
                    edges.push((a, b));
                }
            }
        }
        GraphKind::Multigraph => {
            for _ in 0..(n / 5 + 1) {
                let &(a, b) = edges.choose(rng).expect("n >= 2");
                edges.push((b, a));
            }
        }
        _ => {}
    }
    edges.into_iter().map(|(a, b)| (a + offset, b + offset)).collect()
}

/// Random domain graph with between 2 and `max_vertices` vertices, no
/// isolated vertices and at least one edge per component.
pub fn random_graph<R: Rng>(rng: &mut R, kind: GraphKind, max_vertices: usize) -> DomainGraph {
    let max_vertices = max_vertices.max(2);
    let n = rng.gen_range(2..=max_vertices);
    let mut edges = Vec::new();
    if kind == GraphKind::Disconnected && n >= 4 {
        let parts = if n >= 6 { rng.gen_range(2..=3) } else { 2 };
        let mut sizes = vec![2; parts];
        for _ in 0..n - 2 * parts {
            sizes[rng.gen_range(0..parts)] += 1;
        }
        let mut offset = 0;
        for size in sizes {
            let inner = [
                GraphKind::Chain,
                GraphKind::Tree,
                GraphKind::Cyclic,
                GraphKind::Multigraph,
            ]
            .choose(rng)
            .copied()
            .expect("non-empty");
            edges.extend(connected_edges(rng, inner, size, offset));
            offset += size;
        }
    } else {
        let kind = if kind == GraphKind::Disconnected {
            GraphKind::Chain
        } else {
            kind
        };
        edges = connected_edges(rng, kind, n, 0);
    }
    let ids = (0..n).map(|v| v.to_string()).collect();
    let edges = edges
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| (format!("e{k}"), a, b))
        .collect();
    DomainGraph::new(ids, edges).expect("generated graphs are well formed")
}

/// Random values: continuous, small integers (plateaus and ties), or a walk.
/// Every domain component receives at least two distinct values.
pub fn random_values<R: Rng>(rng: &mut R, graph: &DomainGraph) -> Vec<f64> {
    let n = graph.vertex_count();
    let mut values: Vec<f64> = match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        1 => (0..n).map(|_| rng.gen_range(0..5) as f64).collect(),
        _ => {
            let mut x = 0.0;
            (0..n)
                .map(|_| {
                    x += rng.gen_range(-1.0..1.0);
                    x
                })
                .collect()
        }
    };
    let mut first: Vec<Option<usize>> = vec![None; graph.component_count()];
    let mut varied = vec![false; graph.component_count()];
    for v in 0..n {
        let c = graph.component_of(v);
        match first[c] {
            None => first[c] = Some(v),
            Some(u) => varied[c] |= values[u] != values[v],
        }
    }
    for c in 0..graph.component_count() {
        if !varied[c] {
            let v = first[c].expect("components are non-empty");
            values[v] += 1.0;
        }
    }
    values
}

pub fn random_field<R: Rng>(rng: &mut R, max_vertices: usize) -> ScalarField {
    let kind = *GraphKind::ALL.choose(rng).expect("non-empty");
    random_field_of(rng, kind, max_vertices)
}

pub fn random_field_of<R: Rng>(rng: &mut R, kind: GraphKind, max_vertices: usize) -> ScalarField {
    let graph = random_graph(rng, kind, max_vertices);
    let values = random_values(rng, &graph);
    ScalarField::new(Arc::new(graph), values).expect("finite values")
}

/// Random valid lens: the trivial lens, a branch lens, or threshold cuts
/// accumulated while they keep the lens valid.
pub fn random_lens<R: Rng>(rng: &mut R, ms: &MiddleSpace) -> Lens {
    match rng.gen_range(0..4) {
        0 => Lens::trivial(ms),
        1 => {
            let mut persistence: Vec<f64> = [Direction::Up, Direction::Down]
                .into_iter()
                .flat_map(|d| branch_pairs(ms, d))
                .map(|p| p.persistence(ms))
                .collect();
            persistence.sort_by(f64::total_cmp);
            let min = if persistence.is_empty() || rng.gen_bool(0.3) {
                0.0
            } else {
                persistence[rng.gen_range(0..persistence.len())]
            };
            build_branch_lens(ms, min)
        }
        _ => {
            let attempts = rng.gen_range(1..=6);
            random_threshold_lens(rng, ms, attempts)
        }
    }
}

pub fn random_threshold_lens<R: Rng>(rng: &mut R, ms: &MiddleSpace, attempts: usize) -> Lens {
    let mut cuts: Vec<ThresholdCut> = Vec::new();
    if ms.edge_count() == 0 {
        return Lens::trivial(ms);
    }
    for _ in 0..attempts * 3 {
        if cuts.len() >= attempts {
            break;
        }
        let e = rng.gen_range(0..ms.edge_count());
        let (lo, hi) = ms.edge_levels(e);
        let direction = if rng.gen_bool(0.5) {
            Direction::Up
        } else {
            Direction::Down
        };
        let level = if rng.gen_bool(0.25) {
            // Cut exactly at a vertex level.
            ms.level(rng.gen_range(0..ms.vertex_count()))
        } else {
            lo + (hi - lo) * rng.gen_range(0.05..0.95)
        };
        if !(lo < level && level < hi) {
            continue;
        }
        let seed_level = match direction {
            Direction::Up => 0.5 * (level + hi),
            Direction::Down => 0.5 * (lo + level),
        };
        if seed_level == level {
            continue;
        }
        let seed = MiddlePoint::Edge {
            edge: e,
            level: seed_level,
        };
        let mut trial = cuts.clone();
        trial.push(ThresholdCut {
            level,
            direction,
            seed,
        });
        if build_threshold_lens(ms, &trial).is_ok() {
            cuts = trial;
        }
    }
    build_threshold_lens(ms, &cuts).expect("only lens-preserving cuts are kept")
}

/// Coefficients uniform in `[-2, 2]`, each zero with probability `zero_rate`.
pub fn random_coefficients<R: Rng>(rng: &mut R, n: usize, zero_rate: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(zero_rate) {
                0.0
            } else {
                rng.gen_range(-2.0..2.0)
            }
        })
        .collect()
}

/// Splits `count` random edges at an interior point, giving the
/// new vertex the interpolated value. The function is unchanged.
pub fn subdivide_collinear<R: Rng>(rng: &mut R, field: &ScalarField, count: usize) -> ScalarField {
    let g = field.graph();
    let mut ids: Vec<String> = g.vertex_ids().to_vec();
    let mut values = field.values().to_vec();
    let mut edges: Vec<(String, usize, usize)> = (0..g.edge_count())
        .map(|e| {
            let [a, b] = g.endpoints(e);
            (g.edge_id(e).to_string(), a, b)
        })
        .collect();
    for k in 0..count {
        let e = rng.gen_range(0..edges.len());
        let (id, a, b) = edges[e].clone();
        let t = rng.gen_range(0.25..0.75);
        let v = ids.len();
        ids.push(format!("s{k}"));
        values.push(values[a] + t * (values[b] - values[a]));
        edges[e] = (id.clone(), a, v);
        edges.push((format!("{id}+{k}"), v, b));
    }
    let graph = DomainGraph::new(ids, edges).expect("subdivision keeps the graph valid");
    ScalarField::new(Arc::new(graph), values).expect("finite values")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lens::validate_lens;
    use crate::mlf::factorize;
    use crate::ttv::ttv;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_lenses_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let f = random_field(&mut rng, 40);
            let (ms, _) = factorize(&f);
            assert!(ms.degenerate_components().is_empty());
            let lens = random_lens(&mut rng, &ms);
            assert!(validate_lens(&ms, &lens).is_valid());
        }
    }

    #[test]
    fn every_kind_builds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in GraphKind::ALL {
            for max in [2, 3, 10, 100] {
                let f = random_field_of(&mut rng, kind, max);
                assert!(f.graph().vertex_count() <= max.max(2));
            }
        }
        let f = random_field_of(&mut rng, GraphKind::Disconnected, 50);
        assert!(f.graph().vertex_count() < 4 || f.graph().component_count() >= 2);
    }

    #[test]
    fn subdivision_keeps_ttv() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_field(&mut rng, 30);
            let g = subdivide_collinear(&mut rng, &f, 5);
            assert_eq!(ttv(&factorize(&f).0), ttv(&factorize(&g).0));
        }
    }
}
