//! Topological total variation: total λ-length of the middle space.

use thiserror::Error;

use crate::field::ScalarField;
use crate::lens::Fragment;
use crate::mlf::{factorize, MiddleSpace};

/// Relative tolerance for sums assembled over many pieces.
pub const PIPELINE_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TtvError {
    #[error("fragment on edge {edge} [{lo}, {hi}] does not belong to this middle space")]
    ForeignFragment { edge: usize, lo: f64, hi: f64 },
}

/// Compensated (Neumaier) sum.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut carry = 0.0_f64;
    for x in values {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// Sum of all edge lengths `|λ(a) - λ(b)|`.
pub fn ttv(ms: &MiddleSpace) -> f64 {
    accurate_sum((0..ms.edge_count()).map(|e| ms.edge_length(e)))
}

/// Topological total variation of a field, by factorizing it.
pub fn ttv_of(field: &ScalarField) -> f64 {
    ttv(&factorize(field).0)
}

/// λ-length of the edge fragments making up a closed subset of the middle space.
pub fn ttv_restricted(ms: &MiddleSpace, fragments: &[Fragment]) -> Result<f64, TtvError> {
    for frag in fragments {
        check_fragment(ms, frag)?;
    }
    Ok(accurate_sum(fragments.iter().map(|f| f.hi - f.lo)))
}

pub(crate) fn check_fragment(ms: &MiddleSpace, frag: &Fragment) -> Result<(), TtvError> {
    let foreign = TtvError::ForeignFragment {
        edge: frag.edge,
        lo: frag.lo,
        hi: frag.hi,
    };
    if frag.edge >= ms.edge_count() {
        return Err(foreign);
    }
    let (lo, hi) = ms.edge_levels(frag.edge);
    if !(lo <= frag.lo && frag.lo < frag.hi && frag.hi <= hi) {
        return Err(foreign);
    }
    Ok(())
}

/// Outcome of comparing `ttv(M)` with the sum over a family of closed sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub total: f64,
    pub sum_of_parts: f64,
    /// Uncovered `(edge, lo, hi)` intervals.
    pub gaps: Vec<(usize, f64, f64)>,
    /// `(edge, lo, hi)` intervals covered more than once.
    pub overlaps: Vec<(usize, f64, f64)>,
    pub foreign: Vec<TtvError>,
}

impl DecompositionReport {
    pub fn sums_agree(&self) -> bool {
        (self.total - self.sum_of_parts).abs() <= PIPELINE_RTOL * self.total.abs().max(f64::MIN_POSITIVE)
    }

    pub fn passed(&self) -> bool {
        self.gaps.is_empty() && self.overlaps.is_empty() && self.foreign.is_empty() && self.sums_agree()
    }
}

/// Checks that `parts` cover the middle space, meet only at boundary points,
/// and that their restricted ttv values add up to `ttv(ms)`.
pub fn check_decomposition<R: AsRef<[Fragment]>>(ms: &MiddleSpace, parts: &[R]) -> DecompositionReport {
    let mut per_edge: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ms.edge_count()];
    let mut foreign = Vec::new();
    let mut sum_of_parts = 0.0;
    for part in parts {
        for frag in part.as_ref() {
            match check_fragment(ms, frag) {
                Ok(()) => {
                    per_edge[frag.edge].push((frag.lo, frag.hi));
                    sum_of_parts += frag.hi - frag.lo;
                }
                Err(err) => foreign.push(err),
            }
        }
    }
    let mut gaps = Vec::new();
    let mut overlaps = Vec::new();
    for (e, intervals) in per_edge.iter_mut().enumerate() {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let (lo, hi) = ms.edge_levels(e);
        let mut cursor = lo;
        for &(a, b) in intervals.iter() {
            if a > cursor {
                gaps.push((e, cursor, a));
            } else if a < cursor {
                overlaps.push((e, a, cursor.min(b)));
            }
            cursor = cursor.max(b);
        }
        if cursor < hi {
            gaps.push((e, cursor, hi));
        }
    }
    DecompositionReport {
        total: ttv(ms),
        sum_of_parts,
        gaps,
        overlaps,
        foreign,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{load_series, DomainGraph, ScalarField};
    use std::sync::Arc;

    fn worked() -> MiddleSpace {
        factorize(&load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap()).0
    }

    fn whole(ms: &MiddleSpace) -> Vec<Fragment> {
        (0..ms.edge_count())
            .map(|e| {
                let (lo, hi) = ms.edge_levels(e);
                Fragment { edge: e, lo, hi }
            })
            .collect()
    }

    /// Fragments of `{λ >= level}` on every edge.
    fn above(ms: &MiddleSpace, level: f64) -> Vec<Fragment> {
        (0..ms.edge_count())
            .filter_map(|e| {
                let (lo, hi) = ms.edge_levels(e);
                (hi > level).then(|| Fragment {
                    edge: e,
                    lo: lo.max(level),
                    hi,
                })
            })
            .collect()
    }

    fn below(ms: &MiddleSpace, level: f64) -> Vec<Fragment> {
        (0..ms.edge_count())
            .filter_map(|e| {
                let (lo, hi) = ms.edge_levels(e);
                (lo < level).then(|| Fragment {
                    edge: e,
                    lo,
                    hi: hi.min(level),
                })
            })
            .collect()
    }

    #[test]
    fn ttv_values() {
        assert_eq!(ttv_of(&load_series(&[0.0, 1.0]).unwrap()), 1.0);
        assert_eq!(ttv(&worked()), 8.0);

        let g = DomainGraph::chain(5).unwrap();
        let mut ids: Vec<String> = g.vertex_ids().to_vec();
        ids.extend((5..10).map(|i| i.to_string()));
        let edges = (0..4)
            .map(|k| (k.to_string(), k, k + 1))
            .chain((0..4).map(|k| (format!("b{k}"), k + 5, k + 6)))
            .collect();
        let two = DomainGraph::new(ids, edges).unwrap();
        let vals = [0.0, 2.0, 1.0, 3.0, 0.0];
        let f = ScalarField::new(Arc::new(two), vals.iter().chain(vals.iter()).copied().collect()).unwrap();
        assert_eq!(ttv_of(&f), 16.0);
    }

    #[test]
    fn restricted_values() {
        let ms = worked();
        assert_eq!(ttv_restricted(&ms, &whole(&ms)).unwrap(), 8.0);
        assert_eq!(ttv_restricted(&ms, &above(&ms, 1.0)).unwrap(), 6.0);
        // The two end fragments, λ from 0 to 1 each.
        assert_eq!(ttv_restricted(&ms, &below(&ms, 1.0)).unwrap(), 2.0);
        let bad = [Fragment {
            edge: 99,
            lo: 0.0,
            hi: 1.0,
        }];
        assert!(ttv_restricted(&ms, &bad).is_err());
    }

    #[test]
    fn decomposition_checks() {
        let ms = worked();
        let split = [above(&ms, 1.0), below(&ms, 1.0)];
        assert!(check_decomposition(&ms, &split).passed());
        assert!(check_decomposition(&ms, &[whole(&ms)]).passed());

        let missing = [above(&ms, 1.0)];
        let report = check_decomposition(&ms, &missing);
        assert!(!report.passed());
        assert_eq!(report.gaps.len(), 2);

        let overlapping = [above(&ms, 1.0), below(&ms, 1.5)];
        let report = check_decomposition(&ms, &overlapping);
        assert!(!report.overlaps.is_empty());
        assert!(!report.passed());
    }
}
