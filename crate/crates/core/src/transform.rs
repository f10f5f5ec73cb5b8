//! The varilet transform, filter factors and filtered fields.
//!
//! Every function on the middle space lives on the subdivision of the lens
//! (all region cut points are vertices), and every field produced here lives
//! on the matching refined domain, so filtered fields stay exactly piecewise
//! linear.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::field::{linear_combination, FieldError, ScalarField};
use crate::lens::{link_pairs, Lens, LensError, LinkPair, ResolvedLens};
use crate::mlf::{factorize, MiddleSpace, MonotoneFactor, Signature};
use crate::subdivision::{MiddleFunction, RefinedDomain, Subdivision};
use crate::ttv::{ttv, ttv_restricted, PIPELINE_RTOL};
use crate::union_find::DisjointSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Lens(#[from] LensError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("field is constant on domain component {0}; it has no middle-space edges")]
    DegenerateComponent(usize),
    #[error("support {0} has zero length")]
    ZeroAmplitude(usize),
    #[error("flat extension is ambiguous: boundary values {0} and {1} on one complement component")]
    FlatExtensionConflict(f64, f64),
    #[error("expected {expected} coefficients, found {found}")]
    CoefficientCount { expected: usize, found: usize },
    #[error("coefficient {0} is not finite")]
    NonFiniteCoefficient(usize),
    #[error("filter paths disagree by {deviation} (tolerance {tolerance})")]
    PathDisagreement { deviation: f64, tolerance: f64 },
}

/// Extends `pi` from the refined edges marked `inside` to the whole middle
/// space, constant on each component of the closure of the complement.
///
/// The constant is the common value of `pi` where the component meets the
/// marked edges; components that never meet them (other middle components)
/// get 0.
pub fn flat_extension(pi: &MiddleFunction, inside: &[bool]) -> Result<MiddleFunction, TransformError> {
    let sub = pi.subdivision();
    assert_eq!(inside.len(), sub.edge_count(), "one flag per refined edge");
    let values = flat_values(sub, inside, pi.values())?;
    Ok(MiddleFunction::new(sub.clone(), values))
}

fn flat_values(sub: &Subdivision, inside: &[bool], values: &[f64]) -> Result<Vec<f64>, TransformError> {
    let nv = sub.vertex_count();
    let mut ds = DisjointSet::new(nv);
    let mut touches = vec![false; nv];
    for (e, &marked) in inside.iter().enumerate() {
        let [a, b] = sub.endpoints(e);
        if marked {
            touches[a] = true;
            touches[b] = true;
        } else {
            ds.union(a, b);
        }
    }
    let mut class_value: Vec<Option<f64>> = vec![None; nv];
    for v in 0..nv {
        if touches[v] {
            let r = ds.find(v);
            match class_value[r] {
                None => class_value[r] = Some(values[v]),
                Some(x) if x != values[v] => return Err(TransformError::FlatExtensionConflict(x, values[v])),
                Some(_) => {}
            }
        }
    }
    Ok((0..nv)
        .map(|v| {
            if touches[v] {
                values[v]
            } else {
                class_value[ds.find(v)].unwrap_or(0.0)
            }
        })
        .collect())
}

/// Output of the transform: amplitudes, varilets on the middle space (γ) and
/// on the refined domain (g), and everything needed to filter.
#[derive(Debug, Clone)]
pub struct VariletBasis {
    field: ScalarField,
    lifted: ScalarField,
    ms: Arc<MiddleSpace>,
    mf: Arc<MonotoneFactor>,
    lens: Arc<ResolvedLens>,
    domain: Arc<RefinedDomain>,
    links: Vec<LinkPair>,
    amplitudes: Vec<f64>,
    gammas: Vec<MiddleFunction>,
    varilets: Vec<ScalarField>,
}

impl VariletBasis {
    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// The transformed field, on its original domain.
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    /// The transformed field carried over to the refined domain.
    pub fn lifted(&self) -> &ScalarField {
        &self.lifted
    }

    pub fn middle_space(&self) -> &Arc<MiddleSpace> {
        &self.ms
    }

    pub fn monotone_factor(&self) -> &Arc<MonotoneFactor> {
        &self.mf
    }

    pub fn lens(&self) -> &Arc<ResolvedLens> {
        &self.lens
    }

    pub fn subdivision(&self) -> &Arc<Subdivision> {
        self.lens.subdivision()
    }

    pub fn domain(&self) -> &Arc<RefinedDomain> {
        &self.domain
    }

    pub fn links(&self) -> &[LinkPair] {
        &self.links
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn gammas(&self) -> &[MiddleFunction] {
        &self.gammas
    }

    pub fn gamma(&self, i: usize) -> &MiddleFunction {
        &self.gammas[i]
    }

    pub fn varilets(&self) -> &[ScalarField] {
        &self.varilets
    }

    pub fn varilet(&self, i: usize) -> &ScalarField {
        &self.varilets[i]
    }

    /// `Σ αᵢ gᵢ` on the refined domain.
    pub fn reconstruct(&self) -> Result<ScalarField, FieldError> {
        let refs: Vec<&ScalarField> = self.varilets.iter().collect();
        linear_combination(&refs, &self.amplitudes)
    }

    /// Largest vertex deviation between the lifted field and its reconstruction.
    pub fn reconstruction_error(&self) -> Result<f64, FieldError> {
        let rec = self.reconstruct()?;
        Ok(max_deviation(self.lifted.values(), rec.values()))
    }

    // Mutable access, used to inject faults when exercising the checks.

    pub fn amplitudes_mut(&mut self) -> &mut Vec<f64> {
        &mut self.amplitudes
    }

    pub fn gamma_mut(&mut self, i: usize) -> &mut MiddleFunction {
        &mut self.gammas[i]
    }

    pub fn varilet_mut(&mut self, i: usize) -> &mut ScalarField {
        &mut self.varilets[i]
    }

    pub fn links_mut(&mut self) -> &mut Vec<LinkPair> {
        &mut self.links
    }

    pub fn lens_mut(&mut self) -> &mut ResolvedLens {
        Arc::make_mut(&mut self.lens)
    }
}

pub(crate) fn max_deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn sup(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Factorizes `field` and runs the transform for `lens`.
pub fn varilet_transform(field: &ScalarField, lens: &Lens) -> Result<VariletBasis, TransformError> {
    let (ms, mf) = factorize(field);
    transform_factored(field, Arc::new(ms), Arc::new(mf), lens)
}

/// The transform for a field whose factorization is already at hand.
pub fn transform_factored(
    field: &ScalarField,
    ms: Arc<MiddleSpace>,
    mf: Arc<MonotoneFactor>,
    lens: &Lens,
) -> Result<VariletBasis, TransformError> {
    if let Some(d) = ms.degenerate_components().first() {
        return Err(TransformError::DegenerateComponent(d.domain_component));
    }
    let resolved = ResolvedLens::new(&ms, lens)?;
    let sub = resolved.subdivision().clone();
    let domain = RefinedDomain::new(&ms, &mf, &sub)?;
    let lifted = domain.lift(field)?;
    let links = link_pairs(&resolved);

    let per_index: Vec<(f64, MiddleFunction, ScalarField)> = (0..resolved.len())
        .into_par_iter()
        .map(|i| {
            let alpha = ttv_restricted(&ms, &resolved.support(i).fragments)
                .expect("supports are fragments of the middle space");
            if alpha <= 0.0 {
                return Err(TransformError::ZeroAmplitude(i));
            }
            let inside: Vec<bool> = (0..sub.edge_count()).map(|re| resolved.owner(re) == i).collect();
            let lam_i = flat_values(&sub, &inside, sub.levels())?;
            let component = resolved.component(i);
            let base = resolved.boundary_level(i).unwrap_or(0.0);
            let values: Vec<f64> = lam_i
                .iter()
                .enumerate()
                .map(|(v, &x)| {
                    if sub.vertex_component(v) != component {
                        0.0
                    } else if resolved.is_root(i) {
                        x / alpha
                    } else {
                        (x - base) / alpha
                    }
                })
                .collect();
            let gamma = MiddleFunction::new(sub.clone(), values);
            let g = domain.pull_back(&gamma)?;
            Ok((alpha, gamma, g))
        })
        .collect::<Result<_, TransformError>>()?;

    let mut amplitudes = Vec::with_capacity(per_index.len());
    let mut gammas = Vec::with_capacity(per_index.len());
    let mut varilets = Vec::with_capacity(per_index.len());
    for (a, gamma, g) in per_index {
        amplitudes.push(a);
        gammas.push(gamma);
        varilets.push(g);
    }
    Ok(VariletBasis {
        field: field.clone(),
        lifted,
        ms,
        mf,
        lens: Arc::new(resolved),
        domain: Arc::new(domain),
        links,
        amplitudes,
        gammas,
        varilets,
    })
}

/// One real coefficient per lens index.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCoefficients {
    values: Vec<f64>,
}

impl FilterCoefficients {
    pub fn new(values: Vec<f64>, expected: usize) -> Result<Self, TransformError> {
        if values.len() != expected {
            return Err(TransformError::CoefficientCount {
                expected,
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|x| !x.is_finite()) {
            return Err(TransformError::NonFiniteCoefficient(k));
        }
        Ok(Self { values })
    }

    /// The amplitudes themselves: filtering with these reproduces the field.
    pub fn identity(basis: &VariletBasis) -> Self {
        Self {
            values: basis.amplitudes().to_vec(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The filter factor ψ with the per-support affine pieces it was built from:
/// `ψ = scales[i]·λ + offsets[i]` on support `i`, boundary points excepted
/// (those carry the value stored for their boundary class).
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFactor {
    pub psi: MiddleFunction,
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
}

/// Builds ψ by link recursion in index order.
pub fn filter_factor(
    lens: &ResolvedLens,
    links: &[LinkPair],
    amplitudes: &[f64],
    coeffs: &FilterCoefficients,
) -> Result<FilterFactor, TransformError> {
    let n = lens.len();
    if coeffs.len() != n {
        return Err(TransformError::CoefficientCount {
            expected: n,
            found: coeffs.len(),
        });
    }
    let sub = lens.subdivision();
    let mut link_point = vec![None; n];
    for l in links {
        link_point[l.successor] = Some(l.predecessor_point);
    }
    let mut psi = vec![f64::NAN; sub.vertex_count()];
    let mut class_value: Vec<Option<f64>> = vec![None; lens.boundary_class_count()];
    let mut scales = Vec::with_capacity(n);
    let mut offsets = Vec::with_capacity(n);
    for i in 0..n {
        let s = coeffs.values()[i] / amplitudes[i];
        let c = match (lens.predecessor(i), lens.boundary_level(i)) {
            (Some(_), Some(b)) => {
                let p = link_point[i].expect("every non-root region has a link pair");
                psi[p] - s * b
            }
            _ => 0.0,
        };
        scales.push(s);
        offsets.push(c);
        for &re in lens.support_edges(i) {
            for v in sub.endpoints(re) {
                if !psi[v].is_nan() {
                    continue;
                }
                let own = s * sub.level(v) + c + 0.0;
                psi[v] = match lens.boundary_class(v) {
                    Some(cl) => *class_value[cl].get_or_insert(own),
                    None => own,
                };
            }
        }
    }
    for x in psi.iter_mut().filter(|x| x.is_nan()) {
        // Middle vertices only reach here when they lie in no support,
        // which a valid lens rules out.
        *x = 0.0;
    }
    Ok(FilterFactor {
        psi: MiddleFunction::new(sub.clone(), psi),
        scales,
        offsets,
    })
}

/// A filtered field with the factor it came from.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub factor: FilterFactor,
    /// `ψ∘μ` on the refined domain.
    pub field: ScalarField,
    /// Deviation between `Σ aᵢgᵢ` and `ψ∘μ`, when the self-check ran.
    pub path_deviation: Option<f64>,
}

impl Filtered {
    /// The same function on the coarsest subdivision of the original domain:
    /// inserted vertices are kept only where ψ changes slope.
    pub fn canonical(&self, basis: &VariletBasis) -> Result<ScalarField, FieldError> {
        let lens = basis.lens();
        let sub = lens.subdivision();
        let domain = basis.domain();
        domain.coarsen(&self.field, |v| match domain.located(v) {
            Some(crate::subdivision::Located::Vertex(cv)) if sub.is_cut_vertex(cv) => {
                let around = sub.incident_edges(cv);
                let owners: Vec<usize> = around.iter().map(|&re| lens.owner(re)).collect();
                owners
                    .iter()
                    .any(|&o| self.factor.scales[o] != self.factor.scales[owners[0]])
            }
            _ => true,
        })
    }
}

/// `Σ aᵢgᵢ`, computed as `ψ∘μ`. With `self_check`, also computed as the
/// linear combination of the varilets; the two must agree.
pub fn filter(
    basis: &VariletBasis,
    coeffs: &FilterCoefficients,
    self_check: bool,
) -> Result<Filtered, TransformError> {
    let factor = filter_factor(basis.lens(), basis.links(), basis.amplitudes(), coeffs)?;
    let field = basis.domain().pull_back(&factor.psi)?;
    let mut path_deviation = None;
    if self_check {
        let refs: Vec<&ScalarField> = basis.varilets().iter().collect();
        let direct = linear_combination(&refs, coeffs.values())?;
        let deviation = max_deviation(direct.values(), field.values());
        let tolerance = PIPELINE_RTOL * sup(field.values()).max(1.0);
        if deviation > tolerance {
            return Err(TransformError::PathDisagreement { deviation, tolerance });
        }
        path_deviation = Some(deviation);
    }
    Ok(Filtered {
        factor,
        field,
        path_deviation,
    })
}

/// Prediction of the filtered middle space against its re-factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientReport {
    pub predicted: Signature,
    pub observed: Signature,
    /// `None` when vertex or edge counts differ.
    pub distance: Option<f64>,
    pub predicted_degenerate: usize,
    pub observed_degenerate: usize,
    /// ttv of the filtered field, by re-factorization.
    pub ttv_filtered: f64,
    /// Σ over nonzero coefficients of the variation of ψ on the support.
    pub ttv_by_supports: f64,
    pub coefficient_sum: f64,
    pub tolerance: f64,
}

impl QuotientReport {
    pub fn signature_matches(&self) -> bool {
        self.distance.is_some_and(|d| d <= self.tolerance)
            && self.predicted_degenerate == self.observed_degenerate
    }

    pub fn ttv_matches(&self) -> bool {
        close(self.ttv_filtered, self.coefficient_sum) && close(self.ttv_by_supports, self.coefficient_sum)
    }

    pub fn passed(&self) -> bool {
        self.signature_matches() && self.ttv_matches()
    }
}

pub(crate) fn close(x: f64, y: f64) -> bool {
    x == y || (x - y).abs() <= PIPELINE_RTOL * x.abs().max(y.abs())
}

/// Middle space predicted for `Σ aᵢgᵢ`: the subdivided middle space with each
/// component of the zero-coefficient supports collapsed to a point, levels
/// given by ψ, and regular vertices suppressed. Returns the signature and the
/// number of collapsed points without edges.
pub fn predicted_quotient(
    lens: &ResolvedLens,
    psi: &MiddleFunction,
    coeffs: &FilterCoefficients,
) -> (Signature, usize) {
    let sub = lens.subdivision();
    let nv = sub.vertex_count();
    let zero = |re: usize| coeffs.values()[lens.owner(re)] == 0.0;
    let mut ds = DisjointSet::new(nv);
    for re in 0..sub.edge_count() {
        if zero(re) {
            let [a, b] = sub.endpoints(re);
            ds.union(a, b);
        }
    }
    let (label, classes) = ds.labels();
    let mut level = vec![0.0; classes];
    for v in 0..nv {
        level[label[v]] = psi.value(v);
    }
    // Quotient edges oriented by ψ.
    let mut up: Vec<Vec<usize>> = vec![Vec::new(); classes];
    let mut down_count = vec![0usize; classes];
    let mut heads = Vec::new();
    for re in 0..sub.edge_count() {
        if zero(re) {
            continue;
        }
        let [a, b] = sub.endpoints(re);
        let (ca, cb) = (label[a], label[b]);
        let (lo, hi) = if level[ca] < level[cb] { (ca, cb) } else { (cb, ca) };
        up[lo].push(heads.len());
        heads.push(hi);
        down_count[hi] += 1;
    }
    let regular = |c: usize| up[c].len() == 1 && down_count[c] == 1;
    let mut levels = Vec::new();
    let mut edges = Vec::new();
    let mut isolated = 0;
    for c in 0..classes {
        if up[c].is_empty() && down_count[c] == 0 {
            isolated += 1;
            continue;
        }
        if regular(c) {
            continue;
        }
        levels.push(level[c]);
        for &h in &up[c] {
            let mut top = heads[h];
            while regular(top) {
                top = heads[up[top][0]];
            }
            edges.push((level[c], level[top]));
        }
    }
    levels.sort_by(f64::total_cmp);
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    (Signature { levels, edges }, isolated)
}

/// Filters, re-factorizes the result independently, and compares with the
/// predicted quotient and with `Σ|aᵢ|`.
pub fn filter_quotient_check(
    basis: &VariletBasis,
    coeffs: &FilterCoefficients,
) -> Result<QuotientReport, TransformError> {
    let filtered = filter(basis, coeffs, false)?;
    let psi = &filtered.factor.psi;
    let (predicted, predicted_degenerate) = predicted_quotient(basis.lens(), psi, coeffs);
    let (ms2, _) = factorize(&filtered.field);
    let observed = ms2.signature();
    let lens = basis.lens();
    let ttv_by_supports = (0..lens.len())
        .filter(|&i| coeffs.values()[i] != 0.0)
        .map(|i| psi.variation_on(lens.support_edges(i).iter().copied()))
        .sum();
    Ok(QuotientReport {
        distance: predicted.distance(&observed),
        predicted,
        observed,
        predicted_degenerate,
        observed_degenerate: ms2.degenerate_components().len(),
        ttv_filtered: ttv(&ms2),
        ttv_by_supports,
        coefficient_sum: coeffs.values().iter().map(|a| a.abs()).sum(),
        tolerance: PIPELINE_RTOL * sup(psi.values()).max(1.0),
    })
}
