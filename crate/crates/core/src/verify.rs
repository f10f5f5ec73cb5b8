//! Independent checks of the transform: re-factorization, level-set counting
//! and direct set arithmetic on the subdivided middle space.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::field::{linear_combination, ScalarField};
use crate::generate::{random_coefficients, random_field, random_lens};
use crate::lens::{validate_lens, Lens, LensError, ResolvedLens};
use crate::mlf::{factorize, verify_factorization};
use crate::subdivision::{MiddleFunction, Subdivision};
use crate::transform::{
    filter_factor, filter_quotient_check, varilet_transform, FilterCoefficients, TransformError, VariletBasis,
};
use crate::ttv::{check_decomposition, ttv, ttv_of, PIPELINE_RTOL};
use crate::union_find::DisjointSet;

/// Absolute tolerance for single-pass sums, scaled by magnitude.
pub const SUM_TOL: f64 = 1e-12;

/// Names of the lemma checks, in report order.
pub const LEMMA_CHECKS: [&str; 9] = [
    "restriction_extension",
    "ttv_decomposition",
    "flat_extension",
    "complement_boundary",
    "link_pairs",
    "zero_varilet",
    "additive_decomposition",
    "filter_factor",
    "filter_quotient",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub property: String,
    pub passed: bool,
    /// Largest measured deviation, normalized as the tolerance is; infinite
    /// for structural failures.
    pub error: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
    /// Number of (field, lens) cases aggregated into this report.
    pub cases: usize,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.skipped.extend(other.skipped);
        self.cases += other.cases;
    }

    /// One row per check name: all runs must pass, the error is the largest
    /// seen, and the detail is taken from the first failure. Rows are sorted.
    pub fn aggregate(self) -> VerificationReport {
        let mut rows: BTreeMap<String, Check> = BTreeMap::new();
        for c in self.checks {
            match rows.get_mut(&c.name) {
                None => {
                    rows.insert(c.name.clone(), c);
                }
                Some(row) => {
                    if row.passed && !c.passed {
                        row.detail = c.detail.clone();
                    }
                    row.passed &= c.passed;
                    row.error = if row.error.is_nan() || c.error.is_nan() {
                        f64::NAN
                    } else {
                        row.error.max(c.error)
                    };
                }
            }
        }
        let mut skipped = self.skipped;
        skipped.sort();
        skipped.dedup();
        VerificationReport {
            checks: rows.into_values().collect(),
            skipped,
            cases: self.cases,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        writeln!(
            f,
            "{:<width$}  result  {:>10}  {:>9}  property",
            "check", "error", "tolerance"
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<width$}  {}  {:>10.3e}  {:>9.0e}  {}",
                c.name,
                if c.passed { "pass  " } else { "FAIL  " },
                c.error,
                c.tolerance,
                c.property
            )?;
            if let Some(d) = &c.detail {
                writeln!(f, "{:<width$}          {}", "", d)?;
            }
        }
        for s in &self.skipped {
            writeln!(f, "{s:<width$}  skipped")?;
        }
        if self.cases > 1 {
            writeln!(f, "{} cases", self.cases)?;
        }
        Ok(())
    }
}

/// Accumulates measurements for one named check.
struct Probe {
    check: Check,
}

impl Probe {
    fn new(name: &str, property: &str, tolerance: f64) -> Self {
        Self {
            check: Check {
                name: name.to_string(),
                property: property.to_string(),
                passed: true,
                error: 0.0,
                tolerance,
                detail: None,
            },
        }
    }

    /// Records a normalized deviation.
    fn measure(&mut self, error: f64, what: impl FnOnce() -> String) {
        if !(error <= self.check.tolerance) {
            if self.check.passed {
                self.check.detail = Some(what());
            }
            self.check.passed = false;
        }
        if error.is_nan() || error > self.check.error {
            self.check.error = error;
        }
    }

    /// Records `|a - b|` relative to `max(|a|, |b|, floor)`.
    fn relative(&mut self, a: f64, b: f64, floor: f64, what: impl FnOnce() -> String) {
        let scale = a.abs().max(b.abs()).max(floor);
        let err = if a == b { 0.0 } else { (a - b).abs() / scale };
        self.measure(err, what);
    }

    fn fail(&mut self, detail: impl Into<String>) {
        if self.check.passed {
            self.check.detail = Some(detail.into());
        }
        self.check.passed = false;
        self.check.error = f64::INFINITY;
    }

    fn done(self) -> Check {
        self.check
    }
}

fn spread(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for x in values {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if lo > hi {
        0.0
    } else {
        hi - lo
    }
}

fn sup(values: &[f64]) -> f64 {
    values.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Refined vertices touching both an edge with `inside` and one without.
fn frontier(sub: &Subdivision, inside: impl Fn(usize) -> bool) -> Vec<usize> {
    (0..sub.vertex_count())
        .filter(|&v| {
            let around = sub.incident_edges(v);
            around.iter().any(|&e| inside(e)) && around.iter().any(|&e| !inside(e))
        })
        .collect()
}

/// Components of the closure of the complement of the refined edges marked
/// `inside`: for each, its vertices and the subset touching marked edges.
struct Complement {
    vertices: Vec<Vec<usize>>,
    attached: Vec<Vec<usize>>,
}

fn complement_components(sub: &Subdivision, inside: &[bool]) -> Complement {
    let nv = sub.vertex_count();
    let mut ds = DisjointSet::new(nv);
    let mut in_complement = vec![false; nv];
    let mut touches = vec![false; nv];
    for (e, &marked) in inside.iter().enumerate() {
        let [a, b] = sub.endpoints(e);
        if marked {
            touches[a] = true;
            touches[b] = true;
        } else {
            in_complement[a] = true;
            in_complement[b] = true;
            ds.union(a, b);
        }
    }
    let mut slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut vertices: Vec<Vec<usize>> = Vec::new();
    let mut attached: Vec<Vec<usize>> = Vec::new();
    for v in 0..nv {
        if !in_complement[v] {
            continue;
        }
        let r = ds.find(v);
        let k = *slot.entry(r).or_insert_with(|| {
            vertices.push(Vec::new());
            attached.push(Vec::new());
            vertices.len() - 1
        });
        vertices[k].push(v);
        if touches[v] {
            attached[k].push(v);
        }
    }
    Complement { vertices, attached }
}

fn support_mask(lens: &ResolvedLens, i: usize) -> Vec<bool> {
    (0..lens.subdivision().edge_count())
        .map(|re| lens.owner(re) == i)
        .collect()
}

fn check_restriction_extension(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "restriction_extension",
        "support length equals amplitude; every varilet has unit ttv on M and on the domain",
        PIPELINE_RTOL,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    for i in 0..basis.len() {
        let alpha = basis.amplitudes()[i];
        let length: f64 = lens.support_edges(i).iter().map(|&re| sub.edge_length(re)).sum();
        p.relative(length, alpha, f64::MIN_POSITIVE, || {
            format!("support {i}: length {length}, amplitude {alpha}")
        });
        let gamma = basis.gamma(i);
        let on_m = gamma.variation_on(0..sub.edge_count());
        p.relative(on_m, 1.0, 1.0, || format!("ttv of gamma {i} on M is {on_m}"));
        let on_domain = ttv_of(basis.varilet(i));
        p.relative(on_domain, 1.0, 1.0, || {
            format!("ttv of varilet {i} is {on_domain}")
        });
    }
    p.done()
}

fn check_ttv_decomposition(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "ttv_decomposition",
        "supports tile M and the amplitudes sum to ttv(f)",
        SUM_TOL,
    );
    let ms = basis.middle_space();
    let lens = basis.lens();
    let supports: Vec<_> = (0..lens.len()).map(|i| lens.support(i)).collect();
    let report = check_decomposition(ms, &supports);
    if !report.gaps.is_empty() {
        p.fail(format!("supports leave gaps {:?}", report.gaps));
    }
    if !report.overlaps.is_empty() {
        p.fail(format!("supports overlap on {:?}", report.overlaps));
    }
    if !report.foreign.is_empty() {
        p.fail(format!("foreign fragments {:?}", report.foreign));
    }
    let total = ttv(ms);
    let sum: f64 = basis.amplitudes().iter().sum();
    p.relative(sum, total, f64::MIN_POSITIVE, || {
        format!("sum of amplitudes {sum}, ttv {total}")
    });
    p.done()
}

fn check_flat_extension(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "flat_extension",
        "each gamma is constant on every complement component of its support, zero on other components, and strictly increasing along its support",
        0.0,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    for i in 0..basis.len() {
        let gamma = basis.gamma(i);
        let inside = support_mask(lens, i);
        let comp = complement_components(sub, &inside);
        let home = lens.component(i);
        for verts in &comp.vertices {
            let s = spread(verts.iter().map(|&v| gamma.value(v)));
            p.measure(s, || format!("gamma {i} varies by {s} on a complement component"));
        }
        for v in 0..sub.vertex_count() {
            if sub.vertex_component(v) != home {
                let x = gamma.value(v).abs();
                p.measure(x, || format!("gamma {i} is {x} on another middle component"));
            }
        }
        for &re in lens.support_edges(i) {
            if !(gamma.rise(re) > 0.0) {
                p.fail(format!("gamma {i} does not increase along refined edge {re}"));
            }
        }
    }
    p.done()
}

fn check_complement_boundary(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "complement_boundary",
        "complement components of each support meet it at one level, drawn from its region and successor boundary levels; every gamma is constant on every region boundary",
        0.0,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    let lam = MiddleFunction::light_factor(sub.clone());
    for i in 0..basis.len() {
        let inside = support_mask(lens, i);
        let comp = complement_components(sub, &inside);
        let home = lens.component(i);
        let mut seen: Vec<f64> = Vec::new();
        for att in &comp.attached {
            let Some(&first) = att.first() else { continue };
            if sub.vertex_component(first) != home {
                continue;
            }
            let s = spread(att.iter().map(|&v| lam.value(v)));
            p.measure(s, || {
                format!("support {i}: a complement component meets it at levels spread {s}")
            });
            seen.push(lam.value(first));
        }
        let mut expected: Vec<f64> = lens.boundary_level(i).into_iter().collect();
        for &j in lens.successors(i) {
            expected.extend(lens.boundary_level(j));
        }
        for list in [&mut seen, &mut expected] {
            list.sort_by(f64::total_cmp);
            list.dedup();
        }
        if seen != expected {
            p.fail(format!(
                "support {i}: complement levels {seen:?}, region and successor levels {expected:?}"
            ));
        }
    }
    for j in 0..basis.len() {
        if lens.is_root(j) {
            continue;
        }
        let boundary = frontier(sub, |re| lens.region_contains(j, re));
        let b = lens.boundary_level(j).unwrap_or(f64::NAN);
        for &v in &boundary {
            if lam.value(v) != b {
                p.fail(format!(
                    "boundary of region {j} has level {} not {b}",
                    lam.value(v)
                ));
            }
        }
        for i in 0..basis.len() {
            let gamma = basis.gamma(i);
            let s = spread(boundary.iter().map(|&v| gamma.value(v)));
            p.measure(s, || {
                format!("gamma {i} varies by {s} on the boundary of region {j}")
            });
        }
    }
    p.done()
}

fn check_link_pairs(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "link_pairs",
        "each non-root region has a boundary point in its predecessor's support and one in its own, where every gamma agrees",
        0.0,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    let touches = |v: usize, s: usize| sub.incident_edges(v).iter().any(|&re| lens.owner(re) == s);
    let on_support_boundary =
        |v: usize, s: usize| touches(v, s) && sub.incident_edges(v).iter().any(|&re| lens.owner(re) != s);
    let on_region_boundary = |v: usize, j: usize| {
        let around = sub.incident_edges(v);
        around.iter().any(|&re| lens.region_contains(j, re))
            && around.iter().any(|&re| !lens.region_contains(j, re))
    };
    for i in 0..basis.len() {
        let Some(k) = lens.predecessor(i) else { continue };
        let links: Vec<_> = basis.links().iter().filter(|l| l.successor == i).collect();
        let [link] = links.as_slice() else {
            p.fail(format!("region {i} has {} link pairs", links.len()));
            continue;
        };
        if link.predecessor != k {
            p.fail(format!(
                "link of region {i} names predecessor {} not {k}",
                link.predecessor
            ));
        }
        let (pv, qv) = (link.predecessor_point, link.successor_point);
        if pv >= sub.vertex_count() || qv >= sub.vertex_count() {
            p.fail(format!("link of region {i} names a missing vertex"));
            continue;
        }
        if !on_support_boundary(pv, k) {
            p.fail(format!(
                "link point {pv} of region {i} is not on the boundary of support {k}"
            ));
        }
        if !on_support_boundary(qv, i) {
            p.fail(format!(
                "link point {qv} of region {i} is not on the boundary of support {i}"
            ));
        }
        for v in [pv, qv] {
            if !on_region_boundary(v, i) {
                p.fail(format!("link point {v} is not on the boundary of region {i}"));
            }
            if Some(sub.level(v)) != lens.boundary_level(i) {
                p.fail(format!(
                    "link point {v} is at level {}, not on the boundary level",
                    sub.level(v)
                ));
            }
        }
        for (j, gamma) in basis.gammas().iter().enumerate() {
            let d = (gamma.value(pv) - gamma.value(qv)).abs();
            p.measure(d, || {
                format!("gamma {j} differs by {d} across the link of region {i}")
            });
        }
    }
    p.done()
}

fn check_zero_varilet(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "zero_varilet",
        "gamma i vanishes on every support whose region is not inside region i",
        0.0,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    for i in 0..basis.len() {
        let gamma = basis.gamma(i);
        for j in 0..basis.len() {
            let probe = lens.region_edges(j)[0];
            if lens.region_contains(i, probe) {
                continue;
            }
            for &re in lens.support_edges(j) {
                for v in sub.endpoints(re) {
                    let x = gamma.value(v).abs();
                    p.measure(x, || format!("gamma {i} is {x} on support {j}"));
                }
            }
        }
    }
    p.done()
}

fn check_additive_decomposition(basis: &VariletBasis) -> Check {
    let mut p = Probe::new(
        "additive_decomposition",
        "f equals the amplitude-weighted sum of varilets, and λ the weighted sum of gammas",
        PIPELINE_RTOL,
    );
    match basis.reconstruct() {
        Ok(rec) => {
            let f = basis.lifted().values();
            let scale = 1.0 + sup(f);
            let err = crate::transform::max_deviation(f, rec.values()) / scale;
            p.measure(err, || format!("domain reconstruction error {err}"));
        }
        Err(e) => p.fail(e.to_string()),
    }
    let sub = basis.subdivision();
    let scale = 1.0 + sup(sub.levels());
    let mut worst = 0.0_f64;
    for v in 0..sub.vertex_count() {
        let sum: f64 = basis
            .gammas()
            .iter()
            .zip(basis.amplitudes())
            .map(|(g, a)| a * g.value(v))
            .sum();
        worst = worst.max((sum - sub.level(v)).abs());
    }
    let err = worst / scale;
    p.measure(err, || format!("middle-space reconstruction error {err}"));
    p.done()
}

fn coefficient_trials(
    basis: &VariletBasis,
    rng: &mut ChaCha8Rng,
    random: usize,
    zero_rate: f64,
) -> Vec<Vec<f64>> {
    let n = basis.len();
    let mut out = vec![basis.amplitudes().to_vec(), vec![0.0; n]];
    for _ in 0..random {
        out.push(random_coefficients(rng, n, zero_rate));
    }
    out
}

fn check_filter_factor(basis: &VariletBasis, rng: &mut ChaCha8Rng) -> Check {
    let mut p = Probe::new(
        "filter_factor",
        "ψ∘μ equals the coefficient-weighted sum of varilets; ψ is constant on every region boundary",
        PIPELINE_RTOL,
    );
    let lens = basis.lens();
    let sub = lens.subdivision();
    let boundaries: Vec<Vec<usize>> = (0..lens.len())
        .filter(|&j| !lens.is_root(j))
        .map(|j| frontier(sub, |re| lens.region_contains(j, re)))
        .collect();
    let refs: Vec<&ScalarField> = basis.varilets().iter().collect();
    for (t, coeffs) in coefficient_trials(basis, rng, 6, 0.2).into_iter().enumerate() {
        let c = match FilterCoefficients::new(coeffs.clone(), basis.len()) {
            Ok(c) => c,
            Err(e) => {
                p.fail(e.to_string());
                continue;
            }
        };
        let ff = match filter_factor(lens, basis.links(), basis.amplitudes(), &c) {
            Ok(ff) => ff,
            Err(e) => {
                p.fail(e.to_string());
                continue;
            }
        };
        if t == 0 && ff.psi.values() != sub.levels() {
            p.fail("with the amplitudes as coefficients ψ is not λ");
        }
        for b in &boundaries {
            if spread(b.iter().map(|&v| ff.psi.value(v))) != 0.0 {
                p.fail(format!("ψ is not constant on a region boundary (trial {t})"));
            }
        }
        let (via_psi, direct) = match (
            basis.domain().pull_back(&ff.psi),
            linear_combination(&refs, &coeffs),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                p.fail(e.to_string());
                continue;
            }
        };
        let scale = sup(via_psi.values()).max(1.0);
        let err = crate::transform::max_deviation(via_psi.values(), direct.values()) / scale;
        p.measure(err, || format!("trial {t}: paths differ by {err}"));
    }
    p.done()
}

fn check_filter_quotient(basis: &VariletBasis, rng: &mut ChaCha8Rng) -> Check {
    let mut p = Probe::new(
        "filter_quotient",
        "the filtered middle space is M with zero-coefficient supports collapsed; its ttv is the sum of |a|",
        PIPELINE_RTOL,
    );
    let n = basis.len();
    let mut trials = coefficient_trials(basis, rng, 2, 0.0);
    for _ in 0..4 {
        let mut c = random_coefficients(rng, n, 0.3);
        c[rng.gen_range(0..n)] = 0.0;
        trials.push(c);
    }
    for (t, coeffs) in trials.into_iter().enumerate() {
        let c = match FilterCoefficients::new(coeffs, n) {
            Ok(c) => c,
            Err(e) => {
                p.fail(e.to_string());
                continue;
            }
        };
        let report = match filter_quotient_check(basis, &c) {
            Ok(r) => r,
            Err(e) => {
                p.fail(e.to_string());
                continue;
            }
        };
        match report.distance {
            None => p.fail(format!(
                "trial {t}: predicted {} vertices / {} edges, observed {} / {}",
                report.predicted.levels.len(),
                report.predicted.edges.len(),
                report.observed.levels.len(),
                report.observed.edges.len()
            )),
            Some(d) => {
                let scale = report.tolerance / PIPELINE_RTOL;
                let err = d / scale;
                p.measure(err, || format!("trial {t}: signature distance {d}"));
            }
        }
        if report.predicted_degenerate != report.observed_degenerate {
            p.fail(format!(
                "trial {t}: predicted {} collapsed components, observed {}",
                report.predicted_degenerate, report.observed_degenerate
            ));
        }
        let sum = report.coefficient_sum;
        p.relative(report.ttv_filtered, sum, f64::MIN_POSITIVE, || {
            format!(
                "trial {t}: ttv of filtered field {} vs {sum}",
                report.ttv_filtered
            )
        });
        p.relative(report.ttv_by_supports, sum, f64::MIN_POSITIVE, || {
            format!(
                "trial {t}: ψ variation over supports {} vs {sum}",
                report.ttv_by_supports
            )
        });
    }
    p.done()
}

/// Runs the nine lemma checks on a basis. `seed` drives the coefficient
/// vectors used by the filter checks.
pub fn check_lemmas_on(basis: &VariletBasis, seed: u64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        check_restriction_extension(basis),
        check_ttv_decomposition(basis),
        check_flat_extension(basis),
        check_complement_boundary(basis),
        check_link_pairs(basis),
        check_zero_varilet(basis),
        check_additive_decomposition(basis),
        check_filter_factor(basis, &mut rng),
        check_filter_quotient(basis, &mut rng),
    ];
    VerificationReport {
        checks,
        skipped: Vec::new(),
        cases: 1,
    }
}

fn failed_setup(name: &str, property: &str, detail: String, skipped: &[&str]) -> VerificationReport {
    let mut p = Probe::new(name, property, 0.0);
    p.fail(detail);
    VerificationReport {
        checks: vec![p.done()],
        skipped: skipped.iter().map(|s| s.to_string()).collect(),
        cases: 1,
    }
}

fn transform_or_report(
    field: &ScalarField,
    lens: &Lens,
    skipped: &[&str],
) -> Result<VariletBasis, VerificationReport> {
    let ms = factorize(field).0;
    let report = validate_lens(&ms, lens);
    if !report.is_valid() {
        return Err(failed_setup(
            "lens_validity",
            "the lens is a nested, covering family of constant-boundary regions",
            report.to_string(),
            skipped,
        ));
    }
    varilet_transform(field, lens).map_err(|e| {
        failed_setup(
            "transform",
            "the transform runs on this field and lens",
            e.to_string(),
            skipped,
        )
    })
}

/// The nine lemma checks for a field and lens. An invalid lens is reported as
/// a failed `lens_validity` check and the lemma checks are skipped.
pub fn check_lemmas(field: &ScalarField, lens: &Lens) -> VerificationReport {
    match transform_or_report(field, lens, &LEMMA_CHECKS) {
        Ok(basis) => check_lemmas_on(&basis, 0),
        Err(report) => report,
    }
}

/// Reconstruction, unit varilet ttv, and the basis property on `trials`
/// random coefficient vectors (with zeros and negatives), each judged by
/// re-factorizing `Σ aᵢgᵢ`.
pub fn check_theorem1_on(basis: &VariletBasis, trials: usize, seed: u64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = basis.len();

    let mut rec = Probe::new(
        "reconstruction",
        "f equals the amplitude-weighted sum of varilets",
        PIPELINE_RTOL,
    );
    match basis.reconstruct() {
        Ok(r) => {
            let f = basis.lifted().values();
            let err = crate::transform::max_deviation(f, r.values()) / (1.0 + sup(f));
            rec.measure(err, || format!("reconstruction error {err}"));
        }
        Err(e) => rec.fail(e.to_string()),
    }

    let mut unit = Probe::new("normalization", "every varilet has ttv 1", PIPELINE_RTOL);
    for (i, g) in basis.varilets().iter().enumerate() {
        let t = ttv_of(g);
        unit.relative(t, 1.0, 1.0, || format!("varilet {i} has ttv {t}"));
    }

    let mut prop = Probe::new(
        "basis_property",
        "ttv of any coefficient-weighted sum of varilets is the sum of |a|",
        PIPELINE_RTOL,
    );
    let mut structure = Probe::new(
        "filtered_factorization",
        "filtered fields factor through a valid middle space",
        0.0,
    );
    let refs: Vec<&ScalarField> = basis.varilets().iter().collect();
    for t in 0..trials {
        let zero_rate = [0.0, 0.2, 0.5][t % 3];
        let coeffs = random_coefficients(&mut rng, n, zero_rate);
        let filtered = match linear_combination(&refs, &coeffs) {
            Ok(f) => f,
            Err(e) => {
                prop.fail(e.to_string());
                continue;
            }
        };
        let (ms, mf) = factorize(&filtered);
        if t < 4 {
            let fr = verify_factorization(&filtered, &ms, &mf);
            if !fr.passed() {
                structure.fail(fr.violations.join("; "));
            }
        }
        let observed = ttv(&ms);
        let expected: f64 = coeffs.iter().map(|a| a.abs()).sum();
        prop.relative(observed, expected, f64::MIN_POSITIVE, || {
            format!("trial {t}: ttv {observed}, sum of |a| {expected}")
        });
    }
    VerificationReport {
        checks: vec![rec.done(), unit.done(), prop.done(), structure.done()],
        skipped: Vec::new(),
        cases: 1,
    }
}

pub fn check_theorem1(field: &ScalarField, lens: &Lens, trials: usize, seed: u64) -> VerificationReport {
    let names = [
        "reconstruction",
        "normalization",
        "basis_property",
        "filtered_factorization",
    ];
    match transform_or_report(field, lens, &names) {
        Ok(basis) => check_theorem1_on(&basis, trials, seed),
        Err(report) => report,
    }
}

/// Deliberate corruptions of a basis, each aimed at one or more checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Multiply a varilet by 1.5.
    ScaleVarilet,
    /// Add 0.5 to an amplitude.
    ShiftAmplitude,
    /// Raise γ at a point away from its support, and pull it back again.
    BendGamma,
    /// Record a wrong boundary level for a region.
    MislabelBoundary,
    /// Move a link point to a vertex at another level.
    MisplaceLink,
    /// Put a nonzero value of γ on a foreign support.
    LeakGamma,
    /// Change one value of a varilet.
    PerturbVarilet,
    /// Double an amplitude.
    ScaleAmplitude,
}

impl Fault {
    pub const ALL: [Fault; 8] = [
        Fault::ScaleVarilet,
        Fault::ShiftAmplitude,
        Fault::BendGamma,
        Fault::MislabelBoundary,
        Fault::MisplaceLink,
        Fault::LeakGamma,
        Fault::PerturbVarilet,
        Fault::ScaleAmplitude,
    ];

    /// Checks that must fail once this fault is injected.
    pub fn targets(self) -> &'static [&'static str] {
        match self {
            Fault::ScaleVarilet => &["restriction_extension", "normalization"],
            Fault::ShiftAmplitude => &["ttv_decomposition"],
            Fault::BendGamma => &["flat_extension", "reconstruction"],
            Fault::MislabelBoundary => &["complement_boundary"],
            Fault::MisplaceLink => &["link_pairs"],
            Fault::LeakGamma => &["zero_varilet"],
            Fault::PerturbVarilet => &["additive_decomposition", "filter_factor", "reconstruction"],
            Fault::ScaleAmplitude => &["filter_factor", "filter_quotient"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fault::ScaleVarilet => "scale-varilet",
            Fault::ShiftAmplitude => "shift-amplitude",
            Fault::BendGamma => "bend-gamma",
            Fault::MislabelBoundary => "mislabel-boundary",
            Fault::MisplaceLink => "misplace-link",
            Fault::LeakGamma => "leak-gamma",
            Fault::PerturbVarilet => "perturb-varilet",
            Fault::ScaleAmplitude => "scale-amplitude",
        }
    }

    pub fn from_name(name: &str) -> Option<Fault> {
        Fault::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Applies a fault. Faults that need a non-root region fail on lenses
/// without one.
pub fn inject(basis: &mut VariletBasis, fault: Fault) -> Result<(), String> {
    let n = basis.len();
    let last = n - 1;
    let non_root = (0..n).rev().find(|&i| !basis.lens().is_root(i));
    match fault {
        Fault::ScaleVarilet => {
            let g = basis.varilet(last);
            let values = g.values().iter().map(|x| 1.5 * x).collect();
            *basis.varilet_mut(last) =
                ScalarField::new(g.shared_graph().clone(), values).map_err(|e| e.to_string())?;
        }
        Fault::ShiftAmplitude => basis.amplitudes_mut()[last] += 0.5,
        Fault::ScaleAmplitude => basis.amplitudes_mut()[last] *= 2.0,
        Fault::PerturbVarilet => {
            let g = basis.varilet(last);
            let mut values = g.values().to_vec();
            let v = values
                .iter()
                .position(|&x| x != 0.0)
                .ok_or("varilet is identically zero")?;
            values[v] += 0.1;
            *basis.varilet_mut(last) =
                ScalarField::new(g.shared_graph().clone(), values).map_err(|e| e.to_string())?;
        }
        Fault::BendGamma => {
            let lens = basis.lens().clone();
            let sub = lens.subdivision().clone();
            let (i, v) = (0..n)
                .flat_map(|i| (0..sub.vertex_count()).map(move |v| (i, v)))
                .find(|&(i, v)| {
                    sub.vertex_component(v) == lens.component(i)
                        && sub.incident_edges(v).iter().all(|&re| lens.owner(re) != i)
                })
                .ok_or("every vertex touches its own support")?;
            basis.gamma_mut(i).values_mut()[v] += 0.25;
            let g = basis
                .domain()
                .pull_back(basis.gamma(i))
                .map_err(|e| e.to_string())?;
            *basis.varilet_mut(i) = g;
        }
        Fault::MislabelBoundary => {
            let i = non_root.ok_or("lens has no non-root region")?;
            let b = basis.lens().boundary_level(i).expect("non-root");
            basis.lens_mut().set_boundary_level(i, Some(b + 0.5));
        }
        Fault::MisplaceLink => {
            let sub = basis.subdivision().clone();
            let link = basis.links_mut().first_mut().ok_or("lens has no link pairs")?;
            let v = (0..sub.vertex_count())
                .find(|&v| sub.level(v) != link.level)
                .ok_or("all vertices share one level")?;
            link.predecessor_point = v;
        }
        Fault::LeakGamma => {
            let lens = basis.lens().clone();
            let sub = lens.subdivision().clone();
            let (i, v) = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .find(|&(i, j)| !lens.region_contains(i, lens.region_edges(j)[0]))
                .map(|(i, j)| (i, sub.endpoints(lens.support_edges(j)[0])[0]))
                .ok_or("every region contains every other")?;
            basis.gamma_mut(i).values_mut()[v] += 0.125;
        }
    }
    Ok(())
}

/// Transforms, injects `fault`, and runs both the lemma and the basis checks.
pub fn check_with_fault(
    field: &ScalarField,
    lens: &Lens,
    fault: Fault,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport, String> {
    let mut basis = varilet_transform(field, lens).map_err(|e| e.to_string())?;
    inject(&mut basis, fault)?;
    let mut report = check_lemmas_on(&basis, seed);
    report.extend(check_theorem1_on(&basis, trials, seed));
    report.cases = 1;
    Ok(report)
}

/// One generated case: a field, a lens over its middle space, and the seed
/// for its coefficient draws.
#[derive(Debug, Clone)]
pub struct FuzzCase {
    pub field: ScalarField,
    pub lens: Lens,
    pub seed: u64,
}

/// Deterministic corpus of `n_fields × n_lenses` cases.
pub fn fuzz_corpus(seed: u64, n_fields: usize, n_lenses: usize, max_vertices: usize) -> Vec<FuzzCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_fields * n_lenses);
    for _ in 0..n_fields {
        let field = random_field(&mut rng, max_vertices);
        let ms = factorize(&field).0;
        for _ in 0..n_lenses {
            let lens = random_lens(&mut rng, &ms);
            out.push(FuzzCase {
                field: field.clone(),
                lens,
                seed: rng.gen(),
            });
        }
    }
    out
}

/// Runs the basis and lemma checks over a generated corpus, in parallel,
/// and aggregates one row per check.
pub fn fuzz(
    seed: u64,
    n_fields: usize,
    n_lenses: usize,
    max_vertices: usize,
    trials: usize,
) -> VerificationReport {
    let corpus = fuzz_corpus(seed, n_fields, n_lenses, max_vertices);
    let reports: Vec<VerificationReport> = corpus
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let mut r = match varilet_transform(&case.field, &case.lens) {
                Ok(basis) => {
                    let mut r = check_lemmas_on(&basis, case.seed);
                    r.extend(check_theorem1_on(&basis, trials, case.seed));
                    r
                }
                Err(e) => failed_setup(
                    "transform",
                    "the transform runs on this field and lens",
                    e.to_string(),
                    &[],
                ),
            };
            for c in &mut r.checks {
                if let Some(d) = &mut c.detail {
                    *d = format!("case {k}: {d}");
                }
            }
            r.cases = 1;
            r
        })
        .collect();
    let mut all = VerificationReport::default();
    for r in reports {
        all.extend(r);
    }
    all.aggregate()
}

/// Convenience for lens errors surfacing through verification.
pub fn lens_error_report(err: &LensError) -> VerificationReport {
    failed_setup(
        "lens_validity",
        "the lens is a nested, covering family of constant-boundary regions",
        err.to_string(),
        &LEMMA_CHECKS,
    )
}

/// Convenience for transform errors surfacing through verification.
pub fn transform_error_report(err: &TransformError) -> VerificationReport {
    match err {
        TransformError::Lens(e) => lens_error_report(e),
        other => failed_setup(
            "transform",
            "the transform runs on this field and lens",
            other.to_string(),
            &LEMMA_CHECKS,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::load_series;
    use crate::lens::{build_threshold_lens, Direction, Region, ThresholdCut};
    use crate::mlf::{MiddlePoint, MiddleSpace};

    fn worked() -> (ScalarField, MiddleSpace, Lens) {
        let f = load_series(&[0.0, 2.0, 1.0, 3.0, 0.0]).unwrap();
        let ms = factorize(&f).0;
        let top = (0..ms.vertex_count()).find(|&v| ms.level(v) == 3.0).unwrap();
        let cut = ThresholdCut {
            level: 1.0,
            direction: Direction::Up,
            seed: MiddlePoint::Vertex { vertex: top },
        };
        let lens = build_threshold_lens(&ms, &[cut]).unwrap();
        (f, ms, lens)
    }

    #[test]
    fn worked_example_passes_everything() {
        let (f, ms, lens) = worked();
        let lemmas = check_lemmas(&f, &lens);
        assert_eq!(lemmas.checks.len(), 9);
        assert!(lemmas.passed(), "{lemmas}");
        let t1 = check_theorem1(&f, &lens, 100, 5);
        assert!(t1.passed(), "{t1}");
        let trivial = check_theorem1(&f, &Lens::trivial(&ms), 100, 5);
        assert!(trivial.passed(), "{trivial}");
    }

    #[test]
    fn invalid_lens_skips_lemmas() {
        let (f, ms, _) = worked();
        let root = crate::lens::root_regions(&ms).remove(0);
        let bad = Lens::new(vec![root.clone(), Region::new(root.fragments().to_vec())]);
        let report = check_lemmas(&f, &bad);
        assert!(!report.passed());
        assert_eq!(report.checks[0].name, "lens_validity");
        assert_eq!(report.skipped.len(), 9);
    }

    #[test]
    fn every_fault_is_caught_by_its_targets() {
        let (f, _, lens) = worked();
        for fault in Fault::ALL {
            let report = check_with_fault(&f, &lens, fault, 20, 1).unwrap();
            for name in fault.targets() {
                let c = report.check(name).unwrap();
                assert!(!c.passed, "{fault:?} not caught by {name}\n{report}");
            }
        }
    }

    #[test]
    fn small_fuzz_passes() {
        let report = fuzz(1, 8, 2, 30, 10);
        assert_eq!(report.cases, 16);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn report_renders() {
        let (f, _, lens) = worked();
        let report = check_lemmas(&f, &lens);
        let table = report.to_string();
        assert!(table.contains("zero_varilet"));
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["checks"].as_array().unwrap().len(), 9);
    }
}
