//! Varilet lenses: nested families of constant-boundary regions of the middle
//! space, their supports, and the link pairs tying supports together.
//!
//! A region is stored as closed fragments of middle-space edges, at most one
//! per edge. A constant-boundary region cannot meet an edge in two disjoint
//! pieces (the pieces' inner ends would be boundary points at different
//! levels), so this loses nothing.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mlf::{MiddlePoint, MiddleSpace};
use crate::subdivision::Subdivision;
use crate::ttv::check_fragment;
use crate::union_find::DisjointSet;

/// Closed sub-interval `[lo, hi]` (in λ) of a middle-space edge, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub edge: usize,
    pub lo: f64,
    pub hi: f64,
}

/// Closed connected subset of the middle space, as edge fragments sorted by edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    fragments: Vec<Fragment>,
}

impl AsRef<[Fragment]> for Region {
    fn as_ref(&self) -> &[Fragment] {
        &self.fragments
    }
}

impl Region {
    pub fn new(mut fragments: Vec<Fragment>) -> Self {
        fragments.sort_by(|a, b| a.edge.cmp(&b.edge).then(a.lo.total_cmp(&b.lo)));
        Self { fragments }
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn length(&self) -> f64 {
        self.fragments.iter().map(|f| f.hi - f.lo).sum()
    }

    fn on_edge(&self, edge: usize) -> Option<&Fragment> {
        self.fragments
            .binary_search_by_key(&edge, |f| f.edge)
            .ok()
            .map(|k| &self.fragments[k])
    }

    /// Whether the region contains the germ of `edge` at its endpoint `v`.
    fn has_germ(&self, ms: &MiddleSpace, edge: usize, v: usize) -> bool {
        let Some(frag) = self.on_edge(edge) else {
            return false;
        };
        let me = ms.edge(edge);
        (me.lower == v && frag.lo == ms.level(v)) || (me.upper == v && frag.hi == ms.level(v))
    }

    /// Middle-space vertices contained in the region.
    pub fn vertices(&self, ms: &MiddleSpace) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for frag in &self.fragments {
            let me = ms.edge(frag.edge);
            if frag.lo == ms.level(me.lower) {
                out.insert(me.lower);
            }
            if frag.hi == ms.level(me.upper) {
                out.insert(me.upper);
            }
        }
        out
    }

    /// Boundary points: interior cut ends of fragments, and contained vertices
    /// with at least one incident edge germ outside the region.
    pub fn boundary(&self, ms: &MiddleSpace) -> Vec<MiddlePoint> {
        let mut out = Vec::new();
        for frag in &self.fragments {
            let (lo, hi) = ms.edge_levels(frag.edge);
            if frag.lo > lo {
                out.push(MiddlePoint::Edge {
                    edge: frag.edge,
                    level: frag.lo,
                });
            }
            if frag.hi < hi {
                out.push(MiddlePoint::Edge {
                    edge: frag.edge,
                    level: frag.hi,
                });
            }
        }
        for v in self.vertices(ms) {
            if ms.incident_edges(v).iter().any(|&e| !self.has_germ(ms, e, v)) {
                out.push(MiddlePoint::Vertex { vertex: v });
            }
        }
        out
    }

    pub fn is_connected(&self, ms: &MiddleSpace) -> bool {
        if self.fragments.is_empty() {
            return false;
        }
        let mut ds = DisjointSet::new(self.fragments.len());
        let mut first_at = HashMap::new();
        for (k, frag) in self.fragments.iter().enumerate() {
            let me = ms.edge(frag.edge);
            for v in [me.lower, me.upper] {
                if self.has_germ(ms, frag.edge, v) {
                    let j = *first_at.entry(v).or_insert(k);
                    ds.union(j, k);
                }
            }
        }
        let r = ds.find(0);
        (1..self.fragments.len()).all(|k| ds.find(k) == r)
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.fragments.iter().all(|f| {
            other
                .on_edge(f.edge)
                .is_some_and(|g| g.lo <= f.lo && f.hi <= g.hi)
        })
    }

    /// No common point, not even a shared vertex or fragment end.
    pub fn is_disjoint_from(&self, ms: &MiddleSpace, other: &Region) -> bool {
        let overlap = self.fragments.iter().any(|f| {
            other
                .on_edge(f.edge)
                .is_some_and(|g| f.lo <= g.hi && g.lo <= f.hi)
        });
        !overlap && self.vertices(ms).is_disjoint(&other.vertices(ms))
    }

    /// λ values over the region: `(min, max)`.
    pub fn level_range(&self) -> (f64, f64) {
        self.fragments
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| {
                (a.min(f.lo), b.max(f.hi))
            })
    }
}

/// Whole middle-space components, in component order.
pub fn root_regions(ms: &MiddleSpace) -> Vec<Region> {
    let mut per: Vec<Vec<Fragment>> = vec![Vec::new(); ms.component_count()];
    for e in 0..ms.edge_count() {
        let (lo, hi) = ms.edge_levels(e);
        per[ms.edge_component(e)].push(Fragment { edge: e, lo, hi });
    }
    per.into_iter().map(Region::new).collect()
}

/// Ordered collection of regions; position in the list is the region index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lens {
    regions: Vec<Region>,
}

impl Lens {
    /// Lens with the given order, unchecked; see [`validate_lens`].
    pub fn new(regions: Vec<Region>) -> Self {
        Self { regions }
    }

    /// Root regions only.
    pub fn trivial(ms: &MiddleSpace) -> Self {
        Self::new(root_regions(ms))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LensViolation {
    #[error("lens has no regions")]
    Empty,
    #[error("region {region}: {detail}")]
    BadFragment { region: usize, detail: String },
    #[error("region {0} is empty")]
    EmptyRegion(usize),
    #[error("region {region} repeats edge {edge}")]
    RepeatedEdge { region: usize, edge: usize },
    #[error("region {0} is not connected")]
    Disconnected(usize),
    #[error("region {region} has boundary levels {a} and {b}")]
    BoundaryNotConstant { region: usize, a: f64, b: f64 },
    #[error("regions {0} and {1} are neither strictly nested nor disjoint")]
    NotNested(usize, usize),
    #[error("region {0} has empty boundary but follows a non-root region")]
    RootNotInitial(usize),
    #[error("middle component {0} is not covered by a root region")]
    Uncovered(usize),
}

/// Violations found by [`validate_lens`]; empty iff the lens is valid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LensReport {
    pub violations: Vec<LensViolation>,
}

impl LensReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for LensReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid lens");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LensError {
    #[error("{0}")]
    Invalid(LensReport),
    #[error("seed does not reference a point of the middle space")]
    UnknownSeed,
    #[error("seed vertex `{0}` is not a vertex of the domain, or lies on a constant component")]
    UnknownSeedVertex(String),
    #[error("seed at level {seed} is not strictly {direction} level {level}")]
    SeedOutside {
        seed: f64,
        level: f64,
        direction: Direction,
    },
    #[error("cut level {0} is not finite")]
    BadLevel(f64),
    #[error("threshold region at level {0} is a whole component")]
    RegionIsComponent(f64),
    #[error("threshold region at level {0} has empty interior")]
    EmptyInterior(f64),
}

/// Checks region well-formedness, constant boundaries, strict nesting, root
/// placement and cover.
pub fn validate_lens(ms: &MiddleSpace, lens: &Lens) -> LensReport {
    let mut violations = Vec::new();
    if lens.is_empty() {
        violations.push(LensViolation::Empty);
    }
    let mut well_formed = vec![true; lens.len()];
    let mut is_root = vec![false; lens.len()];
    for (i, region) in lens.regions().iter().enumerate() {
        if region.fragments.is_empty() {
            violations.push(LensViolation::EmptyRegion(i));
            well_formed[i] = false;
            continue;
        }
        for frag in &region.fragments {
            if let Err(err) = check_fragment(ms, frag) {
                violations.push(LensViolation::BadFragment {
                    region: i,
                    detail: err.to_string(),
                });
                well_formed[i] = false;
            }
        }
        for w in region.fragments.windows(2) {
            if w[0].edge == w[1].edge {
                violations.push(LensViolation::RepeatedEdge {
                    region: i,
                    edge: w[0].edge,
                });
                well_formed[i] = false;
            }
        }
        if !well_formed[i] {
            continue;
        }
        if !region.is_connected(ms) {
            violations.push(LensViolation::Disconnected(i));
        }
        let boundary = region.boundary(ms);
        is_root[i] = boundary.is_empty();
        if let Some((first, rest)) = boundary.split_first() {
            let b = ms.point_level(*first);
            if let Some(p) = rest.iter().find(|p| ms.point_level(**p) != b) {
                violations.push(LensViolation::BoundaryNotConstant {
                    region: i,
                    a: b,
                    b: ms.point_level(*p),
                });
            }
        }
    }
    let mut seen_non_root = false;
    for i in 0..lens.len() {
        if !well_formed[i] {
            continue;
        }
        if is_root[i] && seen_non_root {
            violations.push(LensViolation::RootNotInitial(i));
        }
        seen_non_root |= !is_root[i];
    }
    let kept: Vec<Option<&Region>> = lens
        .regions()
        .iter()
        .zip(&well_formed)
        .map(|(r, &ok)| ok.then_some(r))
        .collect();
    if let Some((sub, edges)) = refine(ms, &kept) {
        let mut pairs = nest(&sub, &edges).conflicts;
        pairs.sort_unstable();
        pairs.dedup();
        violations.extend(pairs.into_iter().map(|(i, j)| LensViolation::NotNested(i, j)));
    }
    let mut covered = vec![false; ms.component_count()];
    for (i, region) in lens.regions().iter().enumerate() {
        if is_root[i] {
            if let Some(frag) = region.fragments.first() {
                covered[ms.edge_component(frag.edge)] = true;
            }
        }
    }
    for (c, ok) in covered.iter().enumerate() {
        if !ok {
            violations.push(LensViolation::Uncovered(c));
        }
    }
    LensReport { violations }
}

const NONE: usize = usize::MAX;

/// The middle space refined at every interior fragment end, with each region as
/// a sorted list of refined edges (empty for `None`).
fn refine(ms: &MiddleSpace, regions: &[Option<&Region>]) -> Option<(Subdivision, Vec<Vec<usize>>)> {
    let cuts = regions.iter().flatten().flat_map(|r| {
        r.fragments.iter().flat_map(|f| {
            let (lo, hi) = ms.edge_levels(f.edge);
            [
                (f.lo > lo).then_some((f.edge, f.lo)),
                (f.hi < hi).then_some((f.edge, f.hi)),
            ]
            .into_iter()
            .flatten()
        })
    });
    let sub = Subdivision::new(ms, cuts).ok()?;
    let mut edges = Vec::with_capacity(regions.len());
    for region in regions {
        let mut list = Vec::new();
        if let Some(region) = region {
            for f in &region.fragments {
                list.extend(sub.edges_between(f.edge, f.lo, f.hi)?);
            }
        }
        list.sort_unstable();
        edges.push(list);
    }
    Some((sub, edges))
}

struct Nesting {
    parent: Vec<Option<usize>>,
    /// Latest accepted region containing each refined edge.
    owner: Vec<usize>,
    conflicts: Vec<(usize, usize)>,
}

/// Scans regions in order. Region `j` is accepted when it lies strictly inside
/// the latest earlier region meeting it, and shares no point with any earlier
/// region that is not one of that region's ancestors. Otherwise `(i, j)` is
/// recorded for an offending `i < j` and `j` is left out of later checks.
fn nest(sub: &Subdivision, edges: &[Vec<usize>]) -> Nesting {
    let k = edges.len();
    let mut owner = vec![NONE; sub.edge_count()];
    let mut parent = vec![None; k];
    let mut stamp = vec![NONE; k];
    let mut conflicts = Vec::new();
    for (j, list) in edges.iter().enumerate() {
        let Some(&probe) = list.first() else { continue };
        let p = owner[probe];
        let mut bad = list.iter().find(|&&re| owner[re] != p).map(|&re| {
            let q = owner[re];
            if p == NONE {
                q
            } else if q == NONE {
                p
            } else {
                p.max(q)
            }
        });
        if bad.is_none() && p != NONE && edges[p].len() == list.len() {
            bad = Some(p);
        }
        if bad.is_none() {
            let mut a = (p != NONE).then_some(p);
            while let Some(x) = a {
                stamp[x] = j;
                a = parent[x];
            }
            'scan: for &re in list {
                for v in sub.endpoints(re) {
                    for &x in sub.incident_edges(v) {
                        let q = owner[x];
                        if q != NONE && stamp[q] != j {
                            bad = Some(q);
                            break 'scan;
                        }
                    }
                }
            }
        }
        match bad {
            Some(i) => conflicts.push((i, j)),
            None => {
                parent[j] = (p != NONE).then_some(p);
                for &re in list {
                    owner[re] = j;
                }
            }
        }
    }
    Nesting {
        parent,
        owner,
        conflicts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Up => "above",
            Direction::Down => "below",
        })
    }
}

/// Request for the component of `{λ >= level}` (up) or `{λ <= level}` (down)
/// containing `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCut {
    pub level: f64,
    pub direction: Direction,
    pub seed: MiddlePoint,
}

/// Flood fill over the middle space from `start`, staying on one side of `level`.
///
/// With `strict`, vertices at exactly `level` are not crossed: the result is
/// the closure of a component of the open set `{λ > level}` (or `<`).
/// Otherwise it is a component of the closed set `{λ >= level}` (or `<=`).
fn flood(ms: &MiddleSpace, level: f64, direction: Direction, start: usize, strict: bool) -> Region {
    let key = |x: f64| match direction {
        Direction::Up => x,
        Direction::Down => -x,
    };
    let t = key(level);
    let inside = |v: usize| {
        let k = key(ms.level(v));
        if strict {
            k > t
        } else {
            k >= t
        }
    };
    let mut visited = HashSet::from([start]);
    let mut stack = vec![start];
    let mut fragments = Vec::new();
    let mut taken = BTreeSet::new();
    while let Some(v) = stack.pop() {
        for &e in ms.incident_edges(v) {
            let me = ms.edge(e);
            let w = if me.lower == v { me.upper } else { me.lower };
            // The edge end farther from the threshold.
            let far = match direction {
                Direction::Up => me.upper,
                Direction::Down => me.lower,
            };
            if far == v && taken.insert(e) {
                let (lo, hi) = ms.edge_levels(e);
                let frag = match direction {
                    Direction::Up => Fragment {
                        edge: e,
                        lo: lo.max(level),
                        hi,
                    },
                    Direction::Down => Fragment {
                        edge: e,
                        lo,
                        hi: hi.min(level),
                    },
                };
                if frag.lo < frag.hi {
                    fragments.push(frag);
                }
            }
            if inside(w) && visited.insert(w) {
                stack.push(w);
            }
        }
    }
    Region::new(fragments)
}

/// The component of `{λ >= level}` (up) or `{λ <= level}` (down) containing the
/// cut's seed, which must lie strictly beyond the level.
pub fn threshold_region(ms: &MiddleSpace, cut: &ThresholdCut) -> Result<Region, LensError> {
    if !cut.level.is_finite() {
        return Err(LensError::BadLevel(cut.level));
    }
    let (seed_level, start) = match cut.seed {
        MiddlePoint::Vertex { vertex } => {
            if vertex >= ms.vertex_count() {
                return Err(LensError::UnknownSeed);
            }
            (ms.level(vertex), vertex)
        }
        MiddlePoint::Edge { edge, level } => {
            if edge >= ms.edge_count() {
                return Err(LensError::UnknownSeed);
            }
            let (lo, hi) = ms.edge_levels(edge);
            if !(lo <= level && level <= hi) {
                return Err(LensError::UnknownSeed);
            }
            let me = ms.edge(edge);
            let start = match cut.direction {
                Direction::Up => me.upper,
                Direction::Down => me.lower,
            };
            (level, start)
        }
    };
    let beyond = match cut.direction {
        Direction::Up => seed_level > cut.level,
        Direction::Down => seed_level < cut.level,
    };
    if !beyond {
        return Err(LensError::SeedOutside {
            seed: seed_level,
            level: cut.level,
            direction: cut.direction,
        });
    }
    let region = flood(ms, cut.level, cut.direction, start, false);
    if region.fragments.is_empty() {
        return Err(LensError::EmptyInterior(cut.level));
    }
    if region.boundary(ms).is_empty() {
        return Err(LensError::RegionIsComponent(cut.level));
    }
    Ok(region)
}

/// Orders regions into a lens: roots first (one per middle component), then by
/// inclusion depth, descending length, and input order. The result is validated.
pub fn assemble_lens(ms: &MiddleSpace, regions: Vec<Region>) -> Result<Lens, LensError> {
    let lengths: Vec<f64> = regions.iter().map(Region::length).collect();
    let mut depth = vec![0usize; regions.len()];
    let mut by_length: Vec<usize> = (0..regions.len()).collect();
    by_length.sort_by(|&a, &b| lengths[b].total_cmp(&lengths[a]).then(a.cmp(&b)));
    let sorted: Vec<Option<&Region>> = by_length.iter().map(|&k| Some(&regions[k])).collect();
    if let Some((sub, edges)) = refine(ms, &sorted) {
        let parent = nest(&sub, &edges).parent;
        for (pos, &k) in by_length.iter().enumerate() {
            if let Some(p) = parent[pos] {
                depth[k] = depth[by_length[p]] + 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| {
        depth[a]
            .cmp(&depth[b])
            .then(lengths[b].total_cmp(&lengths[a]))
            .then(a.cmp(&b))
    });
    let mut all = root_regions(ms);
    let mut slots: Vec<Option<Region>> = regions.into_iter().map(Some).collect();
    all.extend(
        order
            .into_iter()
            .map(|k| slots[k].take().expect("each region once")),
    );
    let lens = Lens::new(all);
    let report = validate_lens(ms, &lens);
    if report.is_valid() {
        Ok(lens)
    } else {
        Err(LensError::Invalid(report))
    }
}

/// Lens from threshold cuts; roots are added automatically.
pub fn build_threshold_lens(ms: &MiddleSpace, cuts: &[ThresholdCut]) -> Result<Lens, LensError> {
    let regions = cuts
        .iter()
        .map(|cut| threshold_region(ms, cut))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_lens(ms, regions)
}

/// An extremum whose super- or sublevel component dies when it merges into an
/// older one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPair {
    pub extremum: usize,
    pub level: f64,
    pub direction: Direction,
}

impl BranchPair {
    pub fn persistence(&self, ms: &MiddleSpace) -> f64 {
        (ms.level(self.extremum) - self.level).abs()
    }

    /// Closure of the component born at the extremum, just before it merges.
    pub fn region(&self, ms: &MiddleSpace) -> Region {
        flood(ms, self.level, self.direction, self.extremum, true)
    }
}

/// Pairs extrema with the level at which their component merges into an older
/// one, sweeping from the top (`Up`, maxima) or from the bottom (`Down`, minima).
/// Older means more extreme value; ties go to the lower vertex index.
pub fn branch_pairs(ms: &MiddleSpace, direction: Direction) -> Vec<BranchPair> {
    let n = ms.vertex_count();
    let key = |v: usize| match direction {
        Direction::Up => ms.level(v),
        Direction::Down => -ms.level(v),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    let older = |a: usize, b: usize| key(a) > key(b) || (key(a) == key(b) && a < b);

    let mut ds = DisjointSet::new(n);
    let mut elder = vec![usize::MAX; n];
    let mut processed = vec![false; n];
    let mut pairs = Vec::new();
    for &v in &order {
        let level = ms.level(v);
        let mut attached = false;
        for &e in ms.incident_edges(v) {
            let me = ms.edge(e);
            let w = if me.lower == v { me.upper } else { me.lower };
            if !processed[w] {
                continue;
            }
            let rw = ds.find(w);
            if !attached {
                let r = ds.union(v, rw);
                elder[r] = elder[rw];
                attached = true;
                continue;
            }
            let rv = ds.find(v);
            if rv == rw {
                continue;
            }
            let (old, young) = if older(elder[rv], elder[rw]) {
                (elder[rv], elder[rw])
            } else {
                (elder[rw], elder[rv])
            };
            pairs.push(BranchPair {
                extremum: young,
                level,
                direction,
            });
            let r = ds.union(rv, rw);
            elder[r] = old;
        }
        if !attached {
            elder[v] = v;
        }
        processed[v] = true;
    }
    pairs
}

/// Automatic multiresolution lens from super- and sublevel branch pairs.
///
/// Candidate regions are the components born at each paired extremum; those
/// with persistence below `min_amplitude` are dropped. The rest are admitted
/// greedily (most persistent first, then longest) whenever they are strictly
/// nested with or disjoint from every region already admitted.
pub fn build_branch_lens(ms: &MiddleSpace, min_amplitude: f64) -> Lens {
    let mut candidates: Vec<(BranchPair, f64, Region)> = [Direction::Up, Direction::Down]
        .into_iter()
        .flat_map(|d| branch_pairs(ms, d))
        .filter(|p| p.persistence(ms) >= min_amplitude)
        .map(|p| {
            let region = p.region(ms);
            (p, p.persistence(ms), region)
        })
        .collect();
    candidates.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then(b.2.length().total_cmp(&a.2.length()))
            .then((a.0.direction == Direction::Down).cmp(&(b.0.direction == Direction::Down)))
            .then(a.0.extremum.cmp(&b.0.extremum))
    });
    let regions: Vec<Region> = candidates
        .into_iter()
        .map(|(_, _, r)| r)
        .filter(|r| !r.fragments.is_empty() && !r.boundary(ms).is_empty())
        .collect();
    let refs: Vec<Option<&Region>> = regions.iter().map(Some).collect();
    let (sub, edges) = refine(ms, &refs).expect("flooded regions are well formed");
    // Accepted regions containing each refined edge.
    let mut chains: Vec<Vec<usize>> = vec![Vec::new(); sub.edge_count()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut accepted: Vec<Region> = Vec::new();
    let mut shared: HashMap<usize, usize> = HashMap::new();
    for (region, list) in regions.into_iter().zip(&edges) {
        shared.clear();
        for &re in list {
            for &a in &chains[re] {
                *shared.entry(a).or_insert(0) += 1;
            }
        }
        let c = list.len();
        let nested = shared
            .iter()
            .all(|(&a, &k)| (k == c && sizes[a] > c) || (k == sizes[a] && c > sizes[a]));
        let compatible = nested
            && list.iter().all(|&re| {
                sub.endpoints(re).into_iter().all(|v| {
                    sub.incident_edges(v)
                        .iter()
                        .all(|&x| chains[x].iter().all(|a| shared.contains_key(a)))
                })
            });
        if compatible {
            let id = sizes.len();
            sizes.push(c);
            for &re in list {
                chains[re].push(id);
            }
            accepted.push(region);
        }
    }
    assemble_lens(ms, accepted).expect("greedy admission keeps the family laminar")
}

/// A lens checked against its middle space, with every region and support
/// expressed on the middle space refined at all cut points.
#[derive(Debug, Clone)]
pub struct ResolvedLens {
    lens: Lens,
    subdivision: Arc<Subdivision>,
    /// Pre-order interval of each region in the nesting forest.
    span: Vec<(usize, usize)>,
    region_edges: Vec<Vec<usize>>,
    boundary: Vec<Vec<usize>>,
    boundary_level: Vec<Option<f64>>,
    predecessor: Vec<Option<usize>>,
    successors: Vec<Vec<usize>>,
    component: Vec<usize>,
    owner: Vec<usize>,
    support_edges: Vec<Vec<usize>>,
    boundary_class: Vec<Option<usize>>,
    class_count: usize,
}

impl ResolvedLens {
    pub fn new(ms: &MiddleSpace, lens: &Lens) -> Result<Self, LensError> {
        let report = validate_lens(ms, lens);
        if !report.is_valid() {
            return Err(LensError::Invalid(report));
        }
        let refs: Vec<Option<&Region>> = lens.regions().iter().map(Some).collect();
        let (sub, region_edges) = refine(ms, &refs).expect("fragments validated against their edges");
        let n = lens.len();
        let Nesting {
            parent: predecessor,
            owner,
            ..
        } = nest(&sub, &region_edges);

        let mut successors = vec![Vec::new(); n];
        let mut roots = Vec::new();
        for (i, p) in predecessor.iter().enumerate() {
            match p {
                Some(k) => successors[*k].push(i),
                None => roots.push(i),
            }
        }
        let mut span = vec![(0, 0); n];
        let mut clock = 0;
        for &r in &roots {
            let mut stack = vec![(r, 0)];
            while let Some((i, next)) = stack.pop() {
                if next == 0 {
                    span[i].0 = clock;
                    clock += 1;
                }
                if let Some(&c) = successors[i].get(next) {
                    stack.push((i, next + 1));
                    stack.push((c, 0));
                } else {
                    span[i].1 = clock;
                }
            }
        }

        let mut boundary = Vec::with_capacity(n);
        for (i, edges) in region_edges.iter().enumerate() {
            let mut verts = BTreeSet::new();
            for &re in edges {
                for v in sub.endpoints(re) {
                    if sub
                        .incident_edges(v)
                        .iter()
                        .any(|&x| !contains(&span, i, owner[x]))
                    {
                        verts.insert(v);
                    }
                }
            }
            boundary.push(verts.into_iter().collect::<Vec<_>>());
        }
        let boundary_level: Vec<Option<f64>> = boundary
            .iter()
            .map(|b| b.first().map(|&v| sub.level(v)))
            .collect();
        let component: Vec<usize> = region_edges.iter().map(|r| sub.edge_component(r[0])).collect();

        let mut support_edges = vec![Vec::new(); n];
        for (re, &i) in owner.iter().enumerate() {
            support_edges[i].push(re);
        }
        debug_assert!(support_edges.iter().all(|s| !s.is_empty()));

        let mut ds = DisjointSet::new(sub.vertex_count());
        let mut on_boundary = vec![false; sub.vertex_count()];
        for b in &boundary {
            for &v in b {
                on_boundary[v] = true;
                ds.union(b[0], v);
            }
        }
        let (labels, _) = ds.labels();
        let mut dense = vec![usize::MAX; sub.vertex_count()];
        let mut class_count = 0;
        let mut boundary_class = vec![None; sub.vertex_count()];
        for v in 0..sub.vertex_count() {
            if on_boundary[v] {
                if dense[labels[v]] == usize::MAX {
                    dense[labels[v]] = class_count;
                    class_count += 1;
                }
                boundary_class[v] = Some(dense[labels[v]]);
            }
        }

        Ok(Self {
            lens: lens.clone(),
            subdivision: Arc::new(sub),
            span,
            region_edges,
            boundary,
            boundary_level,
            predecessor,
            successors,
            component,
            owner,
            support_edges,
            boundary_class,
            class_count,
        })
    }

    pub fn lens(&self) -> &Lens {
        &self.lens
    }

    pub fn len(&self) -> usize {
        self.lens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lens.is_empty()
    }

    pub fn subdivision(&self) -> &Arc<Subdivision> {
        &self.subdivision
    }

    pub fn is_root(&self, i: usize) -> bool {
        self.predecessor[i].is_none()
    }

    pub fn root_count(&self) -> usize {
        self.predecessor.iter().filter(|p| p.is_none()).count()
    }

    pub fn predecessor(&self, i: usize) -> Option<usize> {
        self.predecessor[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.successors[i]
    }

    /// Middle component containing region `i`.
    pub fn component(&self, i: usize) -> usize {
        self.component[i]
    }

    /// Refined edges of region `i`.
    pub fn region_edges(&self, i: usize) -> &[usize] {
        &self.region_edges[i]
    }

    pub fn region_contains(&self, i: usize, refined_edge: usize) -> bool {
        contains(&self.span, i, self.owner[refined_edge])
    }

    /// Refined vertices on the boundary of region `i`.
    pub fn boundary(&self, i: usize) -> &[usize] {
        &self.boundary[i]
    }

    /// Common λ value of the boundary of region `i` (`None` for roots).
    pub fn boundary_level(&self, i: usize) -> Option<f64> {
        self.boundary_level[i]
    }

    /// Overrides the recorded boundary level. Used to exercise the lemma checks.
    pub fn set_boundary_level(&mut self, i: usize, level: Option<f64>) {
        self.boundary_level[i] = level;
    }

    /// Refined edges of support `i`.
    pub fn support_edges(&self, i: usize) -> &[usize] {
        &self.support_edges[i]
    }

    /// Index of the support containing a refined edge.
    pub fn owner(&self, refined_edge: usize) -> usize {
        self.owner[refined_edge]
    }

    /// Class of a refined vertex under "lies on a common region boundary"
    /// (transitively closed); `None` for vertices on no boundary.
    pub fn boundary_class(&self, v: usize) -> Option<usize> {
        self.boundary_class[v]
    }

    pub fn boundary_class_count(&self) -> usize {
        self.class_count
    }

    /// Whether region `j` is contained in region `i`.
    pub fn region_within(&self, j: usize, i: usize) -> bool {
        contains(&self.span, i, j)
    }

    /// Support `i` as middle-space fragments (consecutive refined edges merged).
    pub fn support(&self, i: usize) -> Support {
        let sub = &self.subdivision;
        let mut fragments: Vec<Fragment> = Vec::new();
        for &re in &self.support_edges[i] {
            let [a, b] = sub.endpoints(re);
            let edge = sub.parent_edge(re);
            match fragments.last_mut() {
                Some(last) if last.edge == edge && last.hi == sub.level(a) => last.hi = sub.level(b),
                _ => fragments.push(Fragment {
                    edge,
                    lo: sub.level(a),
                    hi: sub.level(b),
                }),
            }
        }
        let mut boundary = BTreeSet::new();
        for &re in &self.support_edges[i] {
            for v in sub.endpoints(re) {
                if sub.incident_edges(v).iter().any(|&x| self.owner[x] != i) {
                    boundary.insert(v);
                }
            }
        }
        Support {
            index: i,
            fragments,
            boundary: boundary.into_iter().map(|v| sub.origin(v)).collect(),
        }
    }
}

/// Whether region `j` lies in region `i`, from pre-order intervals.
fn contains(span: &[(usize, usize)], i: usize, j: usize) -> bool {
    span[i].0 <= span[j].0 && span[j].1 <= span[i].1
}

/// Closure of a region minus every later region.
#[derive(Debug, Clone, PartialEq)]
pub struct Support {
    pub index: usize,
    pub fragments: Vec<Fragment>,
    pub boundary: Vec<MiddlePoint>,
}

impl AsRef<[Fragment]> for Support {
    fn as_ref(&self) -> &[Fragment] {
        &self.fragments
    }
}

/// Supports of every region of a valid lens.
pub fn supports(ms: &MiddleSpace, lens: &Lens) -> Result<Vec<Support>, LensError> {
    let resolved = ResolvedLens::new(ms, lens)?;
    Ok((0..resolved.len()).map(|i| resolved.support(i)).collect())
}

/// A point on the boundary of a non-root region shared with its predecessor's
/// support. Any constant-boundary function takes equal values at both points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPair {
    pub predecessor: usize,
    pub successor: usize,
    /// Refined vertex in the predecessor's support, on the successor's boundary.
    pub predecessor_point: usize,
    /// Refined vertex on the successor's boundary, in its own support when one
    /// exists there.
    pub successor_point: usize,
    pub level: f64,
}

/// One link pair per non-root region.
pub fn link_pairs(lens: &ResolvedLens) -> Vec<LinkPair> {
    let sub = lens.subdivision();
    let touches = |v: usize, s: usize| sub.incident_edges(v).iter().any(|&re| lens.owner(re) == s);
    let mut out = Vec::new();
    for i in 0..lens.len() {
        let Some(k) = lens.predecessor(i) else { continue };
        let boundary = lens.boundary(i);
        let p = boundary
            .iter()
            .copied()
            .find(|&v| touches(v, k))
            .expect("a successor's boundary meets its predecessor's support");
        let q = boundary.iter().copied().find(|&v| touches(v, i)).unwrap_or(p);
        out.push(LinkPair {
            predecessor: k,
            successor: i,
            predecessor_point: p,
            successor_point: q,
            level: lens.boundary_level(i).expect("non-root regions have a boundary"),
        });
    }
    out
}
