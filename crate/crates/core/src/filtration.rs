//! ε-consistent collections, the consistency filtration, and interleavings
//! between coarsening filtrations.

use thiserror::Error;

use crate::finspace::{FiniteSpace, OpenId, PartialCover, SpaceId, TopologyError};
use crate::sheaf::{Assignment, MetricSheaf, SheafError};

/// Local radii this close (relative) are one breakpoint.
pub const BREAKPOINT_MERGE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiltrationError {
    #[error("breakpoints must be positive and strictly increasing")]
    NotIncreasing,
    #[error("expected {expected} covers for {breakpoints} breakpoints, got {got}")]
    CoverCount { breakpoints: usize, expected: usize, got: usize },
    #[error("cover {index} does not refine cover {}", index + 1)]
    NotCoarsening { index: usize },
    #[error("filtrations live on different spaces")]
    SpaceMismatch,
    #[error("base map does not match the spaces")]
    BadMap,
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Piecewise-constant partial covers indexed by a threshold.
///
/// `covers[i]` holds on `(t_i, t_{i+1}]` with `t_0 = 0` and `t_{k+1} = +∞`;
/// at thresholds `t ≤ 0` the cover is empty.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseningFiltration {
    space: SpaceId,
    breakpoints: Vec<f64>,
    covers: Vec<PartialCover>,
}

impl CoarseningFiltration {
    pub fn new(space: SpaceId, breakpoints: Vec<f64>, covers: Vec<PartialCover>) -> Result<Self, FiltrationError> {
        if covers.len() != breakpoints.len() + 1 {
            return Err(FiltrationError::CoverCount {
                breakpoints: breakpoints.len(),
                expected: breakpoints.len() + 1,
                got: covers.len(),
            });
        }
        let increasing = breakpoints.first().is_none_or(|&t| t > 0.0)
            && breakpoints.windows(2).all(|w| w[0] < w[1])
            && breakpoints.iter().all(|t| t.is_finite());
        if !increasing {
            return Err(FiltrationError::NotIncreasing);
        }
        for c in &covers {
            if c.space() != space {
                return Err(FiltrationError::SpaceMismatch);
            }
        }
        for (i, w) in covers.windows(2).enumerate() {
            if !w[0].refines(&w[1])? {
                return Err(FiltrationError::NotCoarsening { index: i });
            }
        }
        Ok(Self { space, breakpoints, covers })
    }

    /// One cover for every positive threshold.
    pub fn constant(cover: PartialCover) -> Self {
        Self { space: cover.space(), breakpoints: Vec::new(), covers: vec![cover] }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn covers(&self) -> &[PartialCover] {
        &self.covers
    }

    /// Index of the interval containing `t`, or `None` for `t ≤ 0`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        if t <= 0.0 {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b < t))
    }

    pub fn at(&self, t: f64) -> PartialCover {
        match self.index_at(t) {
            Some(i) => self.covers[i].clone(),
            None => PartialCover::empty(self.space),
        }
    }

    /// The same covers with every breakpoint moved by `delta`.
    pub fn shifted(&self, delta: f64) -> Result<Self, FiltrationError> {
        let bps = self.breakpoints.iter().map(|t| t + delta).collect();
        Self::new(self.space, bps, self.covers.clone())
    }
}

/// Opens whose local consistency radius is strictly below `eps`.
pub fn epsilon_consistent_opens(
    sheaf: &MetricSheaf,
    a: &Assignment,
    eps: f64,
) -> Result<Vec<OpenId>, FiltrationError> {
    let radii = sheaf.local_radii(a)?;
    Ok(sheaf.space().open_ids().filter(|u| radii[u.0] < eps).collect())
}

/// Inclusion-maximal nonempty members of a family of opens.
fn maximal(space: &FiniteSpace, opens: &[OpenId]) -> Vec<OpenId> {
    opens
        .iter()
        .copied()
        .filter(|&u| u != space.empty())
        .filter(|&u| !opens.iter().any(|&v| v != u && space.is_subset(u, v)))
        .collect()
}

/// The coarsest ε-consistent collection: maximal ε-consistent opens, `∅` left out.
pub fn maximal_consistent_collection(
    sheaf: &MetricSheaf,
    a: &Assignment,
    eps: f64,
) -> Result<PartialCover, FiltrationError> {
    let opens = epsilon_consistent_opens(sheaf, a, eps)?;
    Ok(PartialCover::from_opens(sheaf.space(), &maximal(sheaf.space(), &opens))?)
}

/// Sorts values and merges ones within [`BREAKPOINT_MERGE`] (relative) into
/// the largest of their run. Returns the representative of each input.
pub(crate) fn cluster(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut reps = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() {
            let (prev, next) = (values[order[end - 1]], values[order[end]]);
            if next - prev > BREAKPOINT_MERGE * next.abs().max(1.0) {
                break;
            }
            end += 1;
        }
        let rep = values[order[end - 1]];
        for &i in &order[start..end] {
            reps[i] = rep;
        }
        start = end;
    }
    reps
}

/// `ε ↦ maximal_consistent_collection(ε)` as a coarsening filtration.
/// Breakpoints are the distinct positive local consistency radii.
pub fn consistency_filtration(sheaf: &MetricSheaf, a: &Assignment) -> Result<CoarseningFiltration, FiltrationError> {
    let space = sheaf.space();
    let radii = cluster(&sheaf.local_radii(a)?);
    let mut breakpoints: Vec<f64> = radii.iter().copied().filter(|&r| r > 0.0).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let levels = std::iter::once(0.0).chain(breakpoints.iter().copied());
    let covers = levels
        .map(|t| {
            let opens: Vec<OpenId> = space.open_ids().filter(|u| radii[u.0] <= t).collect();
            PartialCover::from_opens(space, &maximal(space, &opens))
        })
        .collect::<Result<Vec<_>, _>>()?;
    CoarseningFiltration::new(space.id(), breakpoints, covers)
}

/// Order-preserving reparametrization of thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shift {
    /// `t ↦ t + δ`
    Translate(f64),
    /// `t ↦ scale·t + offset`, `scale > 0`
    Affine { scale: f64, offset: f64 },
}

impl Shift {
    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            Shift::Translate(d) => t + d,
            Shift::Affine { scale, offset } => scale * t + offset,
        }
    }

    /// `inf φ⁻¹(t)`.
    pub fn preimage(&self, t: f64) -> f64 {
        match *self {
            Shift::Translate(d) => t - d,
            Shift::Affine { scale, offset } => (t - offset) / scale,
        }
    }

    pub fn then(&self, outer: &Shift) -> Shift {
        let (a1, b1) = self.coefficients();
        let (a2, b2) = outer.coefficients();
        Shift::Affine { scale: a2 * a1, offset: a2 * b1 + b2 }
    }

    fn coefficients(&self) -> (f64, f64) {
        match *self {
            Shift::Translate(d) => (1.0, d),
            Shift::Affine { scale, offset } => (scale, offset),
        }
    }

    /// `sup_t |φ(t) − t|` over all real `t`.
    pub fn max_displacement(&self) -> f64 {
        match *self {
            Shift::Translate(d) => d.abs(),
            Shift::Affine { scale: 1.0, offset } => offset.abs(),
            Shift::Affine { .. } => f64::INFINITY,
        }
    }
}

/// Shifts `φ: F → G`, `ψ: G → F` and point maps `f: X → Y`, `g: Y → X`
/// (identity when `None`), constant in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterleavingCandidate {
    pub phi: Shift,
    pub psi: Shift,
    pub f: Option<Vec<usize>>,
    pub g: Option<Vec<usize>>,
    pub eps: f64,
}

impl InterleavingCandidate {
    /// `φ = ψ = t + δ` with identity maps, checked against `eps`.
    pub fn translation(delta: f64, eps: f64) -> Self {
        Self { phi: Shift::Translate(delta), psi: Shift::Translate(delta), f: None, g: None, eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `|φ(t) − t| < ε`
    PhiDisplacement,
    /// `|ψ(t) − t| < ε`
    PsiDisplacement,
    /// `F(inf φ⁻¹(t))` refines `f⁻¹(G(t))`
    MorphismF,
    /// `G(inf ψ⁻¹(t))` refines `g⁻¹(F(t))`
    MorphismG,
    /// `F(inf (ψ∘φ)⁻¹(t))` refines `F(t)`
    RoundTripF,
    /// `G(inf (φ∘ψ)⁻¹(t))` refines `G(t)`
    RoundTripG,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub holds: bool,
    /// First failing condition and a threshold where it fails.
    pub witness: Option<(Condition, f64)>,
}

impl Verdict {
    const PASS: Verdict = Verdict { holds: true, witness: None };

    fn fail(c: Condition, t: f64) -> Self {
        Verdict { holds: false, witness: Some((c, t)) }
    }
}

/// Thresholds at which every piecewise-constant comparison below is
/// decided: the jumps, midpoints between them, and points on either side.
fn probe_thresholds(mut jumps: Vec<f64>) -> Vec<f64> {
    jumps.retain(|t| t.is_finite());
    jumps.sort_by(f64::total_cmp);
    jumps.dedup_by(|a, b| (*a - *b).abs() <= BREAKPOINT_MERGE * a.abs().max(1.0));
    let mut probes = Vec::with_capacity(2 * jumps.len() + 2);
    match (jumps.first(), jumps.last()) {
        (Some(&lo), Some(&hi)) => {
            probes.push(lo - 1.0);
            for w in jumps.windows(2) {
                probes.push(w[0]);
                probes.push(0.5 * (w[0] + w[1]));
            }
            probes.push(hi);
            probes.push(hi + 1.0);
        }
        _ => probes.push(1.0),
    }
    probes
}

/// Where `t ↦ F(shift.preimage(t))` can change.
fn jumps_through<'a>(f: &'a CoarseningFiltration, shift: &Shift) -> impl Iterator<Item = f64> + 'a {
    let shift = *shift;
    std::iter::once(0.0).chain(f.breakpoints.iter().copied()).map(move |t| shift.apply(t))
}

fn jumps(f: &CoarseningFiltration) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(0.0).chain(f.breakpoints.iter().copied())
}

fn pulled_back(cover: &PartialCover, domain: SpaceId, map: Option<&[usize]>) -> Result<PartialCover, FiltrationError> {
    match map {
        None if cover.space() == domain => Ok(cover.clone()),
        None => Err(FiltrationError::SpaceMismatch),
        Some(m) if m.len() == domain.n_points && m.iter().all(|&y| y < cover.space().n_points) => {
            Ok(cover.preimage(domain, m))
        }
        Some(_) => Err(FiltrationError::BadMap),
    }
}

/// Checks that `(φ, f)` is a morphism `F → G`: `F(inf φ⁻¹(t))` refines
/// `f⁻¹(G(t))` for every `t`. Returns a failing threshold, if any.
pub fn check_filtration_morphism(
    from: &CoarseningFiltration,
    to: &CoarseningFiltration,
    phi: &Shift,
    map: Option<&[usize]>,
) -> Result<Option<f64>, FiltrationError> {
    let probes = probe_thresholds(jumps_through(from, phi).chain(jumps(to)).collect());
    for t in probes {
        let source = from.at(phi.preimage(t));
        let target = pulled_back(&to.at(t), from.space, map)?;
        if !source.refines(&target)? {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

fn check_round_trip(f: &CoarseningFiltration, shift: &Shift) -> Option<f64> {
    probe_thresholds(jumps_through(f, shift).chain(jumps(f)).collect())
        .into_iter()
        .find(|&t| !f.at(shift.preimage(t)).refines(&f.at(t)).expect("same space"))
}

/// Checks every condition of an ε-interleaving between `F` and `G`.
pub fn check_interleaving(
    f: &CoarseningFiltration,
    g: &CoarseningFiltration,
    c: &InterleavingCandidate,
) -> Result<Verdict, FiltrationError> {
    if c.phi.max_displacement() >= c.eps {
        return Ok(Verdict::fail(Condition::PhiDisplacement, 0.0));
    }
    if c.psi.max_displacement() >= c.eps {
        return Ok(Verdict::fail(Condition::PsiDisplacement, 0.0));
    }
    if let Some(t) = check_filtration_morphism(f, g, &c.phi, c.f.as_deref())? {
        return Ok(Verdict::fail(Condition::MorphismF, t));
    }
    if let Some(t) = check_filtration_morphism(g, f, &c.psi, c.g.as_deref())? {
        return Ok(Verdict::fail(Condition::MorphismG, t));
    }
    if let Some(t) = check_round_trip(f, &c.phi.then(&c.psi)) {
        return Ok(Verdict::fail(Condition::RoundTripF, t));
    }
    if let Some(t) = check_round_trip(g, &c.psi.then(&c.phi)) {
        return Ok(Verdict::fail(Condition::RoundTripG, t));
    }
    Ok(Verdict::PASS)
}

/// Least `δ` among `0` and all gaps between breakpoints (and `0`) such that
/// the translations `t + δ` with identity maps form morphisms both ways.
/// Any `ε > δ` then gives an interleaving, so `δ` bounds the interleaving
/// distance from above. `+∞` when no candidate works.
pub fn interleaving_upper_bound(f: &CoarseningFiltration, g: &CoarseningFiltration) -> Result<f64, FiltrationError> {
    if f.space != g.space {
        return Err(FiltrationError::SpaceMismatch);
    }
    let points: Vec<f64> = jumps(f).chain(jumps(g)).collect();
    let mut candidates: Vec<f64> = points
        .iter()
        .flat_map(|&x| points.iter().map(move |&y| (x - y).abs()))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for delta in candidates {
        let shift = Shift::Translate(delta);
        if check_filtration_morphism(f, g, &shift, None)?.is_none()
            && check_filtration_morphism(g, f, &shift, None)?.is_none()
        {
            return Ok(delta);
        }
    }
    Ok(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{abc_space, fix_abc, fix_abc_assignment, two_chain};
    use crate::metric::Value;

    fn labels(space: &FiniteSpace, cover: &PartialCover) -> Vec<String> {
        let mut out: Vec<String> = cover.members().iter().map(|m| space.label(space.open_id(m).unwrap())).collect();
        out.sort();
        out
    }

    #[test]
    fn consistent_opens_by_regime() {
        let s = fix_abc(1.0);
        let a = fix_abc_assignment(&s, 1.0);
        let x = s.space();
        let names = |eps| {
            epsilon_consistent_opens(&s, &a, eps).unwrap().into_iter().map(|u| x.label(u)).collect::<Vec<_>>()
        };
        assert_eq!(names(0.4), ["{}", "{A}"]);
        assert_eq!(names(0.6), ["{}", "{A}", "{A,B}", "{A,C}"]);
        assert_eq!(names(1.0).len(), 5);
        // strict: at exactly ½ the pair opens are not yet consistent
        assert_eq!(names(0.5), ["{}", "{A}"]);
    }

    #[test]
    fn maximal_collections() {
        let s = fix_abc(1.0);
        let a = fix_abc_assignment(&s, 1.0);
        let x = s.space();
        for (eps, want) in [
            (0.01, vec!["{A}"]),
            (0.5, vec!["{A}"]),
            (0.6, vec!["{A,B}", "{A,C}"]),
            (2.0 / 3.0, vec!["{A,B}", "{A,C}"]),
            (0.7, vec!["{A,B,C}"]),
        ] {
            assert_eq!(labels(x, &maximal_consistent_collection(&s, &a, eps).unwrap()), want, "eps={eps}");
        }
        assert!(maximal_consistent_collection(&s, &a, 0.0).unwrap().is_empty());
    }

    #[test]
    fn worked_filtration() {
        let s = fix_abc(1.0);
        let a = fix_abc_assignment(&s, 1.0);
        let cf = consistency_filtration(&s, &a).unwrap();
        assert_eq!(cf.breakpoints().len(), 2);
        assert!((cf.breakpoints()[0] - 0.5).abs() < 1e-12);
        assert!((cf.breakpoints()[1] - 2.0 / 3.0).abs() < 1e-12);
        let x = s.space();
        let got: Vec<Vec<String>> = cf.covers().iter().map(|c| labels(x, c)).collect();
        assert_eq!(got, vec![vec!["{A}"], vec!["{A,B}", "{A,C}"], vec!["{A,B,C}"]]);
        for t in [0.1, 0.5, 0.55, 2.0 / 3.0, 5.0] {
            assert_eq!(cf.at(t), maximal_consistent_collection(&s, &a, t).unwrap(), "t={t}");
        }
        assert!(cf.at(0.0).is_empty());
    }

    #[test]
    fn sections_give_one_cover() {
        let s = fix_abc(1.0);
        let sec = s.section_from_top(Value::scalar(3.0)).unwrap();
        let cf = consistency_filtration(&s, &sec).unwrap();
        assert!(cf.breakpoints().is_empty());
        assert_eq!(labels(s.space(), &cf.covers()[0]), ["{A,B,C}"]);
    }

    #[test]
    fn chain_filtration() {
        let (s, a) = two_chain(0.0, 3.0);
        let cf = consistency_filtration(&s, &a).unwrap();
        assert_eq!(cf.breakpoints(), [3.0]);
        let got: Vec<Vec<String>> = cf.covers().iter().map(|c| labels(s.space(), c)).collect();
        assert_eq!(got, vec![vec!["{p}"], vec!["{p,q}"]]);
    }

    #[test]
    fn near_equal_radii_merge() {
        let reps = cluster(&[0.5, 0.5 + 1e-14, 0.25, 0.0]);
        assert_eq!(reps, [0.5 + 1e-14, 0.5 + 1e-14, 0.25, 0.0]);
    }

    #[test]
    fn construction_checks() {
        let x = abc_space();
        let id = |l: &[&str]| x.open_by_labels(l).unwrap();
        let ab = PartialCover::from_opens(&x, &[id(&["A", "B"])]).unwrap();
        let ac = PartialCover::from_opens(&x, &[id(&["A", "C"])]).unwrap();
        assert_eq!(
            CoarseningFiltration::new(x.id(), vec![1.0], vec![ab.clone(), ac.clone()]),
            Err(FiltrationError::NotCoarsening { index: 0 })
        );
        assert_eq!(
            CoarseningFiltration::new(x.id(), vec![1.0, 1.0], vec![ab.clone(); 3]),
            Err(FiltrationError::NotIncreasing)
        );
        assert!(matches!(
            CoarseningFiltration::new(x.id(), vec![1.0], vec![ab]),
            Err(FiltrationError::CoverCount { .. })
        ));
    }

    fn worked_cf() -> CoarseningFiltration {
        let s = fix_abc(1.0);
        consistency_filtration(&s, &fix_abc_assignment(&s, 1.0)).unwrap()
    }

    #[test]
    fn self_interleaving() {
        let cf = worked_cf();
        let v = check_interleaving(&cf, &cf, &InterleavingCandidate::translation(0.0, 1e-3)).unwrap();
        assert!(v.holds);
        assert_eq!(interleaving_upper_bound(&cf, &cf).unwrap(), 0.0);
    }

    #[test]
    fn shifted_pair() {
        let f = worked_cf();
        let g = f.shifted(0.1).unwrap();
        assert!(check_interleaving(&f, &g, &InterleavingCandidate::translation(0.1, 0.11)).unwrap().holds);
        let v = check_interleaving(&f, &g, &InterleavingCandidate::translation(0.1, 0.05)).unwrap();
        assert_eq!(v.witness.map(|w| w.0), Some(Condition::PhiDisplacement));
        // a shift smaller than the gap: F(t − 0.05) is coarser than G(t) = F(t − 0.1)
        let v = check_interleaving(&f, &g, &InterleavingCandidate::translation(0.05, 0.11)).unwrap();
        assert_eq!(v.witness.map(|w| w.0), Some(Condition::MorphismF));
        let bound = interleaving_upper_bound(&f, &g).unwrap();
        assert!((bound - 0.1).abs() < 1e-12, "{bound}");
    }

    #[test]
    fn incomparable_covers_never_interleave() {
        let x = abc_space();
        let id = |l: &[&str]| x.open_by_labels(l).unwrap();
        let f = CoarseningFiltration::constant(PartialCover::from_opens(&x, &[id(&["A", "B"])]).unwrap());
        let g = CoarseningFiltration::constant(PartialCover::from_opens(&x, &[id(&["A", "C"])]).unwrap());
        assert_eq!(interleaving_upper_bound(&f, &g).unwrap(), f64::INFINITY);
    }

    #[test]
    fn other_space_rejected() {
        let (s, a) = two_chain(0.0, 1.0);
        let f = consistency_filtration(&s, &a).unwrap();
        assert_eq!(interleaving_upper_bound(&f, &worked_cf()), Err(FiltrationError::SpaceMismatch));
    }

    #[test]
    fn round_trip_with_affine_shift() {
        let f = worked_cf();
        // φ = ψ = t/2 pulls thresholds up: F(2t) is coarser than F(t), so the
        // round trip fails, and the displacement is unbounded anyway
        let half = Shift::Affine { scale: 0.5, offset: 0.0 };
        assert_eq!(half.max_displacement(), f64::INFINITY);
        assert!(check_round_trip(&f, &half.then(&half)).is_some());
        assert!(check_round_trip(&f, &Shift::Translate(0.3)).is_none());
    }

    #[test]
    fn morphism_along_a_point_map() {
        // collapsing everything onto A: preimages of {A}-containing opens are X
        let x = abc_space();
        let f = worked_cf();
        let top = CoarseningFiltration::constant(PartialCover::from_opens(&x, &[x.whole()]).unwrap());
        let map = [0usize, 0, 0];
        assert_eq!(check_filtration_morphism(&f, &top, &Shift::Translate(0.0), Some(&map)).unwrap(), None);
        assert!(check_filtration_morphism(&top, &f, &Shift::Translate(0.0), None).unwrap().is_some());
    }
}
