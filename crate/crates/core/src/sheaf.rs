//! Sheaves of pseudometric spaces on finite spaces, assignments, and the
//! consistency measurements built from them.
//!
//! Restrictions are given on Hasse edges only. At build time every
//! inclusion `U ⊆ V` gets its composed restriction, and every way of composing
//! generators down to `U` must agree within the sheaf's tolerance.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::finspace::{FiniteSpace, OpenId};
use crate::metric::{MetricError, PseudometricSpace, StalkMap, Value};

/// Default tolerance of the commutativity check for floating maps.
pub const COMMUTATIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheafError {
    #[error("expected {expected} stalks (one per open), got {got}")]
    StalkCount { expected: usize, got: usize },
    #[error("stalk over {open} has the wrong shape: {reason}")]
    StalkShapeMismatch { open: String, reason: String },
    #[error("no generator given for Hasse edge {lower} ⊆ {upper}")]
    MissingGenerator { lower: String, upper: String },
    #[error("{lower} ⊆ {upper} is not a Hasse edge")]
    NotAHasseEdge { lower: String, upper: String },
    #[error(
        "restrictions {lower} ⊆ {upper} disagree along paths via {via_a} and {via_b} (deviation {deviation:e})"
    )]
    CommutativityViolation {
        lower: String,
        upper: String,
        via_a: String,
        via_b: String,
        deviation: f64,
    },
    #[error("assignment has no value on {open}")]
    PartialAssignment { open: String },
    #[error("value on {open} does not lie in its stalk")]
    ValueOutOfStalk { open: String },
    #[error("assignments belong to different sheaves")]
    SheafMismatch,
    #[error("open {0} out of range")]
    UnknownOpen(usize),
}

#[derive(Clone, Debug)]
pub struct MetricSheaf {
    space: Arc<FiniteSpace>,
    stalks: Vec<PseudometricSpace>,
    generators: HashMap<(OpenId, OpenId), StalkMap>,
    /// Composed restriction for every `(U, V)` with `U ⊆ V`, identities included.
    restrictions: HashMap<(OpenId, OpenId), StalkMap>,
    tol: f64,
    fingerprint: u64,
}

impl MetricSheaf {
    /// Builds and validates a sheaf.
    ///
    /// `generators` is keyed by Hasse edges `(smaller, larger)`. Edges into `∅`
    /// may be omitted (they are always the collapse map).
    pub fn new(
        space: Arc<FiniteSpace>,
        stalks: Vec<PseudometricSpace>,
        mut generators: HashMap<(OpenId, OpenId), StalkMap>,
        tol: f64,
    ) -> Result<Self, SheafError> {
        if stalks.len() != space.n_opens() {
            return Err(SheafError::StalkCount { expected: space.n_opens(), got: stalks.len() });
        }
        if stalks[space.empty().0] != PseudometricSpace::OnePoint {
            return Err(SheafError::StalkShapeMismatch {
                open: space.label(space.empty()),
                reason: "the stalk over ∅ must be the one-point space".into(),
            });
        }
        for &(u, v) in generators.keys() {
            if u.0 >= space.n_opens() || v.0 >= space.n_opens() || !space.is_hasse_edge(u, v) {
                return Err(SheafError::NotAHasseEdge {
                    lower: label_or_index(&space, u),
                    upper: label_or_index(&space, v),
                });
            }
        }
        for &(u, v) in space.hasse() {
            if u == space.empty() {
                generators.entry((u, v)).or_insert(StalkMap::Collapse);
            }
            let map = generators.get(&(u, v)).ok_or_else(|| SheafError::MissingGenerator {
                lower: space.label(u),
                upper: space.label(v),
            })?;
            map.check_shape(&stalks[v.0], &stalks[u.0])
                .map_err(|e| shape_error(&space, u, v, e))?;
        }

        // covers_of[u] = opens that cover u in the Hasse diagram
        let mut covers_of: Vec<Vec<OpenId>> = vec![Vec::new(); space.n_opens()];
        for &(u, v) in space.hasse() {
            covers_of[u.0].push(v);
        }
        let mut restrictions = HashMap::new();
        for v in space.open_ids() {
            restrictions.insert((v, v), StalkMap::identity(&stalks[v.0]));
            // ids are sorted by cardinality, so walking the sub-opens downwards
            // visits every W ⊋ U before U
            for &u in space.subopens(v).iter().rev() {
                if u == v {
                    continue;
                }
                let mut chosen: Option<(OpenId, StalkMap)> = None;
                for &w in &covers_of[u.0] {
                    if !space.is_subset(w, v) {
                        continue;
                    }
                    let candidate = restrictions[&(w, v)].then(&generators[&(u, w)]);
                    match &chosen {
                        None => chosen = Some((w, candidate)),
                        Some((w0, first)) => {
                            let dev = first.deviation(&candidate, &stalks[v.0], &stalks[u.0]);
                            let exact = matches!(stalks[u.0], PseudometricSpace::Table { .. });
                            if (exact && dev > 0.0) || dev > tol {
                                return Err(SheafError::CommutativityViolation {
                                    lower: space.label(u),
                                    upper: space.label(v),
                                    via_a: space.label(*w0),
                                    via_b: space.label(w),
                                    deviation: dev,
                                });
                            }
                        }
                    }
                }
                let (_, map) = chosen.expect("every proper sub-open is covered inside v");
                restrictions.insert((u, v), map);
            }
        }

        let mut h = DefaultHasher::new();
        space.id().hash(&mut h);
        for s in &stalks {
            stalk_shape(s).hash(&mut h);
        }
        Ok(Self { space, stalks, generators, restrictions, tol, fingerprint: h.finish() })
    }

    /// Constant sheaf: the same stalk on every nonempty open, identity restrictions.
    pub fn constant(space: Arc<FiniteSpace>, stalk: PseudometricSpace) -> Result<Self, SheafError> {
        let stalks = space
            .open_ids()
            .map(|id| if id == space.empty() { PseudometricSpace::OnePoint } else { stalk.clone() })
            .collect();
        let generators = space
            .hasse()
            .iter()
            .filter(|(u, _)| *u != space.empty())
            .map(|&(u, v)| ((u, v), StalkMap::identity(&stalk)))
            .collect();
        Self::new(space, stalks, generators, COMMUTATIVITY_TOL)
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn space_arc(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn stalk(&self, id: OpenId) -> &PseudometricSpace {
        &self.stalks[id.0]
    }

    pub fn stalks(&self) -> &[PseudometricSpace] {
        &self.stalks
    }

    pub fn generators(&self) -> &HashMap<(OpenId, OpenId), StalkMap> {
        &self.generators
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Identifies the space and stalk shapes (not the maps).
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Composed restriction `S(U ⊆ V)`; `None` unless `U ⊆ V`.
    pub fn restriction(&self, u: OpenId, v: OpenId) -> Option<&StalkMap> {
        self.restrictions.get(&(u, v))
    }

    fn term(&self, a: &Assignment, u: OpenId, v: OpenId) -> Result<f64, SheafError> {
        let av = a.require(self, v)?;
        let au = a.require(self, u)?;
        let pushed = self.restrictions[&(u, v)].apply(av);
        Ok(self.stalks[u.0].distance(&pushed, au))
    }

    fn check_total(&self, a: &Assignment) -> Result<(), SheafError> {
        if a.fingerprint != self.fingerprint {
            return Err(SheafError::SheafMismatch);
        }
        for id in self.space.open_ids() {
            a.require(self, id)?;
        }
        Ok(())
    }

    /// One entry per inclusion `U ⊊ V` with `U ≠ ∅`.
    pub fn critical_thresholds(&self, a: &Assignment) -> Result<Vec<(OpenId, OpenId, f64)>, SheafError> {
        self.check_total(a)?;
        let empty = self.space.empty();
        self.space
            .inclusion_pairs()
            .filter(|&(u, v)| u != v && u != empty)
            .map(|(u, v)| Ok((u, v, self.term(a, u, v)?)))
            .collect()
    }

    /// `max_{U ⊆ V} d_U(S(U ⊆ V) a(V), a(U))`.
    pub fn consistency_radius(&self, a: &Assignment) -> Result<f64, SheafError> {
        Ok(self
            .critical_thresholds(a)?
            .iter()
            .fold(0.0, |m, t| m.max(t.2)))
    }

    /// Square root of the sum of squared critical thresholds.
    pub fn consistency_radius_l2(&self, a: &Assignment) -> Result<f64, SheafError> {
        Ok(self
            .critical_thresholds(a)?
            .iter()
            .map(|t| t.2 * t.2)
            .sum::<f64>()
            .sqrt())
    }

    /// `max d_U(S(U ⊆ V₁) a(V₁), S(U ⊆ V₂) a(V₂))` over `U ⊆ V₁, V₂`.
    pub fn consistency_diameter(&self, a: &Assignment) -> Result<f64, SheafError> {
        self.check_total(a)?;
        let mut best: f64 = 0.0;
        for u in self.space.open_ids() {
            if u == self.space.empty() {
                continue;
            }
            let above: Vec<Value> = self
                .space
                .open_ids()
                .filter(|&v| self.space.is_subset(u, v))
                .map(|v| self.restrictions[&(u, v)].apply(a.value(v).expect("total")))
                .collect();
            for i in 0..above.len() {
                for j in (i + 1)..above.len() {
                    best = best.max(self.stalks[u.0].distance(&above[i], &above[j]));
                }
            }
        }
        Ok(best)
    }

    /// Consistency radius over inclusions `V₁ ⊆ V₂ ⊆ U`. Only values on opens
    /// inside `U` are needed.
    pub fn local_consistency_radius(&self, a: &Assignment, u: OpenId) -> Result<f64, SheafError> {
        if a.fingerprint != self.fingerprint {
            return Err(SheafError::SheafMismatch);
        }
        if u.0 >= self.space.n_opens() {
            return Err(SheafError::UnknownOpen(u.0));
        }
        let subs = self.space.subopens(u);
        let mut best: f64 = 0.0;
        for &v2 in subs {
            for &v1 in self.space.subopens(v2) {
                if v1 != v2 && v1 != self.space.empty() {
                    best = best.max(self.term(a, v1, v2)?);
                }
            }
        }
        Ok(best)
    }

    /// Local consistency radius of every open, indexed by open id.
    pub fn local_radii(&self, a: &Assignment) -> Result<Vec<f64>, SheafError> {
        self.check_total(a)?;
        self.space
            .open_ids()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&u| self.local_consistency_radius(a, u))
            .collect()
    }

    /// Star consistency radius on the open `u`: star-to-star restriction
    /// discrepancies, and half the discrepancy of two stars pushed into a
    /// common sub-star. Needs values on the stars of points of `u` only.
    pub fn star_consistency_radius(&self, a: &Assignment, u: OpenId) -> Result<f64, SheafError> {
        if a.fingerprint != self.fingerprint {
            return Err(SheafError::SheafMismatch);
        }
        let space = &self.space;
        let points: Vec<usize> = space.members(u).ones().collect();
        let star: Vec<OpenId> = (0..space.n_points()).map(|p| space.star_of_point(p)).collect();
        let mut best: f64 = 0.0;
        for &y in &points {
            let sy = star[y];
            let ay = a.require(self, sy)?;
            for x in space.members(sy).ones() {
                let sx = star[x];
                let ax = a.require(self, sx)?;
                let pushed = self.restrictions[&(sx, sy)].apply(ay);
                best = best.max(self.stalks[sx.0].distance(&pushed, ax));
            }
            for &x in &points {
                let sx = star[x];
                let ax = a.require(self, sx)?;
                let mut common = space.members(sx).clone();
                common.intersect_with(space.members(sy));
                for z in common.ones() {
                    let sz = star[z];
                    let from_y = self.restrictions[&(sz, sy)].apply(ay);
                    let from_x = self.restrictions[&(sz, sx)].apply(ax);
                    best = best.max(0.5 * self.stalks[sz.0].distance(&from_y, &from_x));
                }
            }
        }
        Ok(best)
    }

    /// `D(a, b) = max_U d_U(a(U), b(U))`.
    pub fn assignment_distance(&self, a: &Assignment, b: &Assignment) -> Result<f64, SheafError> {
        if a.fingerprint != b.fingerprint {
            return Err(SheafError::SheafMismatch);
        }
        self.check_total(a)?;
        self.check_total(b)?;
        Ok(self
            .space
            .open_ids()
            .map(|id| {
                self.stalks[id.0].distance(a.value(id).expect("total"), b.value(id).expect("total"))
            })
            .fold(0.0, f64::max))
    }

    /// True iff every critical threshold is at most `tol`.
    pub fn is_global_section(&self, a: &Assignment, tol: f64) -> Result<bool, SheafError> {
        Ok(self.critical_thresholds(a)?.iter().all(|t| t.2 <= tol))
    }

    /// Largest Lipschitz constant over all composed restrictions `U ⊊ V`.
    pub fn lipschitz(&self) -> f64 {
        self.restrictions
            .iter()
            .filter(|((u, v), _)| u != v)
            .map(|((u, v), m)| m.lipschitz(&self.stalks[v.0], &self.stalks[u.0]))
            .fold(0.0, f64::max)
    }

    /// The assignment obtained by restricting a value on the whole space.
    pub fn section_from_top(&self, top: Value) -> Result<Assignment, SheafError> {
        let whole = self.space.whole();
        let mut a = Assignment::empty(self);
        for id in self.space.open_ids() {
            let v = self.restrictions[&(id, whole)].apply(&top);
            a.set(self, id, v)?;
        }
        Ok(a)
    }
}

fn label_or_index(space: &FiniteSpace, id: OpenId) -> String {
    if id.0 < space.n_opens() {
        space.label(id)
    } else {
        id.to_string()
    }
}

fn shape_error(space: &FiniteSpace, u: OpenId, v: OpenId, e: MetricError) -> SheafError {
    SheafError::StalkShapeMismatch {
        open: format!("{} ⊆ {}", space.label(u), space.label(v)),
        reason: e.to_string(),
    }
}

fn stalk_shape(s: &PseudometricSpace) -> (u8, usize) {
    match s {
        PseudometricSpace::OnePoint => (0, 0),
        PseudometricSpace::Euclidean { dim, .. } => (1, *dim),
        PseudometricSpace::Table { labels, .. } => (2, labels.len()),
    }
}

/// A choice of stalk value per open, possibly partial.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    values: Vec<Option<Value>>,
    support: BTreeSet<OpenId>,
    fingerprint: u64,
}

impl Assignment {
    /// No values yet. The value over `∅` is implicit.
    pub fn empty(sheaf: &MetricSheaf) -> Self {
        let mut values = vec![None; sheaf.space.n_opens()];
        values[sheaf.space.empty().0] = Some(Value::Point);
        Self { values, support: BTreeSet::new(), fingerprint: sheaf.fingerprint }
    }

    /// Assignment supported on the given opens.
    pub fn partial(
        sheaf: &MetricSheaf,
        values: impl IntoIterator<Item = (OpenId, Value)>,
    ) -> Result<Self, SheafError> {
        let mut a = Self::empty(sheaf);
        for (id, v) in values {
            a.set(sheaf, id, v)?;
        }
        Ok(a)
    }

    /// Sets a user-specified value (the open joins the support).
    pub fn set(&mut self, sheaf: &MetricSheaf, id: OpenId, value: Value) -> Result<(), SheafError> {
        self.put(sheaf, id, value)?;
        self.support.insert(id);
        Ok(())
    }

    /// Fills a value without adding the open to the support.
    pub fn fill(&mut self, sheaf: &MetricSheaf, id: OpenId, value: Value) -> Result<(), SheafError> {
        self.put(sheaf, id, value)
    }

    fn put(&mut self, sheaf: &MetricSheaf, id: OpenId, value: Value) -> Result<(), SheafError> {
        let stalk = sheaf.stalks.get(id.0).ok_or(SheafError::UnknownOpen(id.0))?;
        if !stalk.contains(&value) {
            return Err(SheafError::ValueOutOfStalk { open: sheaf.space.label(id) });
        }
        self.values[id.0] = Some(value);
        Ok(())
    }

    pub fn value(&self, id: OpenId) -> Option<&Value> {
        self.values.get(id.0).and_then(|v| v.as_ref())
    }

    fn require(&self, sheaf: &MetricSheaf, id: OpenId) -> Result<&Value, SheafError> {
        self.value(id)
            .ok_or_else(|| SheafError::PartialAssignment { open: sheaf.space.label(id) })
    }

    pub fn support(&self) -> &BTreeSet<OpenId> {
        &self.support
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// First open without a value, if any.
    pub fn first_missing(&self) -> Option<OpenId> {
        self.values.iter().position(Option::is_none).map(OpenId)
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Keeps only the values on `keep`, which become the support.
    pub fn restricted_to(&self, sheaf: &MetricSheaf, keep: &[OpenId]) -> Self {
        let mut out = Self::empty(sheaf);
        for &id in keep {
            if let Some(v) = self.value(id) {
                out.values[id.0] = Some(v.clone());
                out.support.insert(id);
            }
        }
        out
    }
}
