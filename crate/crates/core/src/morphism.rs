//! Sheaf morphisms along continuous maps and pushforward of assignments.

use std::sync::Arc;

use thiserror::Error;

use crate::finspace::{FiniteSpace, OpenId};
use crate::metric::{PseudometricSpace, StalkMap};
use crate::sheaf::{Assignment, MetricSheaf, SheafError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MorphismError {
    #[error("base map is not continuous")]
    BaseMapNotContinuous,
    #[error("expected {expected} components (one per target open), got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("component over {open} has the wrong shape: {reason}")]
    ComponentShape { open: String, reason: String },
    #[error("square for {lower} ⊆ {upper} does not commute (deviation {deviation:e})")]
    SquareViolation { lower: String, upper: String, deviation: f64 },
    #[error("the target of the first morphism is not the source of the second")]
    ChainMismatch,
    #[error(transparent)]
    Sheaf(#[from] SheafError),
}

/// A morphism from a sheaf on `X` to a sheaf on `Y` along a continuous `f: X → Y`.
///
/// `components[U]` maps the stalk over `f⁻¹(U)` into the target stalk over `U`.
#[derive(Clone, Debug)]
pub struct SheafMorphism {
    source: Arc<MetricSheaf>,
    target: Arc<MetricSheaf>,
    base: Vec<usize>,
    /// `preimage[U]` is the source open `f⁻¹(U)`.
    preimage: Vec<OpenId>,
    components: Vec<StalkMap>,
    lipschitz: Vec<f64>,
}

impl SheafMorphism {
    /// Validates continuity, component shapes and every commuting square.
    pub fn new(
        source: Arc<MetricSheaf>,
        target: Arc<MetricSheaf>,
        base: Vec<usize>,
        components: Vec<StalkMap>,
        tol: f64,
    ) -> Result<Self, MorphismError> {
        let (x, y) = (source.space(), target.space());
        if !x.is_continuous(y, &base) {
            return Err(MorphismError::BaseMapNotContinuous);
        }
        if components.len() != y.n_opens() {
            return Err(MorphismError::ComponentCount { expected: y.n_opens(), got: components.len() });
        }
        let preimage: Vec<OpenId> = y
            .open_ids()
            .map(|u| {
                x.open_id(&FiniteSpace::preimage(&base, y.members(u)))
                    .expect("continuous maps pull opens back to opens")
            })
            .collect();
        let mut lipschitz = Vec::with_capacity(components.len());
        for u in y.open_ids() {
            let (from, to) = (source.stalk(preimage[u.0]), target.stalk(u));
            components[u.0]
                .check_shape(from, to)
                .map_err(|e| MorphismError::ComponentShape { open: y.label(u), reason: e.to_string() })?;
            lipschitz.push(components[u.0].lipschitz(from, to));
        }
        for (u, v) in y.inclusion_pairs().filter(|(u, v)| u != v) {
            let (pu, pv) = (preimage[u.0], preimage[v.0]);
            let down_then_across = source
                .restriction(pu, pv)
                .expect("preimages preserve inclusion")
                .then(&components[u.0]);
            let across_then_down = components[v.0].then(target.restriction(u, v).expect("u ⊆ v"));
            let to = target.stalk(u);
            let dev = down_then_across.deviation(&across_then_down, source.stalk(pv), to);
            let exact = matches!(to, PseudometricSpace::Table { .. });
            if (exact && dev > 0.0) || dev > tol {
                return Err(MorphismError::SquareViolation { lower: y.label(u), upper: y.label(v), deviation: dev });
            }
        }
        Ok(Self { source, target, base, preimage, components, lipschitz })
    }

    pub fn identity(sheaf: Arc<MetricSheaf>) -> Self {
        let space = sheaf.space();
        let base = (0..space.n_points()).collect();
        let components = space.open_ids().map(|u| StalkMap::identity(sheaf.stalk(u))).collect();
        Self::new(sheaf.clone(), sheaf, base, components, 0.0).expect("identity squares commute")
    }

    pub fn source(&self) -> &Arc<MetricSheaf> {
        &self.source
    }

    pub fn target(&self) -> &Arc<MetricSheaf> {
        &self.target
    }

    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn component(&self, u: OpenId) -> &StalkMap {
        &self.components[u.0]
    }

    /// The source open `f⁻¹(U)`.
    pub fn preimage(&self, u: OpenId) -> OpenId {
        self.preimage[u.0]
    }

    pub fn component_lipschitz(&self, u: OpenId) -> f64 {
        self.lipschitz[u.0]
    }

    /// Largest component Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz.iter().copied().fold(0.0, f64::max)
    }

    /// `b(V) = m_V(a(f⁻¹(V)))` on every target open.
    pub fn pushforward(&self, a: &Assignment) -> Result<Assignment, MorphismError> {
        if a.fingerprint() != self.source.fingerprint() {
            return Err(SheafError::SheafMismatch.into());
        }
        let y = self.target.space();
        let mut b = Assignment::empty(&self.target);
        for v in y.open_ids() {
            let pv = self.preimage[v.0];
            let value = a.value(pv).ok_or_else(|| SheafError::PartialAssignment {
                open: self.source.space().label(pv),
            })?;
            let image = self.components[v.0].apply(value);
            if v == y.empty() {
                continue;
            }
            b.set(&self.target, v, image)?;
        }
        Ok(b)
    }

    /// Whether `b` agrees with the pushforward of `a` within `tol` on every target open.
    pub fn validate_shva(&self, a: &Assignment, b: &Assignment, tol: f64) -> bool {
        match self.pushforward(a) {
            Ok(pushed) => self.target.assignment_distance(&pushed, b).is_ok_and(|d| d <= tol),
            Err(_) => false,
        }
    }

    /// `n ∘ m`, with components `(n∘m)_U = n_U ∘ m_{g⁻¹(U)}`.
    pub fn compose(n: &SheafMorphism, m: &SheafMorphism) -> Result<SheafMorphism, MorphismError> {
        let same = Arc::ptr_eq(&m.target, &n.source)
            || (m.target.fingerprint() == n.source.fingerprint()
                && m.target.generators() == n.source.generators());
        if !same {
            return Err(MorphismError::ChainMismatch);
        }
        let base = m.base.iter().map(|&x| n.base[x]).collect();
        let components = n
            .target
            .space()
            .open_ids()
            .map(|u| m.components[n.preimage[u.0].0].then(&n.components[u.0]))
            .collect();
        let tol = m.source.tolerance().max(n.target.tolerance());
        SheafMorphism::new(m.source.clone(), n.target.clone(), base, components, tol)
    }
}
