//! Pseudometric stalks, their elements, and the maps between them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm used by a Euclidean stalk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Linf,
    L2,
}

impl Norm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("distance table must be square with one row per label")]
    TableShape,
    #[error("distance table is not a pseudometric: {0}")]
    NotPseudometric(String),
    #[error("Euclidean stalks need dimension ≥ 1 (use a one-point stalk instead)")]
    ZeroDimension,
    #[error("map shape does not fit its stalks: {0}")]
    Shape(String),
}

/// A stalk: a pseudometric space of one of the supported kinds.
#[derive(Clone, Debug, PartialEq)]
pub enum PseudometricSpace {
    OnePoint,
    Euclidean { dim: usize, norm: Norm },
    Table { labels: Vec<String>, dist: Vec<Vec<f64>> },
}

/// An element of a stalk.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Point,
    Vector(Vec<f64>),
    Label(usize),
}

impl Value {
    pub fn scalar(x: f64) -> Self {
        Value::Vector(vec![x])
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Value::Vector(v) => Some(v),
            _ => None,
        }
    }
}

impl PseudometricSpace {
    pub fn euclidean(dim: usize, norm: Norm) -> Result<Self, MetricError> {
        if dim == 0 {
            return Err(MetricError::ZeroDimension);
        }
        Ok(PseudometricSpace::Euclidean { dim, norm })
    }

    pub fn real_line() -> Self {
        PseudometricSpace::Euclidean { dim: 1, norm: Norm::Linf }
    }

    /// Finite pseudometric space; every axiom is checked exhaustively.
    pub fn table(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = labels.len();
        if n == 0 || dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(MetricError::TableShape);
        }
        for i in 0..n {
            if dist[i][i] != 0.0 {
                return Err(MetricError::NotPseudometric(format!("d({0},{0}) ≠ 0", labels[i])));
            }
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(MetricError::NotPseudometric(format!(
                        "d({},{}) is not a nonnegative real",
                        labels[i], labels[j]
                    )));
                }
                if d != dist[j][i] {
                    return Err(MetricError::NotPseudometric(format!(
                        "d({},{}) ≠ d({},{})",
                        labels[i], labels[j], labels[j], labels[i]
                    )));
                }
                for k in 0..n {
                    if d > dist[i][k] + dist[k][j] + 1e-12 {
                        return Err(MetricError::NotPseudometric(format!(
                            "triangle inequality fails for ({},{},{})",
                            labels[i], labels[k], labels[j]
                        )));
                    }
                }
            }
        }
        Ok(PseudometricSpace::Table { labels, dist })
    }

    /// Dimension of a Euclidean stalk.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PseudometricSpace::Euclidean { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (PseudometricSpace::OnePoint, Value::Point) => true,
            (PseudometricSpace::Euclidean { dim, .. }, Value::Vector(x)) => {
                x.len() == *dim && x.iter().all(|c| c.is_finite())
            }
            (PseudometricSpace::Table { labels, .. }, Value::Label(i)) => *i < labels.len(),
            _ => false,
        }
    }

    /// Distance between two elements. Both must lie in the stalk.
    pub fn distance(&self, a: &Value, b: &Value) -> f64 {
        match (self, a, b) {
            (PseudometricSpace::OnePoint, _, _) => 0.0,
            (PseudometricSpace::Euclidean { norm, .. }, Value::Vector(x), Value::Vector(y)) => {
                let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                norm.of(&diff)
            }
            (PseudometricSpace::Table { dist, .. }, Value::Label(i), Value::Label(j)) => dist[*i][*j],
            _ => panic!("distance between values of the wrong kind"),
        }
    }

    /// A default element (origin, first label, or the point).
    pub fn origin(&self) -> Value {
        match self {
            PseudometricSpace::OnePoint => Value::Point,
            PseudometricSpace::Euclidean { dim, .. } => Value::Vector(vec![0.0; *dim]),
            PseudometricSpace::Table { .. } => Value::Label(0),
        }
    }

    /// Points on which an affine or table map is determined.
    pub(crate) fn probe_points(&self) -> Vec<Value> {
        match self {
            PseudometricSpace::OnePoint => vec![Value::Point],
            PseudometricSpace::Euclidean { dim, .. } => {
                let mut out = vec![Value::Vector(vec![0.0; *dim])];
                for i in 0..*dim {
                    let mut e = vec![0.0; *dim];
                    e[i] = 1.0;
                    out.push(Value::Vector(e));
                }
                out
            }
            PseudometricSpace::Table { labels, .. } => (0..labels.len()).map(Value::Label).collect(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PseudometricSpace::OnePoint => "one-point",
            PseudometricSpace::Euclidean { .. } => "euclidean",
            PseudometricSpace::Table { .. } => "table",
        }
    }
}

/// A map between stalks: restriction maps and morphism components share this
/// representation.
#[derive(Clone, Debug, PartialEq)]
pub enum StalkMap {
    /// `x ↦ A x` between Euclidean stalks; `A` has one row per target coordinate.
    Linear(DMatrix<f64>),
    /// Lookup table between finite stalks.
    Table(Vec<usize>),
    /// The unique map into a one-point stalk.
    Collapse,
    /// Constant map (e.g. out of a one-point stalk).
    Constant(Value),
}

impl StalkMap {
    pub fn scalar(factor: f64) -> Self {
        StalkMap::Linear(DMatrix::from_element(1, 1, factor))
    }

    /// A linear map from a row-major matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MetricError> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(MetricError::Shape("matrix rows must be nonempty and of equal length".into()));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(MetricError::Shape("matrix entries must be finite".into()));
        }
        Ok(StalkMap::Linear(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])))
    }

    pub fn identity(space: &PseudometricSpace) -> Self {
        match space {
            PseudometricSpace::OnePoint => StalkMap::Collapse,
            PseudometricSpace::Euclidean { dim, .. } => StalkMap::Linear(DMatrix::identity(*dim, *dim)),
            PseudometricSpace::Table { labels, .. } => StalkMap::Table((0..labels.len()).collect()),
        }
    }

    /// Checks that the map sends `source` into `target`.
    pub fn check_shape(
        &self,
        source: &PseudometricSpace,
        target: &PseudometricSpace,
    ) -> Result<(), MetricError> {
        use PseudometricSpace as P;
        let bad = |msg: String| Err(MetricError::Shape(msg));
        match (self, source, target) {
            (StalkMap::Collapse, _, P::OnePoint) => Ok(()),
            (StalkMap::Collapse, _, t) => bad(format!("collapse into a {} stalk", t.kind_name())),
            (StalkMap::Constant(v), _, t) => {
                if t.contains(v) {
                    Ok(())
                } else {
                    bad("constant value is not in the target stalk".into())
                }
            }
            (StalkMap::Linear(m), P::Euclidean { dim: s, .. }, P::Euclidean { dim: t, .. }) => {
                if m.nrows() == *t && m.ncols() == *s && m.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    bad(format!(
                        "matrix is {}x{}, expected {}x{}",
                        m.nrows(),
                        m.ncols(),
                        t,
                        s
                    ))
                }
            }
            (StalkMap::Table(t), P::Table { labels: sl, .. }, P::Table { labels: tl, .. }) => {
                if t.len() == sl.len() && t.iter().all(|&j| j < tl.len()) {
                    Ok(())
                } else {
                    bad("lookup table does not match the stalk sizes".into())
                }
            }
            (m, s, t) => bad(format!(
                "{} map from a {} stalk into a {} stalk",
                m.kind_name(),
                s.kind_name(),
                t.kind_name()
            )),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            StalkMap::Linear(_) => "linear",
            StalkMap::Table(_) => "table",
            StalkMap::Collapse => "collapse",
            StalkMap::Constant(_) => "constant",
        }
    }

    pub fn apply(&self, v: &Value) -> Value {
        match (self, v) {
            (StalkMap::Collapse, _) => Value::Point,
            (StalkMap::Constant(c), _) => c.clone(),
            (StalkMap::Linear(m), Value::Vector(x)) => {
                let out = (0..m.nrows())
                    .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * x[c]).sum())
                    .collect();
                Value::Vector(out)
            }
            (StalkMap::Table(t), Value::Label(i)) => Value::Label(t[*i]),
            _ => panic!("stalk map applied to a value of the wrong kind"),
        }
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &StalkMap) -> StalkMap {
        match (self, then) {
            (_, StalkMap::Collapse) => StalkMap::Collapse,
            (_, StalkMap::Constant(c)) => StalkMap::Constant(c.clone()),
            (StalkMap::Constant(c), g) => StalkMap::Constant(g.apply(c)),
            (StalkMap::Collapse, g) => StalkMap::Constant(g.apply(&Value::Point)),
            (StalkMap::Linear(a), StalkMap::Linear(b)) => StalkMap::Linear(b * a),
            (StalkMap::Table(s), StalkMap::Table(t)) => StalkMap::Table(s.iter().map(|&i| t[i]).collect()),
            _ => panic!("composing stalk maps of incompatible kinds"),
        }
    }

    /// Largest target distance between `self` and `other` on points that
    /// determine both maps (origin and basis vectors, or every label).
    pub fn deviation(&self, other: &StalkMap, source: &PseudometricSpace, target: &PseudometricSpace) -> f64 {
        source
            .probe_points()
            .iter()
            .map(|p| target.distance(&self.apply(p), &other.apply(p)))
            .fold(0.0, f64::max)
    }

    /// A Lipschitz constant of the map from `source` into `target`.
    ///
    /// Exact for every kind except `L2 → L2` with more than two columns, where
    /// the SVD value is padded by `1e-9` so it stays an upper bound. Table maps
    /// that separate two points at distance zero are not Lipschitz (`+∞`).
    pub fn lipschitz(&self, source: &PseudometricSpace, target: &PseudometricSpace) -> f64 {
        match self {
            StalkMap::Collapse | StalkMap::Constant(_) => 0.0,
            StalkMap::Linear(m) => {
                let (sn, tn) = match (source, target) {
                    (
                        PseudometricSpace::Euclidean { norm: s, .. },
                        PseudometricSpace::Euclidean { norm: t, .. },
                    ) => (*s, *t),
                    _ => unreachable!("linear maps only act between Euclidean stalks"),
                };
                operator_norm(m, sn, tn)
            }
            StalkMap::Table(t) => {
                let (sd, td) = match (source, target) {
                    (PseudometricSpace::Table { dist: s, .. }, PseudometricSpace::Table { dist: d, .. }) => {
                        (s, d)
                    }
                    _ => unreachable!("table maps only act between table stalks"),
                };
                let mut k: f64 = 0.0;
                for i in 0..t.len() {
                    for j in (i + 1)..t.len() {
                        let out = td[t[i]][t[j]];
                        if sd[i][j] == 0.0 {
                            if out > 0.0 {
                                return f64::INFINITY;
                            }
                        } else {
                            k = k.max(out / sd[i][j]);
                        }
                    }
                }
                k
            }
        }
    }
}

/// Operator norm of `m` from `(ℝⁿ, source)` to `(ℝᵐ, target)`.
pub fn operator_norm(m: &DMatrix<f64>, source: Norm, target: Norm) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    match (source, target) {
        // max absolute row sum
        (Norm::Linf, Norm::Linf) => (0..rows)
            .map(|r| (0..cols).map(|c| m[(r, c)].abs()).sum::<f64>())
            .fold(0.0, f64::max),
        // max row 2-norm
        (Norm::L2, Norm::Linf) => (0..rows)
            .map(|r| (0..cols).map(|c| m[(r, c)].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max),
        // the sup over the cube is attained at a vertex
        (Norm::Linf, Norm::L2) => {
            if cols <= 20 {
                (0u32..(1 << cols))
                    .map(|signs| {
                        let x: Vec<f64> = (0..cols)
                            .map(|c| if signs >> c & 1 == 1 { -1.0 } else { 1.0 })
                            .collect();
                        (0..rows)
                            .map(|r| (0..cols).map(|c| m[(r, c)] * x[c]).sum::<f64>().powi(2))
                            .sum::<f64>()
                            .sqrt()
                    })
                    .fold(0.0, f64::max)
            } else {
                (rows as f64).sqrt() * operator_norm(m, Norm::Linf, Norm::Linf)
            }
        }
        (Norm::L2, Norm::L2) => {
            if cols == 1 || rows == 1 {
                m.iter().map(|x| x * x).sum::<f64>().sqrt()
            } else if rows == 2 && cols == 2 {
                // closed form for the largest singular value of a 2x2 matrix
                let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                let s1 = a * a + b * b + c * c + d * d;
                let det = a * d - b * c;
                let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
                ((s1 + disc) / 2.0).sqrt() * (1.0 + 1e-15) + 1e-15
            } else {
                let sv = m.clone().singular_values();
                sv.iter().cloned().fold(0.0, f64::max) + 1e-9
            }
        }
    }
}
