//! Persistence modules of Čech cohomology along a coarsening filtration, and
//! their barcodes.

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::filtration::CoarseningFiltration;

use super::cohomology::{refinement_map, Cohomology};
use super::field::{Field, Mat, F2};
use super::CechError;

/// Coefficient field chosen at runtime.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    #[default]
    F2,
    #[serde(alias = "rational")]
    Q,
}

/// One degree of persistent cohomology. Index `i` stands for the threshold
/// interval `(t_i, t_{i+1}]`; maps run against the index,
/// `maps[i]: V_{i+1} → V_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceModule<F: Field> {
    degree: usize,
    thresholds: Vec<f64>,
    dims: Vec<usize>,
    maps: Vec<Mat<F>>,
}

/// Interval `[start, end]` of indices with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexInterval {
    pub start: usize,
    pub end: usize,
    pub multiplicity: usize,
}

impl<F: Field> PersistenceModule<F> {
    /// `thresholds` are the left ends `t_0 < t_1 < …` of the index intervals.
    pub fn new(degree: usize, thresholds: Vec<f64>, dims: Vec<usize>, maps: Vec<Mat<F>>) -> Result<Self, CechError> {
        if dims.is_empty() || thresholds.len() != dims.len() || maps.len() + 1 != dims.len() {
            return Err(CechError::NonComposable { index: maps.len() });
        }
        for (i, m) in maps.iter().enumerate() {
            if m.rows() != dims[i] || m.cols() != dims[i + 1] {
                return Err(CechError::NonComposable { index: i });
            }
        }
        Ok(Self { degree, thresholds, dims, maps })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn maps(&self) -> &[Mat<F>] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// `r[i][j]` = rank of the composite `V_j → V_i` for `i ≤ j`.
    pub fn rank_table(&self) -> Vec<Vec<usize>> {
        let n = self.dims.len();
        let mut r = vec![vec![0; n]; n];
        for i in 0..n {
            r[i][i] = self.dims[i];
            let mut composite: Option<Mat<F>> = None;
            for j in i + 1..n {
                let next = match composite {
                    None => self.maps[i].clone(),
                    Some(c) => c.mul(&self.maps[j - 1]),
                };
                r[i][j] = next.rank();
                composite = Some(next);
            }
        }
        r
    }

    /// Interval decomposition by rank inclusion–exclusion.
    pub fn intervals(&self) -> Vec<IndexInterval> {
        let n = self.dims.len();
        let r = self.rank_table();
        let at = |i: isize, j: usize| -> isize {
            if i < 0 || j >= n {
                0
            } else {
                r[i as usize][j] as isize
            }
        };
        let mut out = Vec::new();
        for i in 0..n {
            for j in i..n {
                let (ii, jj) = (i as isize, j);
                let m = at(ii, jj) - at(ii - 1, jj) - at(ii, jj + 1) + at(ii - 1, jj + 1);
                debug_assert!(m >= 0);
                if m > 0 {
                    out.push(IndexInterval { start: i, end: j, multiplicity: m as usize });
                }
            }
        }
        out
    }

    /// Bars in threshold coordinates: interval `[i, j]` becomes `(t_i, t_{j+1})`
    /// with `t_{k+1} = +∞`.
    pub fn barcode(&self) -> Vec<Bar> {
        self.intervals()
            .into_iter()
            .map(|iv| Bar {
                degree: self.degree,
                birth: self.thresholds[iv.start],
                death: self.thresholds.get(iv.end + 1).copied().unwrap_or(f64::INFINITY),
                multiplicity: iv.multiplicity,
            })
            .collect()
    }
}

/// Per-degree modules `0..=degree_cap` of a filtration's Čech cohomology.
pub fn persistence_modules<F: Field>(
    filtration: &CoarseningFiltration,
    degree_cap: usize,
) -> Result<Vec<PersistenceModule<F>>, CechError> {
    let covers = filtration.covers();
    let cohomology: Vec<Cohomology<F>> = covers.par_iter().map(|c| Cohomology::new(c, degree_cap)).collect();
    let maps: Vec<Vec<Mat<F>>> = cohomology
        .par_windows(2)
        .map(|w| refinement_map(&w[0], &w[1], None))
        .collect::<Result<_, _>>()?;
    let mut thresholds = vec![0.0];
    thresholds.extend_from_slice(filtration.breakpoints());
    (0..=degree_cap)
        .map(|k| {
            PersistenceModule::new(
                k,
                thresholds.clone(),
                cohomology.iter().map(|h| h.rank(k)).collect(),
                maps.iter().map(|m| m[k].clone()).collect(),
            )
        })
        .collect()
}

/// Barcode of a filtration's persistent Čech cohomology in degrees `0..=degree_cap`.
pub fn filtration_barcode(
    filtration: &CoarseningFiltration,
    field: FieldKind,
    degree_cap: usize,
) -> Result<PersistenceDiagram, CechError> {
    fn bars<F: Field>(f: &CoarseningFiltration, cap: usize) -> Result<Vec<Bar>, CechError> {
        Ok(persistence_modules::<F>(f, cap)?.iter().flat_map(|m| m.barcode()).collect())
    }
    let bars = match field {
        FieldKind::F2 => bars::<F2>(filtration, degree_cap)?,
        FieldKind::Q => bars::<BigRational>(filtration, degree_cap)?,
    };
    Ok(PersistenceDiagram::new(bars))
}

fn serialize_death<S: Serializer>(death: &f64, s: S) -> Result<S::Ok, S::Error> {
    if death.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*death)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bar {
    pub degree: usize,
    pub birth: f64,
    #[serde(serialize_with = "serialize_death")]
    pub death: f64,
    pub multiplicity: usize,
}

/// Multiset of bars across degrees, kept sorted by `(degree, birth, death)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct PersistenceDiagram {
    bars: Vec<Bar>,
}

impl PersistenceDiagram {
    /// Merges equal bars and drops empty ones.
    pub fn new(mut bars: Vec<Bar>) -> Self {
        bars.retain(|b| b.multiplicity > 0);
        bars.sort_by(|a, b| {
            (a.degree, a.birth, a.death)
                .partial_cmp(&(b.degree, b.birth, b.death))
                .expect("bar endpoints are not NaN")
        });
        let mut merged: Vec<Bar> = Vec::with_capacity(bars.len());
        for b in bars {
            match merged.last_mut() {
                Some(last) if (last.degree, last.birth, last.death) == (b.degree, b.birth, b.death) => {
                    last.multiplicity += b.multiplicity
                }
                _ => merged.push(b),
            }
        }
        Self { bars: merged }
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    /// `(birth, death)` pairs in degree `k`, repeated by multiplicity.
    pub fn points(&self, k: usize) -> Vec<(f64, f64)> {
        self.bars
            .iter()
            .filter(|b| b.degree == k)
            .flat_map(|b| std::iter::repeat_n((b.birth, b.death), b.multiplicity))
            .collect()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.bars.iter().map(|b| b.degree).max()
    }

    /// Whether both diagrams have the same bars, with endpoints within `tol`.
    pub fn approx_eq(&self, other: &PersistenceDiagram, tol: f64) -> bool {
        let close = |x: f64, y: f64| x == y || (x - y).abs() <= tol;
        self.bars.len() == other.bars.len()
            && self.bars.iter().zip(&other.bars).all(|(a, b)| {
                a.degree == b.degree && a.multiplicity == b.multiplicity && close(a.birth, b.birth) && close(a.death, b.death)
            })
    }
}
