//! Point clouds as partial assignments to the constant sheaf on the simplex
//! topology, and the Čech complex they induce.
//!
//! Simplices on `N` points are bitmasks `1..2^N`. Under the down-set
//! orientation the star of a simplex is the set of its faces.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::cech::{Bar, PersistenceDiagram};
use crate::filtration::{cluster, CoarseningFiltration, FiltrationError, BREAKPOINT_MERGE};
use crate::finspace::{FiniteSpace, Orientation, PartialCover, PointSet, SpaceId, TopologyError};
use crate::metric::{Norm, PseudometricSpace, Value};
use crate::sheaf::{Assignment, MetricSheaf, SheafError};

/// Default limit on the number of points.
pub const DEFAULT_POINT_CAP: usize = 8;
/// Default limit on the number of opens of the full simplex topology.
pub const DEFAULT_OPENS_CAP: usize = 2000;
/// Simplices are `u32` masks.
const MAX_POINTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CloudError {
    #[error("no points given")]
    EmptyInput,
    #[error("point {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("point {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("{n} points exceed the cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Filtration(#[from] FiltrationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self, CloudError> {
        let dim = points.first().ok_or(CloudError::EmptyInput)?.len();
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(CloudError::DimensionMismatch { index, expected: dim, got: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(CloudError::NonFinite { index });
            }
        }
        Ok(Self { points, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_cap(&self, cap: usize) -> Result<(), CloudError> {
        let cap = cap.min(MAX_POINTS);
        if self.len() > cap {
            return Err(CloudError::CapExceeded { n: self.len(), cap });
        }
        Ok(())
    }

    fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        "point-cloud".hash(&mut h);
        self.dim.hash(&mut h);
        for p in &self.points {
            p.iter().for_each(|x| x.to_bits().hash(&mut h));
        }
        h.finish()
    }

    fn subset(&self, mask: u32) -> Vec<&[f64]> {
        vertices(mask).map(|i| self.points[i].as_slice()).collect()
    }
}

/// Vertex indices of a simplex mask.
pub fn vertices(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask >> i & 1 == 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    fn contains(&self, p: &[f64]) -> bool {
        dist(&self.center, p) <= self.radius + 1e-12 * self.radius.max(1.0)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smallest ball with every point of `boundary` on its sphere, centered in
/// their affine hull.
fn circumball(points: &[&[f64]], boundary: &[usize]) -> Option<Ball> {
    let (&first, rest) = boundary.split_first()?;
    let p0 = points[first];
    if rest.is_empty() {
        return Some(Ball { center: p0.to_vec(), radius: 0.0 });
    }
    let m = p0.len();
    let k = rest.len();
    let v = DMatrix::from_fn(m, k, |r, c| points[rest[c]][r] - p0[r]);
    let gram = v.transpose() * &v;
    let rhs = DVector::from_fn(k, |j, _| v.column(j).norm_squared() / 2.0);
    let lambda = gram.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let offset = &v * lambda;
    let center: Vec<f64> = (0..m).map(|r| p0[r] + offset[r]).collect();
    let radius = boundary.iter().map(|&i| dist(&center, points[i])).fold(0.0, f64::max);
    Some(Ball { center, radius })
}

/// Move-to-front Welzl recursion over `order[..end]` with fixed `boundary`.
fn welzl(points: &[&[f64]], order: &mut [usize], end: usize, boundary: &mut Vec<usize>, dim: usize) -> Option<Ball> {
    let mut ball = circumball(points, boundary);
    if boundary.len() == dim + 1 {
        return ball;
    }
    for i in 0..end {
        let p = order[i];
        if ball.as_ref().is_none_or(|b| !b.contains(points[p])) {
            boundary.push(p);
            ball = welzl(points, order, i, boundary, dim);
            boundary.pop();
            order[..=i].rotate_right(1);
        }
    }
    ball
}

/// Smallest enclosing ball by exhaustive search over supports of at most
/// `dim + 1` points.
fn brute_force_ball(points: &[&[f64]]) -> Ball {
    let n = points.len();
    let dim = points[0].len();
    let mut best: Option<Ball> = None;
    for mask in 1u32..(1 << n) {
        if mask.count_ones() as usize > dim + 1 {
            continue;
        }
        let support: Vec<usize> = vertices(mask).collect();
        if let Some(b) = circumball(points, &support) {
            let smaller = best.as_ref().is_none_or(|c| b.radius < c.radius);
            if smaller && points.iter().all(|p| b.contains(p)) {
                best = Some(b);
            }
        }
    }
    best.expect("the ball around the farthest pair's bounding support exists")
}

/// Minimum enclosing ball.
pub fn miniball(points: &[&[f64]]) -> Result<Ball, CloudError> {
    let dim = points.first().ok_or(CloudError::EmptyInput)?.len();
    let mut order: Vec<usize> = (0..points.len()).collect();
    let ball = welzl(points, &mut order, points.len(), &mut Vec::new(), dim);
    // degenerate supports can leave the recursion short; fall back to search
    match ball {
        Some(b) if points.iter().all(|p| b.contains(p)) => Ok(b),
        _ => Ok(brute_force_ball(points)),
    }
}

/// Miniball radius of every simplex, raised to the maximum over its faces so
/// that the Čech filtration is monotone. Index `mask`; entry 0 is unused.
pub fn simplex_radii(cloud: &PointCloud) -> Vec<f64> {
    let n = cloud.len();
    let raw: Vec<f64> = (0u32..1 << n)
        .into_par_iter()
        .map(|mask| if mask == 0 { 0.0 } else { miniball(&cloud.subset(mask)).expect("nonempty").radius })
        .collect();
    let mut r = raw;
    for mask in 1u32..1 << n {
        let lifted = vertices(mask).map(|v| r[(mask & !(1 << v)) as usize]).fold(r[mask as usize], f64::max);
        r[mask as usize] = lifted;
    }
    r
}

fn mask_label(mask: u32) -> String {
    vertices(mask).map(|i| format!("x{i}")).collect()
}

/// The constant `ℝ^M` sheaf on the Alexandrov topology of the simplex, with
/// the cloud as a partial assignment on vertex stars.
#[derive(Clone, Debug)]
pub struct CloudSheaf {
    pub sheaf: Arc<MetricSheaf>,
    pub partial: Assignment,
    /// Simplex mask of each point of the space.
    pub masks: Vec<u32>,
}

impl CloudSheaf {
    /// Star of a simplex (its faces).
    pub fn star(&self, mask: u32) -> crate::finspace::OpenId {
        let point = self.masks.iter().position(|&m| m == mask).expect("simplex mask in range");
        self.sheaf.space().star_of_point(point)
    }
}

pub fn build_cloud_sheaf(cloud: &PointCloud, point_cap: usize, opens_cap: usize) -> Result<CloudSheaf, CloudError> {
    cloud.check_cap(point_cap)?;
    let n = cloud.len();
    let masks: Vec<u32> = (1u32..1 << n).collect();
    let labels: Vec<String> = masks.iter().map(|&m| mask_label(m)).collect();
    let pairs: Vec<(String, String)> = masks
        .iter()
        .flat_map(|&m| vertices(m).filter(move |_| m.count_ones() > 1).map(move |v| (m & !(1 << v), m)))
        .map(|(a, b)| (mask_label(a), mask_label(b)))
        .collect();
    let space = Arc::new(FiniteSpace::alexandrov(&labels, &pairs, opens_cap, Orientation::DownSets)?);
    let stalk = PseudometricSpace::euclidean(cloud.dim().max(1), Norm::L2).map_err(|e| SheafError::StalkShapeMismatch {
        open: "X".into(),
        reason: e.to_string(),
    })?;
    let sheaf = Arc::new(MetricSheaf::constant(space.clone(), stalk)?);
    let mut partial = Assignment::empty(&sheaf);
    for i in 0..n {
        let star = space.star_of_point((1u32 << i) as usize - 1);
        partial.set(&sheaf, star, Value::Vector(padded(&cloud.points[i])))?;
    }
    Ok(CloudSheaf { sheaf, partial, masks })
}

/// Zero-dimensional clouds live in `ℝ¹` so stalks are never empty.
fn padded(p: &[f64]) -> Vec<f64> {
    if p.is_empty() {
        vec![0.0]
    } else {
        p.to_vec()
    }
}

/// Every open gets the miniball center of the cloud points whose vertex stars
/// it contains.
pub fn circumcenter_extension(bundle: &CloudSheaf, cloud: &PointCloud) -> Result<Assignment, CloudError> {
    let sheaf = &bundle.sheaf;
    let space = sheaf.space();
    let mut a = bundle.partial.clone();
    for u in space.open_ids() {
        if u == space.empty() || a.value(u).is_some() {
            continue;
        }
        let members = space.members(u);
        let inside: Vec<&[f64]> = (0..cloud.len())
            .filter(|&i| members.contains((1usize << i) - 1))
            .map(|i| cloud.points[i].as_slice())
            .collect();
        let center = miniball(&inside)?.center;
        a.fill(sheaf, u, Value::Vector(padded(&center)))?;
    }
    Ok(a)
}

/// Universe of the cloud filtration: one point per nonempty simplex.
pub fn cloud_space(cloud: &PointCloud) -> SpaceId {
    SpaceId { fingerprint: cloud.fingerprint(), n_points: (1usize << cloud.len()) - 1 }
}

fn star_set(mask: u32, n_points: usize) -> PointSet {
    let mut s = PointSet::with_capacity(n_points);
    // enumerate nonempty submasks
    let mut sub = mask;
    while sub != 0 {
        s.insert(sub as usize - 1);
        sub = (sub - 1) & mask;
    }
    s
}

/// Radius levels: index 0 is radius 0, then the distinct positive radii
/// after merging near-equal values.
fn levels(radii: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let merged = cluster(&radii[1..]);
    let mut breakpoints: Vec<f64> =
        merged.iter().copied().filter(|&r| r > BREAKPOINT_MERGE).collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let mut level = vec![0; radii.len()];
    for (i, &r) in merged.iter().enumerate() {
        level[i + 1] = breakpoints.partition_point(|&b| b < r) + usize::from(r > BREAKPOINT_MERGE);
    }
    (breakpoints, level)
}

/// Stars of the maximal simplices present at each radius level.
pub fn cloud_consistency_filtration(cloud: &PointCloud, point_cap: usize) -> Result<CoarseningFiltration, CloudError> {
    cloud.check_cap(point_cap)?;
    let n = cloud.len();
    let space = cloud_space(cloud);
    let radii = simplex_radii(cloud);
    let (breakpoints, level) = levels(&radii);
    let covers = (0..=breakpoints.len())
        .map(|t| {
            let present = |m: u32| level[m as usize] <= t;
            let maximal: Vec<PointSet> = (1u32..1 << n)
                .filter(|&m| present(m))
                .filter(|&m| (0..n).all(|v| m >> v & 1 == 1 || !present(m | 1 << v)))
                .map(|m| star_set(m, space.n_points))
                .collect();
            PartialCover::from_sets(space, maximal)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CoarseningFiltration::new(space, breakpoints, covers)?)
}

/// Simplices of the Čech complex at `eps`: miniball radius strictly below `eps`.
/// Sorted by dimension, then lexicographically.
pub fn cech_complex_oracle(cloud: &PointCloud, eps: f64) -> Vec<Vec<usize>> {
    let n = cloud.len();
    let mut out: Vec<Vec<usize>> = (1u32..1 << n)
        .filter(|&m| miniball(&cloud.subset(m)).expect("nonempty").radius < eps)
        .map(|m| vertices(m).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

/// Persistent homology of the Čech filtration by column reduction over `F2`,
/// in degrees `0..=degree_cap`. Bars shorter than the breakpoint merge
/// tolerance are dropped.
pub fn oracle_barcode(cloud: &PointCloud, degree_cap: usize) -> PersistenceDiagram {
    let n = cloud.len();
    let radii = simplex_radii(cloud);
    let mut order: Vec<u32> = (1u32..1 << n).filter(|m| m.count_ones() as usize <= degree_cap + 2).collect();
    order.sort_by(|&a, &b| {
        radii[a as usize]
            .total_cmp(&radii[b as usize])
            .then(a.count_ones().cmp(&b.count_ones()))
            .then_with(|| vertices(a).cmp(vertices(b)))
    });
    let position: std::collections::HashMap<u32, usize> = order.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    // columns as sorted row lists
    let mut columns: Vec<Vec<usize>> = order
        .iter()
        .map(|&m| {
            let mut rows: Vec<usize> = if m.count_ones() == 1 {
                Vec::new()
            } else {
                vertices(m).map(|v| position[&(m & !(1 << v))]).collect()
            };
            rows.sort_unstable();
            rows
        })
        .collect();
    let mut owner_of_low: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut paired = vec![false; order.len()];
    let mut bars = Vec::new();
    let close = |b: f64, d: f64| d - b <= BREAKPOINT_MERGE * d.abs().max(1.0);
    for j in 0..order.len() {
        while let Some(&low) = columns[j].last() {
            match owner_of_low.get(&low) {
                Some(&k) => {
                    let other = columns[k].clone();
                    columns[j] = symmetric_difference(&columns[j], &other);
                }
                None => break,
            }
        }
        if let Some(&low) = columns[j].last() {
            owner_of_low.insert(low, j);
            paired[low] = true;
            paired[j] = true;
            let (birth, death) = (radii[order[low] as usize], radii[order[j] as usize]);
            let degree = order[low].count_ones() as usize - 1;
            if !close(birth, death) {
                bars.push(Bar { degree, birth, death, multiplicity: 1 });
            }
        }
    }
    for (i, &m) in order.iter().enumerate() {
        let degree = m.count_ones() as usize - 1;
        if !paired[i] && degree <= degree_cap {
            bars.push(Bar { degree, birth: radii[m as usize], death: f64::INFINITY, multiplicity: 1 });
        }
    }
    // report births on the merged scale used by the sheaf pipeline
    let (breakpoints, _) = levels(&radii);
    let snap = |t: f64| {
        if t.is_infinite() || t <= BREAKPOINT_MERGE {
            return if t.is_infinite() { t } else { 0.0 };
        }
        breakpoints.iter().copied().find(|&b| (b - t).abs() <= BREAKPOINT_MERGE * b.max(1.0)).unwrap_or(t)
    };
    PersistenceDiagram::new(
        bars.into_iter().map(|b| Bar { birth: snap(b.birth), death: snap(b.death), ..b }).collect(),
    )
}

fn symmetric_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(*x);
                i += 1;
            }
            (Some(x), None) => {
                out.push(*x);
                i += 1;
            }
            (_, Some(y)) => {
                out.push(*y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Ball radius of a simplex next to the local consistency radius of its star
/// under the circumcenter extension.
#[derive(Clone, Debug, PartialEq)]
pub struct StarCheck {
    pub simplex: Vec<usize>,
    pub ball_radius: f64,
    pub local_radius: f64,
}

/// Recomputes the local consistency radius of every simplex star with the
/// general engine. Needs the full simplex topology, so `N ≤ 4` by default.
pub fn cross_check(cloud: &PointCloud, opens_cap: usize) -> Result<Vec<StarCheck>, CloudError> {
    let bundle = build_cloud_sheaf(cloud, MAX_POINTS, opens_cap)?;
    let ext = circumcenter_extension(&bundle, cloud)?;
    let radii = simplex_radii(cloud);
    bundle
        .masks
        .iter()
        .map(|&m| {
            Ok(StarCheck {
                simplex: vertices(m).collect(),
                ball_radius: radii[m as usize],
                local_radius: bundle.sheaf.local_consistency_radius(&ext, bundle.star(m))?,
            })
        })
        .collect()
}
