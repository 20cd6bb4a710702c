//! Random instances for property tests and the acceptance suite.
//!
//! Sheaves are built from coordinate subspaces so restrictions always commute:
//! each nonempty open `U` picks coordinates `C_U ∋ 0` of an ambient `ℝ^D`
//! with `C_U ⊆ C_V` whenever `U ⊆ V`, and an invertible `M_U`; the restriction
//! `U ⊆ V` is `M_U · E_U E_Vᵀ · M_V⁻¹`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cech::{Field, Mat, PersistenceModule, F2};
use crate::finspace::{FiniteSpace, OpenId, Orientation, PartialCover, PointSet, SpaceId, TopologyError};
use crate::metric::{Norm, PseudometricSpace, StalkMap, Value};
use crate::morphism::SheafMorphism;
use crate::pointcloud::PointCloud;
use crate::sheaf::{Assignment, MetricSheaf, COMMUTATIVITY_TOL};

/// A random finite space with at most `max_points` points and `max_opens` opens.
pub fn random_space(rng: &mut impl Rng, max_points: usize, max_opens: usize) -> FiniteSpace {
    loop {
        let n = rng.gen_range(1..=max_points.max(1));
        let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let p = rng.gen_range(0.1..0.6);
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.gen_bool(p) {
                    pairs.push((labels[i].clone(), labels[j].clone()));
                }
            }
        }
        let orientation = if rng.gen_bool(0.5) { Orientation::DownSets } else { Orientation::UpSets };
        match FiniteSpace::alexandrov(&labels, &pairs, max_opens, orientation) {
            Ok(space) => return space,
            Err(TopologyError::CapExceeded { .. }) => continue,
            Err(e) => panic!("random preorder rejected: {e}"),
        }
    }
}

fn random_invertible(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-2.0f64..2.0));
        if m.determinant().abs() > 0.2 {
            return m;
        }
    }
}

fn selection(coords: &[usize], ambient: usize) -> DMatrix<f64> {
    DMatrix::from_fn(coords.len(), ambient, |r, c| if coords[r] == c { 1.0 } else { 0.0 })
}

/// Coordinate data behind a random sheaf; `projection[U]` maps the ambient
/// space onto the stalk over `U` (absent for `∅`).
#[derive(Clone, Debug)]
pub struct SheafFrame {
    pub ambient: usize,
    pub projection: Vec<Option<DMatrix<f64>>>,
}

fn random_frame(rng: &mut impl Rng, space: &FiniteSpace, ambient: usize, full: bool) -> SheafFrame {
    let mut coords: Vec<Vec<usize>> = vec![Vec::new(); space.n_opens()];
    let mut projection = vec![None; space.n_opens()];
    // ids ascend with cardinality, so parents come first when walking backwards
    for u in space.open_ids().collect::<Vec<_>>().into_iter().rev() {
        if u == space.empty() {
            continue;
        }
        let allowed: Vec<usize> = if u == space.whole() {
            (0..ambient).collect()
        } else {
            (0..ambient)
                .filter(|c| {
                    space
                        .hasse()
                        .iter()
                        .filter(|(lo, _)| *lo == u)
                        .all(|(_, hi)| coords[hi.0].contains(c))
                })
                .collect()
        };
        let chosen: Vec<usize> = if full {
            allowed
        } else {
            allowed.into_iter().filter(|&c| c == 0 || rng.gen_bool(0.6)).collect()
        };
        let m = random_invertible(rng, chosen.len());
        projection[u.0] = Some(&m * selection(&chosen, ambient));
        coords[u.0] = chosen;
    }
    SheafFrame { ambient, projection }
}

fn frame_sheaf(rng: &mut impl Rng, space: Arc<FiniteSpace>, frame: &SheafFrame) -> MetricSheaf {
    let stalks = space
        .open_ids()
        .map(|u| match &frame.projection[u.0] {
            None => PseudometricSpace::OnePoint,
            Some(p) => {
                let norm = if rng.gen_bool(0.5) { Norm::L2 } else { Norm::Linf };
                PseudometricSpace::euclidean(p.nrows(), norm).expect("positive dimension")
            }
        })
        .collect();
    let generators: HashMap<(OpenId, OpenId), StalkMap> = space
        .hasse()
        .iter()
        .filter(|(u, _)| *u != space.empty())
        .map(|&(u, v)| {
            let pu = frame.projection[u.0].as_ref().expect("nonempty");
            let pv = frame.projection[v.0].as_ref().expect("nonempty");
            let pinv = pv.clone().pseudo_inverse(1e-12).expect("full row rank");
            ((u, v), StalkMap::Linear(pu * pinv))
        })
        .collect();
    MetricSheaf::new(space, stalks, generators, COMMUTATIVITY_TOL).expect("coordinate frames commute")
}

/// A random sheaf with Euclidean stalks of dimension `≤ max_dim` on a space
/// with `≤ max_opens` opens.
pub fn random_sheaf(rng: &mut impl Rng, max_opens: usize, max_dim: usize) -> MetricSheaf {
    let space = Arc::new(random_space(rng, 4, max_opens));
    let ambient = rng.gen_range(1..=max_dim.max(1));
    let frame = random_frame(rng, &space, ambient, false);
    frame_sheaf(rng, space, &frame)
}

fn random_value(rng: &mut impl Rng, stalk: &PseudometricSpace, scale: f64) -> Value {
    match stalk {
        PseudometricSpace::OnePoint => Value::Point,
        PseudometricSpace::Euclidean { dim, .. } => Value::Vector((0..*dim).map(|_| rng.gen_range(-scale..scale)).collect()),
        PseudometricSpace::Table { labels, .. } => Value::Label(rng.gen_range(0..labels.len())),
    }
}

/// Independent uniform values on every open.
pub fn random_assignment(rng: &mut impl Rng, sheaf: &MetricSheaf, scale: f64) -> Assignment {
    let mut a = Assignment::empty(sheaf);
    for u in sheaf.space().open_ids() {
        if u != sheaf.space().empty() {
            a.set(sheaf, u, random_value(rng, sheaf.stalk(u), scale)).expect("value in stalk");
        }
    }
    a
}

/// A global section from a random value on the whole space.
pub fn random_section(rng: &mut impl Rng, sheaf: &MetricSheaf, scale: f64) -> Assignment {
    let top = random_value(rng, sheaf.stalk(sheaf.space().whole()), scale);
    sheaf.section_from_top(top).expect("total section")
}

/// Moves every Euclidean value by at most `delta` in its stalk's metric.
pub fn perturb(rng: &mut impl Rng, sheaf: &MetricSheaf, a: &Assignment, delta: f64) -> Assignment {
    let mut b = a.clone();
    for u in sheaf.space().open_ids() {
        let (Some(Value::Vector(x)), PseudometricSpace::Euclidean { dim, norm }) = (a.value(u), sheaf.stalk(u)) else {
            continue;
        };
        let step: Vec<f64> = match norm {
            Norm::Linf => (0..*dim).map(|_| rng.gen_range(-delta..=delta)).collect(),
            Norm::L2 => {
                let dir: Vec<f64> = (0..*dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let len = Norm::L2.of(&dir).max(1e-300);
                let r = rng.gen_range(0.0..=delta);
                dir.iter().map(|d| d / len * r).collect()
            }
        };
        let moved = x.iter().zip(&step).map(|(v, s)| v + s).collect();
        b.set(sheaf, u, Value::Vector(moved)).expect("value in stalk");
    }
    b
}

/// A validated morphism between random sheaves along a random continuous map
/// whose image meets every nonempty open of the target.
pub fn random_morphism(rng: &mut impl Rng, max_opens: usize, max_dim: usize) -> SheafMorphism {
    let (x, y, base) = loop {
        let x = random_space(rng, 4, max_opens);
        let y = if rng.gen_bool(0.3) { x.clone() } else { random_space(rng, 4, max_opens) };
        let base: Vec<usize> = (0..x.n_points()).map(|_| rng.gen_range(0..y.n_points())).collect();
        let dense = y
            .open_ids()
            .filter(|&u| u != y.empty())
            .all(|u| y.members(u).ones().any(|p| base.contains(&p)));
        if x.is_continuous(&y, &base) && dense {
            break (Arc::new(x), Arc::new(y), base);
        }
    };
    let ambient = rng.gen_range(1..=max_dim.max(1));
    let source_frame = random_frame(rng, &x, ambient, true);
    let target_frame = random_frame(rng, &y, ambient, false);
    let source = Arc::new(frame_sheaf(rng, x.clone(), &source_frame));
    let target = Arc::new(frame_sheaf(rng, y.clone(), &target_frame));
    let components = y
        .open_ids()
        .map(|u| {
            if u == y.empty() {
                return StalkMap::Collapse;
            }
            let w = x.open_id(&FiniteSpace::preimage(&base, y.members(u))).expect("continuous");
            let ps = source_frame.projection[w.0].as_ref().expect("dense image");
            let pt = target_frame.projection[u.0].as_ref().expect("nonempty");
            StalkMap::Linear(pt * ps.clone().try_inverse().expect("invertible"))
        })
        .collect();
    SheafMorphism::new(source, target, base, components, 1e-8).expect("frames commute")
}

fn random_subset(rng: &mut impl Rng, of: &[usize]) -> Vec<usize> {
    loop {
        let s: Vec<usize> = of.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

fn to_set(points: &[usize], n: usize) -> PointSet {
    let mut s = PointSet::with_capacity(n);
    points.iter().for_each(|&p| s.insert(p));
    s
}

/// Number of refinement functions `fine → coarse`.
pub fn count_refinements(fine: &PartialCover, coarse: &PartialCover) -> usize {
    fine.members()
        .iter()
        .map(|v| coarse.members().iter().filter(|u| v.is_subset(u)).count())
        .product()
}

/// A random refinement `fine ≤ coarse` on a small universe admitting at least
/// two refinement functions.
pub fn random_refinement_pair(rng: &mut impl Rng) -> (PartialCover, PartialCover) {
    loop {
        let n = rng.gen_range(3..=7);
        let space = SpaceId { fingerprint: rng.gen(), n_points: n };
        let all: Vec<usize> = (0..n).collect();
        let k = rng.gen_range(2..=5);
        let coarse: Vec<Vec<usize>> = (0..k).map(|_| random_subset(rng, &all)).collect();
        let fine: Vec<Vec<usize>> = (0..rng.gen_range(1..=6))
            .map(|_| {
                let parent = coarse.choose(rng).expect("nonempty");
                random_subset(rng, parent)
            })
            .collect();
        let coarse = PartialCover::from_sets(space, coarse.iter().map(|s| to_set(s, n)).collect()).expect("in range");
        let fine = PartialCover::from_sets(space, fine.iter().map(|s| to_set(s, n)).collect()).expect("in range");
        if count_refinements(&fine, &coarse) >= 2 {
            return (fine, coarse);
        }
    }
}

/// A uniformly random valid refinement function.
pub fn random_refinement_function(rng: &mut impl Rng, fine: &PartialCover, coarse: &PartialCover) -> Vec<usize> {
    fine.members()
        .iter()
        .map(|v| {
            let options: Vec<usize> =
                (0..coarse.len()).filter(|&i| v.is_subset(&coarse.members()[i])).collect();
            *options.choose(rng).expect("fine refines coarse")
        })
        .collect()
}

/// A random `F2` module with `1..=max_len` indices and dimensions `≤ max_dim`.
pub fn random_f2_module(rng: &mut impl Rng, max_len: usize, max_dim: usize) -> PersistenceModule<F2> {
    let len = rng.gen_range(1..=max_len.max(1));
    let dims: Vec<usize> = (0..len).map(|_| rng.gen_range(0..=max_dim)).collect();
    let maps = (0..len - 1)
        .map(|i| {
            let mut m = Mat::<F2>::zeros(dims[i], dims[i + 1]);
            for r in 0..dims[i] {
                for c in 0..dims[i + 1] {
                    m.set(r, c, F2::from_i64(rng.gen_range(0..2)));
                }
            }
            m
        })
        .collect();
    let thresholds = (0..len).map(|i| i as f64).collect();
    PersistenceModule::new(0, thresholds, dims, maps).expect("shapes chain")
}

/// `n` points drawn uniformly from `[0, 1]^m`.
pub fn random_cloud(rng: &mut impl Rng, n: usize, m: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| (0..m).map(|_| rng.gen_range(0.0..1.0)).collect()).collect()).expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sheaves_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = random_sheaf(&mut rng, 6, 3);
            assert!(s.space().n_opens() <= 6);
            assert!(s.stalks().iter().all(|st| st.dim().unwrap_or(0) <= 3));
            let sec = random_section(&mut rng, &s, 1.0);
            assert!(s.consistency_radius(&sec).unwrap() < 1e-9);
        }
    }

    #[test]
    fn perturbation_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = random_sheaf(&mut rng, 6, 3);
            let a = random_assignment(&mut rng, &s, 1.0);
            let b = perturb(&mut rng, &s, &a, 0.1);
            assert!(s.assignment_distance(&a, &b).unwrap() <= 0.1 + 1e-12);
        }
    }

    #[test]
    fn morphisms_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let m = random_morphism(&mut rng, 6, 3);
            assert!(m.lipschitz().is_finite());
        }
    }

    #[test]
    fn refinement_pairs_have_choices() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let (fine, coarse) = random_refinement_pair(&mut rng);
            assert!(fine.refines(&coarse).unwrap());
            assert!(count_refinements(&fine, &coarse) >= 2);
            let tau = random_refinement_function(&mut rng, &fine, &coarse);
            crate::cech::validate_refinement(&fine, &coarse, &tau).unwrap();
        }
    }
}
