//! Čech cohomology of a partial cover, computed as simplicial cohomology of its
//! nerve, and the maps induced by refinement.

use crate::finspace::PartialCover;

use super::field::{sign, EchelonBasis, Field, Mat};
use super::nerve::Nerve;
use super::CechError;

/// Coboundary `δᵏ`: rows are `(k+1)`-simplices, columns `k`-simplices.
pub fn coboundary<F: Field>(nerve: &Nerve, k: usize) -> Mat<F> {
    let rows = nerve.simplices(k + 1);
    let cols = nerve.count(k);
    let mut m = Mat::zeros(rows.len(), cols);
    let mut face = Vec::with_capacity(k + 1);
    for (r, s) in rows.iter().enumerate() {
        for skip in 0..s.len() {
            face.clear();
            face.extend(s.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v));
            let c = nerve.simplex_index(k, &face).expect("nerve is closed under faces");
            m.set(r, c, sign::<F>(skip % 2 == 1));
        }
    }
    m
}

/// Cohomology of one cover in degrees `0..=degree_cap`, with a chosen basis of
/// representative cocycles per degree.
#[derive(Clone, Debug)]
pub struct Cohomology<F: Field> {
    cover: PartialCover,
    nerve: Nerve,
    degree_cap: usize,
    ranks: Vec<usize>,
    reps: Vec<Vec<F::Vector>>,
    boundary_rank: Vec<usize>,
    /// Coboundaries inserted first, then the representatives.
    bases: Vec<EchelonBasis<F>>,
}

impl<F: Field> Cohomology<F> {
    pub fn new(cover: &PartialCover, degree_cap: usize) -> Self {
        let nerve = Nerve::new(cover, Some(degree_cap + 1));
        let mut ranks = Vec::with_capacity(degree_cap + 1);
        let mut reps = Vec::with_capacity(degree_cap + 1);
        let mut boundary_rank = Vec::with_capacity(degree_cap + 1);
        let mut bases = Vec::with_capacity(degree_cap + 1);
        let mut previous: Option<Mat<F>> = None;
        for k in 0..=degree_cap {
            let n = nerve.count(k);
            let delta = coboundary::<F>(&nerve, k);
            let mut basis = EchelonBasis::new(n, n);
            if let Some(prev) = &previous {
                for c in 0..prev.cols() {
                    basis.insert(prev.column(c));
                }
            }
            let b = basis.len();
            let mut r = Vec::new();
            for z in delta.kernel() {
                if basis.insert(z.clone()) {
                    r.push(z);
                }
            }
            ranks.push(r.len());
            reps.push(r);
            boundary_rank.push(b);
            bases.push(basis);
            previous = Some(delta);
        }
        Self { cover: cover.clone(), nerve, degree_cap, ranks, reps, boundary_rank, bases }
    }

    pub fn cover(&self) -> &PartialCover {
        &self.cover
    }

    pub fn nerve(&self) -> &Nerve {
        &self.nerve
    }

    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    /// Ranks in degrees `0..=degree_cap`.
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self, k: usize) -> usize {
        self.ranks.get(k).copied().unwrap_or(0)
    }

    /// Representative cocycles forming a basis of `Ȟᵏ`.
    pub fn representatives(&self, k: usize) -> &[F::Vector] {
        &self.reps[k]
    }

    /// Coordinates of the class of cocycle `c` in the representative basis;
    /// `None` if `c` is not a cocycle.
    pub fn coordinates(&self, k: usize, c: &F::Vector) -> Option<F::Vector> {
        let nerve_count = self.nerve.count(k + 1);
        if nerve_count > 0 {
            let delta = coboundary::<F>(&self.nerve, k);
            if F::first_nonzero(&delta.apply(c)).is_some() {
                return None;
            }
        }
        let combo = self.bases[k].express(c)?;
        let b = self.boundary_rank[k];
        let mut out = F::zeros(self.ranks[k]);
        for i in 0..self.ranks[k] {
            let x = F::get(&combo, b + i);
            if !x.is_zero() {
                F::set(&mut out, i, x);
            }
        }
        Some(out)
    }
}

/// The lexicographically least refinement function: each fine member goes to
/// the first coarse member containing it.
pub fn least_refinement(fine: &PartialCover, coarse: &PartialCover) -> Result<Vec<usize>, CechError> {
    if fine.space() != coarse.space() {
        return Err(CechError::SpaceMismatch);
    }
    fine.members()
        .iter()
        .map(|v| coarse.members().iter().position(|u| v.is_subset(u)).ok_or(CechError::NotARefinement))
        .collect()
}

/// Checks `V ⊆ τ(V)` for every fine member.
pub fn validate_refinement(fine: &PartialCover, coarse: &PartialCover, tau: &[usize]) -> Result<(), CechError> {
    if fine.space() != coarse.space() {
        return Err(CechError::SpaceMismatch);
    }
    if tau.len() != fine.len() {
        return Err(CechError::InvalidTau { member: tau.len().min(fine.len()) });
    }
    for (m, (&t, v)) in tau.iter().zip(fine.members()).enumerate() {
        match coarse.members().get(t) {
            Some(u) if v.is_subset(u) => {}
            _ => return Err(CechError::InvalidTau { member: m }),
        }
    }
    Ok(())
}

/// Cochain pullback `τ#` in degree `k` as a matrix from coarse to fine cochains.
pub fn pullback_matrix<F: Field>(fine: &Nerve, coarse: &Nerve, tau: &[usize], k: usize) -> Mat<F> {
    let mut m = Mat::zeros(fine.count(k), coarse.count(k));
    let image: Vec<usize> = (0..fine.n_vertices())
        .map(|v| coarse.vertex_of_member(tau[fine.member_of_vertex(v)]).expect("nonempty members map to vertices"))
        .collect();
    let mut mapped = Vec::with_capacity(k + 1);
    for (r, s) in fine.simplices(k).iter().enumerate() {
        mapped.clear();
        mapped.extend(s.iter().map(|&v| image[v]));
        // insertion sort, tracking the permutation parity
        let mut odd = false;
        for i in 1..mapped.len() {
            let mut j = i;
            while j > 0 && mapped[j - 1] > mapped[j] {
                mapped.swap(j - 1, j);
                odd = !odd;
                j -= 1;
            }
        }
        if mapped.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let c = coarse.simplex_index(k, &mapped).expect("refinement maps simplices to simplices");
        m.set(r, c, sign::<F>(odd));
    }
    m
}

/// Maps `Ȟᵏ(coarse) → Ȟᵏ(fine)` induced by a refinement, for every degree up to
/// the smaller degree cap. Matrix `k` has shape `fine rank × coarse rank`.
pub fn refinement_map<F: Field>(
    fine: &Cohomology<F>,
    coarse: &Cohomology<F>,
    tau: Option<&[usize]>,
) -> Result<Vec<Mat<F>>, CechError> {
    let tau = match tau {
        Some(t) => {
            validate_refinement(&fine.cover, &coarse.cover, t)?;
            t.to_vec()
        }
        None => least_refinement(&fine.cover, &coarse.cover)?,
    };
    let cap = fine.degree_cap.min(coarse.degree_cap);
    Ok((0..=cap)
        .map(|k| {
            let p = pullback_matrix::<F>(&fine.nerve, &coarse.nerve, &tau, k);
            let columns: Vec<F::Vector> = coarse
                .representatives(k)
                .iter()
                .map(|z| fine.coordinates(k, &p.apply(z)).expect("pullback of a cocycle is a cocycle"))
                .collect();
            Mat::from_columns(fine.rank(k), &columns)
        })
        .collect())
}
