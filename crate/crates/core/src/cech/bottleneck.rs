//! Bottleneck distance between persistence diagrams.

use super::persistence::PersistenceDiagram;
use super::CechError;

fn linf(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs())
}

fn half_persistence(a: (f64, f64)) -> f64 {
    (a.1 - a.0) / 2.0
}

/// Bottleneck distance between the degree-`k` parts of two diagrams.
///
/// Infinite bars are matched only with infinite bars (by sorted birth); a
/// different number of them gives [`CechError::InfiniteMismatch`].
pub fn bottleneck(d1: &PersistenceDiagram, d2: &PersistenceDiagram, k: usize) -> Result<f64, CechError> {
    let (p1, p2) = (d1.points(k), d2.points(k));
    let split = |p: Vec<(f64, f64)>| -> (Vec<(f64, f64)>, Vec<f64>) {
        let (inf, fin): (Vec<_>, Vec<_>) = p.into_iter().partition(|x| x.1.is_infinite());
        let mut births: Vec<f64> = inf.into_iter().map(|x| x.0).collect();
        births.sort_by(f64::total_cmp);
        (fin, births)
    };
    let (f1, i1) = split(p1);
    let (f2, i2) = split(p2);
    if i1.len() != i2.len() {
        return Err(CechError::InfiniteMismatch { degree: k });
    }
    let infinite = i1.iter().zip(&i2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(infinite.max(finite_bottleneck(&f1, &f2)))
}

/// Bottleneck distance between finite point multisets with diagonal padding.
pub fn finite_bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut candidates: Vec<f64> = vec![0.0];
    candidates.extend(a.iter().chain(b).map(|&p| half_persistence(p)));
    for &p in a {
        candidates.extend(b.iter().map(|&q| linf(p, q)));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    // the largest candidate always admits a matching (everything to the diagonal)
    while lo < hi {
        let mid = (lo + hi) / 2;
        if perfect_matching(a, b, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

/// Left side: `a` then one diagonal slot per point of `b`; right side: `b`
/// then one diagonal slot per point of `a`.
fn perfect_matching(a: &[(f64, f64)], b: &[(f64, f64)], c: f64) -> bool {
    let (n, m) = (a.len(), b.len());
    let size = n + m;
    let adjacent = |l: usize, r: usize| -> bool {
        match (l < n, r < m) {
            (true, true) => linf(a[l], b[r]) <= c,
            (true, false) => r - m == l && half_persistence(a[l]) <= c,
            (false, true) => l - n == r && half_persistence(b[r]) <= c,
            (false, false) => true,
        }
    };
    let mut owner: Vec<Option<usize>> = vec![None; size];
    fn augment(
        l: usize,
        size: usize,
        adjacent: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for r in 0..size {
            if !seen[r] && adjacent(l, r) {
                seen[r] = true;
                if owner[r].is_none_or(|o| augment(o, size, adjacent, seen, owner)) {
                    owner[r] = Some(l);
                    return true;
                }
            }
        }
        false
    }
    (0..size).all(|l| {
        let mut seen = vec![false; size];
        augment(l, size, &adjacent, &mut seen, &mut owner)
    })
}
