//! Minimum-consistency extension of partially supported assignments.
//!
//! Free values on table stalks never interact with free values on Euclidean
//! stalks (a restriction between the two kinds is constant), so the two parts
//! are solved separately: tables by enumeration, Euclidean values by
//!
//! * a sequence of linear programs when every term is an Linf norm or
//!   one-dimensional (the Linf objective is then piecewise linear). Later
//!   stages minimize the remaining terms with the tight ones pinned, which
//!   picks the lexicographic min-max point among the optimal extensions;
//! * least squares for the L2 objective over L2 (or one-dimensional) terms;
//! * multi-start subgradient descent with Polyak target-level steps otherwise.
//!
//! The reported value is always recomputed from the returned assignment.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::finspace::OpenId;
use crate::metric::{Norm, PseudometricSpace, StalkMap, Value};
use crate::sheaf::{Assignment, MetricSheaf, SheafError};

/// How critical thresholds are aggregated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Objective {
    #[default]
    Linf,
    L2,
}

#[derive(Clone, Debug)]
pub struct ExtendOptions {
    pub objective: Objective,
    pub tol: f64,
    /// Iteration budget per descent start.
    pub max_iter: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Largest number of table-value combinations to enumerate.
    pub enumeration_cap: u64,
    /// Refine a min-max optimum lexicographically (Linf linear programs only).
    pub lexicographic: bool,
    pub warm_start: Option<Assignment>,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Linf,
            tol: 1e-6,
            max_iter: 100_000,
            random_starts: 8,
            seed: 0x5eed,
            enumeration_cap: 1_000_000,
            lexicographic: true,
            warm_start: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// No free Euclidean values.
    Direct,
    LinearProgram,
    LeastSquares,
    Subgradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub method: Method,
    pub iterations: usize,
    pub final_step: f64,
    /// Bound on the distance to the optimum, when the method certifies one.
    pub certified_gap: Option<f64>,
    pub enumerated: u64,
}

#[derive(Clone, Debug)]
pub struct ExtensionResult {
    pub assignment: Assignment,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtendError {
    #[error("the assignment has no supported opens")]
    NoSupport,
    #[error("descent did not converge within the iteration budget ({0:?})")]
    NonConvergence(Diagnostics),
    #[error("{count} table combinations exceed the enumeration cap {cap}")]
    EnumerationTooLarge { count: String, cap: u64 },
    #[error(transparent)]
    Sheaf(#[from] SheafError),
}

/// Extends `partial` to every open, minimizing the consistency radius (or its
/// L2 variant). Supported values are kept as given.
pub fn extend_minimize(
    sheaf: &MetricSheaf,
    partial: &Assignment,
    opts: &ExtendOptions,
) -> Result<ExtensionResult, ExtendError> {
    if partial.fingerprint() != sheaf.fingerprint() {
        return Err(SheafError::SheafMismatch.into());
    }
    if partial.support().is_empty() {
        return Err(ExtendError::NoSupport);
    }
    let space = sheaf.space();
    let mut work = Assignment::empty(sheaf);
    let mut table_free = Vec::new();
    let mut euclid_free = Vec::new();
    for id in space.open_ids() {
        if id == space.empty() {
            continue;
        }
        if partial.support().contains(&id) {
            let v = partial.value(id).expect("supported opens carry values").clone();
            work.set(sheaf, id, v)?;
            continue;
        }
        match sheaf.stalk(id) {
            PseudometricSpace::OnePoint => work.fill(sheaf, id, Value::Point)?,
            PseudometricSpace::Table { labels, .. } => {
                table_free.push((id, labels.len()));
                work.fill(sheaf, id, Value::Label(0))?;
            }
            PseudometricSpace::Euclidean { dim, .. } => {
                euclid_free.push((id, *dim));
                work.fill(sheaf, id, sheaf.stalk(id).origin())?;
            }
        }
    }

    let enumerated = solve_tables(sheaf, &mut work, &table_free, opts)?;
    let mut diagnostics = if euclid_free.is_empty() {
        Diagnostics { method: Method::Direct, iterations: 0, final_step: 0.0, certified_gap: Some(0.0), enumerated }
    } else {
        let problem = EuclidProblem::build(sheaf, &work, &euclid_free);
        let warm = opts.warm_start.as_ref().map(|w| problem.read(w));
        let (x, diag) = problem.solve(sheaf, partial, opts, warm)?;
        problem.write(sheaf, &mut work, &x)?;
        diag
    };
    diagnostics.enumerated = enumerated;

    let value = match opts.objective {
        Objective::Linf => sheaf.consistency_radius(&work)?,
        Objective::L2 => sheaf.consistency_radius_l2(&work)?,
    };
    Ok(ExtensionResult { assignment: work, value, diagnostics })
}

/// The value of the best extension found with default options.
pub fn partial_consistency(sheaf: &MetricSheaf, partial: &Assignment) -> Result<f64, ExtendError> {
    Ok(extend_minimize(sheaf, partial, &ExtendOptions::default())?.value)
}

fn pair_terms(sheaf: &MetricSheaf) -> impl Iterator<Item = (OpenId, OpenId)> + '_ {
    let empty = sheaf.space().empty();
    sheaf.space().inclusion_pairs().filter(move |&(u, v)| u != v && u != empty)
}

/// Exhaustive search over free table values; returns the number of combinations.
fn solve_tables(
    sheaf: &MetricSheaf,
    work: &mut Assignment,
    free: &[(OpenId, usize)],
    opts: &ExtendOptions,
) -> Result<u64, ExtendError> {
    if free.is_empty() {
        return Ok(0);
    }
    let mut count: u64 = 1;
    for &(_, n) in free {
        count = count.checked_mul(n as u64).filter(|&c| c <= opts.enumeration_cap).ok_or_else(|| {
            ExtendError::EnumerationTooLarge {
                count: free
                    .iter()
                    .map(|(_, n)| n.to_string())
                    .collect::<Vec<_>>()
                    .join("×"),
                cap: opts.enumeration_cap,
            }
        })?;
    }
    let terms: Vec<(OpenId, OpenId)> = pair_terms(sheaf)
        .filter(|&(u, _)| matches!(sheaf.stalk(u), PseudometricSpace::Table { .. }))
        .collect();
    let score = |a: &Assignment| -> f64 {
        let vals = terms.iter().map(|&(u, v)| {
            let pushed = sheaf.restriction(u, v).expect("u ⊆ v").apply(a.value(v).expect("filled"));
            sheaf.stalk(u).distance(&pushed, a.value(u).expect("filled"))
        });
        match opts.objective {
            Objective::Linf => vals.fold(0.0, f64::max),
            Objective::L2 => vals.map(|d| d * d).sum(),
        }
    };
    let mut digits = vec![0usize; free.len()];
    let mut best = (f64::INFINITY, digits.clone());
    loop {
        for (k, &(id, _)) in free.iter().enumerate() {
            work.fill(sheaf, id, Value::Label(digits[k]))?;
        }
        let s = score(work);
        if s < best.0 {
            best = (s, digits.clone());
        }
        // mixed-radix increment
        let mut k = 0;
        while k < free.len() {
            digits[k] += 1;
            if digits[k] < free[k].1 {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
        if k == free.len() {
            break;
        }
    }
    for (k, &(id, _)) in free.iter().enumerate() {
        work.fill(sheaf, id, Value::Label(best.1[k]))?;
    }
    Ok(count)
}

/// `Σ coef · x[var] + constant`, one coordinate of a residual.
#[derive(Clone, Debug)]
struct Row {
    coefs: Vec<(usize, f64)>,
    constant: f64,
}

impl Row {
    fn eval(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// Residual `S(U ⊆ V) b(V) − b(U)` of one critical threshold, measured in `norm`.
#[derive(Clone, Debug)]
struct Term {
    rows: Vec<Row>,
    norm: Norm,
}

impl Term {
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64], weight: f64) -> f64 {
        let r: Vec<f64> = self.rows.iter().map(|row| row.eval(x)).collect();
        match self.norm {
            Norm::Linf => {
                let (k, v) = r
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |(bk, bv), (k, v)| if v.abs() > bv { (k, v.abs()) } else { (bk, bv) });
                if weight != 0.0 && v > 0.0 {
                    let s = r[k].signum() * weight;
                    for &(i, c) in &self.rows[k].coefs {
                        grad[i] += s * c;
                    }
                }
                v
            }
            Norm::L2 => {
                let v = r.iter().map(|t| t * t).sum::<f64>().sqrt();
                if weight != 0.0 && v > 0.0 {
                    for (row, rk) in self.rows.iter().zip(&r) {
                        for &(i, c) in &row.coefs {
                            grad[i] += weight * rk / v * c;
                        }
                    }
                }
                v
            }
        }
    }
}

struct EuclidProblem {
    /// `(open, offset, dim)` of every free Euclidean value.
    free: Vec<(OpenId, usize, usize)>,
    n: usize,
    terms: Vec<Term>,
}

impl EuclidProblem {
    fn build(sheaf: &MetricSheaf, work: &Assignment, free_opens: &[(OpenId, usize)]) -> Self {
        let mut offset_of = vec![None; sheaf.space().n_opens()];
        let mut free = Vec::new();
        let mut n = 0;
        for &(id, dim) in free_opens {
            offset_of[id.0] = Some(n);
            free.push((id, n, dim));
            n += dim;
        }
        let mut terms = Vec::new();
        for (u, v) in pair_terms(sheaf) {
            let PseudometricSpace::Euclidean { dim, norm } = *sheaf.stalk(u) else {
                continue;
            };
            let map = sheaf.restriction(u, v).expect("u ⊆ v");
            let mut rows: Vec<Row> = (0..dim).map(|_| Row { coefs: Vec::new(), constant: 0.0 }).collect();
            match (map, offset_of[v.0]) {
                (StalkMap::Linear(m), Some(off)) => {
                    for (k, row) in rows.iter_mut().enumerate() {
                        for c in 0..m.ncols() {
                            if m[(k, c)] != 0.0 {
                                row.coefs.push((off + c, m[(k, c)]));
                            }
                        }
                    }
                }
                _ => {
                    let pushed = map.apply(work.value(v).expect("filled"));
                    let p = pushed.as_vector().expect("Euclidean target");
                    for (row, pk) in rows.iter_mut().zip(p) {
                        row.constant += pk;
                    }
                }
            }
            match offset_of[u.0] {
                Some(off) => {
                    for (k, row) in rows.iter_mut().enumerate() {
                        row.coefs.push((off + k, -1.0));
                    }
                }
                None => {
                    let a = work.value(u).and_then(Value::as_vector).expect("Euclidean value");
                    for (row, ak) in rows.iter_mut().zip(a) {
                        row.constant -= ak;
                    }
                }
            }
            terms.push(Term { rows, norm });
        }
        Self { free, n, terms }
    }

    fn read(&self, a: &Assignment) -> Option<Vec<f64>> {
        let mut x = vec![0.0; self.n];
        for &(id, off, dim) in &self.free {
            let v = a.value(id)?.as_vector()?;
            if v.len() != dim {
                return None;
            }
            x[off..off + dim].copy_from_slice(v);
        }
        Some(x)
    }

    fn write(&self, sheaf: &MetricSheaf, a: &mut Assignment, x: &[f64]) -> Result<(), SheafError> {
        for &(id, off, dim) in &self.free {
            a.fill(sheaf, id, Value::Vector(x[off..off + dim].to_vec()))?;
        }
        Ok(())
    }

    fn objective(&self, x: &[f64], grad: Option<&mut [f64]>, objective: Objective) -> f64 {
        let mut scratch = vec![0.0; self.n];
        let vals: Vec<f64> = self.terms.iter().map(|t| t.value_and_grad(x, &mut scratch, 0.0)).collect();
        let (f, weights): (f64, Vec<f64>) = match objective {
            Objective::Linf => {
                let (k, f) = vals
                    .iter()
                    .enumerate()
                    .fold((usize::MAX, 0.0f64), |(bk, bv), (k, &v)| if v > bv { (k, v) } else { (bk, bv) });
                (f, (0..vals.len()).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
            }
            Objective::L2 => {
                let f = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                (f, vals.iter().map(|v| if f > 0.0 { v / f } else { 0.0 }).collect())
            }
        };
        if let Some(g) = grad {
            g.iter_mut().for_each(|v| *v = 0.0);
            for (t, w) in self.terms.iter().zip(weights) {
                if w != 0.0 {
                    t.value_and_grad(x, g, w);
                }
            }
        }
        f
    }

    fn solve(
        &self,
        sheaf: &MetricSheaf,
        partial: &Assignment,
        opts: &ExtendOptions,
        warm: Option<Option<Vec<f64>>>,
    ) -> Result<(Vec<f64>, Diagnostics), ExtendError> {
        let diag = |method, gap| Diagnostics { method, iterations: 0, final_step: 0.0, certified_gap: gap, enumerated: 0 };
        let one_dim_or = |norm: Norm| self.terms.iter().all(|t| t.rows.len() <= 1 || t.norm == norm);
        match opts.objective {
            Objective::Linf if one_dim_or(Norm::Linf) => {
                if let Some(x) = self.solve_lp(opts.lexicographic) {
                    return Ok((x, diag(Method::LinearProgram, Some(0.0))));
                }
            }
            Objective::L2 if one_dim_or(Norm::L2) => {
                return Ok((self.solve_least_squares(), diag(Method::LeastSquares, Some(0.0))));
            }
            _ => {}
        }
        self.solve_descent(sheaf, partial, opts, warm.flatten())
    }

    /// Least squares over all residual coordinates (minimum-norm solution).
    fn solve_least_squares(&self) -> Vec<f64> {
        let rows: Vec<&Row> = self.terms.iter().flat_map(|t| &t.rows).collect();
        let mut a = DMatrix::zeros(rows.len(), self.n);
        let mut b = DVector::zeros(rows.len());
        for (r, row) in rows.iter().enumerate() {
            for &(i, c) in &row.coefs {
                a[(r, i)] += c;
            }
            b[r] = -row.constant;
        }
        let svd = a.svd(true, true);
        match svd.solve(&b, 1e-12) {
            Ok(x) => x.iter().copied().collect(),
            Err(_) => vec![0.0; self.n],
        }
    }

    fn solve_lp(&self, lexicographic: bool) -> Option<Vec<f64>> {
        let rows: Vec<Row> = self
            .terms
            .iter()
            .flat_map(|t| &t.rows)
            .filter(|r| !r.coefs.is_empty())
            .map(merge_row)
            .collect();
        if rows.is_empty() {
            return Some(vec![0.0; self.n]);
        }
        let mut active: Vec<usize> = (0..rows.len()).collect();
        let mut fixed: Vec<(usize, f64)> = Vec::new();
        let (t, mut x) = lp_stage(self.n, &rows, &active, &fixed)?;
        if !lexicographic || rows.len() > 64 {
            return Some(x);
        }
        let mut level = t;
        loop {
            if level <= 1e-12 || active.is_empty() {
                break;
            }
            let forced = forced_rows(self.n, &rows, &active, &fixed, level);
            if forced.is_empty() {
                break;
            }
            for &i in &forced {
                fixed.push((i, level));
            }
            active.retain(|i| !forced.contains(i));
            if active.is_empty() {
                break;
            }
            match lp_stage(self.n, &rows, &active, &fixed) {
                Some((t, xs)) => {
                    level = t;
                    x = xs;
                }
                None => break,
            }
        }
        if let Some(p) = polish(self.n, &rows, &fixed, &x) {
            let no_worse = rows.iter().all(|r| {
                let (old, new) = (r.eval(&x).abs(), r.eval(&p).abs());
                new <= old + 1e-9 * (1.0 + old)
            });
            if no_worse {
                x = p;
            }
        }
        Some(x)
    }

    fn solve_descent(
        &self,
        sheaf: &MetricSheaf,
        partial: &Assignment,
        opts: &ExtendOptions,
        warm: Option<Vec<f64>>,
    ) -> Result<(Vec<f64>, Diagnostics), ExtendError> {
        let mut starts = vec![self.propagated_start(sheaf, partial), vec![0.0; self.n]];
        let scale = 1.0
            + self
                .terms
                .iter()
                .flat_map(|t| &t.rows)
                .map(|r| r.constant.abs())
                .fold(0.0, f64::max);
        for k in 0..opts.random_starts {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            starts.push((0..self.n).map(|_| rng.gen_range(-scale..=scale)).collect());
        }
        if let Some(w) = warm {
            starts.push(w);
        }
        let runs: Vec<Descent> = starts
            .into_par_iter()
            .map(|x0| self.descend(x0, opts))
            .collect();
        let best = runs
            .iter()
            .min_by(|a, b| a.f.total_cmp(&b.f))
            .expect("at least two starts");
        let iterations = runs.iter().map(|r| r.iterations).sum();
        let diagnostics = Diagnostics {
            method: Method::Subgradient,
            iterations,
            final_step: best.final_step,
            certified_gap: None,
            enumerated: 0,
        };
        if runs.iter().all(|r| !r.converged) {
            return Err(ExtendError::NonConvergence(diagnostics));
        }
        Ok((best.x.clone(), diagnostics))
    }

    /// Each free open takes the restriction of the smallest supported open above it.
    fn propagated_start(&self, sheaf: &MetricSheaf, partial: &Assignment) -> Vec<f64> {
        let space = sheaf.space();
        let mut x = vec![0.0; self.n];
        for &(id, off, dim) in &self.free {
            let above = space
                .open_ids()
                .filter(|&v| space.is_subset(id, v) && partial.support().contains(&v))
                .min_by_key(|&v| space.members(v).count_ones(..));
            if let Some(v) = above {
                let pushed = sheaf.restriction(id, v).expect("id ⊆ v").apply(partial.value(v).expect("supported"));
                if let Some(p) = pushed.as_vector() {
                    x[off..off + dim].copy_from_slice(p);
                }
            }
        }
        x
    }

    fn descend(&self, mut x: Vec<f64>, opts: &ExtendOptions) -> Descent {
        let mut g = vec![0.0; self.n];
        let mut f = self.objective(&x, Some(&mut g), opts.objective);
        let mut best_x = x.clone();
        let mut best_f = f;
        let mut delta = (0.5 * f).max(opts.tol);
        let stall_limit = 20 * (self.n + 1);
        let mut stall = 0;
        let mut step = 0.0;
        let stop = 1e-3 * opts.tol;
        for it in 0..opts.max_iter {
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg == 0.0 || best_f <= stop {
                // zero subgradient: x minimizes the convex objective
                return Descent { x: best_x, f: best_f, iterations: it, final_step: step, converged: true };
            }
            if delta < stop {
                return Descent { x: best_x, f: best_f, iterations: it, final_step: step, converged: true };
            }
            let target = best_f - delta;
            step = (f - target) / gg;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= step * gi;
            }
            f = self.objective(&x, Some(&mut g), opts.objective);
            if f < best_f {
                let reached = f <= target;
                best_f = f;
                best_x.clone_from(&x);
                if reached {
                    stall = 0;
                    continue;
                }
            }
            stall += 1;
            if stall > stall_limit {
                delta *= 0.5;
                stall = 0;
                x.clone_from(&best_x);
                f = self.objective(&x, Some(&mut g), opts.objective);
            }
        }
        Descent { x: best_x, f: best_f, iterations: opts.max_iter, final_step: step, converged: false }
    }
}

struct Descent {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    final_step: f64,
    converged: bool,
}

fn merge_row(row: &Row) -> Row {
    let mut coefs: Vec<(usize, f64)> = Vec::new();
    let mut sorted = row.coefs.clone();
    sorted.sort_by_key(|c| c.0);
    for (i, c) in sorted {
        match coefs.last_mut() {
            Some(last) if last.0 == i => last.1 += c,
            _ => coefs.push((i, c)),
        }
    }
    Row { coefs, constant: row.constant }
}

const LP_SLACK: f64 = 1e-11;

fn add_band(p: &mut Problem, xs: &[minilp::Variable], row: &Row, extra: Option<(minilp::Variable, f64)>, bound: f64) {
    // row ≤ bound and −row ≤ bound, with an optional variable on the left
    let upper: Vec<_> = row
        .coefs
        .iter()
        .map(|&(i, c)| (xs[i], c))
        .chain(extra)
        .collect();
    p.add_constraint(upper.as_slice(), ComparisonOp::Le, bound - row.constant);
    let lower: Vec<_> = row
        .coefs
        .iter()
        .map(|&(i, c)| (xs[i], -c))
        .chain(extra)
        .collect();
    p.add_constraint(lower.as_slice(), ComparisonOp::Le, bound + row.constant);
}

/// Minimizes `t` subject to `|row| ≤ t` on `active` and `|row| ≤ level` on `fixed`.
fn lp_stage(n: usize, rows: &[Row], active: &[usize], fixed: &[(usize, f64)]) -> Option<(f64, Vec<f64>)> {
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let xs: Vec<_> = (0..n).map(|_| p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t = p.add_var(1.0, (0.0, f64::INFINITY));
    for &i in active {
        add_band(&mut p, &xs, &rows[i], Some((t, -1.0)), 0.0);
    }
    for &(i, level) in fixed {
        add_band(&mut p, &xs, &rows[i], None, level + LP_SLACK * (1.0 + level));
    }
    let sol = p.solve().ok()?;
    Some((sol[t], xs.iter().map(|&v| sol[v]).collect()))
}

/// Moves `x` to the nearest point where every row pinned at a stage sits
/// exactly at that stage's common level (the levels are unknowns too). This
/// removes the slack the stages add to stay feasible.
fn polish(n: usize, rows: &[Row], fixed: &[(usize, f64)], x: &[f64]) -> Option<Vec<f64>> {
    if fixed.is_empty() {
        return None;
    }
    // stages push their rows consecutively with one shared level
    let mut levels: Vec<f64> = fixed.iter().map(|f| f.1).collect();
    levels.dedup();
    let (m, k) = (fixed.len(), levels.len());
    let mut a = DMatrix::zeros(m, n + k);
    let mut b = DVector::zeros(m);
    for (r, &(i, level)) in fixed.iter().enumerate() {
        let g = levels.iter().position(|&l| l == level).expect("level recorded");
        let s = if rows[i].eval(x) < 0.0 { -1.0 } else { 1.0 };
        for &(j, c) in &rows[i].coefs {
            a[(r, j)] += s * c;
        }
        a[(r, n + g)] = -1.0;
        b[r] = -s * rows[i].constant;
    }
    let z0 = DVector::from_iterator(n + k, x.iter().copied().chain(levels.iter().copied()));
    let residual = &b - &a * &z0;
    let delta = a.svd(true, true).solve(&residual, 1e-12).ok()?;
    let z = z0 + delta;
    z.iter().all(|v| v.is_finite()).then(|| z.rows(0, n).iter().copied().collect())
}

/// Active rows that equal `level` at every point where all active rows are at
/// most `level`.
fn forced_rows(n: usize, rows: &[Row], active: &[usize], fixed: &[(usize, f64)], level: f64) -> Vec<usize> {
    let mut candidates: Vec<usize> = active.to_vec();
    let bound = level + LP_SLACK * (1.0 + level);
    loop {
        let mut p = Problem::new(OptimizationDirection::Maximize);
        let xs: Vec<_> = (0..n).map(|_| p.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
        for &i in active {
            if !candidates.contains(&i) {
                add_band(&mut p, &xs, &rows[i], None, bound);
            }
        }
        let slacks: Vec<_> = candidates
            .iter()
            .map(|&i| {
                let s = p.add_var(1.0, (0.0, 1.0));
                add_band(&mut p, &xs, &rows[i], Some((s, 1.0)), bound);
                s
            })
            .collect();
        for &(i, lv) in fixed {
            add_band(&mut p, &xs, &rows[i], None, lv + LP_SLACK * (1.0 + lv));
        }
        let Ok(sol) = p.solve() else {
            return Vec::new();
        };
        let threshold = 1e-7 * (1.0 + level);
        let loose: Vec<usize> = candidates
            .iter()
            .zip(&slacks)
            .filter(|(_, &s)| sol[s] > threshold)
            .map(|(&i, _)| i)
            .collect();
        if loose.is_empty() {
            return candidates;
        }
        candidates.retain(|i| !loose.contains(i));
        if candidates.is_empty() {
            return candidates;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finspace::FiniteSpace;
    use crate::fixtures::{fix_abc, fix_abc_partial, two_chain};
    use std::collections::HashMap;
    use std::sync::Arc;

    fn scalar(a: &Assignment, id: OpenId) -> f64 {
        a.value(id).and_then(Value::as_vector).unwrap()[0]
    }

    #[test]
    fn worked_example_all_scales() {
        for r in [0.5, 1.0, 2.0] {
            let s = fix_abc(r);
            let res = extend_minimize(&s, &fix_abc_partial(&s), &ExtendOptions::default()).unwrap();
            assert!((res.value - 2.0 / 3.0).abs() < 1e-14, "r={r}: {}", res.value);
            assert_eq!(res.diagnostics.method, Method::LinearProgram);
            let x = s.space();
            let a = x.open_by_labels(&["A"]).unwrap();
            assert!((scalar(&res.assignment, a) - 0.5).abs() < 1e-14);
            assert!((r * scalar(&res.assignment, x.whole()) - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn supported_values_untouched() {
        let s = fix_abc(1.0);
        let p = fix_abc_partial(&s);
        let res = extend_minimize(&s, &p, &ExtendOptions::default()).unwrap();
        for id in p.support() {
            assert_eq!(res.assignment.value(*id), p.value(*id));
        }
        assert_eq!(res.assignment.support(), p.support());
    }

    #[test]
    fn exact_extension_on_chain() {
        let (s, full) = two_chain(0.0, 3.0);
        let p = s.space().open_by_labels(&["p"]).unwrap();
        let partial = full.restricted_to(&s, &[p]);
        let res = extend_minimize(&s, &partial, &ExtendOptions::default()).unwrap();
        assert_eq!(res.value, 0.0);
        assert_eq!(scalar(&res.assignment, s.space().whole()), 0.0);
    }

    #[test]
    fn no_support() {
        let s = fix_abc(1.0);
        assert_eq!(
            extend_minimize(&s, &Assignment::empty(&s), &ExtendOptions::default()).unwrap_err(),
            ExtendError::NoSupport
        );
    }

    #[test]
    fn full_support_is_plain_radius() {
        let s = fix_abc(1.0);
        let a = crate::fixtures::fix_abc_assignment(&s, 1.0);
        let res = extend_minimize(&s, &a, &ExtendOptions::default()).unwrap();
        assert_eq!(res.value, s.consistency_radius(&a).unwrap());
        assert_eq!(res.diagnostics.method, Method::Direct);
    }

    #[test]
    fn star_support_above_star_bound() {
        let s = fix_abc(1.0);
        let x = s.space();
        let id = |l: &[&str]| x.open_by_labels(l).unwrap();
        let p = Assignment::partial(
            &s,
            [
                (id(&["A"]), Value::scalar(0.5)),
                (id(&["A", "B"]), Value::scalar(0.0)),
                (id(&["A", "C"]), Value::scalar(1.0)),
            ],
        )
        .unwrap();
        let v = partial_consistency(&s, &p).unwrap();
        assert!(v >= 0.5 - 1e-12);
        // only a(X) is free: min over y of max(2|y|, |y − 1|, |y − ½|) is at y = 1/3
        assert!((v - 2.0 / 3.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn l2_objective_matches_normal_equations() {
        // with u = r·a(X) and z = a({A}) the L2 objective is
        // 4u² + (u−1)² + (u−z)² + z² + (1−z)², minimized at u = 4/17, z = 7/17
        let s = fix_abc(1.0);
        let opts = ExtendOptions { objective: Objective::L2, ..Default::default() };
        let res = extend_minimize(&s, &fix_abc_partial(&s), &opts).unwrap();
        assert_eq!(res.diagnostics.method, Method::LeastSquares);
        let (u, z) = (4.0 / 17.0, 7.0 / 17.0);
        let f = 4.0 * u * u + (u - 1.0f64).powi(2) + (u - z).powi(2) + z * z + (1.0 - z).powi(2);
        assert!((res.value - f.sqrt()).abs() < 1e-9);
        let a = s.space().open_by_labels(&["A"]).unwrap();
        assert!((scalar(&res.assignment, a) - z).abs() < 1e-9);
    }

    fn discrete_triangle(norm: Norm) -> (MetricSheaf, Assignment) {
        let x = Arc::new(FiniteSpace::alexandrov(&["a", "b", "c"], &[] as &[(&str, &str)], 100, Default::default()).unwrap());
        let s = MetricSheaf::constant(x.clone(), PseudometricSpace::euclidean(2, norm).unwrap()).unwrap();
        let h = 3f64.sqrt() / 2.0;
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let p = Assignment::partial(
            &s,
            ["a", "b", "c"].iter().zip(pts).map(|(l, q)| (x.open_by_labels(&[l]).unwrap(), Value::Vector(q.to_vec()))),
        )
        .unwrap();
        (s, p)
    }

    #[test]
    fn descent_reaches_circumradius() {
        // any extension has a(X) within c of every vertex, so c ≥ circumradius,
        // and putting the circumcenter on every free open attains it
        let (s, p) = discrete_triangle(Norm::L2);
        let res = extend_minimize(&s, &p, &ExtendOptions::default()).unwrap();
        assert_eq!(res.diagnostics.method, Method::Subgradient);
        assert!((res.value - 1.0 / 3f64.sqrt()).abs() < 1e-5, "{}", res.value);
    }

    #[test]
    fn lp_on_linf_triangle() {
        // Linf miniball of the triangle: half the larger coordinate extent (x spans 1)
        let (s, p) = discrete_triangle(Norm::Linf);
        let res = extend_minimize(&s, &p, &ExtendOptions::default()).unwrap();
        assert_eq!(res.diagnostics.method, Method::LinearProgram);
        assert!((res.value - 0.5).abs() < 1e-9, "{}", res.value);
    }

    #[test]
    fn warm_start_is_a_fixed_point() {
        let (s, p) = discrete_triangle(Norm::L2);
        let first = extend_minimize(&s, &p, &ExtendOptions::default()).unwrap();
        let opts = ExtendOptions { warm_start: Some(first.assignment.clone()), ..Default::default() };
        let second = extend_minimize(&s, &p, &opts).unwrap();
        assert!(second.value >= first.value - 1e-6);
        assert!(second.value <= first.value + 1e-9);
    }

    fn table_chain() -> MetricSheaf {
        let x = Arc::new(FiniteSpace::explicit(&["p", "q"], &[vec![], vec!["p"], vec!["p", "q"]]).unwrap());
        let table = PseudometricSpace::table(
            vec!["x".into(), "y".into(), "z".into()],
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
        )
        .unwrap();
        let p = x.open_by_labels(&["p"]).unwrap();
        let gens = HashMap::from([((p, x.whole()), StalkMap::Table(vec![1, 2, 2]))]);
        MetricSheaf::new(x, vec![PseudometricSpace::OnePoint, table.clone(), table], gens, 0.0).unwrap()
    }

    #[test]
    fn tables_enumerated() {
        let s = table_chain();
        let p = s.space().open_by_labels(&["p"]).unwrap();
        let a = Assignment::partial(&s, [(p, Value::Label(0))]).unwrap();
        let res = extend_minimize(&s, &a, &ExtendOptions::default()).unwrap();
        // x is not in the image of the table map; y is closest
        assert_eq!(res.value, 1.0);
        assert_eq!(res.assignment.value(s.space().whole()), Some(&Value::Label(0)));
        assert_eq!(res.diagnostics.enumerated, 3);
        let capped = ExtendOptions { enumeration_cap: 2, ..Default::default() };
        assert!(matches!(
            extend_minimize(&s, &a, &capped),
            Err(ExtendError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn tight_budget_reports_nonconvergence() {
        let (s, p) = discrete_triangle(Norm::L2);
        let opts = ExtendOptions { max_iter: 3, ..Default::default() };
        assert!(matches!(extend_minimize(&s, &p, &opts), Err(ExtendError::NonConvergence(_))));
    }
}
