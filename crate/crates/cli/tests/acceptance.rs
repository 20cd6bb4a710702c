//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the test
//! harness so the lines are always printed.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sheaflens::cech::{
    bottleneck, filtration_barcode, refinement_map, Cohomology, Field, FieldKind, PersistenceModule, F2, Q,
};
use sheaflens::extend::{extend_minimize, ExtendOptions};
use sheaflens::filtration::{consistency_filtration, interleaving_upper_bound};
use sheaflens::fixtures::{fix_abc, fix_abc_assignment};
use sheaflens::pointcloud::{cloud_consistency_filtration, oracle_barcode, DEFAULT_POINT_CAP};
use sheaflens::random::{
    perturb, random_assignment, random_cloud, random_f2_module, random_morphism, random_refinement_pair,
    random_section, random_sheaf,
};
use sheaflens::{OpenId, PartialCover};
use sheaflens_cli::{cmd_filtration, cmd_radius, ProblemFile, Settings};

const SLACK: f64 = 1e-9;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn fixture(name: &str) -> ProblemFile {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    ProblemFile::read(&path).expect("fixture parses")
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:.2?}"))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn worked_example() -> Outcome {
    let settings = Settings { extend: true, ..Settings::default() };
    let mut slowest = Duration::ZERO;
    for (name, r) in [("abc_r0.5.json", 0.5), ("abc_r1.json", 1.0), ("abc_r2.json", 2.0)] {
        let start = Instant::now();
        let report = cmd_radius(&fixture(name), &settings).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        check((report.radius - 2.0 / 3.0).abs() <= 1e-6, || format!("r={r}: radius {}", report.radius))?;
        let ext = report.extension.as_ref().ok_or("no extension reported")?;
        let value = |open: &str| match ext.values.iter().find(|(o, _, _)| o == open) {
            Some((_, sheaflens_cli::commands::ValueOut::Vector(x), _)) => Ok(x[0]),
            _ => Err(format!("no value on {open}")),
        };
        check((value("{A}")? - 0.5).abs() <= 1e-4, || format!("r={r}: a(A) off"))?;
        check((r * value("{A,B,C}")? - 1.0 / 3.0).abs() <= 1e-4, || format!("r={r}: r·a(X) off"))?;
        let got = sorted(report.thresholds.iter().map(|t| t.value).collect());
        let want = [1.0 / 6.0, 0.5, 0.5, 2.0 / 3.0, 2.0 / 3.0];
        check(got.len() == 5 && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= 1e-6), || {
            format!("r={r}: thresholds {got:?}")
        })?;
    }
    within_time(slowest, Duration::from_secs(1))?;
    Ok(format!("radius 2/3 and thresholds for r ∈ {{½, 1, 2}}, slowest {slowest:.2?}"))
}

fn filtration_reproduction() -> Outcome {
    let settings = Settings { extend: true, persist: true, ..Settings::default() };
    let start = Instant::now();
    let report = cmd_filtration(&fixture("abc_r1.json"), &settings).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let bp = &report.breakpoints;
    check(bp.len() == 2 && (bp[0] - 0.5).abs() <= 1e-9 && (bp[1] - 2.0 / 3.0).abs() <= 1e-9, || {
        format!("breakpoints {bp:?}")
    })?;
    let members: Vec<Vec<Vec<String>>> = report.covers.iter().map(|c| c.members.clone()).collect();
    let s = |v: &[&[&str]]| v.iter().map(|m| m.iter().map(|p| p.to_string()).collect()).collect::<Vec<Vec<String>>>();
    let want = vec![s(&[&["A"]]), s(&[&["A", "B"], &["A", "C"]]), s(&[&["A", "B", "C"]])];
    check(members == want, || format!("covers {members:?}"))?;
    for c in &report.covers {
        check(c.ranks.as_deref() == Some(&[1, 0][..]), || format!("ranks {:?} on ({}, {}]", c.ranks, c.lower, c.upper))?;
    }
    within_time(elapsed, Duration::from_secs(1))?;
    Ok(format!("breakpoints {{½, 2/3}}, three covers, Ȟ⁰ = 1 and Ȟ¹ = 0 throughout, {elapsed:.2?}"))
}

/// Criteria 3 and 4 share their random instances.
fn section_instances(seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..200)
        .map(|_| {
            let s = random_sheaf(&mut rng, 6, 3);
            let section = random_section(&mut rng, &s, 1.0);
            let delta = rng.gen_range(0.0..1.0);
            let a = perturb(&mut rng, &s, &section, delta);
            let c = s.consistency_radius(&a).expect("total");
            let d = s.assignment_distance(&a, &section).expect("same sheaf");
            (c, d, s.lipschitz(), s.consistency_diameter(&a).expect("total"))
        })
        .collect()
}

fn section_bound(instances: &[(f64, f64, f64, f64)]) -> Outcome {
    for (i, &(c, d, k, _)) in instances.iter().enumerate() {
        check(d >= c / (1.0 + k) - SLACK, || format!("trial {i}: D = {d} < {c}/(1+{k})"))?;
    }
    Ok(format!("D(a,s) ≥ c(a)/(1+K) on {} sheaves", instances.len()))
}

fn diameter_sandwich(instances: &[(f64, f64, f64, f64)]) -> Outcome {
    for (i, &(c, _, _, diam)) in instances.iter().enumerate() {
        check(c <= diam + SLACK && diam <= 2.0 * c + SLACK, || format!("trial {i}: c = {c}, diameter = {diam}"))?;
    }
    Ok(format!("c ≤ diameter ≤ 2c on {} sheaves", instances.len()))
}

fn monotonicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let opts = ExtendOptions { max_iter: 20_000, ..ExtendOptions::default() };
    for trial in 0..200 {
        let s = random_sheaf(&mut rng, 6, 3);
        let a = random_assignment(&mut rng, &s, 1.0);
        let x = s.space();
        let radii = s.local_radii(&a).map_err(|e| e.to_string())?;
        for (u, v) in x.inclusion_pairs() {
            check(radii[u.0] <= radii[v.0] + SLACK, || format!("trial {trial}: local radii not monotone"))?;
        }
        let ids: Vec<OpenId> = x.open_ids().collect();
        for &u in &ids {
            for &v in &ids {
                let mut union = x.members(u).clone();
                union.union_with(x.members(v));
                let w = x.open_id(&union).ok_or("union of opens is not open")?;
                check(radii[u.0].max(radii[v.0]) <= radii[w.0] + SLACK, || format!("trial {trial}: union bound"))?;
            }
            let star = s.star_consistency_radius(&a, u).map_err(|e| e.to_string())?;
            check(star <= radii[u.0] + SLACK, || format!("trial {trial}: star radius {star} > {}", radii[u.0]))?;
        }
        let u = OpenId(rng.gen_range(1..x.n_opens()));
        let inside: Vec<OpenId> = x.subopens(u).iter().copied().filter(|&v| v != x.empty()).collect();
        let partial = a.restricted_to(&s, &inside);
        let ext = extend_minimize(&s, &partial, &opts).map_err(|e| e.to_string())?;
        check(ext.value >= radii[u.0] - SLACK, || format!("trial {trial}: extension {} below {}", ext.value, radii[u.0]))?;
    }
    Ok("local monotonicity, union bound, partial monotonicity and star bound on 200 instances each".into())
}

fn morphism_bound() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    for trial in 0..100 {
        let m = random_morphism(&mut rng, 6, 3);
        let (src, dst) = (m.source().clone(), m.target().clone());
        let a = random_assignment(&mut rng, &src, 1.0);
        let b = m.pushforward(&a).map_err(|e| e.to_string())?;
        let k = m.lipschitz();
        for u in dst.space().open_ids() {
            let lhs = dst.local_consistency_radius(&b, u).map_err(|e| e.to_string())?;
            let rhs = src.local_consistency_radius(&a, m.preimage(u)).map_err(|e| e.to_string())?;
            check(lhs <= k * rhs + SLACK, || format!("trial {trial}: {lhs} > {k}·{rhs}"))?;
        }
    }
    Ok("c_R(b, U) ≤ K·c_S(a, f⁻¹U) on 100 morphisms".into())
}

fn robustness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let s = fix_abc(1.0);
    let a = fix_abc_assignment(&s, 1.0);
    let k = s.lipschitz();
    check(k == 2.0, || format!("K = {k}"))?;
    let ca = s.consistency_radius(&a).map_err(|e| e.to_string())?;
    let fa = consistency_filtration(&s, &a).map_err(|e| e.to_string())?;
    let da = filtration_barcode(&fa, FieldKind::F2, 1).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let delta = rng.gen_range(0.0..=0.1);
        let b = perturb(&mut rng, &s, &a, delta);
        let d = s.assignment_distance(&a, &b).map_err(|e| e.to_string())?;
        check(d <= delta + 1e-15, || format!("trial {trial}: perturbation {d} > δ = {delta}"))?;
        let cb = s.consistency_radius(&b).map_err(|e| e.to_string())?;
        check((cb - ca).abs() <= (1.0 + k) * delta + SLACK, || format!("trial {trial}: radius moved {}", cb - ca))?;
        let fb = consistency_filtration(&s, &b).map_err(|e| e.to_string())?;
        let bound = interleaving_upper_bound(&fa, &fb).map_err(|e| e.to_string())?;
        check(bound <= (1.0 + k) * delta + SLACK, || format!("trial {trial}: bound {bound} > (1+K)δ"))?;
        let db = filtration_barcode(&fb, FieldKind::F2, 1).map_err(|e| e.to_string())?;
        for degree in 0..=1 {
            let dist = bottleneck(&da, &db, degree).map_err(|e| e.to_string())?;
            check(dist <= bound + SLACK, || format!("trial {trial}: degree {degree} bottleneck {dist} > {bound}"))?;
        }
        worst = worst.max(bound / ((1.0 + k) * delta).max(f64::MIN_POSITIVE));
    }
    Ok(format!("100 perturbations with δ ≤ 0.1, largest bound/((1+K)δ) = {worst:.3}"))
}

fn point_clouds() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let start = Instant::now();
    for trial in 0..50 {
        let n = rng.gen_range(1..=7);
        let cloud = random_cloud(&mut rng, n, 2);
        let f = cloud_consistency_filtration(&cloud, DEFAULT_POINT_CAP).map_err(|e| e.to_string())?;
        let pipeline = filtration_barcode(&f, FieldKind::F2, 1).map_err(|e| e.to_string())?;
        let oracle = oracle_barcode(&cloud, 1);
        check(pipeline.approx_eq(&oracle, 1e-9), || format!("trial {trial} (N = {n}): {pipeline:?} vs {oracle:?}"))?;
    }
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(30))?;
    Ok(format!("50 clouds with N ≤ 7 match the Čech-complex oracle in degrees 0 and 1, {elapsed:.2?}"))
}

/// Every refinement function when there are at most `limit`.
fn all_refinements(fine: &PartialCover, coarse: &PartialCover, limit: usize) -> Option<Vec<Vec<usize>>> {
    let options: Vec<Vec<usize>> = fine
        .members()
        .iter()
        .map(|v| (0..coarse.len()).filter(|&i| v.is_subset(&coarse.members()[i])).collect())
        .collect();
    let mut all = vec![Vec::new()];
    for opts in &options {
        all = all.iter().flat_map(|t| opts.iter().map(move |&o| [t.clone(), vec![o]].concat())).collect();
        if all.len() > limit {
            return None;
        }
    }
    Some(all)
}

fn tau_agrees<F: Field>(fine: &PartialCover, coarse: &PartialCover, taus: &[Vec<usize>]) -> bool {
    let (hf, hc) = (Cohomology::<F>::new(fine, 2), Cohomology::<F>::new(coarse, 2));
    let reference = refinement_map(&hf, &hc, None).expect("valid refinement");
    taus.iter().all(|t| refinement_map(&hf, &hc, Some(t)).expect("valid τ") == reference)
}

fn tau_independence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut compared = 0;
    for trial in 0..50 {
        let (fine, coarse) = random_refinement_pair(&mut rng);
        let taus = all_refinements(&fine, &coarse, 512).unwrap_or_else(|| {
            (0..32).map(|_| sheaflens::random::random_refinement_function(&mut rng, &fine, &coarse)).collect()
        });
        check(taus.len() >= 2, || format!("trial {trial}: fewer than two refinement functions"))?;
        check(tau_agrees::<F2>(&fine, &coarse, &taus), || format!("trial {trial}: F2 maps depend on τ"))?;
        check(tau_agrees::<Q>(&fine, &coarse, &taus), || format!("trial {trial}: Q maps depend on τ"))?;
        compared += taus.len();
    }
    Ok(format!("50 refinement pairs, {compared} refinement functions, identical maps over F2 and Q"))
}

/// Vectors of `F2^dim` as bitmasks.
fn apply(m: &sheaflens::cech::Mat<F2>, v: u32) -> u32 {
    (0..m.rows()).fold(0, |acc, r| {
        let bit = (0..m.cols()).filter(|&c| v >> c & 1 == 1 && m.get(r, c).0).count() % 2;
        acc | (bit as u32) << r
    })
}

/// Interval multiplicities by enumerating every vector: for the summand
/// `[i, j]`, `m = dim(I_j ∩ K_i) − dim(I_{j+1} ∩ K_i)` where `K_i` is the
/// kernel of `V_i → V_{i−1}` and `I_j` the image of `V_j → V_i`.
fn brute_force_intervals(m: &PersistenceModule<F2>) -> Vec<(usize, usize, usize)> {
    let dims = m.dims();
    let n = dims.len();
    // image of V_j in V_i, as the set of all reachable vectors
    let image = |i: usize, j: usize| -> Vec<bool> {
        let mut hit = vec![false; 1 << dims[i]];
        if j >= n {
            hit[0] = true;
            return hit;
        }
        for v in 0..1u32 << dims[j] {
            let w = (i..j).rev().fold(v, |w, k| apply(&m.maps()[k], w));
            hit[w as usize] = true;
        }
        hit
    };
    let dim_of = |count: usize| count.trailing_zeros() as usize;
    let mut out = Vec::new();
    for i in 0..n {
        let kernel: Vec<bool> =
            (0..1u32 << dims[i]).map(|v| i == 0 || apply(&m.maps()[i - 1], v) == 0).collect();
        let meet = |j: usize| dim_of(image(i, j).iter().zip(&kernel).filter(|(a, b)| **a && **b).count());
        for j in i..n {
            let mult = meet(j) - meet(j + 1);
            if mult > 0 {
                out.push((i, j, mult));
            }
        }
    }
    out
}

fn barcode_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    for trial in 0..100 {
        let m = random_f2_module(&mut rng, 5, 3);
        let mut fast: Vec<(usize, usize, usize)> = m.intervals().iter().map(|iv| (iv.start, iv.end, iv.multiplicity)).collect();
        fast.sort();
        let slow = brute_force_intervals(&m);
        check(fast == slow, || format!("trial {trial} dims {:?}: {fast:?} vs {slow:?}", m.dims()))?;
    }
    Ok("100 random F2 modules decompose as the exhaustive oracle says".into())
}

fn main() {
    let instances = section_instances(3);
    let criteria: Vec<Criterion> = vec![
        ("worked example", Box::new(worked_example)),
        ("filtration reproduction", Box::new(filtration_reproduction)),
        ("section bound", Box::new(|| section_bound(&instances))),
        ("diameter sandwich", Box::new(|| diameter_sandwich(&instances))),
        ("monotonicity suite", Box::new(monotonicity)),
        ("morphism bound", Box::new(morphism_bound)),
        ("robustness", Box::new(robustness)),
        ("point-cloud equivalence", Box::new(point_clouds)),
        ("τ-independence", Box::new(tau_independence)),
        ("barcode oracle", Box::new(barcode_oracle)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
