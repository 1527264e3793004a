//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the whole report is always printed. Set
//! `CURVEREG_ACCEPTANCE_TRIALS` to shrink the end-to-end grids for a quick
//! look; the default is 25 trials per cell.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{oriented, rng, scene};
use curvereg::bench::{prepare, run_trial, ExperimentConfig, Prepared, TrialRecord, Variant};
use curvereg::geometry::{
    compute_descriptor, pose_from_match_cc, pose_from_match_cs, rotation_aligning, Descriptor, DescriptorGuards,
    PointVectorTuple, UnitVec3, Vec3, VectorKind, EXACT_CONSISTENCY_TOL,
};
use curvereg::matching::{
    build_pair_index, check_conditions_cc, check_necessary_cs, check_simultaneous_cs, extract_pairs_cc,
    necessary_cs_with_slack, query_pair_index, simultaneous_residual_cs, CorrespondenceOrder, PairIndexConfig,
    QueryParams, SameKindPairs,
};
use curvereg::random::{random_transform, random_tuple, random_unit};
use curvereg::synth::BlobKind;
use nalgebra::Unit;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Wall-clock allowance past the budget for the hypothesis in flight.
const BUDGET_SLACK: f64 = 0.1;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn normal_to(r: &mut ChaCha8Rng, t: &UnitVec3) -> UnitVec3 {
    let v = random_unit(r).into_inner();
    Unit::new_normalize(v - t.as_ref() * v.dot(t))
}

/// Surface tuple matching `curve` under `g`: the moved points, with normals
/// drawn in the planes orthogonal to the moved tangents.
fn surface_match(r: &mut ChaCha8Rng, curve: &PointVectorTuple, g: &curvereg::geometry::RigidTransform) -> PointVectorTuple {
    let m = curve.transformed(g);
    let np = normal_to(r, &m.p_dir);
    let nq = normal_to(r, &m.q_dir);
    PointVectorTuple::new(m.p_pos, m.q_pos, np, nq, VectorKind::Normals)
}

fn descriptor_invariance(rep: &mut Report) {
    let mut r = rng(1001);
    let guards = DescriptorGuards::permissive();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..1000 {
        let kind = if k % 2 == 0 { VectorKind::Tangents } else { VectorKind::Normals };
        let t = random_tuple(&mut r, 20.0, kind);
        let moved = t.transformed(&random_transform(&mut r, 100.0));
        let a = compute_descriptor(&t, &guards).unwrap();
        let b = compute_descriptor(&moved, &guards).unwrap();
        worst = worst.max(a.max_deviation(&b));
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(
        "1 descriptor invariance",
        worst < 1e-9 && secs < 1.0,
        format!("max deviation {worst:.2e} over 1000 tuples in {secs:.3} s"),
    );
}

fn pose_exactness(rep: &mut Report) {
    let mut r = rng(1002);
    let start = Instant::now();
    let (mut worst_rot, mut worst_res, mut failures) = (0.0f64, 0.0f64, 0);
    let mut check = |pose: &curvereg::geometry::RigidTransform, g: &curvereg::geometry::RigidTransform, a: &PointVectorTuple, b: &PointVectorTuple| {
        let rot = (pose.rotation.inverse() * g.rotation).angle();
        let res = (pose.apply(&a.p_pos) - b.p_pos).norm().max((pose.apply(&a.q_pos) - b.q_pos).norm());
        worst_rot = worst_rot.max(rot);
        worst_res = worst_res.max(res / a.length());
    };
    for _ in 0..1000 {
        let c = random_tuple(&mut r, 20.0, VectorKind::Tangents);
        let g = random_transform(&mut r, 100.0);
        let s = surface_match(&mut r, &c, &g);
        match pose_from_match_cs(&c, &s, EXACT_CONSISTENCY_TOL) {
            Ok(pose) => check(&pose, &g, &c, &s),
            Err(_) => failures += 1,
        }
    }
    for _ in 0..1000 {
        let a = random_tuple(&mut r, 20.0, VectorKind::Tangents);
        let g = random_transform(&mut r, 100.0);
        let b = a.transformed(&g).with_flipped(r.gen_bool(0.5), r.gen_bool(0.5));
        match pose_from_match_cc(&a, &b, 1e-9) {
            Ok(pose) => check(&pose, &g, &a, &b),
            Err(_) => failures += 1,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(
        "2 closed-form pose",
        failures == 0 && worst_rot < 1e-7 && worst_res < 1e-9 && secs < 5.0,
        format!(
            "2000 matches (cs, cc): max rotation error {worst_rot:.2e} rad, max residual {worst_res:.2e}·λ, {failures} unsolved, {secs:.3} s"
        ),
    );
}

/// Independent feasibility test: rotate the actual tangents about the
/// aligned baseline on a β grid, locate the roots of the first orthogonality
/// by sign changes, and read the second constraint there. The residual is
/// scaled by the lengths of the components orthogonal to the baseline so it
/// is expressed as a cosine mismatch.
fn beta_grid_feasible(c: &PointVectorTuple, s: &PointVectorTuple, tol: f64, step: f64) -> bool {
    let Ok(r1) = rotation_aligning(&c.baseline(), &s.baseline()) else {
        return false;
    };
    let axis = Unit::new_normalize(s.baseline());
    let a: Vec3 = axis.into_inner();
    let (tp, tq) = (r1 * c.p_dir.into_inner(), r1 * c.q_dir.into_inner());
    let (np, nq) = (s.p_dir.into_inner(), s.q_dir.into_inner());
    // Rodrigues: R(β)t = t cos β + (a × t) sin β + a (a·t)(1 - cos β).
    let coeffs = |t: &Vec3, n: &Vec3| {
        let along = a.dot(t) * a.dot(n);
        (t.dot(n) - along, a.cross(t).dot(n), along)
    };
    let (pa, pb, pc) = coeffs(&tp, &np);
    let (qa, qb, qc) = coeffs(&tq, &nq);
    let perp = |v: &Vec3| (v - a * a.dot(v)).norm();
    let scale = perp(&tq) * perp(&nq);
    let fp = |b: f64| pa * b.cos() + pb * b.sin() + pc;
    let fq = |b: f64| qa * b.cos() + qb * b.sin() + qc;
    let n = (2.0 * PI / step).ceil() as usize;
    let mut prev_b = -PI;
    let mut prev = fp(prev_b);
    for k in 1..=n {
        let b = -PI + k as f64 * step;
        let cur = fp(b);
        if prev == 0.0 || prev.signum() != cur.signum() {
            let root = if prev == cur { prev_b } else { prev_b + (b - prev_b) * prev / (prev - cur) };
            if fq(root).abs() <= tol * scale {
                return true;
            }
        }
        prev_b = b;
        prev = cur;
    }
    false
}

fn condition_soundness(rep: &mut Report) {
    let mut r = rng(1003);
    let guards = DescriptorGuards::permissive();
    let mut false_rejections = 0;
    let mut done = 0;
    while done < 1000 {
        let c = random_tuple(&mut r, 20.0, VectorKind::Tangents);
        let g = random_transform(&mut r, 100.0);
        let s = surface_match(&mut r, &c, &g);
        let (Ok(g), Ok(gh)) = (compute_descriptor(&c, &guards), compute_descriptor(&s, &guards)) else {
            continue;
        };
        done += 1;
        if !(check_necessary_cs(&g, &gh, 1e-9) && check_simultaneous_cs(&g, &gh, 1e-6)) {
            false_rejections += 1;
        }
    }
    rep.line(
        "3a true matches accepted",
        false_rejections == 0,
        format!("{false_rejections} false rejections over 1000 true matches"),
    );

    let tol = 0.05;
    let (mut agree, mut accepted, mut total) = (0, 0, 0);
    let start = Instant::now();
    while total < 10_000 {
        let c = random_tuple(&mut r, 20.0, VectorKind::Tangents);
        let mut s = random_tuple(&mut r, 20.0, VectorKind::Normals);
        // Same baseline length so only the angular test decides.
        s.q_pos = s.p_pos + s.baseline().normalize() * c.length();
        let (Ok(g), Ok(gh)) = (compute_descriptor(&c, &guards), compute_descriptor(&s, &guards)) else {
            continue;
        };
        total += 1;
        let fast = check_simultaneous_cs(&g, &gh, tol);
        accepted += fast as usize;
        agree += (fast == beta_grid_feasible(&c, &s, tol, 1e-4)) as usize;
    }
    let rate = agree as f64 / total as f64;
    rep.line(
        "3b simultaneity vs β-grid oracle",
        rate >= 0.999,
        format!(
            "agreement {:.4}% on {total} random pairs ({accepted} accepted at tol {tol}), {:.1} s",
            100.0 * rate,
            start.elapsed().as_secs_f64()
        ),
    );
}

fn oracle_equivalence(rep: &mut Report) {
    let s = scene(1004, 16, 4);
    let cfg = PairIndexConfig {
        subsample_size: 500,
        ..PairIndexConfig::for_diameter(75.0)
    };
    let idx = build_pair_index(&s.surface, &cfg).unwrap();
    let guards = cfg.guards();
    // Brute force over every ordered pair of the subsample.
    let mut table: Vec<(u32, u32, CorrespondenceOrder, Descriptor)> = Vec::new();
    for i in 0..idx.points.len() {
        for j in i + 1..idx.points.len() {
            let t = PointVectorTuple::new(idx.points[i], idx.points[j], idx.normals[i], idx.normals[j], VectorKind::Normals);
            if t.length() < cfg.d_min || t.length() > cfg.d_max {
                continue;
            }
            let (Ok(a), Ok(b)) = (compute_descriptor(&t, &guards), compute_descriptor(&t.swapped(), &guards)) else {
                continue;
            };
            table.push((i as u32, j as u32, CorrespondenceOrder::Direct, a));
            table.push((i as u32, j as u32, CorrespondenceOrder::Switched, b));
        }
    }
    let curve = oriented(&s.curve, 0);
    let mut r = rng(1005);
    let (mut mismatches, mut queries, mut hits) = (0, 0, 0);
    while queries < 100 {
        let (i, j) = (r.gen_range(0..curve.len()), r.gen_range(0..curve.len()));
        let t = PointVectorTuple::new(curve.points[i], curve.points[j], curve.dirs[i], curve.dirs[j], VectorKind::Tangents);
        let Ok(g) = compute_descriptor(&t, &guards) else { continue };
        let params = if queries % 2 == 0 {
            QueryParams::exact(0.3)
        } else {
            QueryParams {
                eps: 1.5,
                angular_slack: 0.1,
                simultaneous_tol: 0.15,
            }
        };
        queries += 1;
        let got: Vec<_> = query_pair_index(&idx, &g, &params).iter().map(|c| c.key()).collect();
        let mut want: Vec<_> = table
            .iter()
            .filter(|(_, _, _, gh)| {
                necessary_cs_with_slack(&g, gh, params.eps, params.angular_slack)
                    && simultaneous_residual_cs(&g, gh).is_some_and(|x| x <= params.simultaneous_tol)
            })
            .map(|&(a, b, o, _)| (a, b, o))
            .collect();
        want.sort_unstable();
        hits += got.len();
        mismatches += (got != want) as usize;
    }
    rep.line(
        "4a pair index query",
        mismatches == 0 && hits > 0,
        format!("{mismatches} of {queries} queries differ from brute force ({hits} candidates, {} points)", idx.points.len()),
    );

    let mut target = oriented(&s.curve, 0);
    target.points.truncate(500);
    target.dirs.truncate(500);
    let gguards = DescriptorGuards::for_diameter(75.0);
    let permissive = DescriptorGuards { d_min: 0.0, ..gguards };
    // The table registration uses in place of per-query extraction.
    let table = SameKindPairs::build(&target, 80.0, &gguards);
    let (mut mismatches, mut queries, mut hits) = (0, 0, 0);
    while queries < 100 {
        let (i, j) = (r.gen_range(0..target.len()), r.gen_range(0..target.len()));
        let t = PointVectorTuple::new(target.points[i], target.points[j], target.dirs[i], target.dirs[j], VectorKind::Tangents)
            .transformed(&random_transform(&mut r, 75.0));
        let Ok(g) = compute_descriptor(&t, &gguards) else { continue };
        let (tol_len, tol_ang) = if queries % 2 == 0 { (0.05, 0.02) } else { (1.0, 0.15) };
        queries += 1;
        let got: Vec<_> = extract_pairs_cc(&target, &g, tol_len, tol_ang, &gguards).iter().map(|c| c.key()).collect();
        let mut want = Vec::new();
        for a in 0..target.len() {
            for b in a + 1..target.len() {
                let tt = PointVectorTuple::new(target.points[a], target.points[b], target.dirs[a], target.dirs[b], VectorKind::Tangents);
                if (tt.length() - g.lambda).abs() > tol_len {
                    continue;
                }
                for (tuple, order) in [(tt, CorrespondenceOrder::Direct), (tt.swapped(), CorrespondenceOrder::Switched)] {
                    if let Ok(gh) = compute_descriptor(&tuple, &permissive) {
                        if check_conditions_cc(&g, &gh, tol_len, tol_ang) {
                            want.push((a as u32, b as u32, order));
                        }
                    }
                }
            }
        }
        want.sort_unstable();
        let tabled: Vec<_> = table.query(&g, tol_len, tol_ang).iter().map(|c| c.key()).collect();
        hits += got.len();
        mismatches += (got != want || tabled != want) as usize;
    }
    rep.line(
        "4b same-kind pair extraction",
        mismatches == 0 && hits > 0,
        format!(
            "{mismatches} of {queries} queries differ from brute force, for extraction or the pair table ({hits} candidates, {} points)",
            target.len()
        ),
    );
}

fn trials() -> usize {
    std::env::var("CURVEREG_ACCEPTANCE_TRIALS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(25)
}

const MODELS: [(BlobKind, &str, u64); 2] = [(BlobKind::Bumpy, "bumpy", 11), (BlobKind::Knobby, "knobby", 12)];

fn grid_config(kind: BlobKind, seed: u64, variant: Variant) -> ExperimentConfig {
    ExperimentConfig {
        synthetic_model: kind,
        seed,
        variant,
        n_trials: trials(),
        ..Default::default()
    }
}

/// Runs every (fraction, sigma) cell and returns the records per sigma.
fn run_grid(cfg: &ExperimentConfig, prep: &Prepared) -> Vec<TrialRecord> {
    let mut out = Vec::new();
    let mut trial = 0;
    for &fraction in &cfg.fractions {
        for &sigma in &cfg.noise_sigmas {
            for _ in 0..cfg.n_trials {
                out.push(run_trial(cfg, prep, trial, fraction, sigma));
                trial += 1;
            }
        }
    }
    out
}

fn rate(records: &[&TrialRecord], ok: impl Fn(&TrialRecord) -> bool) -> (usize, usize) {
    (records.iter().filter(|r| ok(r)).count(), records.len())
}

fn pct((k, n): (usize, usize)) -> f64 {
    100.0 * k as f64 / n.max(1) as f64
}

fn per_fraction(records: &[&TrialRecord], ok: impl Fn(&TrialRecord) -> bool + Copy) -> String {
    [0.25, 0.5, 1.0]
        .iter()
        .map(|&f| {
            let cell: Vec<&TrialRecord> = records.iter().copied().filter(|r| r.fraction == f).collect();
            let (k, n) = rate(&cell, ok);
            format!("f={f}: {k}/{n}")
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn rot_below(r: &TrialRecord, deg: f64) -> bool {
    r.rotation_error.is_some_and(|e| e < deg)
}

fn curve_vs_surface(rep: &mut Report) {
    for (kind, name, seed) in MODELS {
        let cfg = grid_config(kind, seed, Variant::CurveVsSurface);
        let start = Instant::now();
        let prep = prepare(&cfg).unwrap();
        let build = prep.prep_seconds.unwrap();
        let records = run_grid(&cfg, &prep);
        let clean: Vec<&TrialRecord> = records.iter().filter(|r| r.sigma == 0.0).collect();
        let noisy: Vec<&TrialRecord> = records.iter().filter(|r| r.sigma == 1.0).collect();
        let exact = |r: &TrialRecord| rot_below(r, 1.0) && r.translation_error.is_some_and(|e| e < 0.75);
        let coarse = |r: &TrialRecord| rot_below(r, 5.0);
        let a = rate(&clean, exact);
        rep.line(
            &format!("5a curve vs surface, noise-free, {name}"),
            pct(a) >= 90.0,
            format!("{}/{} ({:.0}%) within 1° and 0.75 [{}]", a.0, a.1, pct(a), per_fraction(&clean, exact)),
        );
        let b = rate(&noisy, coarse);
        rep.line(
            &format!("5b curve vs surface, sigma 1, {name}"),
            pct(b) >= 80.0,
            format!("{}/{} ({:.0}%) within 5° [{}]", b.0, b.1, pct(b), per_fraction(&noisy, coarse)),
        );
        let worst = records.iter().map(|r| r.elapsed).fold(0.0, f64::max);
        rep.line(
            &format!("5c curve vs surface, online budget, {name}"),
            worst <= cfg.max_time + BUDGET_SLACK,
            format!("slowest trial {worst:.3} s against a {} s budget", cfg.max_time),
        );
        rep.line(
            &format!("8 offline index, {name}"),
            build < 30.0,
            format!(
                "{} records over {} points built in {build:.2} s (grid total {:.0} s)",
                prep.index.as_ref().unwrap().records().len(),
                prep.index.as_ref().unwrap().points.len(),
                start.elapsed().as_secs_f64()
            ),
        );
    }
}

fn curve_vs_curve(rep: &mut Report) {
    for (kind, name, seed) in MODELS {
        let cfg = grid_config(kind, seed, Variant::CurveVsCurve);
        let prep = prepare(&cfg).unwrap();
        let records = run_grid(&cfg, &prep);
        let clean: Vec<&TrialRecord> = records.iter().filter(|r| r.sigma == 0.0).collect();
        let noisy: Vec<&TrialRecord> = records.iter().filter(|r| r.sigma == 1.0).collect();
        let exact = |r: &TrialRecord| rot_below(r, 1e-3);
        let fast = |r: &TrialRecord| rot_below(r, 5.0) && r.elapsed < 1.0;
        let a = rate(&clean, exact);
        rep.line(
            &format!("6a curve vs curve, noise-free, {name}"),
            pct(a) >= 95.0,
            format!("{}/{} ({:.0}%) within 1e-3° [{}]", a.0, a.1, pct(a), per_fraction(&clean, exact)),
        );
        let b = rate(&noisy, fast);
        let worst = noisy.iter().map(|r| r.elapsed).fold(0.0, f64::max);
        rep.line(
            &format!("6b curve vs curve, sigma 1, {name}"),
            pct(b) >= 80.0,
            format!(
                "{}/{} ({:.0}%) within 5° in under 1 s [{}], slowest {worst:.3} s",
                b.0,
                b.1,
                pct(b),
                per_fraction(&noisy, fast)
            ),
        );
    }
}

fn outliers(rep: &mut Report) {
    let n = trials().min(20);
    let base = ExperimentConfig {
        seed: 13,
        n_trials: n,
        fractions: vec![1.0],
        noise_sigmas: vec![0.5],
        ..Default::default()
    };
    let prep = prepare(&base).unwrap();
    let success = |cfg: &ExperimentConfig| {
        let records = run_grid(cfg, &prep);
        let refs: Vec<&TrialRecord> = records.iter().collect();
        rate(&refs, |r| rot_below(r, 5.0))
    };
    let clean = success(&base);
    for fraction in [0.2, 0.4] {
        let with = success(&ExperimentConfig {
            outlier_fraction: fraction,
            ..base.clone()
        });
        rep.line(
            &format!("7 outliers {:.0}%, sigma 0.5", 100.0 * fraction),
            pct(with) >= pct(clean) - 10.0,
            format!(
                "{}/{} ({:.0}%) within 5°, against {}/{} ({:.0}%) without outliers",
                with.0,
                with.1,
                pct(with),
                clean.0,
                clean.1,
                pct(clean)
            ),
        );
    }
}

fn main() {
    // `cargo test` passes harness flags; a name filter selects nothing here.
    if std::env::args().skip(1).any(|a| a == "--list") {
        return;
    }
    let mut rep = Report { failed: 0 };
    descriptor_invariance(&mut rep);
    pose_exactness(&mut rep);
    condition_soundness(&mut rep);
    oracle_equivalence(&mut rep);
    curve_vs_curve(&mut rep);
    outliers(&mut rep);
    curve_vs_surface(&mut rep);
    println!("acceptance: {} criteria lines failed", rep.failed);
}
