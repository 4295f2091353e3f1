//! Acceptance suite. Runs every criterion at its pinned tolerance and
//! prints one PASS/FAIL line each; exits nonzero if any fails.
//!
//! `cargo test -p anlink-core --release --test acceptance -- 2 5` runs a
//! subset by number.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use anlink_core::analysis::{clopper_pearson, grid_entropy, interpolate_crossing};
use anlink_core::channel::LinkParams;
use anlink_core::constellation::{build_codebook, shift_key, PhaseKey};
use anlink_core::demapper::{Accounting, Demapper, MacTable, Rule};
use anlink_core::harness::{run, ExperimentConfig, Scenario, SweepKind, SweepResult, SweepRow};
use anlink_core::ldpc::build_gallager;
use anlink_core::Observation;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sweep(kind: SweepKind, scenario: Scenario, text: &str) -> SweepResult {
    let mut cfg = ExperimentConfig::new(kind, scenario).expect("defaults");
    cfg.apply_text(text).expect("config");
    run(&cfg).expect("sweep")
}

fn rows<'a>(r: &'a SweepResult, rx: &'a str) -> Vec<&'a SweepRow> {
    r.series(rx).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn gaussian_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn c1_identities() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut dec, mut sm, mut wb, mut det, mut norm, mut eta_spread) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for &(k, m, beta, sigma) in &[(20, 64, 0.3, 0.15), (2, 16, 0.5, 0.3), (8, 64, 0.1, 0.05), (1, 8, 0.3, 0.14)] {
        let key = PhaseKey::random(k, &mut rng);
        let cb = build_codebook(k, m, &key, beta).unwrap();
        let p = LinkParams::new(k, m, beta, sigma).unwrap();
        let d = 2 * k;
        let s2 = sigma * sigma;
        for i in 0..m {
            let x = cb.mean(i);
            let t = cb.tangent(i);
            let nx: f64 = x.iter().map(|v| v * v).sum();
            let nt: f64 = t.iter().map(|v| v * v).sum();
            let xt: f64 = x.iter().zip(t).map(|(a, b)| a * b).sum();
            norm = norm.max((nx - (1.0 - beta)).abs()).max((nt - 1.0).abs()).max(xt.abs());
        }
        for _ in 0..5 {
            let y = gaussian_vec(d, 0.5, &mut rng);
            let obs = Observation::new(y.clone());
            let mv = Demapper::new(&cb, &p, Rule::Matched, Accounting::Naive).unwrap().metrics(&obs).unwrap();
            let gains: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>() * 3.0).collect();
            let mut fobs = obs.clone();
            fobs.csi = Some(gains.clone());
            let wv = Demapper::new(&cb, &p, Rule::Woodbury, Accounting::Naive).unwrap().metrics(&fobs).unwrap();
            let mut etas = Vec::new();
            for i in 0..m {
                let r = DVector::from_iterator(d, y.iter().zip(cb.mean(i)).map(|(a, b)| a - b));
                let t = DVector::from_column_slice(cb.tangent(i));
                let along = r.dot(&t);
                let perp = (&r - &t * along).norm_squared();
                dec = dec.max(rel(mv.values[i], perp / s2 + along * along / (s2 + beta)));
                let sigma_i = DMatrix::<f64>::identity(d, d) * s2 + &t * t.transpose() * beta;
                let inv = sigma_i.clone().try_inverse().unwrap();
                sm = sm.max(rel(mv.values[i], (r.transpose() * &inv * &r)[(0, 0)]));
                det = det.max(rel(sigma_i.determinant(), s2.powi(d as i32 - 1) * (s2 + beta)));
                let dh =
                    DMatrix::from_diagonal(&DVector::from_iterator(d, gains.iter().flat_map(|g| [s2 / g, s2 / g])));
                let sf = &dh + &t * t.transpose() * beta;
                let dense = (r.transpose() * sf.clone().try_inverse().unwrap() * &r)[(0, 0)] + sf.determinant().ln()
                    - dh.determinant().ln();
                wb = wb.max(rel(wv.values[i], dense));
                let eta: f64 = (0..d).map(|j| t[j] * t[j] / dh[(j, j)]).sum();
                etas.push(eta);
            }
            let (lo, hi) = etas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
            eta_spread = eta_spread.max((hi - lo) / hi);
        }
        let shifted = build_codebook(k, m, &shift_key(&key, m), beta).unwrap();
        for i in 0..m {
            let j = (i + m - 1) % m;
            for c in 0..d {
                norm = norm
                    .max((shifted.mean(i)[c] - cb.mean(j)[c]).abs())
                    .max((shifted.tangent(i)[c] - cb.tangent(j)[c]).abs());
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let detail = format!(
        "decomp {dec:.1e}, sherman-morrison {sm:.1e}, woodbury {wb:.1e}, det {det:.1e}, norms/shift {norm:.1e}, eta spread {eta_spread:.1e}, {secs:.1} s"
    );
    ensure(
        dec <= 1e-9 && sm <= 1e-7 && wb <= 1e-7 && det <= 1e-9 && norm <= 1e-12 && eta_spread <= 1e-9 && secs < 10.0,
        detail,
    )
}

const BLER_RUN: &str =
    "scenario = proposed,B1,B2,B3,B4\ngrid = -8:0.5:4\nmax_codewords = 2000\ntarget_errors = 200\nseed = 1";

fn crossing(rows: &[&SweepRow]) -> Option<f64> {
    let xs: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.bler).collect();
    interpolate_crossing(&xs, &ys, 0.1)
}

fn c2_gap(r: &SweepResult) -> Check {
    let matched = crossing(&rows(r, "proposed"));
    let euclid = crossing(&rows(r, "B1"));
    let (Some(m), Some(e)) = (matched, euclid) else {
        return Err(format!("BLER=0.1 crossing missing: matched {matched:?}, Euclidean {euclid:?}"));
    };
    let gap = e - m;
    ensure(
        (m + 3.8).abs() <= 0.5 && (gap - 5.1).abs() <= 1.0,
        format!("matched waterfall {m:.2} dB (target -3.8 +- 0.5), gap {gap:.2} dB (target 5.1 +- 1.0)"),
    )
}

fn c3_baselines(r: &SweepResult) -> Check {
    let p = rows(r, "proposed");
    let b2 = rows(r, "B2");
    let inside = p.iter().zip(&b2).filter(|(a, b)| a.cp_lo <= b.bler && b.bler <= a.cp_hi).count();
    let frac = inside as f64 / p.len() as f64;
    let b3 = rows(r, "B3");
    let others: Vec<Vec<&SweepRow>> = ["proposed", "B1", "B2", "B4"].iter().map(|n| rows(r, n)).collect();
    let b3_best = (0..b3.len()).all(|i| others.iter().all(|o| b3[i].bler <= o[i].bler));
    let b4 = rows(r, "B4");
    let b4_dead = b4.iter().all(|x| x.errors == x.trials);
    ensure(
        frac >= 0.8 && b3_best && b4_dead,
        format!("B2 inside matched CP band at {inside}/{} points ({:.0}%), B3 best everywhere: {b3_best}, B4 BLER=1 everywhere: {b4_dead}", p.len(), 100.0 * frac),
    )
}

fn c4_beta() -> Check {
    let r = sweep(SweepKind::Beta, Scenario::Proposed, "scenario = proposed,B1\nrho_slot_db = -3.0\ngrid = 0:0.05:0.4\nmax_codewords = 1000\ntarget_errors = none\nseed = 2");
    let m = rows(&r, "proposed");
    let e = rows(&r, "B1");
    let worst = m.iter().map(|x| x.bler).fold(0.0, f64::max);
    let cross = e.iter().find(|x| x.value <= 0.35 + 1e-12 && x.bler > 0.5).map(|x| x.value);
    ensure(
        worst < 0.2 && cross.is_some(),
        format!("at rho_slot -3.0 dB: matched max BLER {worst:.3} over beta in [0, 0.4]; Euclidean first above 0.5 at beta {cross:?}"),
    )
}

fn c5_air() -> Check {
    let r = sweep(SweepKind::Air, Scenario::Air, "grid = -10:2:12\nair_bits = 200000\nseed = 3");
    let m = rows(&r, "proposed");
    let e = rows(&r, "B1");
    let b2 = rows(&r, "B2");
    let ordered = m.iter().zip(&e).all(|(a, b)| a.air_star.unwrap() > b.air_star.unwrap());
    let enough = r.rows.iter().filter(|x| x.air_bits.is_some()).all(|x| x.air_bits.unwrap() >= 200_000);
    let calibrated = r.rows.iter().filter(|x| x.air_bits.is_some()).all(|x| x.air_star.unwrap() >= x.air_s1.unwrap());
    let (top_m, top_b2) = (m.last().unwrap(), b2.last().unwrap());
    let track = (top_m.air_star.unwrap() - top_b2.air_star.unwrap()).abs();
    ensure(
        ordered && enough && calibrated && track <= 0.01,
        format!(
            "matched > Euclidean at all {} points: {ordered}; I(s*) >= I(1): {calibrated}; |B2 - matched| at {} dB = {track:.4} bits/slot",
            m.len(),
            top_m.value
        ),
    )
}

fn c6_fading() -> Check {
    let r = sweep(
        SweepKind::Fading,
        Scenario::Fading,
        "sigma_c = 0.15\nbeta = 0.3\nmax_codewords = 5000\ntarget_errors = none\nseed = 4",
    );
    let wb_worst = rows(&r, "woodbury").iter().map(|x| x.bler).fold(0.0, f64::max);
    let at0 = |n: &str| rows(&r, n).into_iter().find(|x| x.value == 0.0).unwrap().bler;
    let (st, eu) = (at0("matched-static"), at0("euclidean"));
    ensure(
        wb_worst <= 1e-3 && (0.55..=0.85).contains(&st) && eu >= 0.9,
        format!("Woodbury worst BLER {wb_worst:.1e}; Rayleigh static matched {st:.3}, Euclidean {eu:.3}"),
    )
}

fn c7_quant() -> Check {
    let r = sweep(
        SweepKind::Quant,
        Scenario::Quant,
        "grid = 6,8,12,16,32\nsigma_grid = 0.20,0.24,0.28\nmax_codewords = 2000\ntarget_errors = none\nseed = 5",
    );
    let mut ok = true;
    let mut detail = Vec::new();
    for rx in ["matched", "euclidean"] {
        for s in [0.20, 0.24, 0.28] {
            let cell = |b: f64| r.series(rx).find(|x| x.value == b && x.series == Some(s)).unwrap().cp(0.95).unwrap();
            let (a, b) = (cell(6.0), cell(32.0));
            ok &= a.overlaps(&b);
            detail.push(format!("{rx}@{s}: {}/{} vs {}/{}", a.errors, a.trials, b.errors, b.trials));
        }
    }
    ensure(ok, format!("6-bit vs 32-bit CIs overlap: {ok} ({})", detail.join(", ")))
}

fn c8_mismatch() -> Check {
    let r = sweep(
        SweepKind::Mismatch,
        Scenario::Mismatch,
        "sigma_c = 0.22\nbeta = 0.3\nmax_codewords = 1000\ntarget_errors = none\nseed = 6",
    );
    let errs: u64 = r.rows.iter().map(|x| x.errors).sum();
    let cells = r.rows.len();
    let all_1000 = r.rows.iter().all(|x| x.trials == 1000);
    let hi = r.rows.iter().map(|x| x.cp_hi).fold(0.0, f64::max);
    let bounds = r.rows.iter().all(|x| x.cp_hi > 0.0 && x.cp_hi < 0.01);
    let per: Vec<String> = r.rows.iter().map(|x| format!("{}={}:{}", x.receiver, x.value, x.errors)).collect();
    ensure(
        cells == 9 && all_1000 && errs == 0 && bounds,
        format!("{cells} cells, {errs} block errors in total, max CP upper bound {hi:.4} ({})", per.join(" ")),
    )
}

fn c9_eve() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, grid, seed) in [(2, "26,28,30", 7), (20, "-4,-3,-2", 8)] {
        let r = sweep(
            SweepKind::Eve,
            Scenario::Eve,
            &format!("k = {k}\nM = 64\nbeta = 0.3\ngrid = {grid}\nbudgets = 100\nmax_codewords = 200\nseed = {seed}"),
        );
        for e in rows(&r, "eve") {
            let pass = e.errors == e.trials && e.success_upper.unwrap() <= 1.5e-2;
            ok &= pass;
            lines.push(format!(
                "RS k={k} rho={}: {}/{} (upper {:.4})",
                e.value,
                e.errors,
                e.trials,
                e.success_upper.unwrap()
            ));
        }
    }
    for (k, m, rho, n, floor, seed) in [(2, 16, 24.0, 200, 0.9, 9), (20, 64, -2.0, 60, 0.95, 10)] {
        let r = sweep(
            SweepKind::Eve,
            Scenario::Eve,
            &format!("k = {k}\nM = {m}\nbeta = 0.3\ngrid = {rho}\nattack = gd\nbudgets = 1\nmax_codewords = {n}\nseed = {seed}"),
        );
        let e = rows(&r, "eve")[0];
        let bob = rows(&r, "bob")[0];
        ok &= e.bler >= floor && e.attack.as_deref() == Some("gradient-descent");
        lines.push(format!(
            "GD ({k},{m}) rho={rho}: Eve {}/{} (floor {floor}), Bob {}/{}",
            e.errors, e.trials, bob.errors, bob.trials
        ));
    }
    ensure(ok, lines.join("; "))
}

fn c10_complexity() -> Check {
    let cb = build_codebook(20, 64, &PhaseKey::zeros(20), 0.3).unwrap();
    let p = LinkParams::new(20, 64, 0.3, 0.15).unwrap();
    let t = MacTable::measure(&cb, &p).unwrap();
    let got = [t.naive_euclidean, t.optimized_euclidean, t.naive_matched, t.optimized_matched];
    let (values, bytes) = (cb.lut_values(), cb.lut_bytes(32));
    ensure(
        got == [5120, 2560, 7680, 5120] && values == 5120 && bytes == 20 * 1024,
        format!(
            "Euclidean {}/{}, matched {}/{}, LUT {values} values / {bytes} bytes at 32 bit",
            got[0], got[1], got[2], got[3]
        ),
    )
}

fn c11_scalars() -> Check {
    let code = build_gallager(1).unwrap();
    let se = code.rate() * 6.0 / 20.0;
    let delta = 0.05 * std::f64::consts::TAU / 64.0;
    let (h20, h2) = (grid_entropy(20, delta).unwrap(), grid_entropy(2, delta).unwrap());
    ensure(
        (se - 0.1506).abs() < 5e-5
            && (h20 - 206.4).abs() <= 0.05
            && (h2 - 20.6).abs() <= 0.05
            && code.rank() == 502
            && code.n_info() == 506
            && code.n() == 1008,
        format!(
            "SE {se:.5}, H_grid(20) {h20:.3}, H_grid(2) {h2:.3}, rank {}, rate {}/{}",
            code.rank(),
            code.n_info(),
            code.n()
        ),
    )
}

fn c12_statistics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 1.0;
    for &(p, n) in &[(0.5, 20u64), (0.1, 60), (0.02, 200), (0.9, 40)] {
        let reps = 10_000;
        let mut hit = 0;
        for _ in 0..reps {
            let e = (0..n).filter(|_| rng.random::<f64>() < p).count() as u64;
            hit += clopper_pearson(e, n, 0.95).unwrap().contains(p) as u32;
        }
        worst = worst.min(hit as f64 / reps as f64);
    }
    let text = "scenario = proposed,B1\ngrid = -4.5,-4,-3.5\nmax_codewords = 300\nseed = 77";
    let full = sweep(SweepKind::Bler, Scenario::Proposed, text);
    let alone = sweep(SweepKind::Bler, Scenario::Proposed, &format!("{text}\ngrid = -4"));
    let key = |r: &SweepRow| (r.receiver.clone(), r.errors, r.trials, r.macs, r.cp_lo.to_bits(), r.cp_hi.to_bits());
    let slice: Vec<_> = full.rows.iter().filter(|r| r.value == -4.0).map(key).collect();
    let single: Vec<_> = alone.rows.iter().map(key).collect();
    let repro = slice == single && !single.is_empty();
    ensure(
        worst >= 0.94 && repro,
        format!("worst CP coverage {:.2}% at nominal 95%; single-point rerun bit-exact: {repro}", 100.0 * worst),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let pick = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut results: Vec<(usize, &str, Check, f64)> = Vec::new();
    let mut record = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        let tag = if out.is_ok() { "PASS" } else { "FAIL" };
        let msg = out.as_ref().map_or_else(|e| e.clone(), |d| d.clone());
        println!("{tag} {n:>2} {name} [{secs:.0} s]: {msg}");
        results.push((n, name, out, secs));
    };
    if pick(1) {
        record(1, "identities", &mut c1_identities);
    }
    if pick(2) || pick(3) {
        let t = Instant::now();
        let bler = catch_unwind(|| sweep(SweepKind::Bler, Scenario::Proposed, BLER_RUN));
        let shared = t.elapsed().as_secs_f64();
        match &bler {
            Ok(r) => {
                for row in &r.rows {
                    eprintln!(
                        "  {:9} {:5.1} dB {:5}/{:5} {:.4}",
                        row.receiver, row.value, row.errors, row.trials, row.bler
                    );
                }
                eprintln!("  shared BLER sweep took {shared:.0} s");
            }
            Err(_) => eprintln!("  shared BLER sweep panicked"),
        }
        if pick(2) {
            record(2, "matched-vs-euclidean gap", &mut || {
                bler.as_ref().map_err(|_| "sweep panicked".to_string()).and_then(c2_gap)
            });
        }
        if pick(3) {
            record(3, "baseline ordering", &mut || {
                bler.as_ref().map_err(|_| "sweep panicked".to_string()).and_then(c3_baselines)
            });
        }
    }
    let rest: [(usize, &'static str, fn() -> Check); 9] = [
        (4, "beta-sweep crossover", c4_beta),
        (5, "AIR ordering", c5_air),
        (6, "fading", c6_fading),
        (7, "LUT quantization", c7_quant),
        (8, "mismatch grid", c8_mismatch),
        (9, "eavesdropper", c9_eve),
        (10, "complexity counters", c10_complexity),
        (11, "scalars", c11_scalars),
        (12, "statistical plumbing", c12_statistics),
    ];
    for (n, name, f) in rest {
        if pick(n) {
            record(n, name, &mut { f });
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
