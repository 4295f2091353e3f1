//! Sweep driver: builds the scenario links, runs points under the seeding
//! policy and stopping rule, and collects CSV-ready rows.

mod config;
mod engine;
mod output;
pub mod seeding;

use std::time::Instant;

use rayon::prelude::*;

pub use config::{parse_grid, ExperimentConfig, Scenario, StoppingRule, SweepKind};
pub use output::{read_csv_records, RunMetadata, SweepResult, SweepRow};

use crate::adversary::{gradient_descent_attack, random_search_attack, AttackKind, AttackOutcome};
use crate::analysis::{bicm_air, clopper_pearson, optimize_s, AirSample, CpInterval};
use crate::channel::{FadingProfile, LinkParams};
use crate::constellation::{build_codebook, build_flat_codebook, quantize_codebook, PhaseKey, QuantizationSpec};
use crate::demapper::Rule;
use crate::ldpc::{build_gallager, MinSumConfig, ParityCheck};
use crate::link::{true_label_bits, Receiver, Transmitter};
use crate::{Result, BUILD_ID};
use engine::{run_point, Lane, Tally};
use seeding::{point_key, seeding_policy};

/// Symbols per chunk of uncoded AIR samples.
const AIR_CHUNK: usize = 168;

/// The secret phase key of a run, drawn from the master seed.
pub fn phase_key(master_seed: u64, k: usize) -> PhaseKey {
    PhaseKey::random(k, &mut seeding_policy(master_seed, "phase-key", k as u64, 0))
}

/// Runs whichever sweep `cfg.sweep` names.
pub fn run(cfg: &ExperimentConfig) -> Result<SweepResult> {
    match cfg.sweep {
        SweepKind::Bler => run_bler_sweep(cfg),
        SweepKind::Beta => run_beta_sweep(cfg),
        SweepKind::Air => run_air_sweep(cfg),
        SweepKind::Quant => run_quant_sweep(cfg),
        SweepKind::Mismatch => run_mismatch_grid(cfg),
        SweepKind::Eve => run_eve_sweep(cfg),
        SweepKind::Fading => run_fading_sweep(cfg),
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    code: ParityCheck,
    key: PhaseKey,
    hash: String,
    notes: Vec<String>,
    rows: Vec<SweepRow>,
}

impl<'a> Run<'a> {
    fn start(cfg: &'a ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let code = build_gallager(cfg.code_seed)?;
        log::info!(
            "code seed {} accepted as {} (rank {}), config {}",
            cfg.code_seed,
            code.seed(),
            code.rank(),
            cfg.config_hash()
        );
        Ok(Run {
            key: phase_key(cfg.master_seed, cfg.k),
            code,
            hash: cfg.config_hash(),
            cfg,
            notes: Vec::new(),
            rows: Vec::new(),
        })
    }

    fn stream(&self, lane: &str) -> String {
        format!("{:?}/{lane}", self.cfg.sweep)
    }

    fn row(&self, scenario: &str, receiver: &str, p: &LinkParams, value: f64, tally: &Tally) -> Result<SweepRow> {
        let cp = if tally.trials == 0 {
            CpInterval { errors: 0, trials: 0, level: self.cfg.level, lo: 0.0, hi: 1.0 }
        } else {
            clopper_pearson(tally.errors, tally.trials, self.cfg.level)?
        };
        Ok(SweepRow {
            build_id: BUILD_ID.to_string(),
            config_hash: self.hash.clone(),
            master_seed: self.cfg.master_seed,
            code_seed: self.code.seed(),
            scenario: scenario.to_string(),
            receiver: receiver.to_string(),
            k: p.k,
            m: p.m,
            beta: p.beta,
            sigma_c: p.sigma_c,
            rho_slot_db: p.rho_slot_db(),
            axis: self.cfg.sweep.axis().to_string(),
            value,
            series: None,
            errors: tally.errors,
            trials: tally.trials,
            bler: if tally.trials == 0 { f64::NAN } else { cp.estimate() },
            cp_lo: cp.lo,
            cp_hi: cp.hi,
            wall_s: tally.seconds,
            macs: tally.macs,
            air_s1: None,
            air_star: None,
            s_star: None,
            air_bits: None,
            budget: None,
            attack: None,
            best_score: None,
            torus_distance: None,
            success_upper: None,
        })
    }

    fn finish(self) -> SweepResult {
        SweepResult {
            metadata: RunMetadata {
                build_id: BUILD_ID.to_string(),
                config_hash: self.hash,
                config: self.cfg.to_text(),
                accepted_code_seed: self.code.seed(),
                code_rank: self.code.rank(),
                n_info: self.code.n_info(),
                rate: self.code.rate(),
                phase_key: self.key.phases().to_vec(),
                notes: self.notes,
            },
            rows: self.rows,
        }
    }
}

/// Transmitter, receiver and true link parameters of one link scenario.
struct LinkSetup {
    lane: String,
    tx: Transmitter,
    rx: Receiver,
    params: LinkParams,
}

fn link_setup(run: &Run, s: Scenario, beta: f64, rho_db: f64) -> Result<LinkSetup> {
    let cfg = run.cfg;
    let (k, m) = (cfg.k, cfg.m);
    let p = LinkParams::from_rho_slot_db(k, m, beta, rho_db)?;
    let setup = match s {
        Scenario::Proposed | Scenario::B1 => {
            let cb = build_codebook(k, m, &run.key, beta)?;
            let rule = if s == Scenario::Proposed { Rule::Matched } else { Rule::Euclidean };
            let lane = if cfg.paired { "fourier".to_string() } else { format!("fourier/{s}") };
            LinkSetup {
                lane,
                tx: Transmitter::new(cb.clone(), p.sigma_c),
                rx: Receiver::new(s.name(), cb, p, rule),
                params: p,
            }
        }
        Scenario::B2 => {
            let cb = build_flat_codebook(k, m, beta, cfg.flat_seed)?;
            // isotropic AN adds beta/2k per dimension, so Euclidean is ML
            // once the noise scale includes it
            let eff = LinkParams::new(k, m, beta, (p.noise_var() + beta / (2 * k) as f64).sqrt())?;
            LinkSetup {
                lane: "flat".into(),
                tx: Transmitter::new(cb.clone(), p.sigma_c),
                rx: Receiver::new(s.name(), cb, eff, Rule::Euclidean),
                params: p,
            }
        }
        Scenario::B3 => {
            let cb = build_codebook(k, m, &run.key, 0.0)?;
            let p0 = LinkParams::new(k, m, 0.0, p.sigma_c)?;
            LinkSetup {
                lane: "no-an".into(),
                tx: Transmitter::new(cb.clone(), p.sigma_c),
                rx: Receiver::new(s.name(), cb, p0, Rule::Euclidean),
                params: p0,
            }
        }
        Scenario::B4 => {
            let p1 = LinkParams::from_rho_slot_db(1, m, beta, rho_db)?;
            let cb = build_codebook(1, m, &phase_key(cfg.master_seed, 1), beta)?;
            let mut tx = Transmitter::new(cb.clone(), p1.sigma_c);
            tx.repetition = cfg.repetition;
            LinkSetup { lane: "repetition".into(), tx, rx: Receiver::new(s.name(), cb, p1, Rule::Matched), params: p1 }
        }
        other => unreachable!("{other} is not a link scenario"),
    };
    Ok(setup)
}

fn link_sweep(cfg: &ExperimentConfig, over_beta: bool) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let mut scenarios = vec![cfg.scenario];
    scenarios.extend(cfg.baselines.iter().copied().filter(|b| *b != cfg.scenario));
    if scenarios.contains(&Scenario::B4) {
        run.notes.push(format!(
            "B4 repeats every k=1 symbol {} times at the same rho_slot, spending {}x the energy per information bit; it is a sanity check, not a same-energy baseline",
            cfg.repetition, cfg.repetition
        ));
    }
    if scenarios.contains(&Scenario::B2) {
        run.notes.push(format!(
            "B2 uses one flat codebook (seed {}) and a Euclidean receiver scaled by sigma_c^2 + beta/2k",
            cfg.flat_seed
        ));
    }
    run.notes.push(format!("paired = {}", cfg.paired));
    for &v in &cfg.grid {
        let (beta, rho) = if over_beta { (v, cfg.rho_slot_db) } else { (cfg.beta, v) };
        let mut lanes: Vec<Lane> = Vec::new();
        let mut index = Vec::new();
        for &s in &scenarios {
            let st = link_setup(&run, s, beta, rho)?;
            let stream = run.stream(&st.lane);
            let l = match lanes.iter().position(|l| l.stream == stream) {
                Some(l) => l,
                None => {
                    lanes.push(Lane { stream, tx: st.tx, receivers: Vec::new() });
                    lanes.len() - 1
                }
            };
            lanes[l].receivers.push(st.rx);
            index.push((s, l, lanes[l].receivers.len() - 1, st.params));
        }
        let tallies = run_point(&lanes, &run.code, cfg.stopping, cfg.master_seed, point_key(v))?;
        for (s, l, r, p) in index {
            let row = run.row(s.name(), s.name(), &p, v, &tallies[l][r])?;
            log::info!("{} {}={v}: {}/{} errors", s, cfg.sweep.axis(), row.errors, row.trials);
            run.rows.push(row);
        }
    }
    Ok(run.finish())
}

/// BLER against rho_slot for the configured link scenarios.
pub fn run_bler_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    link_sweep(cfg, false)
}

/// BLER against beta at fixed rho_slot.
pub fn run_beta_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    link_sweep(cfg, true)
}

/// BLER against the per-tone Ricean K factor for Euclidean, static
/// matched and Woodbury receivers on shared realizations.
pub fn run_fading_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let p = LinkParams::new(cfg.k, cfg.m, cfg.beta, cfg.sigma_c)?;
    let cb = build_codebook(cfg.k, cfg.m, &run.key, cfg.beta)?;
    run.notes.push("per-tone gains are drawn once per codeword; Bob zero-forces with perfect CSI".into());
    let names = ["euclidean", "matched-static", "woodbury"];
    for &kf in &cfg.grid {
        let mut tx = Transmitter::new(cb.clone(), cfg.sigma_c);
        tx.fading = FadingProfile::new(kf)?;
        tx.report_csi = true;
        let receivers = [Rule::Euclidean, Rule::Matched, Rule::Woodbury]
            .into_iter()
            .zip(names)
            .map(|(rule, n)| Receiver::new(n, cb.clone(), p, rule))
            .collect();
        let lanes = [Lane { stream: run.stream("link"), tx, receivers }];
        let tallies = run_point(&lanes, &run.code, cfg.stopping, cfg.master_seed, point_key(kf))?;
        for (n, t) in names.iter().zip(&tallies[0]) {
            let row = run.row("fading", n, &p, kf, t)?;
            run.rows.push(row);
        }
    }
    Ok(run.finish())
}

/// BLER against LUT bit width; transmitter and receiver share the
/// quantized LUT. Every bit width at one sigma_c sees the same noise.
pub fn run_quant_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let cb = build_codebook(cfg.k, cfg.m, &run.key, cfg.beta)?;
    let matched_rule = if cfg.exact_quantized { Rule::MatchedExactQuantized } else { Rule::Matched };
    run.notes.push(format!(
        "quantized tangents are not renormalized; matched denominator: {}",
        if cfg.exact_quantized { "sigma^2 + beta |t_q|^2" } else { "sigma^2 + beta" }
    ));
    for &sigma in &cfg.sigma_grid {
        let p = LinkParams::new(cfg.k, cfg.m, cfg.beta, sigma)?;
        for &bits in &cfg.grid {
            let q = quantize_codebook(&cb, QuantizationSpec::new(bits as u32)?);
            let receivers = vec![
                Receiver::new("matched", q.clone(), p, matched_rule),
                Receiver::new("euclidean", q.clone(), p, Rule::Euclidean),
            ];
            let lanes = [Lane { stream: run.stream("link"), tx: Transmitter::new(q, sigma), receivers }];
            let tallies = run_point(&lanes, &run.code, cfg.stopping, cfg.master_seed, point_key(sigma))?;
            for (n, t) in ["matched", "euclidean"].iter().zip(&tallies[0]) {
                let mut row = run.row("quant", n, &p, bits, t)?;
                row.series = Some(sigma);
                run.rows.push(row);
            }
        }
    }
    Ok(run.finish())
}

/// Matched receiver with perturbed `(sigma_c, beta)` coefficients: each
/// ratio swept while the other stays at one, all cells on shared
/// realizations. Receivers `beta_hat` and `sigma_hat` carry the swept
/// ratio in `value` and the held one in `series`; `center` is the
/// unperturbed cell.
pub fn run_mismatch_grid(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let p = LinkParams::new(cfg.k, cfg.m, cfg.beta, cfg.sigma_c)?;
    let cb = build_codebook(cfg.k, cfg.m, &run.key, cfg.beta)?;
    run.notes
        .push("mismatch perturbs only the metric coefficients; the LUT keeps the true sqrt(1 - beta) scale".into());
    let mut cells = vec![("center", 1.0, 1.0)];
    for &r in cfg.grid.iter().filter(|r| **r != 1.0) {
        cells.push(("beta_hat", r, 1.0));
    }
    for &r in cfg.grid.iter().filter(|r| **r != 1.0) {
        cells.push(("sigma_hat", 1.0, r));
    }
    let receivers = cells
        .iter()
        .map(|&(n, rb, rs)| {
            let hat = LinkParams::new(cfg.k, cfg.m, (cfg.beta * rb).min(0.999), cfg.sigma_c * rs)?;
            Ok(Receiver::new(n, cb.clone(), hat, Rule::Matched))
        })
        .collect::<Result<Vec<_>>>()?;
    let lanes = [Lane { stream: run.stream("link"), tx: Transmitter::new(cb, cfg.sigma_c), receivers }];
    let t0 = Instant::now();
    let tallies = run_point(&lanes, &run.code, cfg.stopping, cfg.master_seed, point_key(cfg.sigma_c))?;
    log::info!("mismatch grid done in {:.1} s", t0.elapsed().as_secs_f64());
    for (&(n, rb, rs), t) in cells.iter().zip(&tallies[0]) {
        let (value, series) = if n == "sigma_hat" { (rs, rb) } else { (rb, rs) };
        let mut row = run.row("mismatch", n, &p, value, t)?;
        row.series = Some(series);
        run.rows.push(row);
    }
    Ok(run.finish())
}

/// BICM achievable rate per slot, `I(1)/k` and `I(s_star)/k`, for the
/// matched receiver, B1 and B2, from uncoded uniformly labelled symbols.
/// `errors`/`trials` count raw hard-decision bit errors.
pub fn run_air_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let bits = cfg.m.trailing_zeros() as usize;
    let se = run.code.rate() * bits as f64 / cfg.k as f64;
    run.notes.push(format!("operating spectral efficiency R*B/k = {se:.4} bits/slot (rows 'operating-se')"));
    let symbols = cfg.air_bits.div_ceil(bits);
    let chunks = symbols.div_ceil(AIR_CHUNK) as u64;
    for &rho in &cfg.grid {
        let t0 = Instant::now();
        let proposed = link_setup(&run, Scenario::Proposed, cfg.beta, rho)?;
        let b1 = link_setup(&run, Scenario::B1, cfg.beta, rho)?;
        let b2 = link_setup(&run, Scenario::B2, cfg.beta, rho)?;
        let lanes = [
            (run.stream("fourier"), &proposed.tx, vec![&proposed.rx, &b1.rx]),
            (run.stream("flat"), &b2.tx, vec![&b2.rx]),
        ];
        let mut samples = vec![AirSample::new(bits); 3];
        let mut macs = [0u64; 3];
        let per_chunk: Vec<Vec<(AirSample, u64)>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut out = Vec::new();
                for (stream, tx, rxs) in &lanes {
                    let real =
                        tx.realize_uncoded(AIR_CHUNK, &mut seeding_policy(cfg.master_seed, stream, point_key(rho), c))?;
                    let truth = true_label_bits(&real, bits);
                    for rx in rxs {
                        let (llrs, m) = rx.llrs(&real)?;
                        let mut s = AirSample::new(bits);
                        for (b, l) in truth.chunks(bits).zip(llrs.chunks(bits)) {
                            s.push_symbol(b, l);
                        }
                        out.push((s, m));
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for chunk in per_chunk {
            for (i, (s, m)) in chunk.into_iter().enumerate() {
                samples[i].extend(&s);
                macs[i] += m;
            }
        }
        let secs = t0.elapsed().as_secs_f64() / 3.0;
        let setups = [(&proposed, "proposed"), (&b1, "B1"), (&b2, "B2")];
        for (i, (st, name)) in setups.into_iter().enumerate() {
            let s = &samples[i];
            let wrong =
                s.llrs().iter().zip(true_bits(s)).filter(|(l, b)| (**l < 0.0) != (*b == 1) || **l == 0.0).count()
                    as u64;
            let tally = Tally { errors: wrong, trials: s.len_bits() as u64, macs: macs[i], seconds: secs };
            let mut row = run.row(name, name, &st.params, rho, &tally)?;
            let (s_star, i_star) = optimize_s(s);
            row.air_s1 = Some(bicm_air(s, 1.0) / cfg.k as f64);
            row.air_star = Some(i_star / cfg.k as f64);
            row.s_star = Some(s_star);
            row.air_bits = Some(s.len_bits() as u64);
            run.rows.push(row);
        }
        let mut row = run.row("air", "operating-se", &proposed.params, rho, &Tally::default())?;
        row.air_s1 = Some(se);
        row.air_star = Some(se);
        run.rows.push(row);
    }
    Ok(run.finish())
}

fn true_bits(s: &AirSample) -> impl Iterator<Item = u8> + '_ {
    s.bits().iter().copied()
}

/// Bob and a bounded-search Eve on the same fixed number of codewords per
/// rho_slot point, one Eve series per budget.
pub fn run_eve_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let mut run = Run::start(cfg)?;
    let n = cfg.stopping.max_codewords;
    let kind = match cfg.attack {
        AttackKind::RandomSearch => "random-search",
        AttackKind::GradientDescent => "gradient-descent",
    };
    if cfg.attack == AttackKind::GradientDescent {
        run.notes.push(format!(
            "gradient attack: {} iterations, step {} rad, central differences with epsilon {} rad, start {}",
            cfg.gd_iters,
            cfg.gd_step,
            cfg.fd_epsilon,
            if cfg.gd_init_from_best {
                "best of B random keys per codeword"
            } else {
                "one uniform random key per attack instance"
            }
        ));
    }
    run.notes.push(format!("Eve runs use a fixed {n} codewords per point, no early stop"));
    let cb = build_codebook(cfg.k, cfg.m, &run.key, cfg.beta)?;
    let cfg_dec = MinSumConfig::default();
    for &rho in &cfg.grid {
        let p = LinkParams::from_rho_slot_db(cfg.k, cfg.m, cfg.beta, rho)?;
        let tx = Transmitter::new(cb.clone(), p.sigma_c);
        let stream = run.stream("link");
        let pk = point_key(rho);
        let realize = |c: u64| tx.realize(&run.code, &mut seeding_policy(cfg.master_seed, &stream, pk, c));

        let t0 = Instant::now();
        let bob = Receiver::new("bob", cb.clone(), p, Rule::Matched);
        let outcomes: Vec<(bool, u64)> = (0..n)
            .into_par_iter()
            .map(|c| {
                let o = bob.decode(&run.code, &realize(c)?, &cfg_dec)?;
                Ok((o.block_error, o.macs))
            })
            .collect::<Result<_>>()?;
        let tally = Tally {
            errors: outcomes.iter().filter(|o| o.0).count() as u64,
            trials: n,
            macs: outcomes.iter().map(|o| o.1).sum(),
            seconds: t0.elapsed().as_secs_f64(),
        };
        let row = run.row("eve", "bob", &p, rho, &tally)?;
        run.rows.push(row);

        for &b in &cfg.budgets {
            let budget = cfg.attack_budget(b);
            let mut cand_rng = seeding_policy(cfg.master_seed, &run.stream(&format!("candidates/{b}")), pk, 0);
            let t0 = Instant::now();
            let obs = (0..n).map(realize);
            let outcome: AttackOutcome = match cfg.attack {
                AttackKind::RandomSearch => random_search_attack(&budget, obs, &run.key, &p, &run.code, &mut cand_rng)?,
                AttackKind::GradientDescent => {
                    gradient_descent_attack(&budget, obs, &run.key, &p, &run.code, &mut cand_rng)?
                }
            };
            let tally = Tally {
                errors: outcome.eve_bler.errors,
                trials: outcome.eve_bler.trials,
                macs: 0,
                seconds: t0.elapsed().as_secs_f64(),
            };
            let mut row = run.row("eve", "eve", &p, rho, &tally)?;
            row.budget = Some(b);
            row.attack = Some(kind.to_string());
            row.best_score = Some(outcome.mean_best_score());
            row.torus_distance = Some(outcome.mean_torus_distance());
            row.success_upper = Some(outcome.success_upper);
            log::info!("eve rho={rho} B={b}: {}/{} block errors", row.errors, row.trials);
            run.rows.push(row);
        }
    }
    Ok(run.finish())
}
