//! Design-aware bounded-search eavesdropper.
//!
//! Eve knows everything but the phase key. She scores candidate keys by
//! the uncoded symbol-wise log-likelihood of one codeword,
//! `s = -sum_l min_m Lambda_{l,m}`, and runs the ordinary matched
//! demapper and LDPC decoder at her best candidate.

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{clopper_pearson, cp_upper_one_sided, torus_distance, CpInterval};
use crate::channel::LinkParams;
use crate::constellation::{build_codebook, wrap_angle, Codebook, PhaseKey};
use crate::demapper::{Accounting, Demapper, Rule};
use crate::ldpc::{MinSumConfig, ParityCheck};
use crate::link::{Realization, Receiver};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AttackKind {
    RandomSearch,
    GradientDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttackBudget {
    /// Number of random candidate keys `B`.
    pub candidates: usize,
    pub kind: AttackKind,
    pub gd_iters: usize,
    /// Initial step length on the torus, in radians.
    pub gd_step: f64,
    /// Central-difference half width, in radians.
    pub fd_epsilon: f64,
    /// Start gradient ascent from the best of the `B` random candidates
    /// instead of a single fresh random key.
    pub gd_init_from_best: bool,
}

impl AttackBudget {
    pub fn random_search(candidates: usize) -> Self {
        AttackBudget {
            candidates,
            kind: AttackKind::RandomSearch,
            gd_iters: 50,
            gd_step: 0.1,
            fd_epsilon: 1e-3,
            gd_init_from_best: false,
        }
    }

    pub fn gradient_descent() -> Self {
        AttackBudget { kind: AttackKind::GradientDescent, candidates: 1, ..Self::random_search(1) }
    }

    fn validate(&self) -> Result<()> {
        if self.candidates < 1 {
            return Err(Error::InvalidParameter("attack budget needs at least one candidate".into()));
        }
        Ok(())
    }
}

/// Eve's result on one codeword.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordAttack {
    pub best_key: PhaseKey,
    pub best_score: f64,
    /// Wrapped-torus distance from the true key.
    pub torus_distance: f64,
    pub block_error: bool,
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub records: Vec<CodewordAttack>,
    pub eve_bler: CpInterval,
    /// One-sided 95% upper bound on Eve's per-codeword success probability.
    pub success_upper: f64,
}

impl AttackOutcome {
    fn from_records(records: Vec<CodewordAttack>) -> Result<Self> {
        let n = records.len() as u64;
        let errors = records.iter().filter(|r| r.block_error).count() as u64;
        Ok(AttackOutcome {
            eve_bler: clopper_pearson(errors, n, 0.95)?,
            success_upper: cp_upper_one_sided(n - errors, n, 0.95)?,
            records,
        })
    }

    pub fn mean_best_score(&self) -> f64 {
        self.records.iter().map(|r| r.best_score).sum::<f64>() / self.records.len() as f64
    }

    pub fn mean_torus_distance(&self) -> f64 {
        self.records.iter().map(|r| r.torus_distance).sum::<f64>() / self.records.len() as f64
    }
}

/// Symbol-wise log-likelihood score of one codeword under a candidate LUT.
pub fn score_with_codebook(cb: &Codebook, real: &Realization, params: &LinkParams) -> Result<f64> {
    let dem = Demapper::new(cb, params, Rule::Matched, Accounting::Optimized)?;
    let mut metrics = vec![0.0; cb.size()];
    let mut total = 0.0;
    for s in 0..real.num_symbols() {
        dem.metrics_into(real.observation(s, 0), None, &mut metrics)?;
        total += metrics.iter().cloned().fold(f64::INFINITY, f64::min);
    }
    Ok(-total)
}

pub fn score_candidate(key: &PhaseKey, real: &Realization, params: &LinkParams) -> Result<f64> {
    score_with_codebook(&build_codebook(params.k, params.m, key, params.beta)?, real, params)
}

fn eve_decode(key: &PhaseKey, real: &Realization, params: &LinkParams, code: &ParityCheck) -> Result<bool> {
    let cb = build_codebook(params.k, params.m, key, params.beta)?;
    let rx = Receiver::new("eve", cb, *params, Rule::Matched);
    Ok(rx.decode(code, real, &MinSumConfig::default())?.block_error)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// `B` keys drawn once, scored on every codeword, decoded at the argmax.
pub fn random_search_attack<R, I>(
    budget: &AttackBudget,
    observations: I,
    true_key: &PhaseKey,
    params: &LinkParams,
    code: &ParityCheck,
    rng: &mut R,
) -> Result<AttackOutcome>
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = Result<Realization>>,
{
    budget.validate()?;
    let keys: Vec<PhaseKey> = (0..budget.candidates).map(|_| PhaseKey::random(params.k, rng)).collect();
    let books: Vec<Codebook> =
        keys.iter().map(|k| build_codebook(params.k, params.m, k, params.beta)).collect::<Result<_>>()?;
    let mut records = Vec::new();
    for real in observations {
        let real = real?;
        let scores: Vec<f64> =
            books.par_iter().map(|cb| score_with_codebook(cb, &real, params)).collect::<Result<_>>()?;
        let best = argmax(&scores);
        let key = &keys[best];
        records.push(CodewordAttack {
            best_key: key.clone(),
            best_score: scores[best],
            torus_distance: torus_distance(key, true_key)?,
            block_error: eve_decode(key, &real, params, code)?,
        });
    }
    AttackOutcome::from_records(records)
}

/// Central-difference gradient ascent of the codeword score on the torus.
/// Steps have length `gd_step` along the normalized gradient; a step that
/// does not raise the score is rejected and the step length halved.
pub fn gradient_ascent(
    start: &PhaseKey,
    real: &Realization,
    params: &LinkParams,
    budget: &AttackBudget,
) -> Result<(PhaseKey, f64)> {
    let mut key = start.clone();
    let mut score = score_candidate(&key, real, params)?;
    let mut step = budget.gd_step;
    let eps = budget.fd_epsilon;
    for _ in 0..budget.gd_iters {
        let grad: Vec<f64> = (0..params.k)
            .into_par_iter()
            .map(|m| {
                let mut plus = key.phases().to_vec();
                let mut minus = plus.clone();
                plus[m] += eps;
                minus[m] -= eps;
                let sp = score_candidate(&PhaseKey::new(plus), real, params)?;
                let sm = score_candidate(&PhaseKey::new(minus), real, params)?;
                Ok((sp - sm) / (2.0 * eps))
            })
            .collect::<Result<_>>()?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let trial =
            PhaseKey::new(key.phases().iter().zip(&grad).map(|(p, g)| wrap_angle(p + step * g / norm)).collect());
        let trial_score = score_candidate(&trial, real, params)?;
        if trial_score > score {
            key = trial;
            score = trial_score;
        } else {
            step *= 0.5;
        }
    }
    Ok((key, score))
}

/// Gradient-ascent Eve. The start key is one fresh uniform draw per attack
/// instance, or the best of `B` random candidates per codeword.
pub fn gradient_descent_attack<R, I>(
    budget: &AttackBudget,
    observations: I,
    true_key: &PhaseKey,
    params: &LinkParams,
    code: &ParityCheck,
    rng: &mut R,
) -> Result<AttackOutcome>
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = Result<Realization>>,
{
    budget.validate()?;
    let init = PhaseKey::random(params.k, rng);
    let pool: Vec<(PhaseKey, Codebook)> = if budget.gd_init_from_best {
        (0..budget.candidates)
            .map(|_| {
                let k = PhaseKey::random(params.k, rng);
                let cb = build_codebook(params.k, params.m, &k, params.beta)?;
                Ok((k, cb))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut records = Vec::new();
    for real in observations {
        let real = real?;
        let start = if pool.is_empty() {
            init.clone()
        } else {
            let scores: Vec<f64> =
                pool.par_iter().map(|(_, cb)| score_with_codebook(cb, &real, params)).collect::<Result<_>>()?;
            pool[argmax(&scores)].0.clone()
        };
        let (key, score) = gradient_ascent(&start, &real, params, budget)?;
        records.push(CodewordAttack {
            torus_distance: torus_distance(&key, true_key)?,
            block_error: eve_decode(&key, &real, params, code)?,
            best_key: key,
            best_score: score,
        });
    }
    AttackOutcome::from_records(records)
}
