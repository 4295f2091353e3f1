//! Runs one sweep point: codewords in fixed-size batches, decoded in
//! parallel, tallied in index order so the stopping point does not depend
//! on scheduling.

use std::time::Instant;

use rayon::prelude::*;

use super::config::StoppingRule;
use super::seeding::seeding_policy;
use crate::ldpc::{MinSumConfig, ParityCheck};
use crate::link::{Receiver, Transmitter};
use crate::Result;

const BATCH: u64 = 32;

/// A transmitter and the receivers that see its realizations.
pub(crate) struct Lane {
    /// Substream name; lanes with equal ids would see equal randomness.
    pub stream: String,
    pub tx: Transmitter,
    pub receivers: Vec<Receiver>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Tally {
    pub errors: u64,
    pub trials: u64,
    pub macs: u64,
    pub seconds: f64,
}

/// Per-lane, per-receiver tallies for one point.
pub(crate) fn run_point(
    lanes: &[Lane],
    code: &ParityCheck,
    stop: StoppingRule,
    master_seed: u64,
    point_key: u64,
) -> Result<Vec<Vec<Tally>>> {
    let cfg = MinSumConfig::default();
    let mut tallies: Vec<Vec<Tally>> = lanes.iter().map(|l| vec![Tally::default(); l.receivers.len()]).collect();
    let mut done: Vec<Vec<bool>> = lanes.iter().map(|l| vec![false; l.receivers.len()]).collect();
    let mut next = 0u64;
    while done.iter().flatten().any(|d| !d) {
        let batch: Vec<u64> = (next..next + BATCH).collect();
        next += BATCH;
        // outcome[codeword][lane][receiver] = Some((error, macs, seconds)) for active receivers
        type Outcome = Vec<Vec<Option<(bool, u64, f64)>>>;
        let outcomes: Vec<Outcome> = batch
            .par_iter()
            .map(|&c| {
                lanes
                    .iter()
                    .zip(&done)
                    .map(|(lane, lane_done)| {
                        if lane_done.iter().all(|d| *d) {
                            return Ok(vec![None; lane.receivers.len()]);
                        }
                        let mut rng = seeding_policy(master_seed, &lane.stream, point_key, c);
                        let t0 = Instant::now();
                        let real = lane.tx.realize(code, &mut rng)?;
                        let share = t0.elapsed().as_secs_f64() / lane.receivers.len() as f64;
                        lane.receivers
                            .iter()
                            .zip(lane_done)
                            .map(|(rx, d)| {
                                if *d {
                                    return Ok(None);
                                }
                                let t = Instant::now();
                                let out = rx.decode(code, &real, &cfg)?;
                                Ok(Some((out.block_error, out.macs, share + t.elapsed().as_secs_f64())))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for per_lane in outcomes {
            for (l, per_rx) in per_lane.into_iter().enumerate() {
                for (r, o) in per_rx.into_iter().enumerate() {
                    let (Some((err, macs, secs)), false) = (o, done[l][r]) else { continue };
                    let t = &mut tallies[l][r];
                    t.trials += 1;
                    t.errors += err as u64;
                    t.macs += macs;
                    t.seconds += secs;
                    done[l][r] = stop.done(t.errors, t.trials);
                }
            }
        }
    }
    Ok(tallies)
}
