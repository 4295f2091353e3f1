//! Regular (3,6) Gallager LDPC code: construction, systematic encoding and
//! flooding scaled min-sum decoding.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub const CODE_LENGTH: usize = 1008;
pub const VAR_DEGREE: usize = 3;
pub const CHECK_DEGREE: usize = 6;
/// GF(2) rank the construction is pinned to (each permuted band sums to
/// the all-ones word, so 504 rows carry at most 502 independent checks).
pub const TARGET_RANK: usize = 502;
/// Candidate seeds examined before giving up.
pub const SEED_SEARCH_CAP: u64 = 10_000;

/// Dense GF(2) row stored as 64-bit words.
type BitRow = Vec<u64>;

fn get_bit(row: &[u64], col: usize) -> bool {
    (row[col / 64] >> (col % 64)) & 1 == 1
}

fn xor_into(dst: &mut [u64], src: &[u64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}

/// Reduced row echelon form in place; returns the pivot column of each of
/// the first `rank` rows.
fn rref(rows: &mut [BitRow], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| get_bit(&rows[i], col)) else {
            continue;
        };
        rows.swap(r, p);
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != r && get_bit(row, col) {
                xor_into(row, &pivot);
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

/// Sparse parity-check matrix plus the data needed to encode.
#[derive(Debug, Clone)]
pub struct ParityCheck {
    n: usize,
    checks: Vec<Vec<u32>>,
    // CSR by check: edge e belongs to check c for check_ptr[c] <= e < check_ptr[c+1]
    check_ptr: Vec<usize>,
    edge_var: Vec<u32>,
    // CSR by variable over edge ids
    var_ptr: Vec<usize>,
    var_edges: Vec<u32>,
    rank: usize,
    seed: u64,
    pivots: Vec<usize>,
    free_cols: Vec<usize>,
    // reduced rows with the pivot bit cleared
    parity_masks: Vec<BitRow>,
}

/// Outcome of one decode. Non-convergence is a state, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub bits: Vec<u8>,
    pub info_bits: Vec<u8>,
    /// Zero syndrome reached.
    pub converged: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MinSumConfig {
    pub max_iter: usize,
    /// Check-node magnitude scaling.
    pub alpha: f64,
    /// Channel and variable-to-check messages are clamped to `+-saturation`.
    pub saturation: f64,
}

impl Default for MinSumConfig {
    fn default() -> Self {
        MinSumConfig { max_iter: 50, alpha: 0.8, saturation: 1e4 }
    }
}

impl ParityCheck {
    /// Builds a parity-check matrix from explicit check rows.
    pub fn from_checks(n: usize, checks: Vec<Vec<u32>>, seed: u64) -> Result<Self> {
        if checks.iter().flatten().any(|&v| v as usize >= n) {
            return Err(Error::InvalidParameter("check references a column beyond n".into()));
        }
        let words = n.div_ceil(64);
        let mut dense: Vec<BitRow> = checks
            .iter()
            .map(|vars| {
                let mut row = vec![0u64; words];
                for &v in vars {
                    row[v as usize / 64] ^= 1 << (v % 64);
                }
                row
            })
            .collect();
        let pivots = rref(&mut dense, n);
        let rank = pivots.len();
        let mut parity_masks: Vec<BitRow> = dense.into_iter().take(rank).collect();
        for (row, &p) in parity_masks.iter_mut().zip(&pivots) {
            row[p / 64] &= !(1 << (p % 64));
        }
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let free_cols = (0..n).filter(|&c| !is_pivot[c]).collect();

        let mut check_ptr = vec![0];
        let mut edge_var = Vec::new();
        for vars in &checks {
            edge_var.extend_from_slice(vars);
            check_ptr.push(edge_var.len());
        }
        let mut per_var: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (e, &v) in edge_var.iter().enumerate() {
            per_var[v as usize].push(e as u32);
        }
        let mut var_ptr = vec![0];
        let mut var_edges = Vec::new();
        for es in per_var {
            var_edges.extend(es);
            var_ptr.push(var_edges.len());
        }
        Ok(ParityCheck {
            n,
            checks,
            check_ptr,
            edge_var,
            var_ptr,
            var_edges,
            rank,
            seed,
            pivots,
            free_cols,
            parity_masks,
        })
    }

    /// Codeword length `n_c`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Information length `n_c - rank`.
    pub fn n_info(&self) -> usize {
        self.n - self.rank
    }

    pub fn rate(&self) -> f64 {
        self.n_info() as f64 / self.n as f64
    }

    /// Seed that produced this matrix.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Codeword positions carrying the information bits, ascending.
    pub fn info_positions(&self) -> &[usize] {
        &self.free_cols
    }

    pub fn column_weights(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.var_ptr[v + 1] - self.var_ptr[v]).collect()
    }

    pub fn row_weights(&self) -> Vec<usize> {
        self.checks.iter().map(Vec::len).collect()
    }

    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        self.checks.iter().all(|vars| vars.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 0)
    }

    /// Systematic encoder: info bits go to the non-pivot columns, each
    /// pivot column is the parity of its reduced row.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.n_info() {
            return Err(Error::Dimension { expected: self.n_info(), actual: info.len() });
        }
        let mut cw = vec![0u8; self.n];
        let mut packed = vec![0u64; self.n.div_ceil(64)];
        for (&col, &b) in self.free_cols.iter().zip(info) {
            let b = b & 1;
            cw[col] = b;
            packed[col / 64] |= (b as u64) << (col % 64);
        }
        for (mask, &p) in self.parity_masks.iter().zip(&self.pivots) {
            let ones: u32 = mask.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[p] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.free_cols.iter().map(|&c| codeword[c]).collect()
    }

    /// Flooding scaled min-sum. `llrs[v] > 0` favours bit 0.
    pub fn decode_min_sum(&self, llrs: &[f64], cfg: &MinSumConfig) -> Result<DecodeResult> {
        if llrs.len() != self.n {
            return Err(Error::Dimension { expected: self.n, actual: llrs.len() });
        }
        let sat = cfg.saturation;
        let ch: Vec<f64> = llrs.iter().map(|l| l.clamp(-sat, sat)).collect();
        let ne = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| ch[v as usize]).collect();
        let mut c2v = vec![0.0; ne];
        let mut bits: Vec<u8> = ch.iter().map(|&l| (l < 0.0) as u8).collect();
        let mut converged = false;
        let mut iterations_used = 0;

        for it in 1..=cfg.max_iter {
            iterations_used = it;
            for c in 0..self.checks.len() {
                let (lo, hi) = (self.check_ptr[c], self.check_ptr[c + 1]);
                let (mut min1, mut min2, mut arg) = (f64::INFINITY, f64::INFINITY, lo);
                let mut neg = false;
                for (e, &m) in v2c.iter().enumerate().take(hi).skip(lo) {
                    let a = m.abs();
                    neg ^= m < 0.0;
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        arg = e;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for e in lo..hi {
                    let mag = if e == arg { min2 } else { min1 };
                    let sign_neg = neg ^ (v2c[e] < 0.0);
                    let out = cfg.alpha * mag;
                    c2v[e] = if sign_neg { -out } else { out };
                }
            }
            for v in 0..self.n {
                let es = &self.var_edges[self.var_ptr[v]..self.var_ptr[v + 1]];
                let total = ch[v] + es.iter().map(|&e| c2v[e as usize]).sum::<f64>();
                bits[v] = (total < 0.0) as u8;
                for &e in es {
                    v2c[e as usize] = (total - c2v[e as usize]).clamp(-sat, sat);
                }
            }
            if self.syndrome_is_zero(&bits) {
                converged = true;
                break;
            }
        }
        let info_bits = self.extract_info(&bits);
        Ok(DecodeResult { bits, info_bits, converged, iterations_used })
    }

    /// alist text (1-based indices, zero padded to the maximum degree).
    pub fn to_alist(&self) -> String {
        let cols = self.column_weights();
        let rows = self.row_weights();
        let (max_c, max_r) = (*cols.iter().max().unwrap_or(&0), *rows.iter().max().unwrap_or(&0));
        let mut s = String::new();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "{} {}", self.n, self.checks.len()).unwrap();
        writeln!(s, "{max_c} {max_r}").unwrap();
        writeln!(s, "{}", join(&mut cols.iter().copied())).unwrap();
        writeln!(s, "{}", join(&mut rows.iter().copied())).unwrap();
        let mut per_col: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (c, vars) in self.checks.iter().enumerate() {
            for &v in vars {
                per_col[v as usize].push(c + 1);
            }
        }
        for mut list in per_col {
            list.sort_unstable();
            list.resize(max_c, 0);
            writeln!(s, "{}", join(&mut list.into_iter())).unwrap();
        }
        for vars in &self.checks {
            let mut list: Vec<usize> = vars.iter().map(|&v| v as usize + 1).collect();
            list.sort_unstable();
            list.resize(max_r, 0);
            writeln!(s, "{}", join(&mut list.into_iter())).unwrap();
        }
        s
    }
}

/// Gallager ensemble member: `dv` stacked bands, the first in natural
/// column order and the others column-permuted by `seed`.
pub fn gallager_checks(n: usize, dv: usize, dc: usize, seed: u64) -> Vec<Vec<u32>> {
    let band = n / dc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(dv * band);
    for b in 0..dv {
        let mut perm: Vec<u32> = (0..n as u32).collect();
        if b > 0 {
            perm.shuffle(&mut rng);
        }
        for r in 0..band {
            let mut row: Vec<u32> = perm[r * dc..(r + 1) * dc].to_vec();
            row.sort_unstable();
            checks.push(row);
        }
    }
    checks
}

/// The (3,6) code at `n_c = 1008`: seeds `seed, seed+1, ...` are tried
/// until the GF(2) rank is 502.
pub fn build_gallager(seed: u64) -> Result<ParityCheck> {
    build_gallager_with(CODE_LENGTH, VAR_DEGREE, CHECK_DEGREE, TARGET_RANK, seed)
}

pub fn build_gallager_with(n: usize, dv: usize, dc: usize, target_rank: usize, seed: u64) -> Result<ParityCheck> {
    if dc == 0 || n % dc != 0 {
        return Err(Error::InvalidParameter(format!("n = {n} is not a multiple of dc = {dc}")));
    }
    for s in seed..seed.saturating_add(SEED_SEARCH_CAP) {
        let pc = ParityCheck::from_checks(n, gallager_checks(n, dv, dc, s), s)?;
        if pc.rank() == target_rank {
            return Ok(pc);
        }
        log::debug!("seed {s}: rank {} != {target_rank}", pc.rank());
    }
    Err(Error::RankSearchExhausted { target: target_rank, tried: SEED_SEARCH_CAP, start: seed })
}
