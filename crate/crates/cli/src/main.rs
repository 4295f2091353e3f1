use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anlink_core::constellation::{
    build_codebook, quantize_codebook, write_lut_binary, write_lut_csv, QuantizationSpec,
};
use anlink_core::demapper::MacTable;
use anlink_core::harness::{self, phase_key, ExperimentConfig, Scenario, SweepKind, SweepResult};
use anlink_core::ldpc::build_gallager;
use anlink_core::{Error, LinkParams};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anlink", version, about = "Tangent artificial-noise Fourier-curve link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BLER against rho_slot (dB) for link scenarios
    Bler(SweepArgs),
    /// BLER against beta at fixed rho_slot
    Beta(SweepArgs),
    /// BICM achievable rate against rho_slot
    Air(SweepArgs),
    /// BLER against LUT bit width
    Quant(SweepArgs),
    /// Receiver coefficient mismatch grid
    Mismatch(SweepArgs),
    /// Bounded-search eavesdropper against rho_slot
    Eve(SweepArgs),
    /// BLER against per-tone Ricean K factor
    Fading(SweepArgs),
    /// Export a constellation/tangent LUT and the parity-check matrix
    Lut(LutArgs),
    /// Print per-symbol MAC counts and LUT sizes
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario, or a comma list whose first entry is the primary scenario
    #[arg(long)]
    scenario: String,
    /// Master RNG seed
    #[arg(long)]
    seed: u64,
    /// CSV output path; metadata goes to `<out>.json`
    #[arg(long)]
    out: PathBuf,
    /// Config file with `key = value` lines, applied before flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweep grid: comma list or start:step:stop
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "M", alias = "m")]
    m: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma_c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho_slot_db: Option<f64>,
    #[arg(long)]
    max_codewords: Option<u64>,
    /// Block errors that end a point early, or `none`
    #[arg(long)]
    target_errors: Option<String>,
    #[arg(long)]
    code_seed: Option<u64>,
    /// Further overrides, `key=value`, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LutFormat {
    Binary,
    Csv,
}

#[derive(Args)]
struct LutArgs {
    /// Seed the phase key is drawn from (same as a sweep's master seed)
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long = "M", alias = "m", default_value_t = 64)]
    m: usize,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    /// Quantize the LUT to this many bits
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long, value_enum, default_value_t = LutFormat::Binary)]
    format: LutFormat,
    /// Also write the parity-check matrix in alist format here
    #[arg(long)]
    alist: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    code_seed: u64,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long = "M", alias = "m", default_value_t = 64)]
    m: usize,
}

/// Configuration problems exit with status 2, anything else with 1.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn build_config(kind: SweepKind, a: &SweepArgs) -> Result<ExperimentConfig, Failure> {
    let primary: Scenario = a.scenario.split(',').next().unwrap_or("").parse().map_err(config_err)?;
    let mut cfg = ExperimentConfig::new(kind, primary).map_err(config_err)?;
    if let Some(path) = &a.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(config_err)?;
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display())).map_err(config_err)?;
    }
    let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(config_err);
    set("scenario", a.scenario.clone())?;
    set("seed", a.seed.to_string())?;
    set("out", a.out.display().to_string())?;
    if let Some(v) = &a.grid {
        set("grid", v.clone())?;
    }
    if let Some(v) = a.k {
        set("k", v.to_string())?;
    }
    if let Some(v) = a.m {
        set("M", v.to_string())?;
    }
    if let Some(v) = a.beta {
        set("beta", v.to_string())?;
    }
    if let Some(v) = a.sigma_c {
        set("sigma_c", v.to_string())?;
    }
    if let Some(v) = a.rho_slot_db {
        set("rho_slot_db", v.to_string())?;
    }
    if let Some(v) = a.max_codewords {
        set("max_codewords", v.to_string())?;
    }
    if let Some(v) = &a.target_errors {
        set("target_errors", v.clone())?;
    }
    if let Some(v) = a.code_seed {
        set("code_seed", v.to_string())?;
    }
    for kv in &a.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| config_err(Error::Config(format!("--set expects KEY=VALUE, got '{kv}'"))))?;
        set(k, v.to_string())?;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn print_summary(r: &SweepResult) {
    println!(
        "{:<10} {:<15} {:>9} {:>7} {:>7} {:>9} {:>19}",
        "scenario", "receiver", "value", "errors", "trials", "bler", "cp95"
    );
    for row in &r.rows {
        let mut line = format!(
            "{:<10} {:<15} {:>9.3} {:>7} {:>7} {:>9.2e} [{:.2e}, {:.2e}]",
            row.scenario, row.receiver, row.value, row.errors, row.trials, row.bler, row.cp_lo, row.cp_hi
        );
        if let (Some(a), Some(b)) = (row.air_s1, row.air_star) {
            line.push_str(&format!("  I(1)/k {a:.4} I(s*)/k {b:.4}"));
        }
        if let Some(u) = row.success_upper {
            line.push_str(&format!("  success <= {u:.2e}"));
        }
        println!("{line}");
    }
}

fn sweep(kind: SweepKind, a: &SweepArgs) -> Result<(), Failure> {
    let cfg = build_config(kind, a)?;
    log::info!("config hash {}", cfg.config_hash());
    let result = harness::run(&cfg).map_err(|e| Failure::Run(e.into()))?;
    let side = result.write(&a.out).with_context(|| format!("writing {}", a.out.display())).map_err(Failure::Run)?;
    print_summary(&result);
    eprintln!("wrote {} and {}", a.out.display(), side.display());
    Ok(())
}

fn export_lut(a: &LutArgs) -> Result<(), Failure> {
    let key = phase_key(a.seed, a.k);
    let mut cb = build_codebook(a.k, a.m, &key, a.beta).map_err(config_err)?;
    if let Some(bits) = a.bits {
        cb = quantize_codebook(&cb, QuantizationSpec::new(bits).map_err(config_err)?);
    }
    let run = |e: anyhow::Error| Failure::Run(e);
    let w = BufWriter::new(File::create(&a.out).with_context(|| format!("creating {}", a.out.display())).map_err(run)?);
    match a.format {
        LutFormat::Binary => write_lut_binary(&cb, w),
        LutFormat::Csv => write_lut_csv(&cb, w),
    }
    .map_err(|e| run(e.into()))?;
    eprintln!("wrote LUT ({} values) to {}", cb.lut_values(), a.out.display());
    if let Some(path) = &a.alist {
        let code = build_gallager(a.code_seed).map_err(|e| run(e.into()))?;
        write_text(path, &code.to_alist()).map_err(run)?;
        eprintln!(
            "wrote {}x{} parity-check matrix (accepted seed {}) to {}",
            code.num_checks(),
            code.n(),
            code.seed(),
            path.display()
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn complexity(a: &ComplexityArgs) -> Result<(), Failure> {
    let cb = build_codebook(a.k, a.m, &phase_key(0, a.k), 0.3).map_err(config_err)?;
    let p = LinkParams::new(a.k, a.m, 0.3, 0.15).map_err(config_err)?;
    let t = MacTable::measure(&cb, &p).map_err(|e| Failure::Run(e.into()))?;
    println!("per-symbol metric MACs at (k, M) = ({}, {})", a.k, a.m);
    println!("{:<10} {:>10} {:>10} {:>9}", "", "Euclidean", "matched", "overhead");
    println!("{:<10} {:>10} {:>10} {:>8.0}%", "naive", t.naive_euclidean, t.naive_matched, 100.0 * t.naive_overhead());
    println!(
        "{:<10} {:>10} {:>10} {:>8.0}%",
        "optimized",
        t.optimized_euclidean,
        t.optimized_matched,
        100.0 * t.optimized_overhead()
    );
    println!("LUT: {} values (means + tangents)", cb.lut_values());
    for bits in [32, 16, 8, 6] {
        println!(
            "  {bits:>2}-bit: {:>6} bytes total, {:>6} bytes for tangents",
            cb.lut_bytes(bits),
            cb.lut_bytes(bits) / 2
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Bler(a) => sweep(SweepKind::Bler, a),
        Command::Beta(a) => sweep(SweepKind::Beta, a),
        Command::Air(a) => sweep(SweepKind::Air, a),
        Command::Quant(a) => sweep(SweepKind::Quant, a),
        Command::Mismatch(a) => sweep(SweepKind::Mismatch, a),
        Command::Eve(a) => sweep(SweepKind::Eve, a),
        Command::Fading(a) => sweep(SweepKind::Fading, a),
        Command::Lut(a) => export_lut(a),
        Command::Complexity(a) => complexity(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("anlink: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("anlink: {e:#}");
            ExitCode::FAILURE
        }
    }
}
