use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use vlqfb_core::bounds::{
    c2_hat, delta_schedule, derive_c1, prop1_bounds, prop4_bounds, thm3_converse_lb, thm3_rate_budget,
    thm6_constants, ScheduleFn,
};
use vlqfb_core::codebook::{build_covering_codebook, fit_c0_from_sizes, verify_covering};
use vlqfb_core::estimate::{
    estimate_gains, fit_rate_overhead, paired_compare, ser_full_analytic, Strategy, CSV_HEADER,
};
use vlqfb_core::stbc::code_rate;
use vlqfb_core::{db_to_linear, BeamformingCodebook, RngStream, SweepRecord};

use crate::config::SimulationConfig;
use crate::run::{codebooks_for, quantizer_for, run_config};
use crate::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "vlqfb", version, about = "Variable-length limited-feedback quantizer experiments")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path, overriding the configuration.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or verify covering codebooks.
    #[command(subcommand)]
    Codebook(CodebookCommand),
    /// Run the sweep described by --config.
    Sweep,
    /// Fit diversity, array gain and rate-overhead decay to a sweep CSV.
    Fit(FitArgs),
    /// Paired comparison of the configured quantizer against a baseline.
    Compare(CompareArgs),
    /// Print bound constants and bound values.
    Bounds(BoundsArgs),
    /// Run the invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Subcommand)]
pub enum CodebookCommand {
    Build(BuildArgs),
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub t: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::config::DEFAULT_STOP_STREAK)]
    pub stop_streak: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub codebook: PathBuf,
    /// Covering level to certify; defaults to the one stored in the file.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub probes: usize,
    #[arg(long, default_value_t = 50)]
    pub refine_steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub decades: u32,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline strategy, evaluated on the same draws.
    #[arg(long)]
    pub baseline: Strategy,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub t: usize,
    /// Codebook-size constant; fitted from built codebooks when absent.
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 20.0)]
    pub p_db: f64,
    /// Codebook size for the variable-length rate bound; defaults to ⌈C0 δ^(-2t)⌉.
    #[arg(long)]
    pub cardinality: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Codebook file whose invariants are checked as well.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
}

/// Parse `args`, run the command and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return exit::FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Codebook(CodebookCommand::Build(a)) => codebook_build(a, cli.output.as_deref()),
        Command::Codebook(CodebookCommand::Verify(a)) => codebook_verify(a),
        Command::Sweep => sweep(cli),
        Command::Fit(a) => fit(a, cli.output.as_deref()),
        Command::Compare(a) => compare(cli, a),
        Command::Bounds(a) => bounds(a),
        Command::Selftest(a) => selftest(a),
    }
}

fn load_config(cli: &Cli) -> Result<SimulationConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let mut cfg = SimulationConfig::load(path)?;
    if let Some(out) = &cli.output {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn codebook_build(a: &BuildArgs, output: Option<&Path>) -> Result<i32, CliError> {
    let cb = build_covering_codebook(a.t, a.delta, RngStream::new(a.seed, 1), a.stop_streak)?;
    let json = cb.to_json()? + "\n";
    emit(&json, output)?;
    if output.is_some() {
        let meta = cb.metadata().expect("built codebooks carry metadata");
        eprintln!(
            "t = {} delta = {} size = {} probes = {} verified worst correlation^2 = {:.6}",
            cb.t(),
            cb.delta(),
            cb.len(),
            meta.probes_drawn,
            meta.verify_worst_correlation_sq
        );
    }
    Ok(exit::OK)
}

fn codebook_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let cb = BeamformingCodebook::load_unchecked(&a.codebook)?;
    let violations = cb.invariant_violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invariant violated: {v}");
        }
        return Ok(exit::INVARIANT);
    }
    let delta = a.delta.unwrap_or(cb.delta());
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::Config(format!("delta: must lie in (0, 1), got {delta}")));
    }
    let report = verify_covering(&cb, delta, a.probes, a.refine_steps, RngStream::new(a.seed, 2));
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(if report.pass { exit::OK } else { exit::INVARIANT })
}

fn sweep(cli: &Cli) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let outcome = run_config(&cfg)?;
    for r in &outcome.summary.records {
        eprintln!(
            "{:>10} P = {:>6.2} dB  ser = {:.6e} ± {:.2e}  rate = {}",
            r.quantizer,
            r.p_db(),
            r.ser,
            r.ser_stderr,
            vlqfb_core::estimate::format_float(r.rate)
        );
    }
    eprintln!("wrote {} and {}", outcome.csv_path.display(), outcome.summary_path.display());
    let failed = outcome.failed_checks();
    if failed.is_empty() {
        Ok(exit::OK)
    } else {
        for c in failed {
            eprintln!(
                "bound check failed: {} at P = {}: measured {} vs bound {} (slack {})",
                c.name, c.p, c.measured, c.bound, c.slack
            );
        }
        Ok(exit::INVARIANT)
    }
}

/// Parse a sweep CSV back into records.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>, CliError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(CliError::Config(format!("input: expected header {CSV_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || CliError::Config(format!("input: malformed row {}: {line}", n + 2));
        if f.len() != 9 {
            return Err(bad());
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        out.push(SweepRecord {
            quantizer: f[0].to_string(),
            p: num(2)?,
            ser: num(3)?,
            ser_stderr: num(4)?,
            rate: num(5)?,
            rate_stderr: num(6)?,
            samples: f[7].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

fn fit(a: &FitArgs, output: Option<&Path>) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| CliError::Config(format!("input: cannot read {}: {e}", a.input.display())))?;
    let records = parse_sweep_csv(&text)?;
    let mut names: Vec<&str> = records.iter().map(|r| r.quantizer.as_str()).collect();
    names.dedup();
    let mut fits = serde_json::Map::new();
    for name in names {
        let recs: Vec<SweepRecord> = records.iter().filter(|r| r.quantizer == name).cloned().collect();
        let gains = estimate_gains(&recs, a.decades)?;
        let mut entry = serde_json::json!({ "gains": gains });
        if recs.iter().all(|r| r.rate.is_finite() && r.rate > 1.0) {
            entry["rate_overhead"] = serde_json::to_value(fit_rate_overhead(&recs, a.decades)?).expect("fit serializes");
        }
        fits.insert(name.to_string(), entry);
    }
    let json = serde_json::to_string_pretty(&fits).expect("fits serialize") + "\n";
    emit(&json, output)?;
    Ok(exit::OK)
}

fn compare(cli: &Cli, a: &CompareArgs) -> Result<i32, CliError> {
    let cfg = load_config(cli)?;
    let grid = cfg.p_grid();
    let r = if cfg.strategy.is_precoding() || a.baseline.is_precoding() {
        code_rate(cfg.t)?
    } else {
        1.0
    };
    let codebooks = codebooks_for(&cfg, &grid)?;
    let shared = if codebooks.len() > 1 { None } else { codebooks.first().cloned() };
    let mut rows = Vec::new();
    for (i, &p) in grid.iter().enumerate() {
        let cb_here = codebooks.get(i).or(shared.as_ref()).cloned();
        let spec = quantizer_for(cfg.strategy, cfg.t, r, cb_here.iter().cloned().collect())?;
        let base = if a.baseline.needs_codebook() {
            let cb: Arc<BeamformingCodebook> = cb_here.clone().ok_or_else(|| {
                CliError::Config(format!("baseline: {} needs a codebook; set delta in the config", a.baseline))
            })?;
            quantizer_for(a.baseline, cfg.t, r, vec![cb])?
        } else {
            quantizer_for(a.baseline, cfg.t, r, vec![])?
        };
        let c = paired_compare(&spec, &base, p, cfg.samples, RngStream::new(cfg.seed, 0))?;
        rows.push(serde_json::json!({
            "P_dB": 10.0 * p.log10(),
            "P_linear": p,
            "quantizer": spec.label,
            "baseline": base.label,
            "comparison": c,
        }));
    }
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
    emit(&json, cli.output.as_deref())?;
    Ok(exit::OK)
}

struct Row {
    name: String,
    value: f64,
    provenance: &'static str,
    formula: &'static str,
}

fn bounds(a: &BoundsArgs) -> Result<i32, CliError> {
    let t = a.t;
    if t == 0 {
        return Err(CliError::Config("t: must be at least 1".into()));
    }
    let p = db_to_linear(a.p_db);
    if !(p > 1.0) {
        return Err(CliError::Config("p_db: must be above 0 dB".into()));
    }
    let delta = a.delta.unwrap_or(0.2);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::Config(format!("delta: must lie in (0, 1), got {delta}")));
    }
    let (c0, c0_source) = match a.c0 {
        Some(c) if c > 0.0 => (c, "given"),
        Some(c) => return Err(CliError::Config(format!("c0: must be positive, got {c}"))),
        None => {
            let family: Result<Vec<(f64, usize)>, CliError> = [0.5, 0.4, 0.3]
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    build_covering_codebook(t, d, RngStream::new(0, 1).substream(i as u64), 1000)
                        .map(|cb| (d, cb.len()))
                        .map_err(CliError::from)
                })
                .collect();
            (fit_c0_from_sizes(t, &family?)?, "empirical")
        }
    };
    let c1 = derive_c1();
    let card = a.cardinality.unwrap_or((c0 * delta.powf(-2.0 * t as f64)).ceil().max(1.0) as usize);
    let r = if (1..=4).contains(&t) { code_rate(t)? } else { 1.0 };
    let budget = thm3_rate_budget(t, p);
    let p1 = prop1_bounds(card, t, p);
    let mut rows = vec![
        Row { name: "C1".into(), value: c1.value, provenance: "derived", formula: "min_x Q(x) exp(x^2)" },
        Row { name: "C1 argmin".into(), value: c1.argmin, provenance: "derived", formula: "argmin_x Q(x) exp(x^2)" },
        Row { name: "C0".into(), value: c0, provenance: c0_source, formula: "max_delta |B_delta| delta^(2t)" },
        Row { name: "C2".into(), value: c2_hat(t, delta, c0), provenance: "empirical", formula: "(2 + ceil(C0 delta^(-2t))) t^t / (Gamma(t+1) ln(1/delta))" },
        Row { name: "|B|".into(), value: card as f64, provenance: if a.cardinality.is_some() { "given" } else { "empirical" }, formula: "ceil(C0 delta^(-2t))" },
        Row { name: "vlq SER slack".into(), value: p1.ser_slack, provenance: "derived", formula: "P^-(t+1)" },
        Row { name: "vlq rate bound".into(), value: p1.rate_bound, provenance: "derived", formula: "1 + (t+1)|B| log2(4|B|) ln P / P" },
        Row { name: "converse rate budget".into(), value: budget, provenance: "derived", formula: "t ln P / (13 P)" },
        Row { name: "converse SER floor".into(), value: thm3_converse_lb(p, budget, c1.value), provenance: "derived", formula: "C1 exp(-6 P R) / (3 P)" },
    ];
    match delta_schedule(ScheduleFn::LogP.eval(p), t, c0) {
        Ok(d) => rows.push(Row { name: "schedule delta (ln P)".into(), value: d, provenance: "derived", formula: "phi^-1(ln P), phi(d) = (t+1) C0 d^(-2t) log2(4 C0 d^(-2t))" }),
        Err(e) => eprintln!("note: ln P schedule unavailable at this P: {e}"),
    }
    if (1..=4).contains(&t) {
        let full = ser_full_analytic(t, p, r)?;
        let p4 = prop4_bounds(full, t, delta, p, c0);
        rows.push(Row { name: "code rate".into(), value: r, provenance: "derived", formula: "k / n of the space-time code" });
        rows.push(Row { name: "SER full CSIT".into(), value: full, provenance: "derived", formula: "E[Q(sqrt(2 |h|^2 P / r))]" });
        rows.push(Row { name: "precoding SER bound".into(), value: p4.ser_bound, provenance: "derived", formula: "SER_full (1 + 2 t delta) + delta / P^t" });
        rows.push(Row { name: "precoding rate bound".into(), value: p4.rate_bound, provenance: "empirical", formula: "1 + C2 delta^-t ln(1/delta) / P^t" });
    }
    if (2..=4).contains(&t) {
        let c = thm6_constants(t, r)?;
        rows.push(Row { name: "g open".into(), value: c.g_open, provenance: "derived", formula: "1 / (SER_open P^t) at the largest fitted P" });
        rows.push(Row { name: "g full".into(), value: c.g_full, provenance: "derived", formula: "1 / (SER_full P^t) at the largest fitted P" });
        rows.push(Row { name: "C3".into(), value: c.c3, provenance: "derived", formula: "(1/g_open - 1/g_full) / 2" });
    }
    println!("t = {t}, P = {} dB ({p}), delta = {delta}", a.p_db);
    println!("{:<24} {:>14}  {:<10}  formula", "name", "value", "provenance");
    for row in rows {
        println!("{:<24} {:>14.6e}  {:<10}  {}", row.name, row.value, row.provenance, row.formula);
    }
    Ok(exit::OK)
}

fn selftest(a: &SelftestArgs) -> Result<i32, CliError> {
    let report = crate::selftest::selftest(a.seed, a.codebook.as_deref());
    for c in &report.checks {
        println!(
            "{} {:<26} {:>7.2}s  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
    }
    if report.passed() {
        Ok(exit::OK)
    } else {
        eprintln!("failed invariants: {}", report.failures().join(", "));
        Ok(exit::INVARIANT)
    }
}
