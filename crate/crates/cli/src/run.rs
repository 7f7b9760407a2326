use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use vlqfb_core::bounds::{
    derive_c1, prop1_bounds, prop4_bounds, schedule_grid, thm3_converse_lb, thm6_constants, Thm6Constants,
};
use vlqfb_core::codebook::build_covering_codebook;
use vlqfb_core::estimate::{
    estimate_gains, fit_rate_overhead, records_to_csv, ser_full_analytic, ser_open_analytic, ser_rate_sweep,
    Strategy,
};
use vlqfb_core::{BeamformingCodebook, GainEstimate, LogLogFit, QuantizerSpec, RngStream, SweepRecord};

use crate::config::{DeltaSpec, SimulationConfig};
use crate::CliError;

/// Slack, in standard errors, allowed when a Monte Carlo estimate is
/// checked against a deterministic bound.
pub const CHECK_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodebookInfo {
    /// Grid power the codebook serves; absent when shared by the whole grid.
    pub p: Option<f64>,
    pub delta: f64,
    pub size: usize,
    pub index_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub p: f64,
    pub measured: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constants {
    pub c1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precoding_gains: Option<Thm6Constants>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: SimulationConfig,
    pub code_rate: f64,
    pub codebooks: Vec<CodebookInfo>,
    pub records: Vec<SweepRecord>,
    pub gains: Option<GainEstimate>,
    pub gains_note: Option<String>,
    pub rate_overhead_fit: Option<LogLogFit>,
    pub constants: Constants,
    pub bound_checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
}

impl RunOutcome {
    pub fn failed_checks(&self) -> Vec<&BoundCheck> {
        self.summary.bound_checks.iter().filter(|c| !c.pass).collect()
    }
}

/// `<output>.summary.json` next to the CSV.
pub fn summary_path_for(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}

fn load_codebook(path: &Path, cfg: &SimulationConfig) -> Result<BeamformingCodebook, CliError> {
    if !path.exists() {
        let delta = match cfg.delta {
            Some(DeltaSpec::Fixed(d)) => d.to_string(),
            _ => "<delta>".into(),
        };
        return Err(CliError::Config(format!(
            "codebook_path: {} does not exist; create it with `vlqfb codebook build --t {} --delta {delta} --seed {} --output {}`",
            path.display(),
            cfg.t,
            cfg.seed,
            path.display()
        )));
    }
    let cb = BeamformingCodebook::load(path)?;
    if cb.t() != cfg.t {
        return Err(CliError::Config(format!(
            "codebook_path: codebook has t = {}, config has t = {}",
            cb.t(),
            cfg.t
        )));
    }
    if let Some(DeltaSpec::Fixed(d)) = cfg.delta {
        if (d - cb.delta()).abs() > 1e-12 {
            return Err(CliError::Config(format!(
                "delta: {d} does not match the codebook's {}",
                cb.delta()
            )));
        }
    }
    Ok(cb)
}

/// Codebooks for the run: one shared, or one per grid point under a schedule.
pub fn codebooks_for(cfg: &SimulationConfig, grid: &[f64]) -> Result<Vec<Arc<BeamformingCodebook>>, CliError> {
    if !cfg.strategy.needs_codebook() {
        return Ok(vec![]);
    }
    let stream = RngStream::new(cfg.seed, 1);
    if let Some(path) = &cfg.codebook_path {
        return Ok(vec![Arc::new(load_codebook(path, cfg)?)]);
    }
    match cfg.delta {
        Some(DeltaSpec::Fixed(d)) => Ok(vec![Arc::new(build_covering_codebook(cfg.t, d, stream, cfg.stop_streak)?)]),
        Some(DeltaSpec::Schedule { f, c0 }) => {
            let deltas = schedule_grid(f, grid, cfg.t, c0)?;
            deltas
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    build_covering_codebook(cfg.t, d, stream.substream(i as u64), cfg.stop_streak)
                        .map(Arc::new)
                        .map_err(CliError::from)
                })
                .collect()
        }
        None => Err(CliError::Config(format!("delta: required for {}", cfg.strategy))),
    }
}

pub fn quantizer_for(
    strategy: Strategy,
    t: usize,
    code_rate: f64,
    codebooks: Vec<Arc<BeamformingCodebook>>,
) -> Result<QuantizerSpec, CliError> {
    let spec = match strategy {
        Strategy::BfFull => QuantizerSpec::bf_full(t),
        Strategy::PcFull => QuantizerSpec::pc_full(t, code_rate),
        Strategy::OpenLoop => QuantizerSpec::open_loop(t, code_rate),
        s if codebooks.len() == 1 => {
            let cb = codebooks.into_iter().next().expect("one codebook");
            match s {
                Strategy::BfFlq => QuantizerSpec::bf_flq(cb),
                Strategy::BfVlq => QuantizerSpec::bf_vlq(cb),
                _ => QuantizerSpec::pc_vlq(cb, code_rate),
            }
        }
        s => QuantizerSpec::scheduled(s, code_rate, codebooks)?,
    };
    Ok(spec)
}

fn check(name: &str, p: f64, measured: f64, bound: f64, slack: f64, upper: bool) -> BoundCheck {
    let pass = if upper {
        measured <= bound + slack
    } else {
        measured + slack >= bound
    };
    BoundCheck {
        name: name.into(),
        p,
        measured,
        bound,
        slack,
        pass,
    }
}

/// Deterministic bound checks on the records of one quantizer.
pub fn bound_checks(
    spec: &QuantizerSpec,
    records: &[SweepRecord],
    c1: f64,
) -> Result<Vec<BoundCheck>, CliError> {
    let t = spec.t;
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let ser_slack = CHECK_SIGMAS * r.ser_stderr;
        let rate_slack = CHECK_SIGMAS * r.rate_stderr;
        let excess = (r.rate - 1.0).max(0.0);
        let cb = spec.codebook_at(i);
        match spec.strategy {
            Strategy::BfFull | Strategy::PcFull => {
                let target = ser_full_analytic(t, r.p, spec.code_rate)?;
                out.push(check("quadrature-agreement", r.p, r.ser, target, ser_slack + 1e-6 * target, true));
                out.push(check("quadrature-agreement-lower", r.p, r.ser, target, ser_slack + 1e-6 * target, false));
            }
            Strategy::OpenLoop => {
                let target = ser_open_analytic(t, r.p, spec.code_rate)?;
                out.push(check("quadrature-agreement", r.p, r.ser, target, ser_slack + 1e-6 * target, true));
                out.push(check("quadrature-agreement-lower", r.p, r.ser, target, ser_slack + 1e-6 * target, false));
            }
            Strategy::BfFlq => {
                out.push(check("converse", r.p, r.ser, thm3_converse_lb(r.p, excess, c1), ser_slack, false));
            }
            Strategy::BfVlq => {
                let cb = cb.expect("validated codebook");
                let pb = prop1_bounds(cb.len(), t, r.p);
                out.push(check("vlq-rate-bound", r.p, r.rate, pb.rate_bound, rate_slack, true));
                out.push(check("converse", r.p, r.ser, thm3_converse_lb(r.p, excess, c1), ser_slack, false));
            }
            Strategy::PcVlq => {
                let cb = cb.expect("validated codebook");
                let delta = cb.delta();
                let c0 = cb.len() as f64 * delta.powf(2.0 * t as f64);
                let full = ser_full_analytic(t, r.p, spec.code_rate)?;
                let pb = prop4_bounds(full, t, delta, r.p, c0);
                out.push(check("precoding-ser-bound", r.p, r.ser, pb.ser_bound, ser_slack, true));
                out.push(check("precoding-rate-bound", r.p, r.rate, pb.rate_bound, rate_slack, true));
                let open = ser_open_analytic(t, r.p, spec.code_rate)?;
                out.push(check("open-loop-chain", r.p, r.ser, open - excess, ser_slack, false));
            }
        }
    }
    Ok(out)
}

/// Build or load codebooks, sweep, write the CSV and the JSON summary.
/// Artifacts are written even when a bound check fails; callers inspect
/// [`RunOutcome::failed_checks`].
pub fn run_config(cfg: &SimulationConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let grid = cfg.p_grid();
    let code_rate = if cfg.strategy.is_precoding() {
        vlqfb_core::stbc::code_rate(cfg.t)?
    } else {
        1.0
    };
    let codebooks = codebooks_for(cfg, &grid)?;
    let info: Vec<CodebookInfo> = codebooks
        .iter()
        .enumerate()
        .map(|(i, cb)| CodebookInfo {
            p: (codebooks.len() > 1).then(|| grid[i]),
            delta: cb.delta(),
            size: cb.len(),
            index_bits: cb.index_bits(),
        })
        .collect();
    let spec = quantizer_for(cfg.strategy, cfg.t, code_rate, codebooks)?;
    let records = ser_rate_sweep(
        std::slice::from_ref(&spec),
        &grid,
        cfg.samples,
        RngStream::new(cfg.seed, 0),
        cfg.estimator,
    )?
    .pop()
    .expect("one quantizer");

    let c1 = derive_c1().value;
    let checks = bound_checks(&spec, &records, c1)?;
    let decades = grid_decades(&grid);
    let (gains, gains_note) = match decades {
        Some(d) => match estimate_gains(&records, d) {
            Ok(g) => (Some(g), None),
            Err(e) => (None, Some(e.to_string())),
        },
        None => (None, Some("grid spans less than one decade".into())),
    };
    let rate_overhead_fit = match (cfg.strategy, decades) {
        (Strategy::BfVlq | Strategy::PcVlq, Some(d)) => fit_rate_overhead(&records, d).ok(),
        _ => None,
    };
    let c0_hat = match spec.codebooks.as_slice() {
        [] => None,
        cbs => Some(
            cbs.iter()
                .map(|c| c.len() as f64 * c.delta().powf(2.0 * cfg.t as f64))
                .fold(0.0, f64::max),
        ),
    };
    let thm6 = if cfg.strategy.is_precoding() && (2..=4).contains(&cfg.t) {
        Some(thm6_constants(cfg.t, code_rate)?)
    } else {
        None
    };
    let summary = RunSummary {
        config: cfg.clone(),
        code_rate,
        codebooks: info,
        records,
        gains,
        gains_note,
        rate_overhead_fit,
        constants: Constants { c1, c0_hat, precoding_gains: thm6 },
        bound_checks: checks,
    };

    let csv_path = cfg.output_path.clone();
    let summary_path = summary_path_for(&csv_path);
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&csv_path, records_to_csv(&summary.records, cfg.seed))?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Other(e.to_string()))?;
    std::fs::write(&summary_path, json + "\n")?;
    Ok(RunOutcome {
        csv_path,
        summary_path,
        summary,
    })
}

/// Whole decades spanned by the grid, if at least one.
fn grid_decades(grid: &[f64]) -> Option<u32> {
    let (lo, hi) = (grid.first()?, grid.last()?);
    let d = (hi / lo).log10();
    (d >= 1.0 - 1e-9).then(|| (d + 1e-9).floor() as u32)
}
