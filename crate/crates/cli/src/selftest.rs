//! Reduced-scale invariant suite. Every check is a pass/fail property that
//! must hold for any seed.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use vlqfb_core::bounds::{delta_schedule, derive_c1, phi, prop1_bounds, thm6_constants};
use vlqfb_core::channel::{random_unit_vector, sample_channel};
use vlqfb_core::codebook::{build_covering_codebook, verify_covering};
use vlqfb_core::estimate::{paired_compare, pathwise_outcome, ser_rate_sweep, Estimator};
use vlqfb_core::numerics::{integrate_gamma_weighted, q_function, QuadratureSpec};
use vlqfb_core::quantizer::{flq_code, kraft_check, vlq_code};
use vlqfb_core::stbc::ostbc_generator;
use vlqfb_core::{BeamformingCodebook, Complex64, QuantizerSpec, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

type Check = Result<String, String>;

fn q_sandwich() -> Check {
    let c1 = derive_c1().value;
    for i in -800..=800 {
        let x = f64::from(i) * 0.01;
        let q = q_function(x);
        if q < c1 * (-x * x).exp() * (1.0 - 1e-12) {
            return Err(format!("lower bound fails at x = {x}"));
        }
        let upper = if x >= 0.0 { 0.5 * (-x * x / 2.0).exp() } else { 1.0 };
        if q > upper * (1.0 + 1e-15) {
            return Err(format!("upper bound fails at x = {x}"));
        }
    }
    Ok(format!("C1 = {c1:.6}, 1601 grid points"))
}

fn quadrature_normalization() -> Check {
    let spec = QuadratureSpec::default();
    for t in 1..=6 {
        let v = integrate_gamma_weighted(|_| 1.0, t, &spec).map_err(|e| e.to_string())?;
        if (v - 1.0).abs() > 1e-10 {
            return Err(format!("t = {t}: mass {v}"));
        }
    }
    let closed = 0.5 * (1.0 - (10.0f64 / 11.0).sqrt());
    let v = vlqfb_core::estimate::ser_full_analytic(1, 10.0, 1.0).map_err(|e| e.to_string())?;
    if (v - closed).abs() > 1e-10 * closed {
        return Err(format!("single-antenna SER {v} vs closed form {closed}"));
    }
    Ok("unit mass for t = 1..6, closed form at t = 1".into())
}

fn kraft() -> Check {
    for n in 1..=64 {
        let (pf, sum) = kraft_check(&vlq_code(n));
        if !pf || sum > 1.0 {
            return Err(format!("variable-length code, |B| = {n}: prefix-free {pf}, sum {sum}"));
        }
        if n >= 2 {
            let code = flq_code(n).map_err(|e| e.to_string())?;
            let (pf, sum) = kraft_check(&code);
            if !pf || sum > 1.0 {
                return Err(format!("fixed-length code, |B| = {n}: prefix-free {pf}, sum {sum}"));
            }
        }
    }
    Ok("|B| = 1..64".into())
}

fn covering_certificate(seed: u64) -> Result<(Arc<BeamformingCodebook>, String), String> {
    let cb = build_covering_codebook(2, 0.3, RngStream::new(seed, 1), 500).map_err(|e| e.to_string())?;
    let report = verify_covering(&cb, 0.3, 20_000, 50, RngStream::new(seed, 2));
    if !report.pass {
        return Err(format!("worst correlation² {} below {}", report.worst_correlation_sq, 0.7));
    }
    let detail = format!("t = 2, delta = 0.3, |B| = {}, worst {:.4}", cb.len(), report.worst_correlation_sq);
    Ok((Arc::new(cb), detail))
}

fn covering_invariant(path: &Path, seed: u64) -> Check {
    let cb = BeamformingCodebook::load_unchecked(path).map_err(|e| e.to_string())?;
    let violations = cb.invariant_violations();
    if !violations.is_empty() {
        return Err(violations.join("; "));
    }
    let report = verify_covering(&cb, cb.delta(), 20_000, 50, RngStream::new(seed, 3));
    if !report.pass {
        return Err(format!(
            "worst correlation² {} below {}",
            report.worst_correlation_sq,
            1.0 - cb.delta()
        ));
    }
    Ok(format!("{}: |B| = {}, worst {:.4}", path.display(), cb.len(), report.worst_correlation_sq))
}

fn ostbc_orthogonality(seed: u64) -> Check {
    let mut rng = RngStream::new(seed, 4).rng();
    for t in 2..=4 {
        let code = ostbc_generator(t).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let s: Vec<Complex64> = (0..code.k).map(|_| rng.complex_gaussian()).collect();
            let d = code.orthogonality_defect(&s);
            if d > 1e-12 {
                return Err(format!("t = {t}: defect {d:e}"));
            }
        }
    }
    Ok("t = 2..4, 200 symbol vectors each".into())
}

fn pathwise_dominance(cb: &Arc<BeamformingCodebook>, seed: u64) -> Check {
    let pairs = [
        (QuantizerSpec::bf_flq(cb.clone()), QuantizerSpec::bf_full(2)),
        (QuantizerSpec::bf_vlq(cb.clone()), QuantizerSpec::bf_full(2)),
        (QuantizerSpec::pc_vlq(cb.clone(), 1.0), QuantizerSpec::pc_full(2, 1.0)),
        (QuantizerSpec::open_loop(2, 1.0), QuantizerSpec::pc_full(2, 1.0)),
    ];
    for (q, full) in &pairs {
        for &p in &[10.0, 1000.0] {
            let c = paired_compare(q, full, p, 20_000, RngStream::new(seed, 5)).map_err(|e| e.to_string())?;
            if c.fraction_a_dominates < 1.0 {
                return Err(format!(
                    "{} at P = {p}: dominated on {} of draws, worst gap {:e}",
                    q.label, c.fraction_a_dominates, c.max_violation
                ));
            }
        }
    }
    Ok("4 quantizers, P = 10 and 1000, 20000 common draws".into())
}

fn bound_consistency(cb: &Arc<BeamformingCodebook>, seed: u64) -> Check {
    let c1 = derive_c1().value;
    if !(c1 > 0.0 && c1 <= 0.5) {
        return Err(format!("C1 = {c1} outside (0, 1/2]"));
    }
    let f = phi(0.1, 2, 0.5);
    let d = delta_schedule(f, 2, 0.5).map_err(|e| e.to_string())?;
    if (d - 0.1).abs() > 1e-9 {
        return Err(format!("schedule round trip gave {d}"));
    }
    let c = thm6_constants(2, 1.0).map_err(|e| e.to_string())?;
    if !(c.c3 > 0.0) {
        return Err(format!("C3 = {}", c.c3));
    }
    let grid = [100.0, 1000.0];
    let recs = ser_rate_sweep(
        &[QuantizerSpec::bf_vlq(cb.clone())],
        &grid,
        20_000,
        RngStream::new(seed, 6),
        Estimator::Pathwise,
    )
    .map_err(|e| e.to_string())?;
    for r in &recs[0] {
        let bound = prop1_bounds(cb.len(), 2, r.p).rate_bound;
        if r.rate > bound + 4.0 * r.rate_stderr {
            return Err(format!("rate {} above {bound} at P = {}", r.rate, r.p));
        }
    }
    Ok(format!("C1 = {c1:.4}, C3 = {:.4}, rate bound at P = 100, 1000", c.c3))
}

fn phase_invariance(cb: &Arc<BeamformingCodebook>, seed: u64) -> Check {
    let mut rng = RngStream::new(seed, 7).rng();
    let specs = [
        QuantizerSpec::bf_full(2),
        QuantizerSpec::bf_flq(cb.clone()),
        QuantizerSpec::bf_vlq(cb.clone()),
        QuantizerSpec::pc_vlq(cb.clone(), 1.0),
        QuantizerSpec::open_loop(2, 1.0),
    ];
    for _ in 0..2000 {
        let h = sample_channel(&mut rng, 2);
        let phase = 2.0 * std::f64::consts::PI * rng.uniform();
        let g = h.rotate_phase(phase);
        for s in &specs {
            let a = pathwise_outcome(s, s.codebook_at(0), h.entries(), 50.0);
            let b = pathwise_outcome(s, s.codebook_at(0), g.entries(), 50.0);
            if (a.snr - b.snr).abs() > 1e-9 * a.snr.max(1e-300) || a.bits != b.bits {
                return Err(format!("{}: {:?} vs {:?}", s.label, a, b));
            }
        }
    }
    // the covering quality of a direction does not depend on its phase
    let u = random_unit_vector(&mut rng, 2);
    let rot: Vec<Complex64> = u.iter().map(|z| z * Complex64::from_polar(1.0, 1.234)).collect();
    if (cb.max_correlation_sq(&u) - cb.max_correlation_sq(&rot)).abs() > 1e-12 {
        return Err("max correlation changes under a global phase".into());
    }
    Ok("2000 channels, 5 quantizers".into())
}

fn timed(name: &str, f: impl FnOnce() -> Check) -> CheckResult {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CheckResult {
        name: name.into(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Run every check. With `codebook`, the file is loaded without validation
/// and checked for unit norms, distinct entries and covering.
pub fn selftest(seed: u64, codebook: Option<&Path>) -> SelftestReport {
    let mut checks = vec![
        timed("q-function-sandwich", q_sandwich),
        timed("quadrature-normalization", quadrature_normalization),
        timed("kraft", kraft),
    ];
    let mut built = None;
    checks.push(timed("covering-certificate", || {
        covering_certificate(seed).map(|(cb, d)| {
            built = Some(cb);
            d
        })
    }));
    if let Some(path) = codebook {
        checks.push(timed("covering-invariant", || covering_invariant(path, seed)));
    }
    checks.push(timed("ostbc-orthogonality", || ostbc_orthogonality(seed)));
    match built {
        Some(cb) => {
            checks.push(timed("pathwise-dominance", || pathwise_dominance(&cb, seed)));
            checks.push(timed("bound-consistency", || bound_consistency(&cb, seed)));
            checks.push(timed("phase-invariance", || phase_invariance(&cb, seed)));
        }
        None => {
            for name in ["pathwise-dominance", "bound-consistency", "phase-invariance"] {
                checks.push(CheckResult {
                    name: name.into(),
                    pass: false,
                    detail: "no certified codebook to test with".into(),
                    seconds: 0.0,
                });
            }
        }
    }
    SelftestReport { seed, checks }
}
