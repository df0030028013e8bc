#![allow(dead_code)]

use blowup_asym::builtins;
use blowup_asym::dsl::ProblemSpec;
use blowup_asym::expansion::{run_expansion, BlowupExpansion};
use blowup_asym::report::{analyze_problem, AnalysisReport, PipelineOptions};
use blowup_asym::series::ThetaSeries;
use blowup_asym::spectral::RootAnalysis;
use blowup_asym::vf::Params;

/// Every bundled problem plus the parameter variants that select a different case.
pub const EXAMPLES: &[(&str, &[(&str, f64)])] = &[
    ("one_dim_cubic", &[]),
    ("ishiwata_yazaki", &[]),
    ("ishiwata_yazaki_i0", &[]),
    ("two_phase", &[]),
    ("andrews1", &[]),
    ("andrews2", &[]),
    ("keyfitz_kranser", &[]),
    ("keyfitz_kranser", &[("eps", 0.0)]),
    ("log_jordan", &[]),
    ("log_jordan", &[("m", 1.0)]),
];

pub struct Loaded {
    pub spec: ProblemSpec,
    pub report: AnalysisReport,
    pub roots: Vec<RootAnalysis>,
}

pub fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn label(name: &str, overrides: &[(&str, f64)]) -> String {
    if overrides.is_empty() {
        return name.to_string();
    }
    let o: Vec<String> = overrides.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{name}[{}]", o.join(","))
}

pub fn load(name: &str, overrides: &[(&str, f64)]) -> Result<Loaded, String> {
    let spec = builtins::load(name, &params(overrides)).map_err(|e| format!("{name}: {e}"))?;
    let opts = PipelineOptions::from_spec(&spec);
    let (report, roots) = analyze_problem(&spec, &opts).map_err(|e| format!("{name}: {e}"))?;
    Ok(Loaded { spec, report, roots })
}

pub fn expand(l: &Loaded, order: usize) -> Result<Vec<BlowupExpansion>, String> {
    l.roots
        .iter()
        .map(|r| run_expansion(&l.spec.field, r, order, &l.spec.derived).map_err(|e| format!("{}: {e}", l.spec.name)))
        .collect()
}

/// The expansion whose balance root is closest to `y0`.
pub fn at_root<'a>(exps: &'a [BlowupExpansion], y0: &[f64]) -> Result<&'a BlowupExpansion, String> {
    let dist = |e: &BlowupExpansion| e.root.y0.iter().zip(y0).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let best = exps
        .iter()
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .ok_or_else(|| "no roots".to_string())?;
    if dist(best).sqrt() > 1e-6 {
        return Err(format!("no root near {y0:?}; closest is {:?}", best.root.y0));
    }
    Ok(best)
}

pub fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    let scale = want.abs().max(1.0);
    if (got - want).abs() <= tol * scale {
        Ok(())
    } else {
        Err(format!("{what}: got {got:.12}, expected {want:.12} (tol {tol:e})"))
    }
}

/// Coefficient of `C1^p theta^gamma` (no logarithm).
pub fn coeff(s: &ThetaSeries, gamma: f64, p: u32) -> f64 {
    let exps: Vec<u32> = if p == 0 { vec![] } else { vec![p] };
    s.coeff(gamma, 0).coefficient(&exps)
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}
