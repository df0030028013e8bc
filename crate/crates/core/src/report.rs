//! End-to-end pipeline and its text, JSON and CSV renderings.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dsl::ProblemSpec;
use crate::error::{Error, ExpansionError};
use crate::expansion::{run_expansion, BlowupExpansion};
use crate::series::{MonomialJson, ThetaSeries, ThetaTerm, GAMMA_TOL};
use crate::spectral::{analyze, DeltaGap, EigenInfo, JordanBlock, NewtonOptions, RootAnalysis};
use crate::validate::{validate_root, validate_root_adaptive, ValidateOptions, ValidationReport};
use crate::vf::{Certificates, Params};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub order: usize,
    pub seeds: Vec<Vec<f64>>,
    pub bind: Params,
    pub newton: NewtonOptions,
    pub tau_hyp: f64,
    /// Only this root (by index in the sorted root list), if set.
    pub root: Option<usize>,
}

impl PipelineOptions {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        let a = &spec.analysis;
        let newton = NewtonOptions { tol: a.tol_newton, ..NewtonOptions::default() };
        Self { order: a.order, seeds: a.seeds.clone(), bind: a.bind.clone(), newton, tau_hyp: a.tau_hyp, root: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemHeader {
    pub name: String,
    pub description: String,
    pub vars: Vec<String>,
    pub alpha: Vec<f64>,
    pub k: f64,
    pub params: Params,
    pub quasi: Vec<String>,
    pub residual: Vec<String>,
}

impl ProblemHeader {
    pub fn new(spec: &ProblemSpec) -> Self {
        let f = &spec.field;
        let show = |e: &crate::vf::Expr| e.display(&spec.vars).to_string();
        Self {
            name: spec.name.clone(),
            description: spec.description.clone(),
            vars: spec.vars.clone(),
            alpha: f.qh.alpha.clone(),
            k: f.qh.k,
            params: spec.params.clone(),
            quasi: f.quasi.iter().map(show).collect(),
            residual: f.residual.iter().map(show).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    Expandable,
    ComplexSpectrum,
    NonHyperbolic,
    NonPositiveGap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSummary {
    pub index: usize,
    #[serde(rename = "Y0")]
    pub y0: Vec<f64>,
    pub balance_residual: f64,
    pub newton_iterations: usize,
    /// Rows of the blow-up power-determining matrix.
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<EigenInfo>,
    pub jordan_blocks: Vec<JordanBlock>,
    pub m_a: usize,
    pub hyperbolic: bool,
    pub has_complex: bool,
    pub min_abs_re: f64,
    pub reconstruction_error: f64,
    pub gap: DeltaGap,
    pub status: RootStatus,
}

impl RootSummary {
    pub fn new(index: usize, r: &RootAnalysis) -> Self {
        let s = &r.spectral;
        let status = if s.has_complex {
            RootStatus::ComplexSpectrum
        } else if !s.hyperbolic {
            RootStatus::NonHyperbolic
        } else if r.gap.delta.is_nan() || r.gap.delta <= 0.0 {
            RootStatus::NonPositiveGap
        } else {
            RootStatus::Expandable
        };
        Self {
            index,
            y0: r.root.y0.clone(),
            balance_residual: r.root.residual_norm,
            newton_iterations: r.root.iterations,
            matrix: (0..s.a.nrows()).map(|i| s.a.row(i).iter().copied().collect()).collect(),
            eigenvalues: s.eigenvalues.clone(),
            jordan_blocks: s.blocks.clone(),
            m_a: s.m_a,
            hyperbolic: s.hyperbolic,
            has_complex: s.has_complex,
            min_abs_re: s.min_abs_re,
            reconstruction_error: s.reconstruction_error,
            gap: r.gap.clone(),
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub problem: ProblemHeader,
    pub certificates: Certificates,
    pub roots: Vec<RootSummary>,
}

impl AnalysisReport {
    pub fn any_expandable(&self) -> bool {
        self.roots.iter().any(|r| r.status == RootStatus::Expandable)
    }
}

/// Certifies the field, solves the balance law and analyzes every root.
pub fn analyze_problem(spec: &ProblemSpec, opts: &PipelineOptions) -> Result<(AnalysisReport, Vec<RootAnalysis>), Error> {
    let certificates = spec.field.certify()?;
    let mut roots = analyze(&spec.field, &opts.seeds, &opts.newton, opts.tau_hyp)?;
    if let Some(i) = opts.root {
        if i >= roots.len() {
            return Err(Error::RootIndex { index: i, found: roots.len() });
        }
        roots = vec![roots.swap_remove(i)];
    }
    let offset = opts.root.unwrap_or(0);
    let summaries = roots.iter().enumerate().map(|(i, r)| RootSummary::new(i + offset, r)).collect();
    Ok((AnalysisReport { problem: ProblemHeader::new(spec), certificates, roots: summaries }, roots))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TermOut {
    /// Exponent of `theta` in `y_i` (prefactor included).
    pub exponent: f64,
    pub logpow: u32,
    pub coeff: Vec<MonomialJson>,
    /// Coefficient under the bindings; absent if a free parameter is unbound.
    pub value: Option<f64>,
    #[serde(rename = "final")]
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentOut {
    pub name: String,
    pub prefactor: f64,
    pub terms: Vec<TermOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootExpansion {
    pub index: usize,
    #[serde(rename = "Y0")]
    pub y0: Vec<f64>,
    pub order: usize,
    pub exact: bool,
    pub delta: f64,
    /// `Y` terms with exponent below this are final.
    pub final_below: f64,
    pub working_trunc: f64,
    pub free_params: Vec<String>,
    pub bindings: Params,
    pub lattice: Vec<f64>,
    /// Components of `y`.
    pub components: Vec<ComponentOut>,
    /// `y_terms[j][i]`: component `i` of `Y_j`, in the rescaled variable.
    pub y_terms: Vec<Vec<Vec<TermOut>>>,
    pub derived: Vec<ComponentOut>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub problem: ProblemHeader,
    pub order: usize,
    pub roots: Vec<RootExpansion>,
}

impl ExpansionReport {
    pub fn first_error(&self) -> Option<&str> {
        self.roots.iter().find_map(|r| r.error.as_deref())
    }

    pub fn any_ok(&self) -> bool {
        self.roots.iter().any(|r| r.error.is_none())
    }
}

fn term_out(t: &ThetaTerm, shift: f64, bindings: &Params, is_final: bool) -> TermOut {
    TermOut {
        exponent: t.gamma + shift,
        logpow: t.m,
        coeff: t.coeff.to_json(),
        value: t.coeff.eval(bindings).ok(),
        is_final,
    }
}

fn series_out(s: &ThetaSeries, shift: f64, bindings: &Params, fin: impl Fn(f64) -> bool) -> Vec<TermOut> {
    s.terms().iter().map(|t| term_out(t, shift, bindings, fin(t.gamma))).collect()
}

pub fn expansion_out(index: usize, e: &BlowupExpansion, bind: &Params) -> RootExpansion {
    let mut bindings = Params::new();
    for p in &e.free_params {
        bindings.insert(p.clone(), bind.get(p).copied().unwrap_or(0.0));
    }
    let components = (0..e.n())
        .map(|i| ComponentOut {
            name: e.names[i].clone(),
            prefactor: e.prefactors[i],
            terms: series_out(&e.sum[i], e.prefactors[i], &bindings, |g| e.is_final(g)),
        })
        .collect();
    let y_terms = e
        .y_terms
        .iter()
        .map(|yj| yj.iter().map(|s| series_out(s, 0.0, &bindings, |g| e.is_final(g))).collect())
        .collect();
    let derived = e
        .derived
        .iter()
        .map(|(name, s)| ComponentOut { name: name.clone(), prefactor: 0.0, terms: series_out(s, 0.0, &bindings, |_| true) })
        .collect();
    RootExpansion {
        index,
        y0: e.root.y0.clone(),
        order: e.order,
        exact: e.exact,
        delta: e.gap.delta,
        final_below: e.final_below,
        working_trunc: e.working_trunc,
        free_params: e.free_params.clone(),
        bindings,
        lattice: e.lattice.clone(),
        components,
        y_terms,
        derived,
        error: None,
    }
}

fn failed_root(index: usize, r: &RootAnalysis, order: usize, err: &ExpansionError) -> RootExpansion {
    RootExpansion {
        index,
        y0: r.root.y0.clone(),
        order,
        exact: false,
        delta: r.gap.delta,
        final_below: f64::NAN,
        working_trunc: f64::NAN,
        free_params: Vec::new(),
        bindings: Params::new(),
        lattice: Vec::new(),
        components: Vec::new(),
        y_terms: Vec::new(),
        derived: Vec::new(),
        error: Some(err.to_string()),
    }
}

/// Expands every analyzed root; failures are recorded per root.
pub fn expand_problem(
    spec: &ProblemSpec,
    analysis: &AnalysisReport,
    roots: &[RootAnalysis],
    opts: &PipelineOptions,
) -> (ExpansionReport, Vec<Result<BlowupExpansion, ExpansionError>>) {
    let mut outs = Vec::new();
    let mut raw = Vec::new();
    for (summary, r) in analysis.roots.iter().zip(roots) {
        let res = run_expansion(&spec.field, r, opts.order, &spec.derived);
        outs.push(match &res {
            Ok(e) => expansion_out(summary.index, e, &opts.bind),
            Err(err) => failed_root(summary.index, r, opts.order, err),
        });
        raw.push(res);
    }
    (ExpansionReport { problem: ProblemHeader::new(spec), order: opts.order, roots: outs }, raw)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootValidation {
    pub index: usize,
    #[serde(rename = "Y0")]
    pub y0: Vec<f64>,
    /// One report per attempted order; the last decides.
    pub attempts: Vec<ValidationReport>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub problem: ProblemHeader,
    pub roots: Vec<RootValidation>,
    pub pass: bool,
}

/// Validates every expandable root. With `fixed_order` the given order is
/// used; otherwise orders `1..=max_order` are tried until conclusive.
pub fn validate_problem(
    spec: &ProblemSpec,
    analysis: &AnalysisReport,
    roots: &[RootAnalysis],
    fixed_order: Option<usize>,
    max_order: usize,
    bind: &Params,
    opts: &ValidateOptions,
) -> ValidationSummary {
    let mut out = Vec::new();
    for (summary, r) in analysis.roots.iter().zip(roots) {
        if summary.status != RootStatus::Expandable {
            continue;
        }
        let res = match fixed_order {
            Some(n) => validate_root(&spec.field, r, n, bind, opts).map(|v| vec![v]),
            None => validate_root_adaptive(&spec.field, r, max_order, bind, opts),
        };
        out.push(match res {
            Ok(attempts) => {
                let last = attempts.last().expect("at least one attempt");
                let pass = last.pass.all && last.pass.conclusive;
                RootValidation { index: summary.index, y0: summary.y0.clone(), pass, attempts, error: None }
            }
            Err(e) => RootValidation {
                index: summary.index,
                y0: summary.y0.clone(),
                attempts: Vec::new(),
                pass: false,
                error: Some(e.to_string()),
            },
        });
    }
    let pass = !out.is_empty() && out.iter().all(|r| r.pass);
    ValidationSummary { problem: ProblemHeader::new(spec), roots: out, pass }
}

/// Writes `x` as a small-denominator fraction when it is one.
pub fn fmt_exponent(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    for d in 1..=12i64 {
        let n = (x * d as f64).round();
        if (x * d as f64 - n).abs() < 1e-9 {
            let n = n as i64;
            return if d == 1 { format!("{n}") } else { format!("{n}/{d}") };
        }
    }
    format!("{x:.6}")
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-4..1e6).contains(&a) {
        let s = format!("{x:.10}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{x:.9e}")
    }
}

fn fmt_coeff(t: &TermOut) -> String {
    if let Some(v) = t.value {
        if t.coeff.iter().all(|m| m.params.is_empty()) {
            return fmt_num(v);
        }
    }
    let mut s = String::new();
    for (i, m) in t.coeff.iter().enumerate() {
        let mut mono = String::new();
        for (p, e) in m.params.iter().enumerate() {
            if *e == 0 {
                continue;
            }
            if !mono.is_empty() {
                mono.push('*');
            }
            mono.push_str(&crate::series::param_name(p));
            if *e > 1 {
                let _ = write!(mono, "^{e}");
            }
        }
        let c = m.c;
        let body = if mono.is_empty() {
            fmt_num(c.abs())
        } else if (c.abs() - 1.0).abs() < 1e-15 {
            mono
        } else {
            format!("{}*{}", fmt_num(c.abs()), mono)
        };
        if i == 0 {
            if c < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if c < 0.0 { " - " } else { " + " });
        }
        s.push_str(&body);
    }
    if t.coeff.len() > 1 {
        format!("({s})")
    } else {
        s
    }
}

fn fmt_term(t: &TermOut) -> String {
    let mut s = fmt_coeff(t);
    if t.exponent.abs() > GAMMA_TOL {
        let _ = write!(s, " theta^({})", fmt_exponent(t.exponent));
    }
    if t.logpow > 0 {
        s.push_str(" ln(theta)");
        if t.logpow > 1 {
            let _ = write!(s, "^{}", t.logpow);
        }
    }
    s
}

fn fmt_sum(terms: &[TermOut]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    terms.iter().map(fmt_term).collect::<Vec<_>>().join(" + ").replace("+ -", "- ")
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_num(*x)).collect();
    format!("({})", parts.join(", "))
}

pub fn render_analysis(r: &AnalysisReport) -> String {
    let mut s = String::new();
    let p = &r.problem;
    let _ = writeln!(s, "problem {}: {}", p.name, p.description);
    let alpha: Vec<String> = p.alpha.iter().map(|a| fmt_exponent(*a)).collect();
    let _ = writeln!(s, "type alpha = ({}), k = {}", alpha.join(", "), fmt_exponent(p.k));
    for (i, v) in p.vars.iter().enumerate() {
        let _ = writeln!(s, "  {v}' = [{}] + [{}]", p.quasi[i], p.residual[i]);
    }
    let _ = writeln!(
        s,
        "certificates: {} samples, scaling error {:.2e}",
        r.certificates.samples, r.certificates.max_scaling_error
    );
    for root in &r.roots {
        let _ = writeln!(s, "\nroot {}: Y0 = {}  (|G| = {:.1e})", root.index, fmt_vec(&root.y0), root.balance_residual);
        for row in &root.matrix {
            let _ = writeln!(s, "  A | {}", row.iter().map(|x| format!("{:>14}", fmt_num(*x))).collect::<String>());
        }
        let eig: Vec<String> = root
            .eigenvalues
            .iter()
            .map(|e| {
                let base = if e.im != 0.0 { format!("{} {:+}i", fmt_num(e.re), e.im) } else { fmt_num(e.re) };
                if e.block_sizes.iter().any(|b| *b > 1) {
                    format!("{base} (Jordan {:?})", e.block_sizes)
                } else if e.alg_mult > 1 {
                    format!("{base} (x{})", e.alg_mult)
                } else {
                    base
                }
            })
            .collect();
        let _ = writeln!(s, "  eigenvalues: {}", eig.join(", "));
        let gamma: Vec<String> = root.gap.gamma_res.iter().map(|g| fmt_exponent(*g)).collect();
        let _ = writeln!(
            s,
            "  m_A = {}, hyperbolic = {}, gamma_res = ({}), delta = {}",
            root.m_a,
            root.hyperbolic,
            gamma.join(", "),
            fmt_exponent(root.gap.delta)
        );
        let _ = writeln!(s, "  status: {}", status_text(root.status));
    }
    s
}

fn status_text(s: RootStatus) -> &'static str {
    match s {
        RootStatus::Expandable => "expandable",
        RootStatus::ComplexSpectrum => "complex spectrum (expansion unavailable)",
        RootStatus::NonHyperbolic => "non-hyperbolic (expansion unavailable)",
        RootStatus::NonPositiveGap => "no positive gap (expansion unavailable)",
    }
}

pub fn render_expansion(r: &ExpansionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem {} (order N = {})", r.problem.name, r.order);
    for root in &r.roots {
        let _ = writeln!(s, "\nroot {}: Y0 = {}", root.index, fmt_vec(&root.y0));
        if let Some(e) = &root.error {
            let _ = writeln!(s, "  expansion unavailable: {e}");
            continue;
        }
        if root.exact {
            let _ = writeln!(s, "  exact: Y0 solves the system, all Y_j vanish");
        } else {
            let _ = writeln!(
                s,
                "  delta = {}, final below theta^({}) in Y; later terms are provisional",
                fmt_exponent(root.delta),
                fmt_exponent(root.final_below)
            );
        }
        if !root.free_params.is_empty() {
            let b: Vec<String> = root.bindings.iter().map(|(k, v)| format!("{k} = {}", fmt_num(*v))).collect();
            let _ = writeln!(s, "  free parameters: {} (bound for values: {})", root.free_params.join(", "), b.join(", "));
        }
        for c in root.components.iter().chain(&root.derived) {
            let fin: Vec<TermOut> = c.terms.iter().filter(|t| t.is_final).cloned().collect();
            let prov: Vec<TermOut> = c.terms.iter().filter(|t| !t.is_final).cloned().collect();
            let _ = writeln!(s, "  {}(t) ~ {}", c.name, fmt_sum(&fin));
            if !prov.is_empty() {
                let _ = writeln!(s, "      provisional: {}", fmt_sum(&prov));
            }
        }
    }
    s
}

pub fn render_validation(r: &ValidationSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "problem {}: {}", r.problem.name, if r.pass { "PASS" } else { "FAIL" });
    for root in &r.roots {
        let _ = writeln!(s, "\nroot {}: Y0 = {}  {}", root.index, fmt_vec(&root.y0), if root.pass { "pass" } else { "FAIL" });
        if let Some(e) = &root.error {
            let _ = writeln!(s, "  error: {e}");
        }
        for a in &root.attempts {
            let _ = writeln!(s, "  order N = {}", a.order);
            let deg: Vec<String> = a.residual_deg.iter().map(|d| fmt_exponent(*d)).collect();
            let exp: Vec<String> = a.residual_expected.iter().map(|d| fmt_exponent(*d)).collect();
            let _ = writeln!(
                s,
                "    residual: deg = ({}), required >= ({}), unmatched <= {:.1e}: {}",
                deg.join(", "),
                exp.join(", "),
                a.residual.max_unmatched.iter().fold(0.0f64, |m, x| m.max(*x)),
                ok(a.pass.residual)
            );
            for f in &a.slope_fits {
                let name = &r.problem.vars[f.component];
                let detail = match f.measured {
                    _ if f.at_floor => format!("error at floor (max {:.1e})", f.max_error),
                    Some(m) => format!(
                        "slope {m:.4} vs predicted {} over theta in [{:.1e}, {:.1e}] ({} points)",
                        fmt_exponent(f.predicted),
                        f.window.0,
                        f.window.1,
                        f.points_used
                    ),
                    None => format!("inconclusive: {} points above floor (max {:.1e})", f.points_used, f.max_error),
                };
                let verdict = if f.conclusive { ok(f.pass) } else { "inconclusive" };
                let _ = writeln!(s, "    {name}: {detail}: {verdict}");
            }
            match (&a.s_time, &a.s_time_note) {
                (Some(st), _) => {
                    let _ = writeln!(
                        s,
                        "    s-time decay rate {:.4} vs {:.4} (diagnostic): {}",
                        st.decay_rate_measured,
                        st.min_stable_rate,
                        ok(st.pass)
                    );
                }
                (None, Some(note)) => {
                    let _ = writeln!(s, "    s-time diagnostic: {note}");
                }
                _ => {}
            }
        }
    }
    s
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

pub fn expansion_csv(r: &ExpansionReport) -> String {
    let mut s = String::from("root,component,exponent,logpow,coefficient,value,final\n");
    for root in &r.roots {
        for c in root.components.iter().chain(&root.derived) {
            for t in &c.terms {
                let value = t.value.map(|v| format!("{v:e}")).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{:e},{},\"{}\",{},{}",
                    root.index,
                    c.name,
                    t.exponent,
                    t.logpow,
                    fmt_coeff(t),
                    value,
                    t.is_final
                );
            }
        }
    }
    s
}

pub fn validation_csv(r: &ValidationSummary) -> String {
    let mut s = String::from("root,order,theta,component,y_expansion,y_numeric,abs_error\n");
    for root in &r.roots {
        for a in &root.attempts {
            for p in &a.samples {
                let _ = writeln!(
                    s,
                    "{},{},{:e},{},{:e},{:e},{:e}",
                    root.index, a.order, p.theta, r.problem.vars[p.component], p.y_expansion, p.y_numeric, p.abs_error
                );
            }
        }
    }
    s
}
