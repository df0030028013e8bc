//! Problem documents (TOML).
//!
//! ```toml
//! [problem]
//! name = "keyfitz_kranser"
//! vars = ["u", "v"]
//! alpha = [1, 2]
//! k = 1
//!
//! [field]
//! u = "u^2 - v"
//! v = "(1/3)*u^3 - u"
//!
//! [analysis]
//! order = 3
//! seeds = [[1.2, 0.3], [4.7, 17.7]]
//! bind = { C1 = 0.5 }
//! ```
//!
//! `[field.quasi]` and `[field.residual]` give an explicit split and take
//! precedence over the plain component keys. `k` and `alpha` entries may be
//! numbers or constant expressions over `[params]`.

use toml::{Table, Value};

use super::parser::{parse_constant, parse_expr};
use crate::error::ParseError;
use crate::vf::{Expr, Params, QhType, VectorField};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_TOL_NEWTON: f64 = 1e-12;
pub const DEFAULT_TAU_HYP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub order: usize,
    pub seeds: Vec<Vec<f64>>,
    /// Values for the free parameters `C1, C2, ...`.
    pub bind: Params,
    pub tol_newton: f64,
    pub tau_hyp: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            seeds: Vec::new(),
            bind: Params::new(),
            tol_newton: DEFAULT_TOL_NEWTON,
            tau_hyp: DEFAULT_TAU_HYP,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub description: String,
    pub vars: Vec<String>,
    pub field: VectorField,
    pub params: Params,
    pub analysis: AnalysisOptions,
    /// Auxiliary quantities expressed in the state variables, expanded alongside `y`.
    pub derived: Vec<(String, Expr)>,
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec, ParseError> {
    parse_problem_with(text, &Params::new())
}

/// Parses a document, letting `overrides` replace entries of `[params]`
/// before any expression is folded.
pub fn parse_problem_with(text: &str, overrides: &Params) -> Result<ProblemSpec, ParseError> {
    let doc: Table = text.parse().map_err(|e: toml::de::Error| ParseError::Document(e.to_string()))?;
    let problem = table(&doc, "problem")?;

    let mut params = Params::new();
    if let Some(p) = doc.get("params") {
        let p = p.as_table().ok_or_else(|| ParseError::Document("[params] must be a table".into()))?;
        for (key, v) in p {
            params.insert(key.clone(), number(v, &format!("params.{key}"))?);
        }
    }
    for (key, v) in overrides {
        if !params.contains_key(key) {
            return Err(ParseError::Document(format!("unknown parameter `{key}` in override")));
        }
        params.insert(key.clone(), *v);
    }

    let name = string(problem, "name", "problem")?.to_string();
    let description = problem.get("description").and_then(Value::as_str).unwrap_or("").to_string();
    let vars: Vec<String> = array(problem, "vars", "problem")?
        .iter()
        .map(|v| v.as_str().map(str::to_string))
        .collect::<Option<_>>()
        .ok_or_else(|| ParseError::Document("problem.vars must be strings".into()))?;
    for (i, v) in vars.iter().enumerate() {
        if vars[..i].contains(v) {
            return Err(ParseError::Document(format!("duplicate variable `{v}`")));
        }
        if params.contains_key(v) {
            return Err(ParseError::Document(format!("`{v}` is both a variable and a parameter")));
        }
    }
    let alpha: Vec<f64> = array(problem, "alpha", "problem")?
        .iter()
        .enumerate()
        .map(|(i, v)| constant(v, &params, &format!("problem.alpha[{i}]")))
        .collect::<Result<_, _>>()?;
    if alpha.len() != vars.len() {
        return Err(ParseError::DimensionMismatch(format!(
            "alpha has {} entries but there are {} variables",
            alpha.len(),
            vars.len()
        )));
    }
    let k = constant(
        problem.get("k").ok_or_else(|| ParseError::MissingSection("problem.k".into()))?,
        &params,
        "problem.k",
    )?;
    let qh = QhType::new(alpha, k)?;

    let field_sec = table(&doc, "field")?;
    let field = match (field_sec.get("quasi"), field_sec.get("residual")) {
        (Some(q), r) => {
            let q = q.as_table().ok_or_else(|| ParseError::Document("[field.quasi] must be a table".into()))?;
            let quasi = components(q, "field.quasi", &vars, &params, true)?;
            let residual = match r {
                Some(r) => {
                    let r = r
                        .as_table()
                        .ok_or_else(|| ParseError::Document("[field.residual] must be a table".into()))?;
                    components(r, "field.residual", &vars, &params, false)?
                }
                None => vec![Expr::zero(); vars.len()],
            };
            VectorField::new(vars.clone(), qh, quasi, residual, params.clone())?
        }
        (None, Some(_)) => return Err(ParseError::MissingSection("field.quasi".into())),
        (None, None) => {
            let exprs = components(field_sec, "field", &vars, &params, true)?;
            VectorField::from_monomial_sums(vars.clone(), qh, exprs, params.clone())?
        }
    };

    let mut analysis = AnalysisOptions::default();
    if let Some(a) = doc.get("analysis") {
        let a = a.as_table().ok_or_else(|| ParseError::Document("[analysis] must be a table".into()))?;
        if let Some(v) = a.get("order") {
            analysis.order = v
                .as_integer()
                .filter(|o| *o >= 1)
                .ok_or_else(|| ParseError::Document("analysis.order must be a positive integer".into()))?
                as usize;
        }
        if let Some(v) = a.get("seeds") {
            let seeds = v.as_array().ok_or_else(|| ParseError::Document("analysis.seeds must be an array".into()))?;
            for (i, s) in seeds.iter().enumerate() {
                let ctx = format!("analysis.seeds[{i}]");
                let s = s.as_array().ok_or_else(|| ParseError::Document(format!("{ctx} must be an array")))?;
                let point: Vec<f64> = s.iter().map(|x| number(x, &ctx)).collect::<Result<_, _>>()?;
                if point.len() != vars.len() {
                    return Err(ParseError::DimensionMismatch(format!(
                        "{ctx} has {} entries, expected {}",
                        point.len(),
                        vars.len()
                    )));
                }
                analysis.seeds.push(point);
            }
        }
        if let Some(v) = a.get("bind") {
            let b = v.as_table().ok_or_else(|| ParseError::Document("analysis.bind must be a table".into()))?;
            for (key, x) in b {
                analysis.bind.insert(key.clone(), number(x, &format!("analysis.bind.{key}"))?);
            }
        }
        if let Some(v) = a.get("tol_newton") {
            analysis.tol_newton = number(v, "analysis.tol_newton")?;
        }
        if let Some(v) = a.get("tau_hyp") {
            analysis.tau_hyp = number(v, "analysis.tau_hyp")?;
        }
    }

    let mut derived = Vec::new();
    if let Some(d) = doc.get("derived") {
        let d = d.as_table().ok_or_else(|| ParseError::Document("[derived] must be a table".into()))?;
        for (key, v) in d {
            let ctx = format!("derived.{key}");
            let text = v.as_str().ok_or_else(|| ParseError::Document(format!("{ctx} must be a string")))?;
            derived.push((key.clone(), in_context(parse_expr(text, &vars, &params), &ctx)?));
        }
    }

    Ok(ProblemSpec { name, description, vars, field, params, analysis, derived })
}

fn components(
    sec: &Table,
    ctx: &str,
    vars: &[String],
    params: &Params,
    required: bool,
) -> Result<Vec<Expr>, ParseError> {
    for key in sec.keys() {
        if !vars.contains(key) && !(ctx == "field" && (key == "quasi" || key == "residual")) {
            return Err(ParseError::Document(format!("{ctx}.{key} does not name a variable")));
        }
    }
    vars.iter()
        .map(|v| {
            let key = format!("{ctx}.{v}");
            match sec.get(v) {
                Some(val) => {
                    let text = val
                        .as_str()
                        .ok_or_else(|| ParseError::Document(format!("{key} must be a string")))?;
                    in_context(parse_expr(text, vars, params), &key)
                }
                None if required => Err(ParseError::MissingSection(key)),
                None => Ok(Expr::zero()),
            }
        })
        .collect()
}

fn in_context<T>(r: Result<T, ParseError>, ctx: &str) -> Result<T, ParseError> {
    r.map_err(|e| ParseError::InExpression { context: ctx.to_string(), source: Box::new(e) })
}

fn table<'a>(doc: &'a Table, key: &str) -> Result<&'a Table, ParseError> {
    doc.get(key)
        .ok_or_else(|| ParseError::MissingSection(key.to_string()))?
        .as_table()
        .ok_or_else(|| ParseError::Document(format!("[{key}] must be a table")))
}

fn string<'a>(t: &'a Table, key: &str, ctx: &str) -> Result<&'a str, ParseError> {
    t.get(key)
        .ok_or_else(|| ParseError::MissingSection(format!("{ctx}.{key}")))?
        .as_str()
        .ok_or_else(|| ParseError::Document(format!("{ctx}.{key} must be a string")))
}

fn array<'a>(t: &'a Table, key: &str, ctx: &str) -> Result<&'a Vec<Value>, ParseError> {
    t.get(key)
        .ok_or_else(|| ParseError::MissingSection(format!("{ctx}.{key}")))?
        .as_array()
        .ok_or_else(|| ParseError::Document(format!("{ctx}.{key} must be an array")))
}

fn number(v: &Value, ctx: &str) -> Result<f64, ParseError> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(x) => Ok(*x),
        _ => Err(ParseError::Document(format!("{ctx} must be a number"))),
    }
}

fn constant(v: &Value, params: &Params, ctx: &str) -> Result<f64, ParseError> {
    match v {
        Value::String(s) => in_context(parse_constant(s, params), ctx),
        _ => number(v, ctx),
    }
}
