//! Example problems bundled with the library.

use crate::dsl::{parse_problem_with, ProblemSpec};
use crate::error::Error;
use crate::vf::Params;

const SOURCES: [(&str, &str); 8] = [
    ("one_dim_cubic", include_str!("../problems/one_dim_cubic.toml")),
    ("ishiwata_yazaki", include_str!("../problems/ishiwata_yazaki.toml")),
    ("ishiwata_yazaki_i0", include_str!("../problems/ishiwata_yazaki_i0.toml")),
    ("two_phase", include_str!("../problems/two_phase.toml")),
    ("andrews1", include_str!("../problems/andrews1.toml")),
    ("andrews2", include_str!("../problems/andrews2.toml")),
    ("keyfitz_kranser", include_str!("../problems/keyfitz_kranser.toml")),
    ("log_jordan", include_str!("../problems/log_jordan.toml")),
];

pub fn names() -> Vec<&'static str> {
    SOURCES.iter().map(|(n, _)| *n).collect()
}

pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str, overrides: &Params) -> Result<ProblemSpec, Error> {
    let text = source(name).ok_or_else(|| Error::UnknownBuiltin(name.to_string()))?;
    Ok(parse_problem_with(text, overrides)?)
}
