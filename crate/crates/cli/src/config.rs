//! Flat key/value experiment configs with `[section]` headers.
//!
//! Format: `#` starts a comment, `key = value` pairs live under the most
//! recent `[section]` header. Three sections are recognized: `[map]`,
//! `[experiment]`, and `[params]`. Unknown sections and unknown keys are
//! rejected so typos cannot silently fall back to defaults.
//!
//! `serialize` emits a canonical form (fixed section and key order); parsing
//! the canonical form and serializing again is byte-identical.

use meclab_core::{AnosovSpec, ManeDASpec, MapSpec};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Parse-stage failure: malformed syntax, unknown keys, bad literals.
/// Maps to exit code 2.
#[derive(Debug)]
pub struct ParseError(pub String);

/// Semantic failure: values that parse but violate an invariant
/// (non-positive counts, determinant != +-1, ...). Maps to exit code 3.
#[derive(Debug)]
pub struct ValidationError(pub String);

pub const EXPERIMENTS: [(&str, &str); 10] = [
    ("lyapunov", "Lyapunov spectrum of one orbit (QR cocycle accumulator)"),
    ("hyp-times", "co-norm series, hyperbolic times, Pliss density, expansion time"),
    ("periodic", "periodic-point census by period with multipliers and residuals"),
    ("skeleton", "skeleton candidate from the index-1 saddles of a periodic pool"),
    ("measures", "Birkhoff fingerprints of random seeds, clustered into measures"),
    ("basin", "basin map over a jittered seed grid with coverage statistics"),
    ("correlation", "correlation series C(n) of two characters with decay fit"),
    ("tail", "expansion-time tail on an unstable disk of a skeleton saddle"),
    ("clt", "batch-means CLT variance of a character along one orbit"),
    ("sweep", "physical-measure fingerprints along a perturbation-parameter grid"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// `[map]` keys in canonical order
    pub map: BTreeMap<String, String>,
    /// `[experiment]` keys
    pub experiment: BTreeMap<String, String>,
    /// `[params]` keys, schema owned by the named experiment
    pub params: BTreeMap<String, String>,
}

const MAP_KEYS: [&str; 4] = ["variant", "matrix", "bump_radius", "strength"];
const EXPERIMENT_KEYS: [&str; 4] = ["name", "rng_seed", "workers", "out"];

pub fn parse(text: &str) -> Result<Config, ParseError> {
    let mut config = Config {
        map: BTreeMap::new(),
        experiment: BTreeMap::new(),
        params: BTreeMap::new(),
    };
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(ParseError(format!("line {lineno}: unterminated section header")));
            };
            section = match name {
                "map" => Some("map"),
                "experiment" => Some("experiment"),
                "params" => Some("params"),
                other => {
                    return Err(ParseError(format!(
                        "line {lineno}: unknown section [{other}]; expected [map], [experiment] or [params]"
                    )))
                }
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError(format!("line {lineno}: expected `key = value`, got `{line}`")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ParseError(format!("line {lineno}: empty key or value")));
        }
        let target = match section {
            Some("map") => {
                if !MAP_KEYS.contains(&key) {
                    return Err(ParseError(format!(
                        "line {lineno}: unknown key `{key}` in [map]; known keys: {}",
                        MAP_KEYS.join(", ")
                    )));
                }
                &mut config.map
            }
            Some("experiment") => {
                if !EXPERIMENT_KEYS.contains(&key) {
                    return Err(ParseError(format!(
                        "line {lineno}: unknown key `{key}` in [experiment]; known keys: {}",
                        EXPERIMENT_KEYS.join(", ")
                    )));
                }
                &mut config.experiment
            }
            Some("params") => &mut config.params,
            _ => {
                return Err(ParseError(format!(
                    "line {lineno}: `{key}` appears before any section header"
                )))
            }
        };
        if target.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ParseError(format!("line {lineno}: duplicate key `{key}`")));
        }
    }
    if !config.experiment.contains_key("name") {
        return Err(ParseError("missing required key `name` in [experiment]".into()));
    }
    let name = &config.experiment["name"];
    if !EXPERIMENTS.iter().any(|(n, _)| n == name) {
        let names: Vec<&str> = EXPERIMENTS.iter().map(|(n, _)| *n).collect();
        return Err(ParseError(format!(
            "unknown experiment `{name}`; valid names: {}",
            names.join(", ")
        )));
    }
    Ok(config)
}

/// Canonical form: fixed section order, keys sorted within each section,
/// single spaces around `=`. Idempotent under parse/serialize round trips.
pub fn serialize(config: &Config) -> String {
    let mut out = String::new();
    for (section, keys) in [
        ("map", &config.map),
        ("experiment", &config.experiment),
        ("params", &config.params),
    ] {
        if keys.is_empty() {
            continue;
        }
        let _ = writeln!(out, "[{section}]");
        for (k, v) in keys {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out
}

impl Config {
    pub fn name(&self) -> &str {
        &self.experiment["name"]
    }

    pub fn rng_seed(&self) -> Result<u64, ParseError> {
        match self.experiment.get("rng_seed") {
            None => Ok(0),
            Some(s) => s
                .parse()
                .map_err(|_| ParseError(format!("rng_seed `{s}` is not a 64-bit unsigned integer"))),
        }
    }

    pub fn workers(&self) -> Result<Option<usize>, ParseError> {
        match self.experiment.get("workers") {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| ParseError(format!("workers `{s}` is not a positive integer"))),
        }
    }

    /// Build and validate the map described by `[map]`.
    pub fn build_map(&self) -> Result<MapSpec, CliError> {
        let variant = self.map.get("variant").map(String::as_str).unwrap_or("anosov");
        let base = match self.map.get("matrix") {
            None => AnosovSpec::default_example(),
            Some(text) => {
                let rows = parse_matrix(text)?;
                AnosovSpec::new(rows).map_err(|e| {
                    CliError::Validation(ValidationError(format!("invalid [map] matrix: {e}")))
                })?
            }
        };
        match variant {
            "anosov" => {
                for key in ["bump_radius", "strength"] {
                    if self.map.contains_key(key) {
                        return Err(CliError::Validation(ValidationError(format!(
                            "[map] key `{key}` requires variant = mane"
                        ))));
                    }
                }
                Ok(MapSpec::Anosov(base))
            }
            "mane" => {
                let rho = self.parse_map_f64("bump_radius")?.unwrap_or(0.05);
                let spec = match self.parse_map_f64("strength")? {
                    None => ManeDASpec::new(base, rho),
                    Some(delta) => ManeDASpec::with_strength(base, rho, delta),
                }
                .map_err(|e| CliError::Validation(ValidationError(format!("invalid Mane spec: {e}"))))?;
                Ok(MapSpec::Mane(spec))
            }
            other => Err(CliError::Parse(ParseError(format!(
                "unknown [map] variant `{other}`; expected anosov or mane"
            )))),
        }
    }

    fn parse_map_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| {
                CliError::Parse(ParseError(format!("[map] {key} `{s}` is not a number")))
            }),
        }
    }
}

fn parse_matrix(text: &str) -> Result<[[i64; 3]; 3], CliError> {
    let rows: Vec<&str> = text.split(';').map(str::trim).collect();
    if rows.len() != 3 {
        return Err(CliError::Parse(ParseError(format!(
            "matrix needs 3 rows separated by `;`, got {}",
            rows.len()
        ))));
    }
    let mut m = [[0i64; 3]; 3];
    for (i, row) in rows.iter().enumerate() {
        let entries: Vec<&str> = row.split_whitespace().collect();
        if entries.len() != 3 {
            return Err(CliError::Parse(ParseError(format!(
                "matrix row {} needs 3 integers, got `{row}`",
                i + 1
            ))));
        }
        for (j, e) in entries.iter().enumerate() {
            m[i][j] = e.parse().map_err(|_| {
                CliError::Parse(ParseError(format!("matrix entry `{e}` is not an integer")))
            })?;
        }
    }
    Ok(m)
}

/// Failures bubbled to `main` for exit-code selection.
#[derive(Debug)]
pub enum CliError {
    Parse(ParseError),
    Validation(ValidationError),
    Io(std::io::Error),
    Core(meclab_core::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(e) => write!(f, "config error: {}", e.0),
            CliError::Validation(e) => write!(f, "validation error: {}", e.0),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Core(e) => write!(f, "validation error: {e}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<meclab_core::Error> for CliError {
    fn from(e: meclab_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Validation(e)
    }
}
