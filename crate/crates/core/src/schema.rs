//! Parameter registry shared by the CLI and the session server.
//!
//! Each experiment lists its keys with type, default, range, and whether the
//! key may be changed while a session is running ("hot") or needs a restart.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum SchemaError {
    #[error("unknown experiment `{experiment}`; expected one of {}", valid.join(", "))]
    UnknownExperiment { experiment: String, valid: Vec<String> },
    #[error("{experiment}: missing required parameter `{field}`")]
    MissingField { experiment: String, field: String },
    #[error("{experiment}: unknown parameter `{field}`")]
    UnknownField { experiment: String, field: String },
    #[error("{experiment}: invalid value for `{field}`: {reason}")]
    InvalidValue {
        experiment: String,
        field: String,
        reason: String,
    },
    #[error("{experiment}: `{field}` cannot change while running; restart required")]
    RestartRequired { experiment: String, field: String },
}

impl SchemaError {
    /// The offending key, if the error is about one.
    pub fn field(&self) -> Option<&str> {
        match self {
            SchemaError::UnknownExperiment { .. } => None,
            SchemaError::MissingField { field, .. }
            | SchemaError::UnknownField { field, .. }
            | SchemaError::InvalidValue { field, .. }
            | SchemaError::RestartRequired { field, .. } => Some(field),
        }
    }
}

pub type Result<T> = std::result::Result<T, SchemaError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Real,
    Integer,
    /// `[re, im]` in JSON, `re,im` on the command line.
    Complex,
    Bool,
    Choice(Vec<String>),
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Real => f.write_str("real"),
            ParamKind::Integer => f.write_str("integer"),
            ParamKind::Complex => f.write_str("complex"),
            ParamKind::Bool => f.write_str("bool"),
            ParamKind::Choice(opts) => write!(f, "one of {}", opts.join("|")),
        }
    }
}

/// A validated parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue<'a> {
    Real(f64),
    Integer(i64),
    Complex(Complex64),
    Bool(bool),
    Choice(&'a str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub key: String,
    pub kind: ParamKind,
    pub required: bool,
    pub default: Option<Value>,
    pub hot: bool,
    pub min: Option<f64>,
    /// `min` itself is not allowed.
    #[serde(default)]
    pub exclusive_min: bool,
    pub max: Option<f64>,
    pub doc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSchema {
    pub name: String,
    pub summary: String,
    pub params: Vec<ParamSpec>,
}

/// Validated parameter map; every schema key is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub experiment: String,
    pub values: BTreeMap<String, Value>,
}

struct Builder {
    schema: ExperimentSchema,
}

impl Builder {
    fn new(name: &str, summary: &str) -> Self {
        Builder {
            schema: ExperimentSchema {
                name: name.into(),
                summary: summary.into(),
                params: Vec::new(),
            },
        }
    }

    fn push(mut self, key: &str, kind: ParamKind, default: Option<Value>, hot: bool, range: (Option<f64>, Option<f64>), doc: &str) -> Self {
        self.schema.params.push(ParamSpec {
            key: key.into(),
            kind,
            required: default.is_none(),
            default,
            hot,
            min: range.0,
            exclusive_min: false,
            max: range.1,
            doc: doc.into(),
        });
        self
    }

    fn real(self, key: &str, default: Option<f64>, hot: bool, min: Option<f64>, max: Option<f64>, doc: &str) -> Self {
        self.push(key, ParamKind::Real, default.map(|v| json!(v)), hot, (min, max), doc)
    }

    /// Strictly positive real.
    fn positive(mut self, key: &str, default: Option<f64>, hot: bool, max: Option<f64>, doc: &str) -> Self {
        self = self.real(key, default, hot, Some(0.0), max, doc);
        self.schema.params.last_mut().expect("just pushed").exclusive_min = true;
        self
    }

    fn int(self, key: &str, default: Option<i64>, hot: bool, min: i64, max: Option<i64>, doc: &str) -> Self {
        self.push(
            key,
            ParamKind::Integer,
            default.map(|v| json!(v)),
            hot,
            (Some(min as f64), max.map(|m| m as f64)),
            doc,
        )
    }

    fn complex(self, key: &str, default: Option<(f64, f64)>, hot: bool, doc: &str) -> Self {
        self.push(key, ParamKind::Complex, default.map(|(re, im)| json!([re, im])), hot, (None, None), doc)
    }

    fn flag(self, key: &str, default: bool, hot: bool, doc: &str) -> Self {
        self.push(key, ParamKind::Bool, Some(json!(default)), hot, (None, None), doc)
    }

    fn choice(self, key: &str, options: &[&str], hot: bool, doc: &str) -> Self {
        let kind = ParamKind::Choice(options.iter().map(|s| s.to_string()).collect());
        self.push(key, kind, Some(json!(options[0])), hot, (None, None), doc)
    }

    fn viewport(self, center: (f64, f64), width: f64) -> Self {
        self.complex("center", Some(center), true, "viewport centre")
            .positive("width", Some(width), true, None, "viewport width in the complex plane")
            .int("cols", None, false, 1, Some(16384), "image width in pixels")
            .int("rows", None, false, 1, Some(16384), "image height in pixels")
            .int("tile_size", Some(64), false, 1, Some(4096), "tile edge in pixels")
    }

    fn build(self) -> ExperimentSchema {
        self.schema
    }
}

fn build_registry() -> Vec<ExperimentSchema> {
    vec![
        Builder::new("lorenz", "Lorenz flow integrated with RK4")
            .positive("sigma", Some(10.0), true, None, "Prandtl number")
            .positive("r", Some(28.0), true, None, "Rayleigh ratio")
            .positive("b", Some(8.0 / 3.0), true, None, "geometry factor")
            .real("x0", Some(1.0), false, None, None, "initial x")
            .real("y0", Some(1.0), false, None, None, "initial y")
            .real("z0", Some(1.0), false, None, None, "initial z")
            .positive("dt", Some(0.01), true, Some(0.05), "time step")
            .int("transient", Some(1000), false, 0, None, "steps discarded before sampling")
            .int("samples", None, false, 1, None, "recorded steps")
            .positive("delta0", Some(1e-8), false, None, "initial separation of the twin orbit")
            .build(),
        Builder::new("henon-heiles", "Poincare section of the Henon-Heiles Hamiltonian at x = 0")
            .positive("energy", None, true, Some(1.0 / 6.0), "section energy, below the escape energy 1/6")
            .int("n_seeds", Some(20), false, 1, Some(10_000), "seed orbits per section")
            .int("n_crossings", None, false, 1, None, "crossings recorded per seed")
            .positive("dt", Some(0.01), false, Some(0.1), "RK4 time step")
            .choice("seed_rule", &["line", "grid", "origin"], false, "seed placement on the section")
            .build(),
        Builder::new("fput", "FPUT alpha chain with normal-mode energies")
            .int("n_masses", Some(32), false, 2, Some(4096), "springs N; N - 1 moving masses")
            .real("alpha", Some(0.25), true, None, None, "quadratic nonlinearity")
            .positive("dt", Some(0.05), false, Some(1.0), "leapfrog time step")
            .int("init_mode", Some(1), false, 1, None, "initially excited mode")
            .real("amplitude", Some(1.0), false, None, None, "initial mode amplitude")
            .positive("t_end", None, false, None, "final time")
            .positive("record_dt", Some(1.0), false, None, "recording interval")
            .build(),
        Builder::new("kdv", "Korteweg-de Vries equation, Zabusky-Kruskal scheme")
            .positive("delta", Some(0.022), true, None, "dispersion coefficient")
            .positive("length", Some(2.0), false, None, "periodic domain length")
            .int("n_points", Some(256), false, 5, Some(1 << 20), "grid points")
            .positive("dt", Some(1e-4), false, None, "time step")
            .positive("t_end", None, false, None, "final time")
            .positive("record_dt", Some(0.1), false, None, "recording interval")
            .choice("init", &["cosine", "two-soliton"], false, "initial field")
            .positive("pulse_min", Some(0.5), true, None, "smallest peak counted as a pulse")
            .build(),
        Builder::new("turing", "Activator-inhibitor reaction-diffusion on a periodic grid")
            .real("a", Some(0.25), true, Some(0.0), None, "activator diffusion A")
            .real("b", Some(4.0), true, Some(0.0), None, "inhibitor diffusion B")
            .positive("dt", Some(0.01), false, Some(0.1), "Euler time step")
            .positive("dx", Some(1.0), false, None, "grid spacing")
            .int("nx", Some(64), false, 8, Some(4096), "cells along x")
            .int("ny", Some(64), false, 8, Some(4096), "cells along y")
            .real("noise", Some(0.01), false, Some(0.0), None, "initial noise amplitude on u")
            .int("n_steps", None, false, 0, None, "Euler steps")
            .int("record_every", Some(100), false, 1, None, "steps between snapshots")
            .choice("coupling", &["inhibitor", "verbatim"], false, "field under the B Laplacian")
            .build(),
        Builder::new("logistic", "Logistic map orbit and bifurcation diagram")
            .positive("r", Some(3.5), true, Some(4.0), "control parameter for the orbit")
            .real("x0", Some(0.5), true, Some(0.0), Some(1.0), "initial value")
            .int("transient", Some(500), true, 0, None, "iterates discarded")
            .int("n", Some(200), true, 1, None, "orbit length")
            .positive("r_min", Some(2.4), true, Some(4.0), "bifurcation window start")
            .positive("r_max", Some(4.0), true, Some(4.0), "bifurcation window end")
            .int("n_r", Some(400), false, 2, Some(100_000), "parameter columns")
            .int("samples", Some(200), true, 1, None, "points per column")
            .int("feigenbaum_count", Some(10), false, 3, Some(14), "superstable parameters to locate")
            .build(),
        Builder::new("henon", "Henon map attractor")
            .real("a", Some(1.4), true, None, None, "map parameter a")
            .real("b", Some(0.3), true, None, None, "map parameter b")
            .real("x0", Some(0.0), false, None, None, "initial x")
            .real("y0", Some(0.0), false, None, None, "initial y")
            .int("transient", Some(100), false, 0, None, "iterates discarded")
            .int("n", Some(10_000), false, 1, None, "recorded iterates")
            .build(),
        Builder::new("julia", "Filled Julia set of z^2 + c")
            .complex("c", None, true, "Julia parameter")
            .viewport((0.0, 0.0), 3.0)
            .int("max_iter", None, true, 1, Some(65535), "iteration cap")
            .flag("smooth", false, true, "fractional escape counts")
            .choice("palette", &["classic", "gray"], true, "colour palette")
            .build(),
        Builder::new("mandelbrot", "Mandelbrot set escape times")
            .viewport((-0.5, 0.0), 3.0)
            .int("max_iter", None, true, 1, Some(65535), "iteration cap")
            .flag("smooth", false, true, "fractional escape counts")
            .flag("interior_check", true, true, "skip cardioid and period-2 disk")
            .choice("palette", &["classic", "gray"], true, "colour palette")
            .build(),
        Builder::new("newton", "Newton basins of z^3 - 1")
            .viewport((0.0, 0.0), 4.0)
            .int("max_iter", None, true, 1, Some(65535), "iteration cap")
            .positive("tol", Some(1e-9), true, None, "convergence radius")
            .build(),
        Builder::new("bsd", "Point counts and rank slope for y^2 = x^3 - dx")
            .int("d", None, false, 1, None, "curve parameter")
            .int("x_max", Some(100_000), false, 3, Some(100_000_000), "largest prime")
            .int("p_min", Some(100), true, 2, None, "smallest prime in the fit")
            .choice("convention", &["projective", "affine"], false, "count the point at infinity or not")
            .build(),
    ]
}

/// All experiment schemas in a fixed order.
pub fn registry() -> &'static [ExperimentSchema] {
    static REGISTRY: OnceLock<Vec<ExperimentSchema>> = OnceLock::new();
    REGISTRY.get_or_init(build_registry)
}

pub fn experiment_names() -> Vec<&'static str> {
    registry().iter().map(|s| s.name.as_str()).collect()
}

pub fn lookup(experiment: &str) -> Result<&'static ExperimentSchema> {
    registry()
        .iter()
        .find(|s| s.name == experiment)
        .ok_or_else(|| SchemaError::UnknownExperiment {
            experiment: experiment.into(),
            valid: experiment_names().into_iter().map(String::from).collect(),
        })
}

/// Parses "re,im" (whitespace allowed) or a bare real.
pub fn parse_complex(text: &str) -> Option<Complex64> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re] => re.parse().ok().map(|re| Complex64::new(re, 0.0)),
        [re, im] => Some(Complex64::new(re.parse().ok()?, im.parse().ok()?)),
        _ => None,
    }
}

impl ExperimentSchema {
    pub fn spec(&self, key: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.key == key)
    }

    pub fn required_keys(&self) -> impl Iterator<Item = &str> {
        self.params.iter().filter(|p| p.required).map(|p| p.key.as_str())
    }

    fn invalid(&self, field: &str, reason: impl Into<String>) -> SchemaError {
        SchemaError::InvalidValue {
            experiment: self.name.clone(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Checks one value against its spec and returns it in canonical JSON
    /// form (complex as `[re, im]`).
    pub fn normalize(&self, key: &str, value: &Value) -> Result<Value> {
        let spec = self.spec(key).ok_or_else(|| SchemaError::UnknownField {
            experiment: self.name.clone(),
            field: key.into(),
        })?;
        let out = match &spec.kind {
            ParamKind::Real => {
                let x = value
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.invalid(key, format!("expected a finite real, got {value}")))?;
                json!(x)
            }
            ParamKind::Integer => {
                let n = value
                    .as_i64()
                    .or_else(|| value.as_f64().filter(|x| x.fract() == 0.0 && x.abs() < 9.0e15).map(|x| x as i64))
                    .ok_or_else(|| self.invalid(key, format!("expected an integer, got {value}")))?;
                json!(n)
            }
            ParamKind::Complex => {
                let z = match value {
                    Value::Array(parts) if parts.len() == 2 => match (parts[0].as_f64(), parts[1].as_f64()) {
                        (Some(re), Some(im)) => Some(Complex64::new(re, im)),
                        _ => None,
                    },
                    Value::String(s) => parse_complex(s),
                    Value::Number(n) => n.as_f64().map(|re| Complex64::new(re, 0.0)),
                    _ => None,
                }
                .filter(|z| z.re.is_finite() && z.im.is_finite())
                .ok_or_else(|| self.invalid(key, format!("expected [re, im] or \"re,im\", got {value}")))?;
                json!([z.re, z.im])
            }
            ParamKind::Bool => {
                let b = value
                    .as_bool()
                    .ok_or_else(|| self.invalid(key, format!("expected true or false, got {value}")))?;
                json!(b)
            }
            ParamKind::Choice(options) => {
                let s = value
                    .as_str()
                    .filter(|s| options.iter().any(|o| o == s))
                    .ok_or_else(|| self.invalid(key, format!("expected one of {}, got {value}", options.join("|"))))?;
                json!(s)
            }
        };
        if let Some(x) = out.as_f64() {
            if let Some(min) = spec.min {
                if x < min || (spec.exclusive_min && x == min) {
                    return Err(self.invalid(key, format!("{x} is below the minimum {min}")));
                }
            }
            if let Some(max) = spec.max {
                if x > max {
                    return Err(self.invalid(key, format!("{x} exceeds the maximum {max}")));
                }
            }
        }
        Ok(out)
    }

    /// Validates a full parameter map, filling defaults for absent keys.
    pub fn validate(&self, raw: &Map<String, Value>) -> Result<Params> {
        let mut values = BTreeMap::new();
        for (key, value) in raw {
            values.insert(key.clone(), self.normalize(key, value)?);
        }
        for spec in &self.params {
            if !values.contains_key(&spec.key) {
                match &spec.default {
                    Some(d) => {
                        values.insert(spec.key.clone(), d.clone());
                    }
                    None => {
                        return Err(SchemaError::MissingField {
                            experiment: self.name.clone(),
                            field: spec.key.clone(),
                        })
                    }
                }
            }
        }
        let params = Params {
            experiment: self.name.clone(),
            values,
        };
        self.check_relations(&params)?;
        Ok(params)
    }

    /// Applies a partial update to running parameters. Every key must be
    /// hot; the merged map must still validate. `current` is not modified.
    pub fn apply_patch(&self, current: &Params, patch: &Map<String, Value>) -> Result<Params> {
        let mut next = current.clone();
        for (key, value) in patch {
            let v = self.normalize(key, value)?;
            let spec = self.spec(key).expect("normalize checked the key");
            if !spec.hot {
                return Err(SchemaError::RestartRequired {
                    experiment: self.name.clone(),
                    field: key.clone(),
                });
            }
            next.values.insert(key.clone(), v);
        }
        self.check_relations(&next)?;
        Ok(next)
    }

    fn check_relations(&self, p: &Params) -> Result<()> {
        if self.name == "logistic" && p.real("r_min")? >= p.real("r_max")? {
            return Err(self.invalid("r_min", "must be less than r_max"));
        }
        if self.name == "fput" && p.integer("init_mode")? >= p.integer("n_masses")? {
            return Err(self.invalid("init_mode", "must be below n_masses"));
        }
        Ok(())
    }
}

impl Params {
    fn missing(&self, key: &str) -> SchemaError {
        SchemaError::MissingField {
            experiment: self.experiment.clone(),
            field: key.into(),
        }
    }

    fn wrong(&self, key: &str, want: &str) -> SchemaError {
        SchemaError::InvalidValue {
            experiment: self.experiment.clone(),
            field: key.into(),
            reason: format!("expected {want}"),
        }
    }

    pub fn raw(&self, key: &str) -> Result<&Value> {
        self.values.get(key).ok_or_else(|| self.missing(key))
    }

    pub fn real(&self, key: &str) -> Result<f64> {
        self.raw(key)?.as_f64().ok_or_else(|| self.wrong(key, "a real"))
    }

    pub fn integer(&self, key: &str) -> Result<i64> {
        self.raw(key)?.as_i64().ok_or_else(|| self.wrong(key, "an integer"))
    }

    /// Integer parameter as a count; schema minimums keep these non-negative.
    pub fn count(&self, key: &str) -> Result<usize> {
        usize::try_from(self.integer(key)?).map_err(|_| self.wrong(key, "a non-negative integer"))
    }

    pub fn complex(&self, key: &str) -> Result<Complex64> {
        match self.raw(key)? {
            Value::Array(v) if v.len() == 2 => match (v[0].as_f64(), v[1].as_f64()) {
                (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                _ => Err(self.wrong(key, "[re, im]")),
            },
            _ => Err(self.wrong(key, "[re, im]")),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.raw(key)?.as_bool().ok_or_else(|| self.wrong(key, "a bool"))
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.raw(key)?.as_str().ok_or_else(|| self.wrong(key, "a string"))
    }

    pub fn get(&self, key: &str) -> Result<ParamValue<'_>> {
        match self.raw(key)? {
            Value::Bool(b) => Ok(ParamValue::Bool(*b)),
            Value::String(s) => Ok(ParamValue::Choice(s)),
            Value::Array(_) => self.complex(key).map(ParamValue::Complex),
            Value::Number(n) => Ok(n
                .as_i64()
                .map(ParamValue::Integer)
                .unwrap_or_else(|| ParamValue::Real(n.as_f64().unwrap_or(f64::NAN)))),
            Value::Null | Value::Object(_) => Err(self.wrong(key, "a scalar")),
        }
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.values.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }
}

/// Converts a command-line `key=value` string into JSON according to the
/// key's declared kind.
pub fn parse_assignment(schema: &ExperimentSchema, assignment: &str) -> Result<(String, Value)> {
    let (key, text) = assignment.split_once('=').ok_or_else(|| SchemaError::InvalidValue {
        experiment: schema.name.clone(),
        field: assignment.into(),
        reason: "expected key=value".into(),
    })?;
    let key = key.trim();
    let text = text.trim();
    let spec = schema.spec(key).ok_or_else(|| SchemaError::UnknownField {
        experiment: schema.name.clone(),
        field: key.into(),
    })?;
    let value = match spec.kind {
        ParamKind::Real | ParamKind::Integer => {
            let x: f64 = text.parse().map_err(|_| schema.invalid(key, format!("`{text}` is not a number")))?;
            match text.parse::<i64>() {
                Ok(n) => json!(n),
                Err(_) => json!(x),
            }
        }
        ParamKind::Bool => match text {
            "true" | "1" | "yes" => json!(true),
            "false" | "0" | "no" => json!(false),
            _ => return Err(schema.invalid(key, format!("`{text}` is not a bool"))),
        },
        ParamKind::Complex | ParamKind::Choice(_) => json!(text),
    };
    let value = schema.normalize(key, &value)?;
    Ok((key.into(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(v: Value) -> Map<String, Value> {
        v.as_object().unwrap().clone()
    }

    #[test]
    fn registry_lists_eleven_experiments() {
        assert_eq!(
            experiment_names(),
            vec![
                "lorenz",
                "henon-heiles",
                "fput",
                "kdv",
                "turing",
                "logistic",
                "henon",
                "julia",
                "mandelbrot",
                "newton",
                "bsd"
            ]
        );
    }

    #[test]
    fn defaults_validate_against_their_own_specs() {
        for schema in registry() {
            for spec in &schema.params {
                if let Some(d) = &spec.default {
                    assert_eq!(schema.normalize(&spec.key, d).as_ref(), Ok(d), "{}.{}", schema.name, spec.key);
                }
            }
        }
    }

    #[test]
    fn unknown_experiment_lists_valid_names() {
        let err = lookup("lorentz").unwrap_err();
        assert!(err.to_string().contains("mandelbrot"));
    }

    #[test]
    fn missing_required_field_is_named() {
        let s = lookup("mandelbrot").unwrap();
        let err = s.validate(&obj(json!({"cols": 4, "rows": 4}))).unwrap_err();
        assert_eq!(err.field(), Some("max_iter"));
    }

    #[test]
    fn complex_forms() {
        let s = lookup("julia").unwrap();
        let base = json!({"cols": 8, "rows": 8, "max_iter": 10});
        for c in [json!([-0.8, 0.156]), json!("-0.8,0.156"), json!(" -0.8 , 0.156 ")] {
            let mut m = obj(base.clone());
            m.insert("c".into(), c);
            let p = s.validate(&m).unwrap();
            assert_eq!(p.complex("c").unwrap(), Complex64::new(-0.8, 0.156));
        }
    }

    #[test]
    fn hot_and_cold_patches() {
        let s = lookup("turing").unwrap();
        let p = s.validate(&obj(json!({"n_steps": 10}))).unwrap();
        let err = s.apply_patch(&p, &obj(json!({"nx": 512}))).unwrap_err();
        assert!(matches!(err, SchemaError::RestartRequired { .. }));
        let q = s.apply_patch(&p, &obj(json!({"a": 0.5}))).unwrap();
        assert_eq!(q.real("a").unwrap(), 0.5);
    }

    #[test]
    fn logistic_r_bounds() {
        let s = lookup("logistic").unwrap();
        let p = s.validate(&Map::new()).unwrap();
        assert!(s.apply_patch(&p, &obj(json!({"r": 5}))).is_err());
        assert!(s.apply_patch(&p, &obj(json!({"r": 0}))).is_err());
        assert_eq!(s.apply_patch(&p, &obj(json!({"r": 3.5}))).unwrap().real("r").unwrap(), 3.5);
        assert!(s.apply_patch(&p, &obj(json!({"r_min": 4.0}))).is_err());
    }

    #[test]
    fn zero_diffusion_allowed() {
        let s = lookup("turing").unwrap();
        assert!(s.validate(&obj(json!({"n_steps": 1, "a": 0, "b": 0}))).is_ok());
        assert!(s.validate(&obj(json!({"n_steps": 1, "dt": 0}))).is_err());
    }

    #[test]
    fn assignments_follow_kinds() {
        let s = lookup("julia").unwrap();
        assert_eq!(parse_assignment(s, "c=0.1,-0.2").unwrap().1, json!([0.1, -0.2]));
        assert_eq!(parse_assignment(s, "max_iter=50").unwrap().1, json!(50));
        assert!(parse_assignment(s, "max_iter=5.5").is_err());
        assert_eq!(parse_assignment(s, "smooth=true").unwrap().1, json!(true));
        assert!(parse_assignment(s, "nope=1").is_err());
    }

    #[test]
    fn integers_accept_integral_floats() {
        let s = lookup("bsd").unwrap();
        let p = s.validate(&obj(json!({"d": 5.0}))).unwrap();
        assert_eq!(p.integer("d").unwrap(), 5);
        assert!(s.validate(&obj(json!({"d": 0}))).is_err());
    }
}
