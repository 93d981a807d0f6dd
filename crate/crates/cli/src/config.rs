//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use walklab_core::bpre::OffspringFamily;
use walklab_core::functionals::{ConstraintKind, ConstraintSpec, Family, TheoremId};
use walklab_core::replicas::{digest, MAX_REPLICAS};
use walklab_core::{Budget, IncrementModel, StableParams};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate key `{key}` at lines {first} and {second}")]
    Duplicate { key: String, first: usize, second: usize },
    #[error("line {line}: `{key}`: {msg}")]
    Field { line: usize, key: String, msg: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("{0}")]
    Invalid(String),
}

const KEYS: &[&str] = &[
    "experiment",
    "model",
    "alpha",
    "beta",
    "c",
    "variance",
    "crossover",
    "scale",
    "offspring",
    "constraint",
    "family",
    "delta",
    "log_power",
    "K",
    "theta",
    "x",
    "n_grid",
    "replicas",
    "target_rel_stderr",
    "pilot",
    "max_replicas",
    "n_max",
    "J",
    "seed",
    "output",
    "table_step",
    "table_max",
    "table_replicas",
    "x_grid",
    "checkpoints",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Density,
    Renewal,
    Theorem(TheoremId),
    BpreSurvival,
    BpreUnconstrained,
    HplusCheck,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "density" => ExperimentKind::Density,
            "renewal" => ExperimentKind::Renewal,
            "bpre_survival" => ExperimentKind::BpreSurvival,
            "bpre_unconstrained" => ExperimentKind::BpreUnconstrained,
            "hplus_check" => ExperimentKind::HplusCheck,
            other => ExperimentKind::Theorem(TheoremId::parse(other)?),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Density => "density",
            ExperimentKind::Renewal => "renewal",
            ExperimentKind::Theorem(t) => t.name(),
            ExperimentKind::BpreSurvival => "bpre_survival",
            ExperimentKind::BpreUnconstrained => "bpre_unconstrained",
            ExperimentKind::HplusCheck => "hplus_check",
        }
    }

    /// The CLI subcommand that runs this experiment.
    pub fn subcommand(self) -> &'static str {
        match self {
            ExperimentKind::Density => "density",
            ExperimentKind::Renewal => "renewal",
            ExperimentKind::Theorem(_) => "theorem",
            _ => "bpre",
        }
    }

    fn uses_tables(self) -> bool {
        matches!(self, ExperimentKind::Renewal | ExperimentKind::Theorem(_) | ExperimentKind::HplusCheck)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Gaussian { variance: f64 },
    ExactStable { alpha: f64, beta: f64, c: f64 },
    TailEquivalent { alpha: f64, beta: f64, c: f64, crossover: f64 },
    Logistic { scale: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> walklab_core::Result<IncrementModel<f64>> {
        match *self {
            ModelSpec::Gaussian { variance } => IncrementModel::gaussian(variance),
            ModelSpec::ExactStable { alpha, beta, c } => Ok(IncrementModel::exact_stable(StableParams::new(alpha, beta, c)?)),
            ModelSpec::TailEquivalent { alpha, beta, c, crossover } => {
                IncrementModel::tail_equivalent(StableParams::new(alpha, beta, c)?, crossover)
            }
            ModelSpec::Logistic { scale } => IncrementModel::logistic(scale),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TableSpec {
    pub step: f64,
    pub max: f64,
    pub replicas: u64,
    pub n_max: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSpec,
    pub offspring: OffspringFamily,
    pub constraint: Option<ConstraintSpec>,
    pub k: f64,
    pub theta: f64,
    pub x: f64,
    pub n_grid: Vec<u64>,
    pub budget: Budget,
    pub j: u64,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub table: TableSpec,
    pub x_grid: Vec<f64>,
    pub checkpoints: Vec<u64>,
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| ConfigError::Field { line, key: key.into(), msg: format!("cannot parse `{v}`: {e}") }),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|p| {
                    p.trim().parse::<T>().map_err(|e| ConfigError::Field {
                        line,
                        key: key.into(),
                        msg: format!("cannot parse `{}`: {e}", p.trim()),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn field_error(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        match self.raw(key) {
            Some((_, line)) => ConfigError::Field { line, key: key.into(), msg: msg.into() },
            None => ConfigError::Invalid(format!("`{key}`: {}", msg.into())),
        }
    }
}

fn tokenize(text: &str) -> Result<Entries, ConfigError> {
    let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{content}`") });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line, msg: "empty key".into() });
        }
        if !KEYS.contains(&k) {
            return Err(ConfigError::UnknownKey { line, key: k.into() });
        }
        if let Some((_, first)) = map.get(k) {
            return Err(ConfigError::Duplicate { key: k.into(), first: *first, second: line });
        }
        map.insert(k.into(), (v.into(), line));
    }
    Ok(Entries { map })
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let e = tokenize(text)?;
    let exp_name: String = e.required("experiment")?;
    let experiment = ExperimentKind::parse(&exp_name)
        .ok_or_else(|| e.field_error("experiment", format!("unknown experiment `{exp_name}`")))?;

    let model_name: String = e.or("model", "gaussian".to_string())?;
    let model = match model_name.as_str() {
        "gaussian" => ModelSpec::Gaussian { variance: e.or("variance", 1.0)? },
        "exact_stable" => ModelSpec::ExactStable {
            alpha: e.required("alpha")?,
            beta: e.or("beta", 0.0)?,
            c: e.or("c", 1.0)?,
        },
        "tail_equivalent" => ModelSpec::TailEquivalent {
            alpha: e.required("alpha")?,
            beta: e.or("beta", 0.0)?,
            c: e.or("c", 1.0)?,
            crossover: e.or("crossover", 5.0)?,
        },
        "logistic" => ModelSpec::Logistic { scale: e.or("scale", 1.0)? },
        other => return Err(e.field_error("model", format!("unknown model `{other}`"))),
    };
    let built = model.build().map_err(|err| {
        let key = if e.raw("alpha").is_some() { "alpha" } else { "model" };
        e.field_error(key, err.to_string())
    })?;
    let alpha = built.attraction().alpha();

    let offspring = match e.or("offspring", "geometric".to_string())?.as_str() {
        "geometric" => OffspringFamily::GeometricLink,
        "poisson" => OffspringFamily::PoissonLink,
        other => return Err(e.field_error("offspring", format!("unknown offspring family `{other}`"))),
    };

    let k: f64 = e.or("K", 0.0)?;
    let default_kind = match experiment {
        ExperimentKind::Theorem(TheoremId::Theorem1) | ExperimentKind::Theorem(TheoremId::IntegVW) => {
            Some(ConstraintKind::UpperPositive)
        }
        ExperimentKind::Theorem(TheoremId::Theorem2)
        | ExperimentKind::Theorem(TheoremId::Theorem3)
        | ExperimentKind::Theorem(TheoremId::CorollaryVatVat) => Some(ConstraintKind::UpperNegative),
        _ => None,
    };
    let constraint = match default_kind {
        None => {
            if e.raw("constraint").is_some() {
                return Err(e.field_error("constraint", format!("not used by `{}`", experiment.name())));
            }
            None
        }
        Some(kind) => {
            let name: String = e.or("constraint", if kind == ConstraintKind::UpperPositive { "phi" } else { "psi" }.into())?;
            let given = match name.as_str() {
                "phi" => ConstraintKind::UpperPositive,
                "psi" => ConstraintKind::UpperNegative,
                other => return Err(e.field_error("constraint", format!("unknown constraint `{other}`"))),
            };
            if given != kind {
                return Err(e.field_error("constraint", format!("`{}` needs a {kind:?} constraint", experiment.name())));
            }
            let family = match e.or("family", "power".to_string())?.as_str() {
                "power" => Family::Power(e.or("delta", ConstraintSpec::default_delta(alpha))?),
                "log_power" => Family::LogPower(e.or("log_power", 2.0)?),
                other => return Err(e.field_error("family", format!("unknown family `{other}`"))),
            };
            Some(ConstraintSpec::new(kind, family, alpha).map_err(|err| {
                let key = if e.raw("delta").is_some() { "delta" } else { "family" };
                e.field_error(key, err.to_string())
            })?)
        }
    };

    let theta: f64 = e.or("theta", 1.0)?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(e.field_error("theta", "must be > 0"));
    }
    let x: f64 = e.or("x", 0.0)?;
    if x > 0.0 {
        return Err(e.field_error("x", "must be <= 0"));
    }

    let default_grid = match experiment {
        ExperimentKind::HplusCheck => vec![1, 64],
        _ => vec![64, 128, 256, 512],
    };
    let n_grid: Vec<u64> = e.list("n_grid")?.unwrap_or(default_grid);
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] == 0 {
        return Err(e.field_error("n_grid", "must be positive and strictly increasing"));
    }

    let budget = match e.raw("replicas") {
        Some(("auto", _)) => {
            if !matches!(experiment, ExperimentKind::Theorem(_)) {
                return Err(e.field_error("replicas", "auto budgets apply to theorem experiments only"));
            }
            let target: f64 = e.or("target_rel_stderr", 0.05)?;
            if !(target > 0.0) {
                return Err(e.field_error("target_rel_stderr", "must be > 0"));
            }
            let pilot: u64 = e.or("pilot", 200_000)?;
            if pilot < 2 {
                return Err(e.field_error("pilot", "must be >= 2"));
            }
            Budget::Auto { target_rel_stderr: target, pilot, max_replicas: e.or("max_replicas", MAX_REPLICAS)? }
        }
        _ => {
            for key in ["target_rel_stderr", "pilot", "max_replicas"] {
                if e.raw(key).is_some() {
                    return Err(e.field_error(key, "only valid with `replicas = auto`"));
                }
            }
            let r: u64 = e.or("replicas", 100_000)?;
            if r == 0 {
                return Err(e.field_error("replicas", "must be >= 1"));
            }
            Budget::Fixed(r)
        }
    };

    let j: u64 = e.or("J", 16)?;
    if experiment == ExperimentKind::BpreSurvival {
        if let Some(&n) = n_grid.iter().find(|n| **n <= 2 * j) {
            return Err(e.field_error("J", format!("n = {n} must exceed 2J = {}", 2 * j)));
        }
    }

    let table = TableSpec {
        step: e.or("table_step", 0.125)?,
        max: e.or("table_max", 40.0)?,
        replicas: e.or("table_replicas", 200_000)?,
        n_max: e.or("n_max", 1_000_000)?,
    };
    if experiment.uses_tables() {
        if !(table.step > 0.0 && table.max >= 4.0 * table.step) {
            return Err(e.field_error("table_step", "need table_step > 0 and table_max >= 4 table_step"));
        }
        if table.replicas == 0 {
            return Err(e.field_error("table_replicas", "must be >= 1"));
        }
        if table.n_max < 10 {
            return Err(e.field_error("n_max", "must be >= 10"));
        }
    }

    let x_grid: Vec<f64> = e.list("x_grid")?.unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    let checkpoints: Vec<u64> = e.list("checkpoints")?.unwrap_or_else(|| vec![1, 32, 128, 256]);
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(e.field_error("checkpoints", "must be strictly increasing"));
    }

    Ok(ExperimentConfig {
        experiment,
        model,
        offspring,
        constraint,
        k,
        theta,
        x,
        n_grid,
        budget,
        j,
        seed: e.or("seed", 1)?,
        output: e.parse::<String>("output")?.map(PathBuf::from),
        table,
        x_grid,
        checkpoints,
    })
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Canonical text of the configuration with every default filled in.
    /// Parsing it yields the same configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        match self.model {
            ModelSpec::Gaussian { variance } => {
                kv("model", "gaussian".into());
                kv("variance", variance.to_string());
            }
            ModelSpec::ExactStable { alpha, beta, c } => {
                kv("model", "exact_stable".into());
                kv("alpha", alpha.to_string());
                kv("beta", beta.to_string());
                kv("c", c.to_string());
            }
            ModelSpec::TailEquivalent { alpha, beta, c, crossover } => {
                kv("model", "tail_equivalent".into());
                kv("alpha", alpha.to_string());
                kv("beta", beta.to_string());
                kv("c", c.to_string());
                kv("crossover", crossover.to_string());
            }
            ModelSpec::Logistic { scale } => {
                kv("model", "logistic".into());
                kv("scale", scale.to_string());
            }
        }
        kv(
            "offspring",
            match self.offspring {
                OffspringFamily::GeometricLink => "geometric".into(),
                OffspringFamily::PoissonLink => "poisson".into(),
            },
        );
        if let Some(c) = &self.constraint {
            kv(
                "constraint",
                match c.kind() {
                    ConstraintKind::UpperPositive => "phi".into(),
                    _ => "psi".into(),
                },
            );
            match c.family() {
                Family::Power(d) => {
                    kv("family", "power".into());
                    kv("delta", d.to_string());
                }
                Family::LogPower(p) => {
                    kv("family", "log_power".into());
                    kv("log_power", p.to_string());
                }
                Family::Constant(_) => {}
            }
        }
        kv("K", self.k.to_string());
        kv("theta", self.theta.to_string());
        kv("x", self.x.to_string());
        kv("n_grid", join(&self.n_grid));
        match self.budget {
            Budget::Fixed(r) => kv("replicas", r.to_string()),
            Budget::Auto { target_rel_stderr, pilot, max_replicas } => {
                kv("replicas", "auto".into());
                kv("target_rel_stderr", target_rel_stderr.to_string());
                kv("pilot", pilot.to_string());
                kv("max_replicas", max_replicas.to_string());
            }
        }
        kv("J", self.j.to_string());
        kv("seed", self.seed.to_string());
        if let Some(o) = &self.output {
            kv("output", o.display().to_string());
        }
        kv("table_step", self.table.step.to_string());
        kv("table_max", self.table.max.to_string());
        kv("table_replicas", self.table.replicas.to_string());
        kv("n_max", self.table.n_max.to_string());
        kv("x_grid", join(&self.x_grid));
        kv("checkpoints", join(&self.checkpoints));
        s
    }

    /// Digest of the canonical text; the output path does not take part.
    pub fn digest(&self) -> String {
        let text: String = self.echo().lines().filter(|l| !l.starts_with("output ")).map(|l| format!("{l}\n")).collect();
        digest(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_theorem1_config_fills_defaults() {
        let c = parse_config("experiment = theorem1\n").unwrap();
        assert_eq!(c.experiment, ExperimentKind::Theorem(TheoremId::Theorem1));
        assert_eq!(c.model, ModelSpec::Gaussian { variance: 1.0 });
        assert_eq!(c.constraint.unwrap().describe(), "phi=n^0.3");
        assert_eq!(c.n_grid, vec![64, 128, 256, 512]);
        let again = parse_config(&c.echo()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn admissible_set_rule_is_named() {
        let err = parse_config("experiment = renewal\nmodel = exact_stable\nalpha = 1\nbeta = 0.3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 3: `alpha`"), "{msg}");
        assert!(msg.contains("beta = 0"), "{msg}");
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let err = parse_config("experiment = theorem1\n# note\ntheta = 1\ntheta = 2\n").unwrap_err();
        assert_eq!(err, ConfigError::Duplicate { key: "theta".into(), first: 3, second: 4 });
        assert_eq!(err.to_string(), "duplicate key `theta` at lines 3 and 4");
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse_config("experiment = theorem1\nfoo = 1\n"), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(parse_config("theta = 1\n"), Err(ConfigError::Missing(_))));
        assert!(matches!(parse_config("experiment = theorem1\ndelta = 0.6\n"), Err(ConfigError::Field { line: 2, .. })));
        assert!(parse_config("experiment = theorem2\nconstraint = phi\n").is_err());
        assert!(parse_config("experiment = theorem4\nconstraint = psi\n").is_err());
        assert!(parse_config("experiment = bpre_survival\nn_grid = 16,64\nJ = 16\n").is_err());
        assert!(parse_config("experiment = theorem1\npilot = 10\n").is_err());
        assert!(matches!(parse_config("experiment theorem1\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn digest_ignores_output_and_comments() {
        let a = parse_config("experiment = maxsmall\n# c\n").unwrap();
        let b = parse_config("experiment = maxsmall\noutput = /tmp/x\n").unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = parse_config("experiment = maxsmall\nseed = 2\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}
