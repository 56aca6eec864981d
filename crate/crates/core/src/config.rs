//! Flat `key = value` configuration with dotted sections.
//!
//! ```text
//! seed = 42
//! [integrand]
//! family = additive
//! d = 16
//! decay_r = 0.5
//! [run]
//! methods = mc, mlmc
//! ```
//!
//! `[section]` headers prefix the keys that follow; `section.key = value`
//! works anywhere. `#` starts a comment. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrand::{geometric_coeffs, make_additive, make_product, AnalyticIntegrand};
use crate::markov::{Lindley, Zeta, LINDLEY_A, LINDLEY_B, TIME_VARYING_AMPLITUDE, TIME_VARYING_PERIOD};

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "integrand.family",
    "integrand.d",
    "integrand.coeffs",
    "integrand.decay_r",
    "chain.preset",
    "chain.a",
    "chain.b",
    "chain.time_varying",
    "chain.gamma",
    "chain.d",
    "run.methods",
    "run.d_grid",
    "run.eps",
    "run.reps",
    "run.n",
    "run.per_rep",
    "run.fix_v",
    "run.v",
    "run.out",
    "anova.method",
    "anova.pairs",
    "decay.i",
    "decay.n",
];

/// Parsed key/value pairs, keys fully qualified.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(line, format!("line {}: unterminated section header", lineno + 1)))?
                    .trim();
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", lineno + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
            let v = v.trim().trim_matches('"').to_string();
            entries.insert(key, v);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::config(key, format!("cannot parse `{s}`"))),
        }
    }

    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => parse_list(s).map(Some).ok_or_else(|| Error::config(key, format!("cannot parse list `{s}`"))),
        }
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> Option<Vec<T>> {
    s.split([',', ' '])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Additive,
    Product,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "additive" => Ok(Family::Additive),
            "product" => Ok(Family::Product),
            _ => Err(Error::config("integrand.family", format!("expected additive|product, got `{s}`"))),
        }
    }
}

/// Which analytic integrand to build at a given dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandSpec {
    pub family: Family,
    pub d: Option<usize>,
    pub coeffs: Option<Vec<f64>>,
    pub decay_r: f64,
}

impl Default for IntegrandSpec {
    fn default() -> Self {
        Self {
            family: Family::Additive,
            d: None,
            coeffs: None,
            decay_r: 0.5,
        }
    }
}

impl IntegrandSpec {
    /// Inline form `family[:d=N][:r=R][:coeffs=c1,c2,...]`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let family: Family = parts.next().unwrap_or("").trim().parse()?;
        let mut spec = IntegrandSpec {
            family,
            ..Default::default()
        };
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::config("integrand", format!("expected key=value, got `{p}`")))?;
            match k.trim() {
                "d" => spec.d = Some(v.parse().map_err(|_| Error::config("integrand.d", v))?),
                "r" | "decay_r" => spec.decay_r = v.parse().map_err(|_| Error::config("integrand.decay_r", v))?,
                "coeffs" => {
                    spec.coeffs = Some(parse_list(v).ok_or_else(|| Error::config("integrand.coeffs", v))?)
                }
                other => return Err(Error::config(format!("integrand.{other}"), "unknown key")),
            }
        }
        Ok(spec)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut spec = IntegrandSpec::default();
        if let Some(f) = raw.get("integrand.family") {
            spec.family = f.parse()?;
        }
        spec.d = raw.parse_value("integrand.d")?;
        spec.coeffs = raw.parse_list("integrand.coeffs")?;
        if let Some(r) = raw.parse_value("integrand.decay_r")? {
            spec.decay_r = r;
        }
        Ok(spec)
    }

    /// Dimension implied by the spec alone, if any.
    pub fn natural_dim(&self) -> Option<usize> {
        self.coeffs.as_ref().map(Vec::len).or(self.d)
    }

    pub fn build(&self, d: usize) -> Result<AnalyticIntegrand> {
        let coeffs = match &self.coeffs {
            Some(c) if c.len() == d => c.clone(),
            Some(c) => {
                return Err(Error::config(
                    "integrand.coeffs",
                    format!("has {} entries but d = {d}", c.len()),
                ))
            }
            None => geometric_coeffs(d, self.decay_r),
        };
        match self.family {
            Family::Additive => make_additive(coeffs),
            Family::Product => make_product(coeffs),
        }
        .map_err(|e| Error::config("integrand", e.to_string()))
    }

    pub fn label(&self) -> &'static str {
        match self.family {
            Family::Additive => "additive",
            Family::Product => "product",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub a: f64,
    pub b: f64,
    pub time_varying: bool,
    pub gamma: f64,
    pub d: usize,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            a: LINDLEY_A,
            b: LINDLEY_B,
            time_varying: false,
            gamma: -2.0,
            d: 256,
        }
    }
}

impl ChainSpec {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut spec = ChainSpec::default();
        if let Some(p) = raw.get("chain.preset") {
            if p != "lindley" {
                return Err(Error::config("chain.preset", format!("only `lindley` ships, got `{p}`")));
            }
        }
        if let Some(a) = raw.parse_value("chain.a")? {
            spec.a = a;
        }
        if let Some(b) = raw.parse_value("chain.b")? {
            spec.b = b;
        }
        if let Some(t) = raw.parse_value("chain.time_varying")? {
            spec.time_varying = t;
        }
        if let Some(g) = raw.parse_value("chain.gamma")? {
            spec.gamma = g;
        }
        if let Some(d) = raw.parse_value("chain.d")? {
            spec.d = d;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a <= self.b) {
            return Err(Error::config("chain.a", "need a <= b"));
        }
        if !(self.gamma < -1.0) {
            return Err(Error::config("chain.gamma", format!("must be < -1, got {}", self.gamma)));
        }
        if self.d < 2 {
            return Err(Error::config("chain.d", "horizon must be >= 2"));
        }
        Ok(())
    }

    pub fn build(&self, d: usize) -> Lindley {
        let zeta = if self.time_varying {
            Zeta::TimeVarying {
                a: self.a,
                b: self.b,
                amplitude: TIME_VARYING_AMPLITUDE,
                period: TIME_VARYING_PERIOD,
            }
        } else {
            Zeta::Uniform { a: self.a, b: self.b }
        };
        crate::markov::make_lindley(d, zeta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Mc,
    Mlmc,
    MlmcFixed,
    Markov,
    MarkovMc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Mlmc => "mlmc",
            Method::MlmcFixed => "mlmc-fixed",
            Method::Markov => "markov",
            Method::MarkovMc => "markov-mc",
        }
    }

    /// Fork label of the method's substream; fixed so adding methods never
    /// perturbs the draws of existing ones.
    pub fn stream_label(self) -> u64 {
        match self {
            Method::Mc => 1,
            Method::Mlmc => 2,
            Method::MlmcFixed => 3,
            Method::Markov => 4,
            Method::MarkovMc => 5,
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "mlmc" => Ok(Method::Mlmc),
            "mlmc-fixed" => Ok(Method::MlmcFixed),
            "markov" => Ok(Method::Markov),
            "markov-mc" => Ok(Method::MarkovMc),
            _ => Err(Error::config("run.methods", format!("unknown method `{s}`"))),
        }
    }
}

/// Choice of the fixed base point for the deterministic-fixing estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum FixV {
    Midpoint,
    Sample,
    Explicit(Vec<f64>),
}

impl FixV {
    pub fn parse(kind: &str, explicit: Option<Vec<f64>>) -> Result<Self> {
        match kind {
            "midpoint" => Ok(FixV::Midpoint),
            "sample" => Ok(FixV::Sample),
            "explicit" => explicit
                .map(FixV::Explicit)
                .ok_or_else(|| Error::config("run.v", "explicit fixing needs a point")),
            _ => Err(Error::config("run.fix_v", format!("expected midpoint|sample|explicit, got `{kind}`"))),
        }
    }
}

/// Everything a run depends on besides the binary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub integrand: IntegrandSpec,
    pub chain: ChainSpec,
    pub methods: Vec<Method>,
    pub d_grid: Vec<usize>,
    pub eps: Vec<f64>,
    pub reps: usize,
    /// Samples per replication for `mc`.
    pub mc_n: usize,
    pub per_rep: bool,
    pub fix_v: FixV,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            integrand: IntegrandSpec::default(),
            chain: ChainSpec::default(),
            methods: vec![Method::Mc, Method::Mlmc],
            d_grid: vec![4, 16, 64, 256],
            eps: vec![0.01],
            reps: 1000,
            mc_n: 1,
            per_rep: false,
            fix_v: FixV::Midpoint,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let mut c = ExperimentConfig {
            integrand: IntegrandSpec::from_raw(raw)?,
            chain: ChainSpec::from_raw(raw)?,
            ..Default::default()
        };
        if let Some(s) = raw.parse_value("seed")? {
            c.seed = s;
        }
        if let Some(m) = raw.get("run.methods") {
            c.methods = m
                .split([',', ' '])
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }
        if let Some(g) = raw.parse_list("run.d_grid")? {
            c.d_grid = g;
        }
        if let Some(e) = raw.parse_list("run.eps")? {
            c.eps = e;
        }
        if let Some(r) = raw.parse_value("run.reps")? {
            c.reps = r;
        }
        if let Some(n) = raw.parse_value("run.n")? {
            c.mc_n = n;
        }
        if let Some(p) = raw.parse_value("run.per_rep")? {
            c.per_rep = p;
        }
        if let Some(k) = raw.get("run.fix_v") {
            c.fix_v = FixV::parse(k, raw.parse_list("run.v")?)?;
        }
        c.out = raw.get("run.out").map(PathBuf::from);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("run.methods", "at least one method is required"));
        }
        if self.d_grid.is_empty() {
            return Err(Error::config("run.d_grid", "grid is empty"));
        }
        if let Some(&d) = self.d_grid.iter().find(|&&d| d < 2) {
            return Err(Error::config("run.d_grid", format!("every d must be >= 2, got {d}")));
        }
        if self.eps.is_empty() || self.eps.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::config("run.eps", "need positive tolerances"));
        }
        if self.reps < 2 {
            return Err(Error::config("run.reps", "need at least 2 replications"));
        }
        if self.mc_n == 0 {
            return Err(Error::config("run.n", "need n >= 1"));
        }
        self.chain.validate()
    }
}
