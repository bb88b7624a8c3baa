//! Run configuration shared by the flag parser and `--config` files.
//!
//! Every parameter block derives both `clap::Parser` and serde, so the
//! defaults live in one place: `Default` is "parse an empty command line".

use clap::{Parser, Subcommand, ValueEnum};
use qpc_core::{Complex64, Frequency, TrigPolynomial};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// V_0, V_1, …, V_d; negative modes follow from V_{−k} = conj(V_k).
    #[serde(default)]
    pub potential: Vec<Coef>,
    pub alpha: Alpha,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<Energies>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub task: Task,
}

/// A real coefficient or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coef {
    Real(f64),
    Complex([f64; 2]),
}

impl Coef {
    fn value(self) -> Complex64 {
        match self {
            Coef::Real(x) => Complex64::new(x, 0.0),
            Coef::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// A decimal string, or `{"surd": [a, b, c]}` / `{"surd": [a, b, c, den]}` for (a + b√c)/den.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Decimal(String),
    Surd { surd: Vec<i64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Energies {
    Value(f64),
    List(Vec<f64>),
    Grid { grid: [f64; 2], points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Schrodinger,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WedgeCheck {
    Th1,
    Lat,
    Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Continued fraction, β proxy and ε₀-resonances of α.
    Arith(ArithParams),
    /// Lyapunov spectrum on a grid of ε.
    Lyapunov(LyapunovParams),
    /// Acceleration ω from the slope of L^k(ε).
    Accel(AccelParams),
    /// Fibered rotation number and gap label.
    Rho(RhoParams),
    /// Avila regime (subcritical, critical, supercritical, uh) and h(E).
    Regime(RegimeParams),
    /// Section determinants ln|P_n(θ + iε)|.
    Det(DetParams),
    /// Green's function of a finite section.
    Green(GreenParams),
    /// Sampled spectrum of finite sections.
    Spectrum(SpectrumParams),
    /// Averaged log-determinants (1/n)⟨ln|P_n(· + iε)|⟩.
    Avgdet(AvgdetParams),
    /// Exterior-power and block-minor checks.
    Wedge(WedgeParams),
    /// Eigenvector decay outside resonant windows.
    Localize(LocalizeParams),
    /// Almost-reducibility conjugations at successive scales.
    Reduce(ReduceParams),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Arith(_) => "arith",
            Task::Lyapunov(_) => "lyapunov",
            Task::Accel(_) => "accel",
            Task::Rho(_) => "rho",
            Task::Regime(_) => "regime",
            Task::Det(_) => "det",
            Task::Green(_) => "green",
            Task::Spectrum(_) => "spectrum",
            Task::Avgdet(_) => "avgdet",
            Task::Wedge(_) => "wedge",
            Task::Localize(_) => "localize",
            Task::Reduce(_) => "reduce",
        }
    }
}

macro_rules! defaults_from_clap {
    ($($t:ty),*) => {$(
        impl Default for $t {
            fn default() -> Self {
                <$t>::parse_from(["qpc"])
            }
        }
    )*};
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct ArithParams {
    #[arg(long, default_value_t = 20)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps0: f64,
    #[arg(long, default_value_t = 1000)]
    pub horizon: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovParams {
    #[arg(long, value_enum, default_value_t = SideArg::Schrodinger)]
    pub side: SideArg,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub eps_grid: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct AccelParams {
    #[arg(long, value_enum, default_value_t = SideArg::Schrodinger)]
    pub side: SideArg,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.03, 0.04])]
    pub eps_grid: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct RhoParams {
    #[arg(long, default_value_t = 100_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub x0: f64,
    /// Largest |k| searched for the gap label 2ρ ≡ kα.
    #[arg(long, default_value_t = 50)]
    pub kmax: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct RegimeParams {
    /// ε grid for the acceleration fit.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.03, 0.04])]
    pub eps_grid: Vec<f64>,
    /// Heights probed for h(E).
    #[arg(long, value_delimiter = ',', default_values_t = [0.0125, 0.025, 0.05, 0.1, 0.2, 0.4])]
    pub h_grid: Vec<f64>,
    #[arg(long)]
    pub strip_bound: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct DetParams {
    #[arg(long, value_delimiter = ',', default_values_t = [0.0], allow_hyphen_values = true)]
    pub thetas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0], allow_hyphen_values = true)]
    pub eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 40])]
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct GreenParams {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub eps: f64,
    /// Section a:b (inclusive).
    #[arg(long, default_value = "0:9", allow_hyphen_values = true)]
    pub interval: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumParams {
    #[arg(long, value_enum, default_value_t = SideArg::Dual)]
    pub side: SideArg,
    #[arg(long, default_value_t = 500)]
    pub sites: usize,
    #[arg(long, default_value_t = 8)]
    pub phases: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub drop_edge: bool,
    /// Also report the Hausdorff distance between the two sides.
    #[arg(long, default_value_t = false)]
    pub duality: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct AvgdetParams {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05])]
    pub eps_grid: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct WedgeParams {
    #[arg(long, value_enum, default_value_t = WedgeCheck::Th1)]
    pub check: WedgeCheck,
    #[arg(long, default_value_t = 20)]
    pub draws: usize,
    /// Step counts k (th1).
    #[arg(long, value_delimiter = ',', default_values_t = [4, 6, 8])]
    pub ks: Vec<usize>,
    /// Deleted row and column labels in [−d, d−1] (th1).
    #[arg(long, value_delimiter = ',', default_values_t = [0], allow_hyphen_values = true)]
    pub rows: Vec<i64>,
    #[arg(long, value_delimiter = ',', default_values_t = [-1], allow_hyphen_values = true)]
    pub cols: Vec<i64>,
    /// Relative spread allowed around the empirical constant (th1).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Blocks k and corner block k0 (lat).
    #[arg(long, default_value_t = 20)]
    pub blocks: usize,
    #[arg(long, default_value_t = 5)]
    pub k0: usize,
    /// Slack ε in the numerator bound (bound).
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeParams {
    #[arg(long, default_value_t = 2000)]
    pub sites: usize,
    #[arg(long, default_value_t = 4.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps0: f64,
    /// Which configured energy is the eigenvalue target.
    #[arg(long, default_value_t = 0)]
    pub energy_index: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta: f64,
    /// Write (j, ln|u_j|, masked) rows.
    #[arg(long, default_value_t = false)]
    pub dump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[serde(default, deny_unknown_fields)]
pub struct ReduceParams {
    #[arg(long, value_delimiter = ',')]
    pub radii: Vec<f64>,
    /// Scales N; empty selects three consecutive denominators ≥ 50.
    #[arg(long, value_delimiter = ',')]
    pub scales: Vec<u64>,
    #[arg(long, default_value_t = 4.0)]
    pub c0: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub eta: f64,
    /// Dual phase θ(E), found from the rotation number when absent.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Subcritical radius, measured when absent.
    #[arg(long)]
    pub h: Option<f64>,
    /// Write each conjugation's Fourier coefficients as b_N.bin.
    #[arg(long, default_value_t = false)]
    pub dump: bool,
}

defaults_from_clap!(
    ArithParams,
    LyapunovParams,
    AccelParams,
    RhoParams,
    RegimeParams,
    DetParams,
    GreenParams,
    SpectrumParams,
    AvgdetParams,
    WedgeParams,
    LocalizeParams,
    ReduceParams
);

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn frequency(&self) -> Result<Frequency, ConfigError> {
        let f = match &self.alpha {
            Alpha::Decimal(s) => Frequency::from_decimal(s),
            Alpha::Surd { surd } => match surd.as_slice() {
                &[a, b, c] => Frequency::surd(a, b, c, 1),
                &[a, b, c, den] => Frequency::surd(a, b, c, den),
                _ => return Err(bad("surd needs [a, b, c] or [a, b, c, den]")),
            },
        };
        f.map_err(|e| bad(format!("alpha: {e}")))
    }

    pub fn potential(&self) -> Result<TrigPolynomial, ConfigError> {
        if self.potential.is_empty() {
            return Ok(TrigPolynomial::zero());
        }
        let pos: Vec<Complex64> = self.potential.iter().map(|c| c.value()).collect();
        if pos[0].im != 0.0 {
            return Err(bad("V_0 must be real"));
        }
        TrigPolynomial::from_nonneg(&pos).map_err(|e| bad(format!("potential: {e}")))
    }

    pub fn energies(&self) -> Result<Vec<f64>, ConfigError> {
        let es = match &self.energy {
            None => return Err(bad(format!("`{}` needs --energy or --energy-grid", self.task.name()))),
            Some(Energies::Value(e)) => vec![*e],
            Some(Energies::List(v)) => v.clone(),
            Some(Energies::Grid { grid: [a, b], points }) => match points {
                0 => Vec::new(),
                1 => vec![*a],
                n => (0..*n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            },
        };
        if es.is_empty() || es.iter().any(|e| !e.is_finite()) {
            return Err(bad("energies must be a non-empty list of finite numbers"));
        }
        Ok(es)
    }

    pub fn single_energy(&self) -> Result<f64, ConfigError> {
        match self.energies()?.as_slice() {
            &[e] => Ok(e),
            _ => Err(bad(format!("`{}` takes a single --energy", self.task.name()))),
        }
    }
}

/// `--alpha` flag: a decimal, or `surd:a,b,c[,den]`.
pub fn parse_alpha_flag(s: &str) -> Result<Alpha, ConfigError> {
    match s.strip_prefix("surd:") {
        None => Ok(Alpha::Decimal(s.to_string())),
        Some(rest) => {
            let surd = rest
                .split(',')
                .map(|t| t.trim().parse::<i64>().map_err(|_| bad(format!("surd component `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Alpha::Surd { surd })
        }
    }
}

/// `--energy-grid a:b:n`.
pub fn parse_energy_grid(s: &str) -> Result<Energies, ConfigError> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = || bad(format!("energy grid `{s}` is not a:b:n"));
    if parts.len() != 3 {
        return Err(err());
    }
    let a = parts[0].parse().map_err(|_| err())?;
    let b = parts[1].parse().map_err(|_| err())?;
    let points = parts[2].parse().map_err(|_| err())?;
    Ok(Energies::Grid { grid: [a, b], points })
}

/// `--interval a:b`.
pub fn parse_interval(s: &str) -> Result<(i64, i64), ConfigError> {
    let err = || bad(format!("interval `{s}` is not a:b with a ≤ b"));
    let (a, b) = s.split_once(':').ok_or_else(err)?;
    let (a, b): (i64, i64) = (a.trim().parse().map_err(|_| err())?, b.trim().parse().map_err(|_| err())?);
    if a > b {
        return Err(err());
    }
    Ok((a, b))
}

/// `--potential`: a JSON list of V_0..V_d, each a number or `[re, im]`.
pub fn parse_potential_flag(s: &str) -> Result<Vec<Coef>, ConfigError> {
    serde_json::from_str(s).map_err(|e| bad(format!("potential: {e}")))
}
