use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::FiniteDimAlgebra;
use crate::error::{Error, Result};
use crate::spectral::SpectralMeasure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DimSingle,
    DimAlgebra,
    Additivity,
    Invariance,
    BallDiameter,
    Formulas,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::DimSingle,
        Scenario::DimAlgebra,
        Scenario::Additivity,
        Scenario::Invariance,
        Scenario::BallDiameter,
        Scenario::Formulas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::DimSingle => "dim-single",
            Scenario::DimAlgebra => "dim-algebra",
            Scenario::Additivity => "additivity",
            Scenario::Invariance => "invariance",
            Scenario::BallDiameter => "ball-diameter",
            Scenario::Formulas => "formulas",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// Microstate parameters `(R, m, gamma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostateParams {
    pub r: f64,
    pub m: usize,
    pub gamma: f64,
}

impl Default for MicrostateParams {
    fn default() -> Self {
        MicrostateParams { r: 2.0, m: 3, gamma: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleCounts {
    /// Orbit samples per size are `orbit_samples / k`.
    pub orbit_samples: usize,
    pub restarts: usize,
    pub walkers: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub anchor_samples: usize,
    pub freeness_trials: usize,
    pub freeness_k: usize,
    /// Matrix size for the sampled-cloud packing comparisons.
    pub cloud_k: usize,
    pub cloud_points: usize,
    pub ball_points: usize,
    /// Largest size for the tangent-chart regression.
    pub chart_max_k: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts {
            orbit_samples: 2000,
            restarts: 16,
            walkers: 200,
            sweeps: 4,
            burn_in: 50,
            anchor_samples: 4000,
            freeness_trials: 200,
            freeness_k: 128,
            cloud_k: 6,
            cloud_points: 300,
            ball_points: 20,
            chart_max_k: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<SpectralMeasure>,
    /// Factor laws for additivity.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<SpectralMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<FiniteDimAlgebra>,
    /// Ascending polynomial coefficients of the map compared in the invariance scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomial: Option<Vec<f64>>,
    pub k_grid: Vec<usize>,
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub microstate: MicrostateParams,
    /// Fraction of eigenvalues the quantile plan may discard.
    pub tau: f64,
    /// Trace tolerance for representation plans.
    pub plan_eps: f64,
    /// `gamma` inside the constrained-cover lower limit `L sqrt(gamma)`.
    pub cover_gamma: f64,
    #[serde(default)]
    pub samples: SampleCounts,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// `n` scales from `hi` down to `lo`, evenly spaced in `log eps`.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| hi * (lo / hi).powf(i as f64 / (n - 1) as f64)).collect()
}

fn two_atom() -> SpectralMeasure {
    SpectralMeasure::atomic(&[(0.0, 0.5), (1.0, 0.5)]).expect("valid measure")
}

impl ScenarioConfig {
    /// Default desk-scale configuration for a scenario.
    pub fn default_for(scenario: Scenario) -> Self {
        let mut c = ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            scenario,
            measure: None,
            measures: Vec::new(),
            algebra: None,
            polynomial: None,
            k_grid: vec![8, 12, 16, 24, 32],
            eps_grid: log_grid(0.4, 0.025, 9),
            microstate: MicrostateParams::default(),
            tau: 0.45,
            plan_eps: 0.05,
            cover_gamma: 1e-4,
            samples: SampleCounts::default(),
            seed: 0,
            output: None,
        };
        match scenario {
            Scenario::DimSingle => c.measure = Some(two_atom()),
            Scenario::DimAlgebra => {
                c.algebra = Some(FiniteDimAlgebra::from_pairs(&[(2, 1.0)]).expect("valid algebra"));
                c.k_grid = vec![6, 8, 12, 16, 24, 32];
                c.microstate.r = 4.0;
            }
            Scenario::Additivity => {
                c.measures = vec![two_atom(), two_atom()];
                c.k_grid = vec![8, 12, 16, 24, 32];
            }
            Scenario::Invariance => {
                c.measure = Some(SpectralMeasure::uniform(0.0, 1.0).expect("valid measure"));
                c.polynomial = Some(vec![0.0, 0.0, 0.0, 1.0]);
                c.k_grid = vec![12, 16, 24, 32];
                c.samples.cloud_k = 12;
            }
            Scenario::BallDiameter => {
                c.measure = Some(two_atom());
                c.k_grid = vec![16];
                c.eps_grid = log_grid(0.2, 0.01, 10);
            }
            Scenario::Formulas => {}
        }
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ScenarioConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Scales sorted strictly decreasing.
    pub fn eps_descending(&self) -> Vec<f64> {
        let mut g = self.eps_grid.clone();
        g.sort_by(|a, b| b.total_cmp(a));
        g
    }

    /// All laws the scenario uses.
    fn laws(&self) -> Vec<&SpectralMeasure> {
        self.measure.iter().chain(self.measures.iter()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema version {} unsupported", self.schema_version)));
        }
        if self.scenario != Scenario::Formulas {
            if self.k_grid.is_empty() || self.eps_grid.is_empty() {
                return Err(Error::Config("grids must be non-empty".into()));
            }
            if self.k_grid.contains(&0) {
                return Err(Error::Config("matrix sizes must be positive".into()));
            }
            if !self.k_grid.windows(2).all(|w| w[0] < w[1]) && !self.k_grid.windows(2).all(|w| w[0] > w[1]) {
                return Err(Error::Config("k_grid must be strictly monotone".into()));
            }
            let e = &self.eps_grid;
            if e.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config("scales must be positive".into()));
            }
            if !e.windows(2).all(|w| w[0] < w[1]) && !e.windows(2).all(|w| w[0] > w[1]) {
                return Err(Error::Config("eps_grid must be strictly monotone".into()));
            }
        }
        let ms = self.microstate;
        if !(ms.gamma > 0.0) || ms.m == 0 {
            return Err(Error::Config("microstate needs m >= 1 and gamma > 0".into()));
        }
        for mu in self.laws() {
            let (a, b) = mu.support();
            let bound = a.abs().max(b.abs());
            if !(ms.r > bound) {
                return Err(Error::Config(format!("R={} must exceed the support bound {bound}", ms.r)));
            }
        }
        if let Some(alg) = &self.algebra {
            let bound = algebra_generator_bound(alg);
            if !(ms.r > bound) {
                return Err(Error::Config(format!("R={} must exceed the generator bound {bound}", ms.r)));
            }
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config("tau must lie in (0, 1)".into()));
        }
        let needs = match self.scenario {
            Scenario::DimSingle | Scenario::BallDiameter => self.measure.is_some(),
            Scenario::Invariance => self.measure.is_some() && self.polynomial.is_some(),
            Scenario::DimAlgebra => self.algebra.is_some(),
            Scenario::Additivity => !self.measures.is_empty(),
            Scenario::Formulas => true,
        };
        if !needs {
            return Err(Error::Config(format!("scenario {} is missing its measure, map or algebra", self.scenario)));
        }
        Ok(())
    }
}

/// Largest operator norm among the algebra's generators.
pub fn algebra_generator_bound(a: &FiniteDimAlgebra) -> f64 {
    let [z1, z2] = a.generators();
    z1.iter().chain(z2.iter()).map(|x| x.operator_norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for s in Scenario::ALL {
            let c = ScenarioConfig::default_for(s);
            c.validate().unwrap();
            let back = ScenarioConfig::from_json(&c.to_json()).unwrap();
            assert_eq!(back, c);
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
    }

    #[test]
    fn rejects_small_radius_and_bad_grids() {
        let mut c = ScenarioConfig::default_for(Scenario::DimSingle);
        c.microstate.r = 1.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = ScenarioConfig::default_for(Scenario::DimSingle);
        c.eps_grid = vec![0.1, 0.2, 0.15];
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default_for(Scenario::DimSingle);
        c.k_grid.clear();
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default_for(Scenario::DimAlgebra);
        c.microstate.r = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn default_grid_endpoints() {
        let g = log_grid(0.4, 0.025, 9);
        assert!((g[0] - 0.4).abs() < 1e-15 && (g[8] - 0.025).abs() < 1e-15);
    }
}
