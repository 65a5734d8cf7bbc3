//! Model parameters, validation, and the non-pharmaceutical-intervention
//! scaling of the per-contact infection probability.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// All scalar parameters of the model.
///
/// `validate` folds the NPI effectiveness `eta` into `lambda` (the
/// per-contact infection probability becomes `(1 - eta) * lambda`) and
/// resets `eta` to zero, so downstream code always sees the effective
/// infection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Population size.
    pub n: usize,
    /// Vaccination coverage, in `[0, 1]`.
    pub v: f64,
    /// Per-contact infection probability, in `[0, 1]`.
    pub lambda: f64,
    /// Probability of severe illness for a non-vaccinated individual, in `[0, 1]`.
    pub p_q: f64,
    /// Recovery rate, strictly positive.
    pub beta: f64,
    /// Vaccine effectiveness against transmission, in `[0, 1]`.
    pub gamma_t: f64,
    /// Vaccine effectiveness against severe illness, in `[0, 1]`.
    pub gamma_q: f64,
    /// Testing rate, non-negative.
    pub tau: f64,
    /// Homophily level, in `[0, 1)`.
    pub theta: f64,
    /// Responsibility of vaccinated individuals, in `[0, 1]`.
    pub sigma_v: f64,
    /// Responsibility of non-vaccinated individuals, in `[0, 1]`.
    pub sigma_n: f64,
    /// Effectiveness of non-pharmaceutical interventions, in `[0, 1]`.
    #[serde(default)]
    pub eta: f64,
}

/// Integer sizes of the two subpopulations.
///
/// Vaccinated individuals occupy indices `0..n_v`; non-vaccinated
/// individuals occupy `n_v..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationSplit {
    pub n_v: usize,
    pub n_n: usize,
}

impl PopulationSplit {
    pub fn total(&self) -> usize {
        self.n_v + self.n_n
    }

    /// Index range occupied by a subpopulation.
    pub fn range(&self, group: Group) -> std::ops::Range<usize> {
        match group {
            Group::Vaccinated => 0..self.n_v,
            Group::NonVaccinated => self.n_v..self.total(),
        }
    }

    /// Size of a subpopulation.
    pub fn size(&self, group: Group) -> usize {
        match group {
            Group::Vaccinated => self.n_v,
            Group::NonVaccinated => self.n_n,
        }
    }

    /// Vaccination status of individual `j`.
    pub fn group_of(&self, j: usize) -> Group {
        if j < self.n_v {
            Group::Vaccinated
        } else {
            Group::NonVaccinated
        }
    }
}

/// Vaccination status of an individual or subpopulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Vaccinated,
    NonVaccinated,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Vaccinated, Group::NonVaccinated];

    pub fn index(self) -> usize {
        match self {
            Group::Vaccinated => 0,
            Group::NonVaccinated => 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{field}` = {value} is out of range (expected {expected})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error(
        "subpopulations too small for homophilous selection: n_v = {n_v}, n_n = {n_n} \
         (both must have at least 2 members when theta > 0)"
    )]
    SubpopulationTooSmall { n_v: usize, n_n: usize },
    #[error("failed to parse parameter file: {0}")]
    Parse(String),
    #[error("unknown parameter field `{0}`")]
    UnknownField(String),
}

impl ModelParams {
    /// Validates ranges and returns the normalized record: the NPI scaling
    /// is applied (`lambda <- (1 - eta) * lambda`, `eta <- 0`), so
    /// validation is idempotent.
    pub fn validate(mut self) -> Result<Self, ParamError> {
        fn check(
            field: &'static str,
            value: f64,
            ok: bool,
            expected: &'static str,
        ) -> Result<(), ParamError> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(ParamError::OutOfRange {
                    field,
                    value,
                    expected,
                })
            }
        }

        check("n", self.n as f64, self.n >= 2, "an integer >= 2")?;
        check("v", self.v, (0.0..=1.0).contains(&self.v), "[0, 1]")?;
        check(
            "lambda",
            self.lambda,
            (0.0..=1.0).contains(&self.lambda),
            "[0, 1]",
        )?;
        check("p_q", self.p_q, (0.0..=1.0).contains(&self.p_q), "[0, 1]")?;
        check("beta", self.beta, self.beta > 0.0, "> 0")?;
        check(
            "gamma_t",
            self.gamma_t,
            (0.0..=1.0).contains(&self.gamma_t),
            "[0, 1]",
        )?;
        check(
            "gamma_q",
            self.gamma_q,
            (0.0..=1.0).contains(&self.gamma_q),
            "[0, 1]",
        )?;
        check("tau", self.tau, self.tau >= 0.0, ">= 0")?;
        check(
            "theta",
            self.theta,
            (0.0..1.0).contains(&self.theta),
            "[0, 1)",
        )?;
        check(
            "sigma_v",
            self.sigma_v,
            (0.0..=1.0).contains(&self.sigma_v),
            "[0, 1]",
        )?;
        check(
            "sigma_n",
            self.sigma_n,
            (0.0..=1.0).contains(&self.sigma_n),
            "[0, 1]",
        )?;
        check("eta", self.eta, (0.0..=1.0).contains(&self.eta), "[0, 1]")?;

        // Within-group partner selection draws from n_alpha - 1 candidates,
        // so theta > 0 needs both groups to have at least two members.
        let split = self.split();
        if self.theta > 0.0 && (split.n_v < 2 || split.n_n < 2) {
            return Err(ParamError::SubpopulationTooSmall {
                n_v: split.n_v,
                n_n: split.n_n,
            });
        }

        self.lambda *= 1.0 - self.eta;
        self.eta = 0.0;
        Ok(self)
    }

    /// Subpopulation sizes with `n_v = round(v * n)`, ties rounding half up.
    pub fn split(&self) -> PopulationSplit {
        let n_v = (self.v * self.n as f64).round() as usize;
        let n_v = n_v.min(self.n);
        PopulationSplit {
            n_v,
            n_n: self.n - n_v,
        }
    }

    /// Parses the flat key = value parameter file. Keys must match the
    /// field names exactly; `eta` may be omitted and defaults to 0.
    /// The result is not yet validated.
    pub fn from_config_str(text: &str) -> Result<Self, ParamError> {
        toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))
    }

    /// Serializes to the same flat key = value format accepted by
    /// `from_config_str`.
    pub fn to_config_string(&self) -> String {
        toml::to_string(self).expect("ModelParams always serializes")
    }

    /// Sets a parameter field by its config-file name.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<(), ParamError> {
        match name {
            "n" => self.n = value as usize,
            "v" => self.v = value,
            "lambda" => self.lambda = value,
            "p_q" => self.p_q = value,
            "beta" => self.beta = value,
            "gamma_t" => self.gamma_t = value,
            "gamma_q" => self.gamma_q = value,
            "tau" => self.tau = value,
            "theta" => self.theta = value,
            "sigma_v" => self.sigma_v = value,
            "sigma_n" => self.sigma_n = value,
            "eta" => self.eta = value,
            other => return Err(ParamError::UnknownField(other.to_string())),
        }
        Ok(())
    }

    /// Reads a parameter field by its config-file name.
    pub fn get_field(&self, name: &str) -> Result<f64, ParamError> {
        Ok(match name {
            "n" => self.n as f64,
            "v" => self.v,
            "lambda" => self.lambda,
            "p_q" => self.p_q,
            "beta" => self.beta,
            "gamma_t" => self.gamma_t,
            "gamma_q" => self.gamma_q,
            "tau" => self.tau,
            "theta" => self.theta,
            "sigma_v" => self.sigma_v,
            "sigma_n" => self.sigma_n,
            "eta" => self.eta,
            other => return Err(ParamError::UnknownField(other.to_string())),
        })
    }
}
