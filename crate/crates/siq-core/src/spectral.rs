//! Closed-form epidemic threshold and stability analysis of the
//! disease-free equilibrium (DFE).
//!
//! The DFE is locally asymptotically stable iff the testing rate exceeds
//! the threshold `tau_bar = lambda * xi - beta + lambda * sqrt(xi^2 -
//! 4 theta phi rho)`, where `phi` and `rho` aggregate the infection,
//! severity, vaccine-efficacy, and responsibility factors of the
//! vaccinated and non-vaccinated groups. The discriminant is provably
//! positive for every homophily level, so the infectious block of the
//! linearization always has two real eigenvalues.

use thiserror::Error;

use crate::params::ModelParams;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("discriminant {0} is negative, contradicting its positivity guarantee")]
    NegativeDiscriminant(f64),
    #[error(
        "threshold is not monotone in {param}: tau_bar moved from {before} to {after} \
         for a step of {step}"
    )]
    MonotonicityViolated {
        param: &'static str,
        before: f64,
        after: f64,
        step: f64,
    },
}

/// Vaccinated-group aggregate
/// `(1 - gamma_t) * (1 - p_q (1 - gamma_q)) * (1 - sigma_v)`.
pub fn phi(p: &ModelParams) -> f64 {
    (1.0 - p.gamma_t) * (1.0 - p.p_q * (1.0 - p.gamma_q)) * (1.0 - p.sigma_v)
}

/// Non-vaccinated-group aggregate `(1 - p_q) * (1 - sigma_n)`.
pub fn rho(p: &ModelParams) -> f64 {
    (1.0 - p.p_q) * (1.0 - p.sigma_n)
}

/// The dimensionless aggregate entering the threshold:
/// `rho * [theta + (1-theta)(1-v)] + phi * [theta + (1-theta) v]`.
pub fn xi(p: &ModelParams) -> f64 {
    rho(p) * (p.theta + (1.0 - p.theta) * (1.0 - p.v))
        + phi(p) * (p.theta + (1.0 - p.theta) * p.v)
}

/// `xi^2 - 4 theta phi rho`, switching to its expanded polynomial-in-theta
/// form when the two terms nearly cancel.
pub fn discriminant(p: &ModelParams) -> f64 {
    let (phi, rho) = (phi(p), rho(p));
    let xi = xi(p);
    let a = xi * xi;
    let b = 4.0 * p.theta * phi * rho;
    if (a - b).abs() < 1e-6 * a.max(b) {
        // Expanded form: theta^2 (v rho + (1-v) phi)^2
        //   + 2 theta (v (1-v) (phi - rho)^2 - phi rho)
        //   + ((1-v) rho + v phi)^2.
        let head = p.v * rho + (1.0 - p.v) * phi;
        let tail = (1.0 - p.v) * rho + p.v * phi;
        let mid = p.v * (1.0 - p.v) * (phi - rho) * (phi - rho) - phi * rho;
        p.theta * p.theta * head * head + 2.0 * p.theta * mid + tail * tail
    } else {
        a - b
    }
}

/// The epidemic threshold `tau_bar`: the DFE is locally asymptotically
/// stable iff `tau > tau_bar`. May be negative, in which case no testing
/// is needed.
pub fn analytic_threshold(p: &ModelParams) -> f64 {
    let disc = discriminant(p).max(0.0);
    p.lambda * xi(p) - p.beta + p.lambda * disc.sqrt()
}

/// The threshold in the absence of homophily:
/// `2 lambda (1-p_q)(1-v)(1-sigma_n)
///  + 2 lambda (1-gamma_t) v (1-p_q(1-gamma_q))(1-sigma_v) - beta`.
/// The `theta` field of the input is ignored.
pub fn threshold_no_homophily(p: &ModelParams) -> f64 {
    2.0 * p.lambda * (1.0 - p.p_q) * (1.0 - p.v) * (1.0 - p.sigma_n)
        + 2.0 * p.lambda * (1.0 - p.gamma_t) * p.v * (1.0 - p.p_q * (1.0 - p.gamma_q))
            * (1.0 - p.sigma_v)
        - p.beta
}

/// True when the recovery rate alone stabilizes the DFE for every testing
/// rate, i.e. `beta > lambda xi + lambda sqrt(discriminant)`.
pub fn no_control_needed(p: &ModelParams) -> bool {
    let disc = discriminant(p).max(0.0);
    p.beta > p.lambda * xi(p) + p.lambda * disc.sqrt()
}

/// Jacobian of the reduced 4-dimensional linearization at the DFE, with
/// variables ordered `(y_nq, y_vq, y_ni, y_vi)`. The quarantine block is
/// diagonal with entries `-beta`; the infectious block is the lower-right
/// 2x2.
pub fn dfe_jacobian(p: &ModelParams) -> [[f64; 4]; 4] {
    let a_n = p.theta + (1.0 - p.theta) * (1.0 - p.v);
    let a_v = p.theta + (1.0 - p.theta) * p.v;
    let resp_n = 1.0 - p.sigma_n;
    let resp_v = 1.0 - p.sigma_v;
    let two_lam = 2.0 * p.lambda;
    let vacc_infect = two_lam * (1.0 - p.gamma_t);
    let severe_v = p.p_q * (1.0 - p.gamma_q);
    [
        [
            -p.beta,
            0.0,
            two_lam * p.p_q * a_n * resp_n + p.tau,
            two_lam * p.p_q * (1.0 - p.theta) * (1.0 - p.v) * resp_v,
        ],
        [
            0.0,
            -p.beta,
            vacc_infect * severe_v * p.v * (1.0 - p.theta) * resp_n,
            vacc_infect * severe_v * a_v * resp_v + p.tau,
        ],
        [
            0.0,
            0.0,
            two_lam * (1.0 - p.p_q) * a_n * resp_n - p.beta - p.tau,
            two_lam * (1.0 - p.p_q) * (1.0 - p.theta) * (1.0 - p.v) * resp_v,
        ],
        [
            0.0,
            0.0,
            vacc_infect * (1.0 - severe_v) * p.v * (1.0 - p.theta) * resp_n,
            vacc_infect * (1.0 - severe_v) * a_v * resp_v - p.beta - p.tau,
        ],
    ]
}

/// Eigenvalues of the infectious 2x2 block,
/// `lambda xi - beta - tau +- lambda sqrt(discriminant)`, returned as
/// `(larger, smaller)`.
pub fn iblock_eigenvalues(p: &ModelParams) -> Result<(f64, f64), SpectralError> {
    let disc = discriminant(p);
    if disc < 0.0 {
        return Err(SpectralError::NegativeDiscriminant(disc));
    }
    let center = p.lambda * xi(p) - p.beta - p.tau;
    let spread = p.lambda * disc.sqrt();
    Ok((center + spread, center - spread))
}

/// Sign of the threshold's sensitivity to vaccination coverage: `Less`
/// means increasing `v` decreases `tau_bar`. Equals the sign of
/// `phi - rho`.
pub fn coverage_sensitivity(p: &ModelParams) -> std::cmp::Ordering {
    (phi(p) - rho(p)).partial_cmp(&0.0).expect("finite factors")
}

/// The seven parameters with a proven threshold monotonicity direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdParam {
    Lambda,
    GammaQ,
    Beta,
    GammaT,
    SigmaV,
    SigmaN,
    PQ,
}

impl ThresholdParam {
    pub const ALL: [ThresholdParam; 7] = [
        ThresholdParam::Lambda,
        ThresholdParam::GammaQ,
        ThresholdParam::Beta,
        ThresholdParam::GammaT,
        ThresholdParam::SigmaV,
        ThresholdParam::SigmaN,
        ThresholdParam::PQ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ThresholdParam::Lambda => "lambda",
            ThresholdParam::GammaQ => "gamma_q",
            ThresholdParam::Beta => "beta",
            ThresholdParam::GammaT => "gamma_t",
            ThresholdParam::SigmaV => "sigma_v",
            ThresholdParam::SigmaN => "sigma_n",
            ThresholdParam::PQ => "p_q",
        }
    }

    /// True when increasing the parameter increases `tau_bar`.
    pub fn increases_threshold(self) -> bool {
        matches!(self, ThresholdParam::Lambda | ThresholdParam::GammaQ)
    }

    fn apply(self, p: &ModelParams, step: f64) -> ModelParams {
        let mut q = *p;
        match self {
            ThresholdParam::Lambda => q.lambda += step,
            ThresholdParam::GammaQ => q.gamma_q += step,
            ThresholdParam::Beta => q.beta += step,
            ThresholdParam::GammaT => q.gamma_t += step,
            ThresholdParam::SigmaV => q.sigma_v += step,
            ThresholdParam::SigmaN => q.sigma_n += step,
            ThresholdParam::PQ => q.p_q += step,
        }
        q
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    pub param: ThresholdParam,
    pub tau_before: f64,
    pub tau_after: f64,
    /// True when an increase in the parameter increases the threshold.
    pub increasing: bool,
}

/// Evaluates `tau_bar` at `params` and at `params` with `param` shifted by
/// `step > 0`, asserting the proven direction. The caller keeps the
/// stepped value inside the parameter's domain.
pub fn monotonicity_check(
    p: &ModelParams,
    param: ThresholdParam,
    step: f64,
) -> Result<MonotonicityReport, SpectralError> {
    assert!(step > 0.0, "step must be positive");
    let before = analytic_threshold(p);
    let after = analytic_threshold(&param.apply(p, step));
    let increasing = param.increases_threshold();
    let ok = if increasing {
        after >= before - 1e-12
    } else {
        after <= before + 1e-12
    };
    if !ok {
        return Err(SpectralError::MonotonicityViolated {
            param: param.name(),
            before,
            after,
            step,
        });
    }
    Ok(MonotonicityReport {
        param,
        tau_before: before,
        tau_after: after,
        increasing,
    })
}

/// Everything the threshold analysis derives for one parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdReport {
    pub xi: f64,
    pub tau_bar: f64,
    pub phi: f64,
    pub rho: f64,
    pub discriminant: f64,
    /// Eigenvalues of the infectious block at the configured `tau`.
    pub eigenvalues: (f64, f64),
    /// Whether the DFE is stable at the configured `tau`.
    pub dfe_stable: bool,
    pub no_control_needed: bool,
    /// Sign of `d tau_bar / d v`.
    pub coverage_derivative_sign: std::cmp::Ordering,
}

pub fn threshold_report(p: &ModelParams) -> Result<ThresholdReport, SpectralError> {
    let tau_bar = analytic_threshold(p);
    Ok(ThresholdReport {
        xi: xi(p),
        tau_bar,
        phi: phi(p),
        rho: rho(p),
        discriminant: discriminant(p),
        eigenvalues: iblock_eigenvalues(p)?,
        dfe_stable: p.tau > tau_bar,
        no_control_needed: no_control_needed(p),
        coverage_derivative_sign: coverage_sensitivity(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// COVID case study plus sigma_n = theta = 0.5 and sigma_v = 0.3.
    fn covid_fig4_params() -> ModelParams {
        ModelParams {
            n: 10_000,
            v: 0.821,
            lambda: 0.36,
            p_q: 0.19,
            beta: 0.1,
            gamma_t: 0.65,
            gamma_q: 0.92,
            tau: 0.0,
            theta: 0.5,
            sigma_v: 0.3,
            sigma_n: 0.5,
            eta: 0.0,
        }
    }

    fn sample_params(rng: &mut impl Rng) -> ModelParams {
        ModelParams {
            n: 1_000,
            v: rng.random(),
            lambda: rng.random(),
            p_q: rng.random(),
            beta: 10f64.powf(rng.random_range(-3.0..0.0)),
            gamma_t: rng.random(),
            gamma_q: rng.random(),
            tau: rng.random(),
            theta: rng.random_range(0.0..0.99),
            sigma_v: rng.random(),
            sigma_n: rng.random(),
            eta: 0.0,
        }
    }

    #[test]
    fn covid_case_matches_frozen_values() {
        // Frozen from 40-digit evaluation of the closed forms.
        let p = covid_fig4_params();
        assert!((phi(&p) - 0.241276).abs() < 1e-15);
        assert!((rho(&p) - 0.405).abs() < 1e-15);
        assert!((xi(&p) - 0.458429298).abs() < 1e-12);
        assert!((discriminant(&p) - 0.014723861264772804).abs() < 1e-15);
        assert!((analytic_threshold(&p) - 0.10871763805794926).abs() < 1e-12);
    }

    #[test]
    fn xi_vanishes_under_full_responsibility() {
        let mut p = covid_fig4_params();
        p.sigma_n = 1.0;
        p.sigma_v = 1.0;
        assert_eq!(xi(&p), 0.0);
        assert_eq!(analytic_threshold(&p), -p.beta);
    }

    #[test]
    fn lambda_zero_gives_minus_beta() {
        let mut p = covid_fig4_params();
        p.lambda = 0.0;
        assert_eq!(analytic_threshold(&p), -p.beta);
        assert!(no_control_needed(&p));
    }

    #[test]
    fn theta_zero_reduces_xi_to_mixture() {
        let mut p = covid_fig4_params();
        p.theta = 0.0;
        let expect = rho(&p) * (1.0 - p.v) + phi(&p) * p.v;
        assert!((xi(&p) - expect).abs() < 1e-15);
    }

    #[test]
    fn corollary_example_value() {
        let p = ModelParams {
            n: 1_000,
            v: 0.5,
            lambda: 0.2,
            p_q: 0.2,
            beta: 0.02,
            gamma_t: 0.5,
            gamma_q: 0.9,
            tau: 0.0,
            theta: 0.5,
            sigma_v: 0.5,
            sigma_n: 0.2,
            eta: 0.0,
        };
        // 0.128 + 0.049 - 0.02 = 0.157
        assert!((threshold_no_homophily(&p) - 0.157).abs() < 1e-15);

        let mut v0 = p;
        v0.v = 0.0;
        let expect = 2.0 * v0.lambda * (1.0 - v0.p_q) * (1.0 - v0.sigma_n) - v0.beta;
        assert!((threshold_no_homophily(&v0) - expect).abs() < 1e-15);
    }

    #[test]
    fn corollary_is_the_theta_zero_specialization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1_000 {
            let mut p = sample_params(&mut rng);
            p.theta = 0.0;
            let diff = (analytic_threshold(&p) - threshold_no_homophily(&p)).abs();
            assert!(diff <= 1e-12, "corollary mismatch: {diff}");
        }
    }

    #[test]
    fn no_control_example_and_equivalence() {
        let p = covid_fig4_params();
        // beta = 0.1 against lambda*xi + lambda*sqrt(disc) ~ 0.2087.
        assert!(!no_control_needed(&p));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1_000 {
            let p = sample_params(&mut rng);
            assert_eq!(
                no_control_needed(&p),
                analytic_threshold(&p) < 0.0,
                "no-control flag must match a negative threshold"
            );
        }
    }

    #[test]
    fn jacobian_structure() {
        let p = covid_fig4_params();
        let j = dfe_jacobian(&p);
        for (r, c) in [(0, 1), (1, 0), (2, 0), (2, 1), (3, 0), (3, 1)] {
            assert_eq!(j[r][c], 0.0, "expected structural zero at ({r},{c})");
        }
        assert_eq!(j[0][0], -p.beta);
        assert_eq!(j[1][1], -p.beta);
    }

    #[test]
    fn eigenvalues_match_generic_2x2_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000 {
            let mut p = sample_params(&mut rng);
            p.tau = rng.random::<f64>() * 0.5;
            let j = dfe_jacobian(&p);
            let (a, b, c, d) = (j[2][2], j[2][3], j[3][2], j[3][3]);
            let mean = 0.5 * (a + d);
            let radicand = 0.25 * (a - d) * (a - d) + b * c;
            assert!(radicand >= -1e-15);
            let spread = radicand.max(0.0).sqrt();
            let (hi, lo) = iblock_eigenvalues(&p).unwrap();
            assert!((hi - (mean + spread)).abs() <= 1e-12, "upper eigenvalue");
            assert!((lo - (mean - spread)).abs() <= 1e-12, "lower eigenvalue");
        }
    }

    #[test]
    fn theta_zero_eigenvalues_collapse_to_xi() {
        let mut p = covid_fig4_params();
        p.theta = 0.0;
        p.tau = 0.12;
        let (hi, lo) = iblock_eigenvalues(&p).unwrap();
        let center = p.lambda * xi(&p) - p.beta - p.tau;
        let spread = p.lambda * xi(&p);
        assert!((hi - (center + spread)).abs() < 1e-15);
        assert!((lo - (center - spread)).abs() < 1e-15);
    }

    #[test]
    fn threshold_eigenvalue_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1_000 {
            let p = sample_params(&mut rng);
            let (hi, _) = iblock_eigenvalues(&p).unwrap();
            let above = p.tau > analytic_threshold(&p);
            assert_eq!(hi < 0.0, above, "stability must flip exactly at tau_bar");
        }
    }

    #[test]
    fn discriminant_positive_across_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let p = sample_params(&mut rng);
            assert!(discriminant(&p) > 0.0 || (phi(&p) * rho(&p) == 0.0));
        }
    }

    #[test]
    fn coverage_sensitivity_examples() {
        let mut p = covid_fig4_params();
        p.sigma_v = 1.0;
        assert_ne!(coverage_sensitivity(&p), std::cmp::Ordering::Greater);

        let mut p = covid_fig4_params();
        p.gamma_t = 0.0;
        p.gamma_q = 0.0;
        p.sigma_v = 0.4;
        p.sigma_n = 0.4;
        assert_eq!(coverage_sensitivity(&p), std::cmp::Ordering::Equal);
    }

    #[test]
    fn monotonicity_spot_checks() {
        let p = covid_fig4_params();
        for param in ThresholdParam::ALL {
            let r = monotonicity_check(&p, param, 1e-3).unwrap();
            if param.increases_threshold() {
                assert!(r.tau_after >= r.tau_before);
            } else {
                assert!(r.tau_after <= r.tau_before);
            }
        }
        // Beta enters only through the -beta term.
        let r = monotonicity_check(&p, ThresholdParam::Beta, 1e-3).unwrap();
        assert!((r.tau_after - r.tau_before + 1e-3).abs() <= 1e-14);
    }

    #[test]
    fn report_is_internally_consistent() {
        let mut p = covid_fig4_params();
        p.tau = 0.15;
        let r = threshold_report(&p).unwrap();
        assert!(r.dfe_stable);
        assert!(r.eigenvalues.0 < 0.0);
        assert!(!r.no_control_needed);
        assert!((r.tau_bar - 0.10871763805794926).abs() < 1e-12);
    }
}
