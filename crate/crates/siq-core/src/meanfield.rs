//! Mean-field dynamics: the per-individual probability system for finite
//! `n` and its macroscopic limit, with a fixed-step RK4 integrator.
//!
//! The macroscopic state tracks six averages: the probabilities that a
//! randomly selected individual is non-vaccinated (resp. vaccinated) and
//! susceptible, infectious, or quarantined. Two linear constraints hold
//! along every solution: the non-vaccinated components sum to `1 - v` and
//! the vaccinated components to `v`.

use thiserror::Error;

use crate::params::{Group, ModelParams};
use crate::trajectory::Trajectory;

/// Macroscopic state, ordered like the trajectory columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroState {
    pub y_ns: f64,
    pub y_ni: f64,
    pub y_nq: f64,
    pub y_vs: f64,
    pub y_vi: f64,
    pub y_vq: f64,
}

impl MacroState {
    pub fn from_array(y: [f64; 6]) -> MacroState {
        MacroState {
            y_ns: y[0],
            y_ni: y[1],
            y_nq: y[2],
            y_vs: y[3],
            y_vi: y[4],
            y_vq: y[5],
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.y_ns, self.y_ni, self.y_nq, self.y_vs, self.y_vi, self.y_vq,
        ]
    }

    /// State with an infected share `f0` seeded uniformly across the
    /// population (so each group contributes proportionally), everyone
    /// else susceptible.
    pub fn seeded(v: f64, f0: f64) -> MacroState {
        MacroState {
            y_ns: (1.0 - v) * (1.0 - f0),
            y_ni: (1.0 - v) * f0,
            y_nq: 0.0,
            y_vs: v * (1.0 - f0),
            y_vi: v * f0,
            y_vq: 0.0,
        }
    }
}

/// Per-individual probability triples `(s, i, q)`. Individual `j` carries
/// mass only in its own group's coordinates, so the cross-group entries of
/// the full per-individual description are structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    /// One `(s, i, q)` triple per individual; vaccinated occupy `0..n_v`.
    pub probs: Vec<[f64; 3]>,
}

impl MicroState {
    /// Homogeneous state with infected probability `f0` for everyone.
    pub fn seeded(n: usize, f0: f64) -> MicroState {
        MicroState {
            probs: vec![[1.0 - f0, f0, 0.0]; n],
        }
    }

    /// Aggregates to the macroscopic averages.
    pub fn aggregate(&self, params: &ModelParams) -> MacroState {
        let split = params.split();
        let n = self.probs.len() as f64;
        let mut y = [0.0f64; 6];
        for (j, p) in self.probs.iter().enumerate() {
            let base = match split.group_of(j) {
                Group::NonVaccinated => 0,
                Group::Vaccinated => 3,
            };
            for c in 0..3 {
                y[base + c] += p[c];
            }
        }
        for c in &mut y {
            *c /= n;
        }
        MacroState::from_array(y)
    }
}

#[derive(Debug, Error)]
pub enum MeanFieldError {
    #[error("macroscopic system is degenerate: v = {v} with theta > 0")]
    DegenerateCoverage { v: f64 },
    #[error("subpopulations too small for homophilous selection (n_v = {n_v}, n_n = {n_n})")]
    SubpopulationTooSmall { n_v: usize, n_n: usize },
    #[error("state left [0, 1] at t = {t}; reduce the integration step")]
    NonFiniteState { t: f64 },
}

/// The disease-free equilibrium `(1 - v, 0, 0, v, 0, 0)`.
pub fn dfe(params: &ModelParams) -> MacroState {
    MacroState {
        y_ns: 1.0 - params.v,
        y_ni: 0.0,
        y_nq: 0.0,
        y_vs: params.v,
        y_vi: 0.0,
        y_vq: 0.0,
    }
}

fn check_macro_params(params: &ModelParams) -> Result<(), MeanFieldError> {
    if params.theta > 0.0 && (params.v <= 0.0 || params.v >= 1.0) {
        return Err(MeanFieldError::DegenerateCoverage { v: params.v });
    }
    Ok(())
}

/// Time derivatives of the macroscopic system.
pub fn macro_rhs(y: &MacroState, params: &ModelParams) -> Result<[f64; 6], MeanFieldError> {
    check_macro_params(params)?;
    Ok(macro_rhs_unchecked(&y.as_array(), params))
}

/// Same-group selection weight in the macroscopic limit: `theta/w + 1 - theta`
/// for a group of mass `w`, collapsing to `1 - theta` when `theta = 0`.
fn group_weight(theta: f64, mass: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else {
        theta / mass + 1.0 - theta
    }
}

fn macro_rhs_unchecked(y: &[f64; 6], p: &ModelParams) -> [f64; 6] {
    let [y_ns, y_ni, y_nq, y_vs, y_vi, y_vq] = *y;
    let (lam, theta, v) = (p.lambda, p.theta, p.v);
    // Contact pressure on susceptibles of each group; the vaccinated
    // pressure already carries the transmission-efficacy factor.
    let force_n = 2.0
        * lam
        * (group_weight(theta, 1.0 - v) * (1.0 - p.sigma_n) * y_ni
            + (1.0 - theta) * (1.0 - p.sigma_v) * y_vi);
    let force_v = 2.0
        * lam
        * (1.0 - p.gamma_t)
        * ((1.0 - theta) * (1.0 - p.sigma_n) * y_ni
            + group_weight(theta, v) * (1.0 - p.sigma_v) * y_vi);
    let severe_n = p.p_q;
    let severe_v = p.p_q * (1.0 - p.gamma_q);
    [
        -force_n * y_ns + p.beta * (y_ni + y_nq),
        (1.0 - severe_n) * force_n * y_ns - (p.beta + p.tau) * y_ni,
        severe_n * force_n * y_ns + p.tau * y_ni - p.beta * y_nq,
        -force_v * y_vs + p.beta * (y_vi + y_vq),
        (1.0 - severe_v) * force_v * y_vs - (p.beta + p.tau) * y_vi,
        severe_v * force_v * y_vs + p.tau * y_vi - p.beta * y_vq,
    ]
}

/// Time derivatives of the per-individual system for finite `n`, with the
/// exact `n - 1` candidate counts.
pub fn micro_rhs(
    state: &MicroState,
    params: &ModelParams,
) -> Result<Vec<[f64; 3]>, MeanFieldError> {
    let split = params.split();
    assert_eq!(state.probs.len(), split.total());
    if params.theta > 0.0 && (split.n_v < 2 || split.n_n < 2) {
        return Err(MeanFieldError::SubpopulationTooSmall {
            n_v: split.n_v,
            n_n: split.n_n,
        });
    }
    Ok(micro_rhs_unchecked(&state.probs, params))
}

fn micro_rhs_unchecked(probs: &[[f64; 3]], p: &ModelParams) -> Vec<[f64; 3]> {
    let split = p.split();
    let n = probs.len();
    let mut sum_i = [0.0f64; 2]; // by group index
    for (j, t) in probs.iter().enumerate() {
        sum_i[split.group_of(j).index()] += t[1];
    }
    let uniform = (1.0 - p.theta) / (n as f64 - 1.0);
    let within = |size: usize| {
        let mut w = uniform;
        if p.theta > 0.0 {
            w += p.theta / (size as f64 - 1.0);
        }
        w
    };
    let w_nn = within(split.n_n);
    let w_vv = within(split.n_v);

    probs
        .iter()
        .enumerate()
        .map(|(j, &[s, i, q])| {
            let g = split.group_of(j);
            // Sums over k != j of the infectious probabilities per group.
            let own = i;
            let (i_n, i_v) = match g {
                Group::NonVaccinated => (sum_i[1] - own, sum_i[0]),
                Group::Vaccinated => (sum_i[1], sum_i[0] - own),
            };
            let (alpha, infect, severe) = match g {
                Group::NonVaccinated => (
                    2.0 * (1.0 - p.sigma_n) * w_nn * i_n + 2.0 * (1.0 - p.sigma_v) * uniform * i_v,
                    p.lambda,
                    p.p_q,
                ),
                Group::Vaccinated => (
                    2.0 * (1.0 - p.sigma_n) * uniform * i_n + 2.0 * (1.0 - p.sigma_v) * w_vv * i_v,
                    p.lambda * (1.0 - p.gamma_t),
                    p.p_q * (1.0 - p.gamma_q),
                ),
            };
            let pressure = infect * alpha * s;
            [
                -pressure + p.beta * (i + q),
                (1.0 - severe) * pressure - (p.beta + p.tau) * i,
                severe * pressure + p.tau * i - p.beta * q,
            ]
        })
        .collect()
}

/// Which mean-field system to integrate.
#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Macro(MacroState),
    Micro(MicroState),
}

/// Classical fixed-step RK4 over `[0, horizon]`, sampling the macroscopic
/// fractions every `sample_interval`. The step is rounded so that each
/// sampling interval holds a whole number of steps of size as close to
/// `dt` as possible.
pub fn integrate(
    system: System,
    params: &ModelParams,
    horizon: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<Trajectory, MeanFieldError> {
    assert!(dt > 0.0 && horizon > 0.0 && sample_interval > 0.0);
    match system {
        System::Macro(y0) => {
            check_macro_params(params)?;
            let mut y = y0.as_array().to_vec();
            integrate_impl(
                &mut y,
                |y, dy| {
                    let d = macro_rhs_unchecked(y.try_into().expect("6 components"), params);
                    dy.copy_from_slice(&d);
                },
                |y| y.try_into().expect("6 components"),
                horizon,
                dt,
                sample_interval,
            )
        }
        System::Micro(m0) => {
            micro_rhs(&m0, params)?; // surfaces size errors up front
            let n = m0.probs.len();
            let split = params.split();
            let mut y: Vec<f64> = m0.probs.iter().flatten().copied().collect();
            let mut triples = vec![[0.0f64; 3]; n];
            integrate_impl(
                &mut y,
                move |y, dy| {
                    for (t, c) in triples.iter_mut().zip(y.chunks_exact(3)) {
                        t.copy_from_slice(c);
                    }
                    let d = micro_rhs_unchecked(&triples, params);
                    for (out, t) in dy.chunks_exact_mut(3).zip(&d) {
                        out.copy_from_slice(t);
                    }
                },
                |y| {
                    let mut agg = [0.0f64; 6];
                    for (j, c) in y.chunks_exact(3).enumerate() {
                        let base = match split.group_of(j) {
                            Group::NonVaccinated => 0,
                            Group::Vaccinated => 3,
                        };
                        for k in 0..3 {
                            agg[base + k] += c[k];
                        }
                    }
                    for a in &mut agg {
                        *a /= n as f64;
                    }
                    agg
                },
                horizon,
                dt,
                sample_interval,
            )
        }
    }
}

const STATE_TOLERANCE: f64 = 1e-9;

fn integrate_impl(
    y: &mut Vec<f64>,
    mut rhs: impl FnMut(&[f64], &mut [f64]),
    mut observe: impl FnMut(&[f64]) -> [f64; 6],
    horizon: f64,
    dt: f64,
    sample_interval: f64,
) -> Result<Trajectory, MeanFieldError> {
    let n_samples = (horizon / sample_interval + 1e-9).floor() as usize;
    let steps_per_sample = (sample_interval / dt).round().max(1.0) as usize;
    let h = sample_interval / steps_per_sample as f64;

    let dim = y.len();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];

    let mut traj = Trajectory::new();
    traj.push(0.0, observe(y));
    for sample in 1..=n_samples {
        for _ in 0..steps_per_sample {
            rhs(y, &mut k1);
            for d in 0..dim {
                tmp[d] = y[d] + 0.5 * h * k1[d];
            }
            rhs(&tmp, &mut k2);
            for d in 0..dim {
                tmp[d] = y[d] + 0.5 * h * k2[d];
            }
            rhs(&tmp, &mut k3);
            for d in 0..dim {
                tmp[d] = y[d] + h * k3[d];
            }
            rhs(&tmp, &mut k4);
            for d in 0..dim {
                y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        let t = sample as f64 * sample_interval;
        if !y
            .iter()
            .all(|&c| c >= -STATE_TOLERANCE && c <= 1.0 + STATE_TOLERANCE)
        {
            return Err(MeanFieldError::NonFiniteState { t });
        }
        traj.push(t, observe(y));
    }
    Ok(traj)
}
