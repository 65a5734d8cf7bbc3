//! Time-stamped compartment fractions shared by the stochastic engine and
//! the mean-field integrator, plus the CSV schema used to exchange them.

use std::io::Write;

/// Column order of a sample: fractions of the whole population that are
/// susceptible / infectious / quarantined, non-vaccinated first.
pub const COLUMNS: [&str; 6] = ["S_n", "I_n", "Q_n", "S_v", "I_v", "Q_v"];

/// CSV header line for trajectory files.
pub const CSV_HEADER: &str = "t,S_n,I_n,Q_n,S_v,I_v,Q_v";

/// A sampled trajectory. `eradicated_at` is set when the infectious and
/// quarantined compartments both emptied before the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 6]>,
    pub eradicated_at: Option<f64>,
}

impl Trajectory {
    pub fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            eradicated_at: None,
        }
    }

    pub fn push(&mut self, t: f64, state: [f64; 6]) {
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> Option<&[f64; 6]> {
        self.states.last()
    }

    /// Total infected fraction (I + Q over both groups) of the final sample.
    pub fn final_infected_fraction(&self) -> f64 {
        self.last_state()
            .map(|s| s[1] + s[2] + s[4] + s[5])
            .unwrap_or(0.0)
    }

    /// Writes the trajectory as CSV. `comment` lines, if any, are emitted
    /// first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, w: &mut W, comment: Option<&str>) -> std::io::Result<()> {
        if let Some(c) = comment {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "{CSV_HEADER}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{t},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                s[0], s[1], s[2], s[3], s[4], s[5]
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self, comment: Option<&str>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comment).expect("write to Vec");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Pointwise average of trajectories sampled on one common time grid.
    ///
    /// Panics if the grids differ. `eradicated_at` is the latest time at
    /// which every replicate had already eradicated, if all did.
    pub fn average(trajectories: &[Trajectory]) -> Trajectory {
        assert!(!trajectories.is_empty(), "nothing to average");
        let times = trajectories[0].times.clone();
        for t in trajectories {
            assert_eq!(t.times, times, "trajectories sampled on different grids");
        }
        let mut states = vec![[0.0f64; 6]; times.len()];
        for t in trajectories {
            for (acc, s) in states.iter_mut().zip(&t.states) {
                for c in 0..6 {
                    acc[c] += s[c];
                }
            }
        }
        let inv = 1.0 / trajectories.len() as f64;
        for s in &mut states {
            for c in s.iter_mut() {
                *c *= inv;
            }
        }
        let eradicated_at = trajectories
            .iter()
            .map(|t| t.eradicated_at)
            .try_fold(f64::NEG_INFINITY, |acc, e| e.map(|e| acc.max(e)));
        Trajectory {
            times,
            states,
            eradicated_at,
        }
    }
}

impl Default for Trajectory {
    fn default() -> Self {
        Self::new()
    }
}
