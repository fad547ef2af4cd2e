//! Discretized driving paths: W^0 = t plus k noise or control channels.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, Result};

/// Identifies the generator behind Brownian increments; recorded in run metadata.
pub const GENERATOR: &str = "ChaCha20 (seed_from_u64, stream = path index) + rand_distr StandardNormal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DriverMode {
    /// Independent Brownian channels; `stream` selects an independent path for
    /// the same seed so that paths can be generated in any order.
    Brownian { seed: u64, stream: u64 },
    /// Piecewise-constant controls: `values[s][j]` is channel j on
    /// `[breakpoints[s], breakpoints[s+1])`, the last segment extending to infinity.
    /// Controls are zero before the first breakpoint.
    Control { breakpoints: Vec<f64>, values: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverPath {
    t_grid: Vec<f64>,
    /// Row-major, `channels` entries per step; channel 0 is dt.
    increments: Vec<f64>,
    channels: usize,
    mode: DriverMode,
}

impl DriverPath {
    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn steps(&self) -> usize {
        self.t_grid.len() - 1
    }

    /// Number of channels including the time channel.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn noise_channels(&self) -> usize {
        self.channels - 1
    }

    pub fn increments(&self, step: usize) -> &[f64] {
        &self.increments[step * self.channels..(step + 1) * self.channels]
    }

    pub fn mode(&self) -> &DriverMode {
        &self.mode
    }

    pub fn t_end(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }
}

fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(FlowError::InvalidDriver(format!("dt must be positive, got {dt}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(FlowError::InvalidDriver(format!("t_end must be positive, got {t_end}")));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    grid.push(t_end);
    Ok(grid)
}

/// Samples a driver path on the grid `0, dt, 2dt, ..., t_end` (the last step may be short).
pub fn sample_driver(mode: &DriverMode, noise_channels: usize, t_end: f64, dt: f64) -> Result<DriverPath> {
    let t_grid = time_grid(t_end, dt)?;
    let channels = noise_channels + 1;
    let steps = t_grid.len() - 1;
    let mut increments = Vec::with_capacity(steps * channels);
    match mode {
        DriverMode::Brownian { seed, stream } => {
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            rng.set_stream(*stream);
            for k in 0..steps {
                let h = t_grid[k + 1] - t_grid[k];
                increments.push(h);
                let sd = h.sqrt();
                for _ in 0..noise_channels {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    increments.push(sd * z);
                }
            }
        }
        DriverMode::Control { breakpoints, values } => {
            if breakpoints.len() != values.len() {
                return Err(FlowError::InvalidDriver(format!(
                    "{} breakpoints but {} value rows",
                    breakpoints.len(),
                    values.len()
                )));
            }
            if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|b| !b.is_finite()) {
                return Err(FlowError::InvalidDriver("breakpoints must be finite and strictly increasing".into()));
            }
            if let Some(row) = values.iter().find(|r| r.len() != noise_channels) {
                return Err(FlowError::InvalidDriver(format!(
                    "control rows need {noise_channels} entries, got {}",
                    row.len()
                )));
            }
            for k in 0..steps {
                let (a, b) = (t_grid[k], t_grid[k + 1]);
                increments.push(b - a);
                #[allow(clippy::needless_range_loop)]
                for j in 0..noise_channels {
                    let mut acc = 0.0;
                    for (s, &start) in breakpoints.iter().enumerate() {
                        let end = breakpoints.get(s + 1).copied().unwrap_or(f64::INFINITY);
                        let overlap = b.min(end) - a.max(start);
                        if overlap > 0.0 {
                            acc += overlap * values[s][j];
                        }
                    }
                    increments.push(acc);
                }
            }
        }
    }
    Ok(DriverPath { t_grid, increments, channels, mode: mode.clone() })
}
