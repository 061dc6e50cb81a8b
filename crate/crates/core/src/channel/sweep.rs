//! Offered-load sweeps: throughput versus G for one access policy.
//!
//! Every grid point gets a synthetic population of identical Poisson meters
//! whose aggregate rate gives the requested load. All points share the same
//! seed, so their arrival processes are time-scaled copies of one another
//! (common random numbers). Neighbouring points are therefore strongly
//! correlated, which keeps the shape of the curve stable.
//!
//! For CSMA the load G counts channel-access attempts, both fresh senses and
//! re-senses after a deferral. Fresh traffic is tuned with short pilot runs
//! until the measured access load matches the grid value.

use serde::{Deserialize, Serialize};

use super::{run_sim, AccessPolicy, ChannelError, ChannelParams, SimMetrics};
use crate::exec;
use crate::scenario::Scenario;
use crate::traffic::{default_profile, Arrival, MeterConfig, MeterKind, Mode};

pub const DEFAULT_SWEEP_METERS: u32 = 10_000;
const PILOT_ROUNDS: usize = 12;
const PILOT_TOLERANCE: f64 = 0.003;

/// `min:max:steps`, inclusive and evenly spaced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self, ChannelError> {
        let grid = Self { min, max, steps };
        grid.validate()?;
        Ok(grid)
    }

    /// A grid holding the single load `g`.
    pub fn single(g: f64) -> Self {
        Self {
            min: g,
            max: g,
            steps: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let single = self.steps == 1 && self.min == self.max && self.min > 0.0;
        if single {
            return Ok(());
        }
        if !(self.min > 0.0 && self.min < self.max && self.max.is_finite()) {
            return Err(ChannelError::InvalidSweep(format!(
                "need 0 < g_min < g_max, got {}..{}",
                self.min, self.max
            )));
        }
        if self.steps < 2 {
            return Err(ChannelError::InvalidSweep(format!(
                "need at least 2 steps, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i == self.steps - 1 {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `min:max:steps`, or a single value `g`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let grid = match parts.as_slice() {
            [g] => GridSpec::single(num(g)?),
            [min, max, steps] => GridSpec {
                min: num(min)?,
                max: num(max)?,
                steps: steps
                    .trim()
                    .parse()
                    .map_err(|e| format!("{steps:?}: {e}"))?,
            },
            _ => {
                return Err(format!(
                    "expected min:max:steps or a single load, got {s:?}"
                ))
            }
        };
        grid.validate().map_err(|e| e.to_string())?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub channel: ChannelParams,
    pub grid: GridSpec,
    pub seed: u64,
    /// Minimum first transmissions inside each point's measurement window.
    pub frames_per_point: u64,
    pub meters: u32,
}

impl SweepConfig {
    pub fn new(policy: AccessPolicy, grid: GridSpec, seed: u64, frames_per_point: u64) -> Self {
        Self {
            channel: ChannelParams::with_policy(policy),
            grid,
            seed,
            frames_per_point,
            meters: DEFAULT_SWEEP_METERS,
        }
    }

    pub fn policy(&self) -> AccessPolicy {
        self.channel.policy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub policy: AccessPolicy,
    pub g: f64,
    pub s_simulated: f64,
    pub s_analytic: Option<f64>,
    pub metrics: SimMetrics,
    pub seed: u64,
}

impl ThroughputPoint {
    /// Standard error of `s_simulated`.
    pub fn std_error(&self) -> f64 {
        self.metrics.s_std_error
    }
}

/// Sweep with the grid points run through [`exec::map_ordered`].
pub fn sweep(config: &SweepConfig) -> Result<Vec<ThroughputPoint>, ChannelError> {
    sweep_with(config, |points, f| exec::map_ordered(points, f))
}

pub fn sweep_sequential(config: &SweepConfig) -> Result<Vec<ThroughputPoint>, ChannelError> {
    sweep_with(config, |points, f| exec::map_sequential(points, f))
}

type PointResult = Result<ThroughputPoint, ChannelError>;

/// Sweep with a caller-supplied order-preserving map over the grid.
pub fn sweep_with<M>(config: &SweepConfig, map: M) -> Result<Vec<ThroughputPoint>, ChannelError>
where
    M: FnOnce(&[f64], &(dyn Fn(&f64) -> PointResult + Sync + Send)) -> Vec<PointResult>,
{
    config.grid.validate()?;
    if config.frames_per_point == 0 || config.meters == 0 {
        return Err(ChannelError::InvalidSweep(
            "frames_per_point and meters must be positive".into(),
        ));
    }
    let violations = config.channel.violations();
    if !violations.is_empty() {
        return Err(ChannelError::InvalidScenario(violations.join("; ")));
    }
    let points = config.grid.points();
    map(&points, &|&g| run_point(config, g))
        .into_iter()
        .collect()
}

/// Poisson population producing first-transmission load `g_fresh`, sized so
/// the measurement window holds about `frames` first transmissions.
fn synthetic_scenario(config: &SweepConfig, g_fresh: f64, frames: u64) -> Scenario {
    let airtime_s = config.channel.airtime_ms / 1e3;
    let meter = MeterConfig {
        count: config.meters,
        interval_min: f64::from(config.meters) * airtime_s / g_fresh / 60.0,
        arrival: Arrival::Poisson,
        mode: Mode::T1,
        ..default_profile(MeterKind::Electricity)
    };
    let duration_s = frames as f64 * airtime_s / g_fresh / (1.0 - super::WARMUP_FRACTION);
    Scenario::new(duration_s, config.seed, config.channel.clone(), vec![meter])
}

/// Fresh load whose steady-state access load is `g`. Access load grows
/// monotonically (and steeply near saturation) with fresh load, so this is a
/// bracketed root find in log space: regula falsi with the Illinois fix.
fn calibrate_fresh_load(config: &SweepConfig, g: f64) -> Result<f64, ChannelError> {
    let pilot_frames = (config.frames_per_point / 4).max(10_000);
    let excess = |g_fresh: f64| -> Result<f64, ChannelError> {
        let pilot = run_sim(
            &synthetic_scenario(config, g_fresh, pilot_frames),
            config.seed,
        )?;
        Ok((pilot.g_access / g).ln())
    };

    // Fresh load never exceeds access load, so `g` bounds it from above.
    let (mut hi, mut f_hi) = (g, excess(g)?);
    if f_hi.abs() < PILOT_TOLERANCE {
        return Ok(g);
    }
    let (mut lo, mut f_lo) = (g / 2.0, excess(g / 2.0)?);
    while f_lo > 0.0 {
        (hi, f_hi) = (lo, f_lo);
        lo /= 2.0;
        f_lo = excess(lo)?;
    }

    let (mut x_lo, mut x_hi) = (lo.ln(), hi.ln());
    let mut side = 0i8;
    let mut best = (f_lo.abs(), lo);
    for _ in 0..PILOT_ROUNDS {
        let x = (x_lo * f_hi - x_hi * f_lo) / (f_hi - f_lo);
        let f = excess(x.exp())?;
        if f.abs() < best.0 {
            best = (f.abs(), x.exp());
        }
        if f.abs() < PILOT_TOLERANCE {
            break;
        }
        if f > 0.0 {
            (x_hi, f_hi) = (x, f);
            if side == 1 {
                f_lo /= 2.0;
            }
            side = 1;
        } else {
            (x_lo, f_lo) = (x, f);
            if side == -1 {
                f_hi /= 2.0;
            }
            side = -1;
        }
    }
    Ok(best.1)
}

fn run_point(config: &SweepConfig, g: f64) -> PointResult {
    let policy = config.policy();
    let g_fresh = if policy == AccessPolicy::CsmaCa {
        calibrate_fresh_load(config, g)?
    } else {
        g
    };

    let metrics = run_sim(
        &synthetic_scenario(config, g_fresh, config.frames_per_point),
        config.seed,
    )?;
    let slot_matches_airtime = config.channel.slot_ms() == config.channel.airtime_ms;
    let s_analytic = match policy {
        AccessPolicy::SlottedAloha if !slot_matches_airtime => None,
        _ => Some(policy.analytic(g, config.channel.a())),
    };
    Ok(ThroughputPoint {
        policy,
        g,
        s_simulated: metrics.s_throughput,
        s_analytic,
        metrics,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points() {
        let grid: GridSpec = "0.05:1.5:15".parse().unwrap();
        let points = grid.points();
        assert_eq!(points.len(), 15);
        assert_eq!(points[0], 0.05);
        assert_eq!(points[14], 1.5);
        assert!((points[1] - (0.05 + 1.45 / 14.0)).abs() < 1e-15);
        assert_eq!("1.0".parse::<GridSpec>().unwrap().points(), [1.0]);
    }

    #[test]
    fn bad_grids() {
        assert!("0.1:1.0:1".parse::<GridSpec>().is_err());
        assert!("0:1.0:5".parse::<GridSpec>().is_err());
        assert!("1.0:0.5:5".parse::<GridSpec>().is_err());
        assert!("a:b".parse::<GridSpec>().is_err());
        assert!(matches!(
            GridSpec::new(0.1, 1.0, 1),
            Err(ChannelError::InvalidSweep(_))
        ));
    }

    #[test]
    fn steps_one_is_error() {
        let mut config = SweepConfig::new(
            AccessPolicy::PureAloha,
            GridSpec {
                min: 0.1,
                max: 1.0,
                steps: 1,
            },
            1,
            1000,
        );
        assert!(matches!(sweep(&config), Err(ChannelError::InvalidSweep(_))));
        config.grid.steps = 2;
        config.frames_per_point = 0;
        assert!(sweep(&config).is_err());
    }

    #[test]
    fn synthetic_load_matches_request() {
        let config = SweepConfig::new(AccessPolicy::PureAloha, GridSpec::single(0.3), 1, 1000);
        let scenario = synthetic_scenario(&config, 0.3, 1000);
        assert!((scenario.offered_load() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let config = SweepConfig::new(
            AccessPolicy::SlottedAloha,
            GridSpec::new(0.2, 1.2, 4).unwrap(),
            3,
            5_000,
        );
        assert_eq!(sweep(&config).unwrap(), sweep_sequential(&config).unwrap());
    }
}
