//! The discrete-time learning process: every day each player draws a route
//! from her Logit distribution, observes the realized travel time under the
//! resulting loads, and averages it into the estimate for that route only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{logit_probabilities, EstimateProfile, TrafficGame};
use crate::mean_field::RestPoint;
use crate::Result;

/// Step-size schedule with `sum alpha_n = inf` and `sum alpha_n^2 < inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `alpha_n = a / (n + b)`
    Harmonic { a: f64, b: f64 },
    /// `alpha_n = a / (n + b)^p` with `p` in `(1/2, 1]`
    Power { a: f64, b: f64, p: f64 },
}

impl StepSchedule {
    /// The default `alpha_n = 1 / (n + 1)`.
    pub fn harmonic_default() -> Self {
        StepSchedule::Harmonic { a: 1.0, b: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, p) = match *self {
            StepSchedule::Harmonic { a, b } => (a, b, 1.0),
            StepSchedule::Power { a, b, p } => (a, b, p),
        };
        if !(a > 0.0) {
            return Err(Error::InvalidSchedule(format!("a must be positive, got {a}")));
        }
        if !(b >= 1.0) {
            return Err(Error::InvalidSchedule(format!("b must be >= 1, got {b}")));
        }
        if !(p > 0.5 && p <= 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "p must lie in (1/2, 1], got {p}"
            )));
        }
        if a > b.powf(p) {
            return Err(Error::InvalidSchedule(format!(
                "alpha_0 = {} exceeds 1",
                a / b.powf(p)
            )));
        }
        Ok(())
    }

    pub fn alpha(&self, n: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic { a, b } => a / (n as f64 + b),
            StepSchedule::Power { a, b, p } => a / (n as f64 + b).powf(p),
        }
    }
}

/// Outcome of a single simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationRun {
    pub seed: u64,
    pub steps: usize,
    pub final_state: EstimateProfile,
    /// States at steps 1, 2, 4, 8, ... plus the final step.
    pub snapshots: Option<Vec<(usize, EstimateProfile)>>,
    /// `route_counts[i][r]` = number of days player `i` chose route `r`.
    pub route_counts: Vec<Vec<u64>>,
}

/// Run the learning process for `steps` days. Deterministic given `seed`:
/// a single ChaCha stream, one uniform draw per player per day in player
/// order.
pub fn simulate(
    game: &TrafficGame,
    x0: &EstimateProfile,
    schedule: &StepSchedule,
    steps: usize,
    seed: u64,
    keep_snapshots: bool,
) -> Result<SimulationRun> {
    if steps < 1 {
        return Err(Error::Domain("steps must be >= 1".into()));
    }
    schedule.validate()?;
    let n = game.num_players();
    let m = game.num_routes();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = x0.clone();
    let mut route_counts = vec![vec![0u64; m]; n];
    let mut snapshots = keep_snapshots.then(Vec::new);
    let mut choices = vec![0usize; n];
    let mut loads = vec![0usize; m];

    for step in 0..steps {
        let pi = logit_probabilities(game, &x);
        loads.iter_mut().for_each(|l| *l = 0);
        for i in 0..n {
            let draw: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = m - 1;
            for r in 0..m {
                acc += pi.get(i, r);
                if draw < acc {
                    chosen = r;
                    break;
                }
            }
            choices[i] = chosen;
            loads[chosen] += 1;
            route_counts[i][chosen] += 1;
        }
        let alpha = schedule.alpha(step);
        for i in 0..n {
            let r = choices[i];
            let observed = game.cost(r, loads[r]);
            let v = (1.0 - alpha) * x.get(i, r) + alpha * observed;
            x.set(i, r, v);
        }
        if let Some(snaps) = snapshots.as_mut() {
            let done = step + 1;
            if done.is_power_of_two() || done == steps {
                snaps.push((done, x.clone()));
            }
        }
    }
    Ok(SimulationRun {
        seed,
        steps,
        final_state: x,
        snapshots,
        route_counts,
    })
}

/// Index of the unique rest point within inf-distance `radius` of the run's
/// final state; `None` if all are farther away. Two candidates within the
/// radius signal that the radius is too large.
pub fn empirical_limit_classification(
    run: &SimulationRun,
    rest_points: &[RestPoint],
    radius: f64,
) -> Result<Option<usize>> {
    if rest_points.is_empty() {
        return Err(Error::Domain("rest point list is empty".into()));
    }
    let close: Vec<usize> = rest_points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.x.inf_distance(&run.final_state) < radius)
        .map(|(idx, _)| idx)
        .collect();
    match close.len() {
        0 => Ok(None),
        1 => Ok(Some(close[0])),
        k => Err(Error::AmbiguousClassification(k)),
    }
}
