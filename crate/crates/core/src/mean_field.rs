//! Mean-field dynamics: the ODE vector field, a fixed-step RK4 integrator,
//! a multi-start rest-point solver, and the orthant order used by the
//! monotonicity results.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{
    conditional_expected_cost, lambda, logit_probabilities, EstimateProfile, TrafficGame,
};
use crate::Result;

pub const REST_POINT_TOLERANCE: f64 = 1e-10;
const SOLVER_TOLERANCE: f64 = 1e-12;
const DEDUP_THRESHOLD: f64 = 1e-6;
const DIVERGENCE_BOUND: f64 = 1e12;

/// How an integration run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalFlag {
    Converged,
    MaxTime,
    Diverged,
}

/// Time-stamped sequence of estimate profiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<EstimateProfile>,
    pub terminal_flag: TerminalFlag,
}

impl Trajectory {
    pub fn final_state(&self) -> &EstimateProfile {
        self.states.last().expect("trajectory has at least one state")
    }

    /// CSV with header `t,x_1_1,...,x_N_M`, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        if let Some(first) = self.states.first() {
            for i in 0..first.num_players() {
                for r in 0..first.num_routes() {
                    out.push_str(&format!(",x_{}_{}", i + 1, r + 1));
                }
            }
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t}"));
            for v in state.as_slice() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// A located rest point together with the residual `||G(x)||_inf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestPoint {
    pub x: EstimateProfile,
    pub residual: f64,
}

/// The map `x -> C(x)` of conditional expected costs, entry by entry.
pub fn cost_map(game: &TrafficGame, x: &EstimateProfile) -> EstimateProfile {
    let pi = logit_probabilities(game, x);
    let mut out = EstimateProfile::zeros(game.num_players(), game.num_routes());
    for i in 0..game.num_players() {
        for r in 0..game.num_routes() {
            out.set(i, r, conditional_expected_cost(game, &pi, i, r));
        }
    }
    out
}

/// The mean-field vector field `G^{ir}(x) = pi^{ir} (C^{ir} - x^{ir})`.
pub fn vector_field(game: &TrafficGame, x: &EstimateProfile) -> EstimateProfile {
    let pi = logit_probabilities(game, x);
    let mut out = EstimateProfile::zeros(game.num_players(), game.num_routes());
    for i in 0..game.num_players() {
        for r in 0..game.num_routes() {
            let c = conditional_expected_cost(game, &pi, i, r);
            out.set(i, r, pi.get(i, r) * (c - x.get(i, r)));
        }
    }
    out
}

pub fn residual(game: &TrafficGame, x: &EstimateProfile) -> f64 {
    vector_field(game, x)
        .as_slice()
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max)
}

/// Fixed-step classical RK4. Stops early (`Converged`) once
/// `||G(x)||_inf < tol`; flags `Diverged` if any entry leaves
/// `[-1e12, 1e12]`. States are recorded every `sample_stride` steps.
pub fn integrate(
    game: &TrafficGame,
    x0: &EstimateProfile,
    step: f64,
    t_max: f64,
    tol: f64,
    sample_stride: usize,
) -> Trajectory {
    integrate_with(game, x0, step, t_max, tol, sample_stride, vector_field)
}

/// The field of the time-rescaled dynamics `x' = C(x) - x`. Same rest
/// points as [`vector_field`] (each coordinate is divided by its positive
/// choice probability), but this flow satisfies the orthant sign condition
/// at *every* state, not just at rest points, so it is the one that
/// provably preserves the `<=_s` order between orbits.
pub fn normalized_vector_field(game: &TrafficGame, x: &EstimateProfile) -> EstimateProfile {
    let c = cost_map(game, x);
    let mut g = x.clone();
    for j in 0..g.as_slice().len() {
        g.as_mut_slice()[j] = c.as_slice()[j] - x.as_slice()[j];
    }
    g
}

/// [`integrate`] for the time-rescaled flow of [`normalized_vector_field`];
/// convergence is `||C(x) - x||_inf < tol`.
pub fn integrate_normalized(
    game: &TrafficGame,
    x0: &EstimateProfile,
    step: f64,
    t_max: f64,
    tol: f64,
    sample_stride: usize,
) -> Trajectory {
    integrate_with(game, x0, step, t_max, tol, sample_stride, normalized_vector_field)
}

fn integrate_with(
    game: &TrafficGame,
    x0: &EstimateProfile,
    step: f64,
    t_max: f64,
    tol: f64,
    sample_stride: usize,
    field: fn(&TrafficGame, &EstimateProfile) -> EstimateProfile,
) -> Trajectory {
    assert!(step > 0.0 && t_max > 0.0);
    let stride = sample_stride.max(1);
    let dim = x0.as_slice().len();
    let mut x = x0.clone();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let num_steps = (t_max / step).ceil() as usize;

    let record = |times: &mut Vec<f64>, states: &mut Vec<EstimateProfile>, t: f64, x: &EstimateProfile| {
        if *times.last().unwrap() < t {
            times.push(t);
            states.push(x.clone());
        }
    };

    let field_norm = |x: &EstimateProfile| {
        field(game, x)
            .as_slice()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    };
    let mut flag = TerminalFlag::MaxTime;
    if field_norm(&x) < tol {
        return Trajectory {
            times,
            states,
            terminal_flag: TerminalFlag::Converged,
        };
    }
    for n in 0..num_steps {
        let k1 = field(game, &x);
        let mut x2 = x.clone();
        for j in 0..dim {
            x2.as_mut_slice()[j] = x.as_slice()[j] + 0.5 * step * k1.as_slice()[j];
        }
        let k2 = field(game, &x2);
        let mut x3 = x.clone();
        for j in 0..dim {
            x3.as_mut_slice()[j] = x.as_slice()[j] + 0.5 * step * k2.as_slice()[j];
        }
        let k3 = field(game, &x3);
        let mut x4 = x.clone();
        for j in 0..dim {
            x4.as_mut_slice()[j] = x.as_slice()[j] + step * k3.as_slice()[j];
        }
        let k4 = field(game, &x4);
        for j in 0..dim {
            x.as_mut_slice()[j] += step / 6.0
                * (k1.as_slice()[j]
                    + 2.0 * k2.as_slice()[j]
                    + 2.0 * k3.as_slice()[j]
                    + k4.as_slice()[j]);
        }
        let t = (n + 1) as f64 * step;
        if x.as_slice().iter().any(|v| v.abs() > DIVERGENCE_BOUND) {
            record(&mut times, &mut states, t, &x);
            flag = TerminalFlag::Diverged;
            break;
        }
        if (n + 1) % stride == 0 {
            record(&mut times, &mut states, t, &x);
        }
        if field_norm(&x) < tol {
            record(&mut times, &mut states, t, &x);
            flag = TerminalFlag::Converged;
            break;
        }
    }
    if *times.last().unwrap() < num_steps as f64 * step && flag == TerminalFlag::MaxTime {
        let t = num_steps as f64 * step;
        times.push(t);
        states.push(x.clone());
    }
    Trajectory {
        times,
        states,
        terminal_flag: flag,
    }
}

/// Jacobian of the fixed-point map `F(x) = C(x) - x`, valid at any `x`
/// (the cost map depends on `x^k` only through the Logit probabilities).
fn fixed_point_map_jacobian(game: &TrafficGame, x: &EstimateProfile) -> DMatrix<f64> {
    let n = game.num_players();
    let m = game.num_routes();
    let dim = n * m;
    let pi = logit_probabilities(game, x);
    let mut jac = DMatrix::zeros(dim, dim);
    for i in 0..n {
        for r in 0..m {
            let row = i * m + r;
            jac[(row, row)] -= 1.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let lam = lambda(game, &pi, i, k, r);
                let beta_k = game.beta(k);
                for s in 0..m {
                    let col = k * m + s;
                    let dpi = if s == r {
                        -beta_k * pi.get(k, r) * (1.0 - pi.get(k, r))
                    } else {
                        beta_k * pi.get(k, r) * pi.get(k, s)
                    };
                    jac[(row, col)] += lam * dpi;
                }
            }
        }
    }
    jac
}

fn solver_residual(game: &TrafficGame, x: &EstimateProfile) -> f64 {
    cost_map(game, x).inf_distance(x)
}

/// Newton iteration on `C(x) - x = 0` from a single start.
fn newton_from(game: &TrafficGame, start: &EstimateProfile) -> Option<EstimateProfile> {
    let dim = start.as_slice().len();
    let mut x = start.clone();
    for _ in 0..200 {
        let c = cost_map(game, &x);
        let f = DVector::from_iterator(
            dim,
            c.as_slice().iter().zip(x.as_slice()).map(|(c, x)| c - x),
        );
        if f.amax() < SOLVER_TOLERANCE {
            return Some(x);
        }
        let jac = fixed_point_map_jacobian(game, &x);
        let delta = jac.lu().solve(&(-&f))?;
        // clamp absurd steps so a near-singular Jacobian cannot fling the
        // iterate out of the relevant region
        let scale = {
            let norm = delta.amax();
            if norm > 100.0 {
                100.0 / norm
            } else {
                1.0
            }
        };
        for j in 0..dim {
            x.as_mut_slice()[j] += scale * delta[j];
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

/// Damped fixed-point iteration `x <- (1 - gamma) x + gamma C(x)`, the
/// fallback when Newton fails; converges only to attracting rest points.
fn damped_from(game: &TrafficGame, start: &EstimateProfile) -> Option<EstimateProfile> {
    let gamma = 0.5;
    let mut x = start.clone();
    let mut checkpoint_residual = f64::INFINITY;
    for iter in 0..100_000 {
        let c = cost_map(game, &x);
        let res = c.inf_distance(&x);
        if res < SOLVER_TOLERANCE {
            return Some(x);
        }
        // bail out of starts that stopped contracting (e.g. orbiting a
        // repelling rest point) instead of exhausting the iteration budget
        if iter % 1_000 == 999 {
            if res > 0.99 * checkpoint_residual {
                return None;
            }
            checkpoint_residual = res;
        }
        for j in 0..x.as_slice().len() {
            let v = (1.0 - gamma) * x.as_slice()[j] + gamma * c.as_slice()[j];
            x.as_mut_slice()[j] = v;
        }
    }
    None
}

/// Multi-start rest-point search. Starts are uniform per coordinate in
/// `[C^r_1 - 1, C^r_N + 1]`; per-start RNG streams derive from
/// `(seed, start_index)`. Results are deduplicated at inf-norm 1e-6 and
/// sorted by their entries, so the output is independent of start order.
/// Best-effort for general `N`, `M`; the 2x2 module has the complete
/// enumeration.
pub fn find_rest_points(game: &TrafficGame, num_starts: usize, seed: u64) -> Vec<RestPoint> {
    assert!(num_starts >= 1);
    let n = game.num_players();
    let m = game.num_routes();
    let mut found: Vec<EstimateProfile> = Vec::new();
    for start_index in 0..num_starts {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(start_index as u64);
        let mut start = EstimateProfile::zeros(n, m);
        for i in 0..n {
            for r in 0..m {
                let lo = game.min_cost(r) - 1.0;
                let hi = game.max_cost(r) + 1.0;
                start.set(i, r, rng.gen_range(lo..hi));
            }
        }
        let solution = newton_from(game, &start).or_else(|| damped_from(game, &start));
        if let Some(x) = solution {
            if solver_residual(game, &x) < 10.0 * SOLVER_TOLERANCE
                && !found.iter().any(|y| y.inf_distance(&x) < DEDUP_THRESHOLD)
            {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .find_map(|(u, v)| {
                let ord = u.partial_cmp(v).unwrap();
                (ord != std::cmp::Ordering::Equal).then_some(ord)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found
        .into_iter()
        .map(|x| {
            let res = residual(game, &x);
            RestPoint { x, residual: res }
        })
        .collect()
}

/// The orthant partial order `x <=_s y` iff `s_j (y_j - x_j) >= -1e-12`
/// for every coordinate (flattened player-major, route-minor).
pub fn order_leq_s(x: &EstimateProfile, y: &EstimateProfile, s: &[i8]) -> Result<bool> {
    let dim = x.as_slice().len();
    if y.as_slice().len() != dim || s.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: s.len().min(y.as_slice().len()),
        });
    }
    if s.iter().any(|v| *v != 1 && *v != -1) {
        return Err(Error::Domain("sign vector entries must be +1 or -1".into()));
    }
    Ok(x.as_slice()
        .iter()
        .zip(y.as_slice())
        .zip(s)
        .all(|((xv, yv), sv)| f64::from(*sv) * (yv - xv) >= -1e-12))
}

/// The sign vector of the 2x2 monotonicity order.
pub const SIGN_2X2: [i8; 4] = [1, -1, -1, 1];
