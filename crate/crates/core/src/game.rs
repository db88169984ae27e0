//! The traffic game: cost ladders, Logit route choice, and the conditional
//! expected costs that drive both the stochastic process and the mean-field
//! dynamics.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A finite congestion game on parallel routes.
///
/// Each route `r` carries a non-decreasing cost ladder `C^r_1 <= ... <= C^r_N`:
/// the travel time when `u` drivers share the route is `C^r_u`. Each player
/// `i` has a Logit sensitivity `beta_i > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGame", into = "RawGame")]
pub struct TrafficGame {
    num_players: usize,
    num_routes: usize,
    /// `costs[r][u]` is the travel time of route `r` with `u + 1` users.
    costs: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

/// Wire form of the game JSON schema. Routes are 0-indexed externally.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGame {
    num_players: usize,
    num_routes: usize,
    costs: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

impl TryFrom<RawGame> for TrafficGame {
    type Error = Error;
    fn try_from(raw: RawGame) -> Result<Self> {
        TrafficGame::new(raw.num_players, raw.num_routes, raw.costs, raw.betas)
    }
}

impl From<TrafficGame> for RawGame {
    fn from(g: TrafficGame) -> Self {
        RawGame {
            num_players: g.num_players,
            num_routes: g.num_routes,
            costs: g.costs,
            betas: g.betas,
        }
    }
}

impl TrafficGame {
    pub fn new(
        num_players: usize,
        num_routes: usize,
        costs: Vec<Vec<f64>>,
        betas: Vec<f64>,
    ) -> Result<Self> {
        if num_players < 2 {
            return Err(Error::InvalidGame(format!(
                "need at least 2 players, got {num_players}"
            )));
        }
        if num_routes < 2 {
            return Err(Error::InvalidGame(format!(
                "need at least 2 routes, got {num_routes}"
            )));
        }
        if costs.len() != num_routes {
            return Err(Error::InvalidGame(format!(
                "expected {} cost ladders, got {}",
                num_routes,
                costs.len()
            )));
        }
        for (r, ladder) in costs.iter().enumerate() {
            if ladder.len() != num_players {
                return Err(Error::InvalidGame(format!(
                    "route {r}: ladder has {} entries, expected {}",
                    ladder.len(),
                    num_players
                )));
            }
            if ladder.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidGame(format!("route {r}: non-finite cost")));
            }
            for u in 1..num_players {
                if ladder[u - 1] > ladder[u] {
                    return Err(Error::InvalidGame(format!(
                        "route {r}: ladder not non-decreasing at position {u}"
                    )));
                }
            }
        }
        if betas.len() != num_players {
            return Err(Error::InvalidGame(format!(
                "expected {} betas, got {}",
                num_players,
                betas.len()
            )));
        }
        if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidGame("betas must be positive".into()));
        }
        Ok(TrafficGame {
            num_players,
            num_routes,
            costs,
            betas,
        })
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_routes(&self) -> usize {
        self.num_routes
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.betas[i]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Cost of route `r` carrying `load` drivers (1-based load).
    pub fn cost(&self, r: usize, load: usize) -> f64 {
        debug_assert!((1..=self.num_players).contains(&load));
        self.costs[r][load - 1]
    }

    pub fn cost_ladder(&self, r: usize) -> &[f64] {
        &self.costs[r]
    }

    pub fn min_cost(&self, r: usize) -> f64 {
        self.costs[r][0]
    }

    pub fn max_cost(&self, r: usize) -> f64 {
        self.costs[r][self.num_players - 1]
    }

    pub fn is_two_by_two(&self) -> bool {
        self.num_players == 2 && self.num_routes == 2
    }
}

/// Per-player, per-route array indexed player-major: entry `(i, r)` lives at
/// `i * M + r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateProfile {
    num_players: usize,
    num_routes: usize,
    data: Vec<f64>,
}

impl EstimateProfile {
    pub fn new(num_players: usize, num_routes: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_players * num_routes {
            return Err(Error::DimensionMismatch {
                expected: num_players * num_routes,
                got: data.len(),
            });
        }
        Ok(EstimateProfile {
            num_players,
            num_routes,
            data,
        })
    }

    pub fn zeros(num_players: usize, num_routes: usize) -> Self {
        EstimateProfile {
            num_players,
            num_routes,
            data: vec![0.0; num_players * num_routes],
        }
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_routes(&self) -> usize {
        self.num_routes
    }

    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.data[i * self.num_routes + r]
    }

    pub fn set(&mut self, i: usize, r: usize, v: f64) {
        self.data[i * self.num_routes + r] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Infinity-norm distance to `other`.
    pub fn inf_distance(&self, other: &EstimateProfile) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Profile with the two players of a 2x2 game exchanged.
    pub fn swap_players(&self) -> EstimateProfile {
        assert_eq!(self.num_players, 2);
        let m = self.num_routes;
        let mut data = Vec::with_capacity(2 * m);
        data.extend_from_slice(&self.data[m..]);
        data.extend_from_slice(&self.data[..m]);
        EstimateProfile {
            num_players: 2,
            num_routes: m,
            data,
        }
    }
}

/// Logit choice probabilities, one distribution per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceProfile {
    num_players: usize,
    num_routes: usize,
    pi: Vec<f64>,
}

impl ChoiceProfile {
    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.pi[i * self.num_routes + r]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pi[i * self.num_routes..(i + 1) * self.num_routes]
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_routes(&self) -> usize {
        self.num_routes
    }
}

/// Logit probabilities `pi^{ir} = exp(-beta_i x^{ir}) / sum_s exp(-beta_i x^{is})`.
///
/// Computed with per-player max-subtraction so the exponentials never
/// overflow.
pub fn logit_probabilities(game: &TrafficGame, x: &EstimateProfile) -> ChoiceProfile {
    let n = game.num_players();
    let m = game.num_routes();
    let mut pi = vec![0.0; n * m];
    for i in 0..n {
        let beta = game.beta(i);
        let row = &mut pi[i * m..(i + 1) * m];
        let mut t_max = f64::NEG_INFINITY;
        for r in 0..m {
            let t = -beta * x.get(i, r);
            row[r] = t;
            t_max = t_max.max(t);
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - t_max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    ChoiceProfile {
        num_players: n,
        num_routes: m,
        pi,
    }
}

/// Distribution of the number of successes among independent Bernoulli trials
/// with probabilities `probs`, by the standard one-trial-at-a-time fold.
pub fn poisson_binomial(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut dist = vec![1.0];
    for p in probs {
        let mut next = vec![0.0; dist.len() + 1];
        for (u, d) in dist.iter().enumerate() {
            next[u] += d * (1.0 - p);
            next[u + 1] += d * p;
        }
        dist = next;
    }
    dist
}

/// Expected travel time of route `r` for player `i` conditional on `i`
/// choosing `r`: the load contributed by the others is Poisson-binomial.
pub fn conditional_expected_cost(
    game: &TrafficGame,
    pi: &ChoiceProfile,
    i: usize,
    r: usize,
) -> f64 {
    let n = game.num_players();
    let dist = poisson_binomial((0..n).filter(|&j| j != i).map(|j| pi.get(j, r)));
    dist.iter()
        .enumerate()
        .map(|(u, p)| game.cost(r, 1 + u) * p)
        .sum()
}

/// Literal subset-sum evaluation of the conditional expected cost. Test
/// oracle only; rejects `N > 20`.
pub fn brute_force_conditional_cost(
    game: &TrafficGame,
    pi: &ChoiceProfile,
    i: usize,
    r: usize,
) -> Result<f64> {
    let n = game.num_players();
    if n > 20 {
        return Err(Error::EnumerationTooLarge(n));
    }
    let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << others.len()) {
        let mut prob = 1.0;
        let mut load = 0usize;
        for (bit, &j) in others.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                prob *= pi.get(j, r);
                load += 1;
            } else {
                prob *= 1.0 - pi.get(j, r);
            }
        }
        total += prob * game.cost(r, 1 + load);
    }
    Ok(total)
}

/// Expected cost increment `E[C^r_{2+u} - C^r_{1+u}]` over the load `u` of
/// the players other than `i` and `k`. Zero when `i == k`.
pub fn lambda(game: &TrafficGame, pi: &ChoiceProfile, i: usize, k: usize, r: usize) -> f64 {
    if i == k {
        return 0.0;
    }
    let n = game.num_players();
    let dist = poisson_binomial((0..n).filter(|&j| j != i && j != k).map(|j| pi.get(j, r)));
    dist.iter()
        .enumerate()
        .map(|(u, p)| (game.cost(r, 2 + u) - game.cost(r, 1 + u)) * p)
        .sum()
}

/// The sufficient condition for a unique, globally attracting rest point:
/// `omega * delta_jump < 2` with `omega = max_i sum_{j != i} beta_j` and
/// `delta_jump` the largest congestion jump of any ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessBound {
    pub omega: f64,
    pub delta_jump: f64,
    pub product: f64,
    pub unique_guaranteed: bool,
}

pub fn uniqueness_bound(game: &TrafficGame) -> UniquenessBound {
    let beta_sum: f64 = game.betas().iter().sum();
    let omega = game
        .betas()
        .iter()
        .map(|b| beta_sum - b)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut delta_jump = 0.0f64;
    for r in 0..game.num_routes() {
        let ladder = game.cost_ladder(r);
        for u in 1..ladder.len() {
            delta_jump = delta_jump.max(ladder[u] - ladder[u - 1]);
        }
    }
    let product = omega * delta_jump;
    UniquenessBound {
        omega,
        delta_jump,
        product,
        unique_guaranteed: product < 2.0,
    }
}
