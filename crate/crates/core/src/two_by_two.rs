//! Complete equilibrium theory for the 2x2 game: the scalar reduction of the
//! rest-point system, exhaustive fixed-point enumeration and classification,
//! closed-form characteristic coefficients, the orthant ordering of multiple
//! equilibria, heteroclinic tracing, and the symmetric-player closed-form
//! stability boundary.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{logit_probabilities, EstimateProfile, TrafficGame};
use crate::mean_field::{self, integrate, order_leq_s, RestPoint, Trajectory, SIGN_2X2};
use crate::stability::jacobian_at_rest_point;
use crate::Result;

const ROOT_TOLERANCE: f64 = 1e-13;
const TANGENT_TOLERANCE: f64 = 1e-9;
const GRID_POINTS: usize = 4096;

/// Derived constants of a 2x2 game and the scalar maps built from them.
///
/// Route index 0 is "a", 1 is "b". `q` and `mu` exist only when
/// `delta > 0` (`mu` additionally needs symmetric players).
#[derive(Debug, Clone)]
pub struct ReducedGame2x2 {
    game: TrafficGame,
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta: f64,
    pub nu: f64,
    pub kappa: f64,
    pub c: f64,
    pub q: Option<f64>,
    pub mu: Option<f64>,
}

/// Stability of a single rest point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStability {
    Stable,
    Unstable,
    Marginal,
}

/// Closed-form characteristic coefficients at a 2x2 rest point, with the
/// sign-of-`a_4` verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability2x2 {
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub stability: PointStability,
}

/// One enumerated fixed point of the scalar reduction, lifted back to
/// estimate space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPoint2x2 {
    pub w1: f64,
    pub w2: f64,
    pub psi_prime: f64,
    pub x: EstimateProfile,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub stability: PointStability,
}

/// Which of the three mutually exclusive situations holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointCase {
    A,
    B,
    C,
}

impl FixedPointCase {
    pub fn letter(self) -> char {
        match self {
            FixedPointCase::A => 'a',
            FixedPointCase::B => 'b',
            FixedPointCase::C => 'c',
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub case: FixedPointCase,
    pub points: Vec<FixedPoint2x2>,
}

impl FixedPointReport {
    pub fn w_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.w1).collect()
    }

    pub fn psi_derivatives(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.psi_prime).collect()
    }
}

/// Result of the symmetric-player analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricReport {
    /// The unique fixed point of `theta`.
    pub w_bar: f64,
    pub theta_prime_at_w_bar: f64,
    pub psi_prime_at_w_bar: f64,
    pub report: FixedPointReport,
    /// In the three-point case: the two non-symmetric rest points map onto
    /// each other under player exchange.
    pub player_swap_verified: bool,
}

/// Build the scalar reduction of a 2x2 game.
pub fn reduce(game: &TrafficGame) -> Result<ReducedGame2x2> {
    if !game.is_two_by_two() {
        return Err(Error::NotTwoByTwo {
            players: game.num_players(),
            routes: game.num_routes(),
        });
    }
    let delta_a = game.cost(0, 2) - game.cost(0, 1);
    let delta_b = game.cost(1, 2) - game.cost(1, 1);
    let delta = delta_a + delta_b;
    let nu = game.beta(0) * game.beta(1);
    let kappa = game.cost(0, 1) - game.cost(1, 2);
    let c = (game.cost(0, 1) + game.cost(0, 2)) - (game.cost(1, 1) + game.cost(1, 2));
    let q = (delta > 0.0).then(|| {
        let q = 1.0 + 2.0 * kappa / delta;
        debug_assert!(
            (q - c / delta).abs() <= 1e-12 * (1.0 + q.abs()),
            "q = 1 + 2 kappa / delta disagrees with c / delta"
        );
        q
    });
    let symmetric = game.beta(0) == game.beta(1);
    let mu = (delta > 0.0 && symmetric).then(|| game.beta(0) * delta);
    Ok(ReducedGame2x2 {
        game: game.clone(),
        delta_a,
        delta_b,
        delta,
        nu,
        kappa,
        c,
        q,
        mu,
    })
}

impl ReducedGame2x2 {
    pub fn game(&self) -> &TrafficGame {
        &self.game
    }

    /// `rho(w) = 1 / (1 + e^w)`, the Logit probability of route a given the
    /// scaled estimate gap `w`.
    pub fn rho(&self, w: f64) -> f64 {
        1.0 / (1.0 + w.exp())
    }

    /// `phi(w) = kappa + delta rho(w)`, strictly decreasing when `delta > 0`.
    pub fn phi(&self, w: f64) -> f64 {
        self.kappa + self.delta * self.rho(w)
    }

    /// `phi'(w) = -delta rho(w)(1 - rho(w)) <= 0`.
    pub fn phi_prime(&self, w: f64) -> f64 {
        let r = self.rho(w);
        -self.delta * r * (1.0 - r)
    }

    /// `psi(w) = beta_1 phi(beta_2 phi(w))`, increasing and bounded.
    pub fn psi(&self, w: f64) -> f64 {
        self.game.beta(0) * self.phi(self.game.beta(1) * self.phi(w))
    }

    /// Chain-rule derivative `psi'(w) = nu phi'(beta_2 phi(w)) phi'(w)`.
    pub fn psi_prime(&self, w: f64) -> f64 {
        self.nu * self.phi_prime(self.game.beta(1) * self.phi(w)) * self.phi_prime(w)
    }

    /// Symmetric-player map `theta(w) = beta phi(w)` (requires
    /// `beta_1 = beta_2`).
    pub fn theta(&self, w: f64) -> f64 {
        self.game.beta(0) * self.phi(w)
    }

    pub fn theta_prime(&self, w: f64) -> f64 {
        self.game.beta(0) * self.phi_prime(w)
    }
}

/// Lift a fixed point `w1` of `psi` back to the 4-dimensional rest point.
pub fn lift(red: &ReducedGame2x2, w1: f64) -> EstimateProfile {
    let game = &red.game;
    let w2 = game.beta(1) * red.phi(w1);
    let pi_1a = red.rho(w1);
    let pi_2a = red.rho(w2);
    let c_a1 = game.cost(0, 1);
    let c_b1 = game.cost(1, 1);
    let c_b2 = game.cost(1, 2);
    EstimateProfile::new(
        2,
        2,
        vec![
            c_a1 + red.delta_a * pi_2a,
            c_b2 + (c_b1 - c_b2) * pi_2a,
            c_a1 + red.delta_a * pi_1a,
            c_b2 + (c_b1 - c_b2) * pi_1a,
        ],
    )
    .expect("2x2 profile")
}

/// Closed-form characteristic coefficients `a_2, a_3, a_4` at a rest point
/// and the `a_4 > 0` stability verdict.
pub fn stability_2x2(red: &ReducedGame2x2, rest: &RestPoint) -> Stability2x2 {
    let pi = logit_probabilities(&red.game, &rest.x);
    let z1 = pi.get(0, 0) * pi.get(0, 1);
    let z2 = pi.get(1, 0) * pi.get(1, 1);
    let y1 = pi.get(0, 0) * red.delta_a + pi.get(0, 1) * red.delta_b;
    let y2 = pi.get(1, 0) * red.delta_a + pi.get(1, 1) * red.delta_b;
    let big_z = z1 * z2;
    let big_s = z1 + z2;
    let big_y = y1 * y2;
    let big_p = z1 * y2 + z2 * y1;
    let a2 = 1.0 + big_s - red.nu * big_z * big_y;
    let a3 = big_s - red.nu * red.delta * big_z * big_p;
    let a4 = big_z * (1.0 - red.nu * red.delta * red.delta * big_z);
    let stability = if a4.abs() <= 1e-12 {
        PointStability::Marginal
    } else if a4 > 0.0 {
        PointStability::Stable
    } else {
        PointStability::Unstable
    };
    Stability2x2 {
        a2,
        a3,
        a4,
        stability,
    }
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    debug_assert!(flo * f(hi) <= 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
        if hi - lo < 1e-16 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Locate the single inflection of `psi`: the bracketed factor of `psi''`
/// is strictly decreasing in `w`.
fn inflection(red: &ReducedGame2x2) -> f64 {
    let b2 = red.game.beta(1);
    let expr = |w: f64| {
        b2 * red.delta - 2.0 * b2 * red.delta / (1.0 + (b2 * red.phi(w)).exp()) - 2.0 * w.sinh()
    };
    let mut lo = -1.0;
    let mut hi = 1.0;
    while expr(lo) <= 0.0 {
        lo *= 2.0;
    }
    while expr(hi) >= 0.0 {
        hi *= 2.0;
    }
    bisect(lo, hi, expr)
}

fn build_point(red: &ReducedGame2x2, w1: f64) -> FixedPoint2x2 {
    let x = lift(red, w1);
    let residual = mean_field::residual(&red.game, &x);
    debug_assert!(residual < 1e-9, "lifted point residual {residual:.3e}");
    let rest = RestPoint {
        x: x.clone(),
        residual,
    };
    let s = stability_2x2(red, &rest);
    FixedPoint2x2 {
        w1,
        w2: red.game.beta(1) * red.phi(w1),
        psi_prime: red.psi_prime(w1),
        x,
        a2: s.a2,
        a3: s.a3,
        a4: s.a4,
        stability: s.stability,
    }
}

/// Enumerate all fixed points of `psi` and classify the situation.
///
/// Transversal crossings come from a sign-change scan of
/// `g(w) = psi(w) - w` on a 4096-point grid followed by bisection;
/// tangential double roots are caught where `psi' = 1` with `|g|` below
/// 1e-9.
pub fn enumerate_fixed_points(red: &ReducedGame2x2) -> Result<FixedPointReport> {
    if red.delta == 0.0 {
        let w = red.game.beta(0) * red.kappa;
        return Ok(FixedPointReport {
            case: FixedPointCase::A,
            points: vec![build_point(red, w)],
        });
    }
    let beta1 = red.game.beta(0);
    let lo = beta1 * red.kappa - 1.0;
    let hi = beta1 * (red.kappa + red.delta) + 1.0;
    let g = |w: f64| red.psi(w) - w;

    let mut roots: Vec<f64> = Vec::new();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let mut prev_w = lo;
    let mut prev_g = g(lo);
    for idx in 1..GRID_POINTS {
        let w = lo + idx as f64 * step;
        let gw = g(w);
        if prev_g == 0.0 {
            roots.push(prev_w);
        } else if prev_g * gw < 0.0 {
            let root = bisect(prev_w, w, g);
            debug_assert!(g(root).abs() < ROOT_TOLERANCE.max(1e-12 * root.abs()));
            roots.push(root);
        }
        prev_w = w;
        prev_g = gw;
    }
    if prev_g == 0.0 {
        roots.push(prev_w);
    }

    // tangential double roots sit where psi' = 1, on either side of the
    // unique inflection
    let w0 = inflection(red);
    if red.psi_prime(w0) > 1.0 {
        let psi1 = |w: f64| red.psi_prime(w) - 1.0;
        let mut left = w0 - 1.0;
        while psi1(left) >= 0.0 {
            left -= (w0 - left).abs().max(1.0);
        }
        let mut right = w0 + 1.0;
        while psi1(right) >= 0.0 {
            right += (right - w0).abs().max(1.0);
        }
        for candidate in [bisect(left, w0, psi1), bisect(w0, right, psi1)] {
            if g(candidate).abs() < TANGENT_TOLERANCE
                && !roots.iter().any(|r| (r - candidate).abs() < 1e-6)
            {
                roots.push(candidate);
            }
        }
    }

    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let case = match roots.len() {
        1 => FixedPointCase::A,
        2 => FixedPointCase::B,
        3 => {
            let d: Vec<f64> = roots.iter().map(|w| red.psi_prime(*w)).collect();
            if !(d[0] < 1.0 && d[2] < 1.0 && d[1] > 1.0) {
                return Err(Error::SolverPathology(format!(
                    "three fixed points with derivative pattern {d:?}"
                )));
            }
            FixedPointCase::C
        }
        n => {
            return Err(Error::SolverPathology(format!(
                "found {n} fixed points of psi"
            )))
        }
    };
    Ok(FixedPointReport {
        case,
        points: roots.into_iter().map(|w| build_point(red, w)).collect(),
    })
}

/// Check the orthant ordering `x_- <=_s x_bar <=_s x_+` of the three rest
/// points in case (c).
pub fn order_chain(report: &FixedPointReport) -> Result<bool> {
    if report.case != FixedPointCase::C {
        return Err(Error::NotCaseC(report.case.letter()));
    }
    let lower = order_leq_s(&report.points[0].x, &report.points[1].x, &SIGN_2X2)?;
    let upper = order_leq_s(&report.points[1].x, &report.points[2].x, &SIGN_2X2)?;
    Ok(lower && upper)
}

/// Trace the two heteroclinic orbits out of the unstable middle rest point.
///
/// The dominant eigenvector of the Jacobian at the saddle is obtained by
/// power iteration on `P_s J P_s + 2I`, which is non-negative and
/// irreducible; the orbit seeded at `x_bar + eps v_bar` must converge to
/// `x_+` and the mirrored one to `x_-`.
pub fn heteroclinic_trace(
    game: &TrafficGame,
    report: &FixedPointReport,
    epsilon: f64,
) -> Result<(Trajectory, Trajectory)> {
    if report.case != FixedPointCase::C {
        return Err(Error::NotCaseC(report.case.letter()));
    }
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1e-3], got {epsilon}"
        )));
    }
    let x_bar = &report.points[1].x;
    let rest = RestPoint {
        x: x_bar.clone(),
        residual: mean_field::residual(game, x_bar),
    };
    let jac = jacobian_at_rest_point(game, &rest)?.matrix;
    // shifted similarity transform: entries of P J P + 2I are non-negative
    let dim = 4;
    let mut shifted = nalgebra::DMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            shifted[(row, col)] =
                f64::from(SIGN_2X2[row]) * f64::from(SIGN_2X2[col]) * jac[(row, col)];
        }
        shifted[(row, row)] += 2.0;
    }
    let mut v = nalgebra::DVector::from_element(dim, 0.5);
    let mut eigenvalue = 0.0;
    let mut converged = false;
    for _ in 0..100_000 {
        let next = &shifted * &v;
        let norm = next.norm();
        if norm == 0.0 {
            return Err(Error::PowerIterationFailed);
        }
        let next = next / norm;
        let delta = (&next - &v).amax();
        eigenvalue = (&shifted * &next).dot(&next);
        v = next;
        if delta < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::PowerIterationFailed);
    }
    let s_bar = eigenvalue - 2.0;
    if s_bar <= 0.0 {
        return Err(Error::SolverPathology(format!(
            "saddle eigenvalue {s_bar} is not positive"
        )));
    }
    // Perron vector is positive; v_bar = P_s v then satisfies v_bar >=_s 0
    let scale = v.amax();
    let mut seed_plus = x_bar.clone();
    let mut seed_minus = x_bar.clone();
    for j in 0..dim {
        let component = f64::from(SIGN_2X2[j]) * v[j].abs() / scale;
        seed_plus.as_mut_slice()[j] += epsilon * component;
        seed_minus.as_mut_slice()[j] -= epsilon * component;
    }
    let plus = integrate(game, &seed_plus, 0.01, 1e4, 1e-10, 25);
    let minus = integrate(game, &seed_minus, 0.01, 1e4, 1e-10, 25);
    let target_plus = &report.points[2].x;
    let target_minus = &report.points[0].x;
    if plus.final_state().inf_distance(target_plus) > 1e-6
        || minus.final_state().inf_distance(target_minus) > 1e-6
    {
        return Err(Error::WrongHeteroclinicTarget);
    }
    Ok((plus, minus))
}

/// Symmetric-player analysis: the unique fixed point of `theta`, its
/// derivative, and the one-or-three-point structure it implies.
pub fn symmetric_analysis(red: &ReducedGame2x2) -> Result<SymmetricReport> {
    let beta = red.game.beta(0);
    if red.game.beta(1) != beta {
        return Err(Error::Domain(format!(
            "players are not symmetric: beta = ({}, {})",
            beta,
            red.game.beta(1)
        )));
    }
    // theta decreases from beta (kappa + delta) to beta kappa, so its fixed
    // point is bracketed by the range endpoints padded by one
    let lo = beta * red.kappa - 1.0;
    let hi = beta * (red.kappa + red.delta) + 1.0;
    let w_bar = bisect(lo, hi, |w| red.theta(w) - w);
    let theta_prime = red.theta_prime(w_bar);
    let psi_prime = theta_prime * theta_prime;
    let report = enumerate_fixed_points(red)?;
    if report.case == FixedPointCase::B {
        return Err(Error::SolverPathology(
            "case (b) cannot occur for symmetric players".into(),
        ));
    }
    let mut player_swap_verified = true;
    if report.points.len() == 3 {
        let (w1, w2) = (report.points[0].w1, report.points[2].w1);
        let cross = (red.theta(w2) - w1).abs() < 1e-8 && (red.theta(w1) - w2).abs() < 1e-8;
        let deriv_product = red.theta_prime(w1) * red.theta_prime(w2);
        let deriv_ok = (report.points[0].psi_prime - deriv_product).abs() < 1e-8
            && (report.points[2].psi_prime - deriv_product).abs() < 1e-8
            && deriv_product < 1.0;
        let swapped = report.points[0].x.swap_players();
        let swap_ok = swapped.inf_distance(&report.points[2].x) < 1e-10;
        player_swap_verified = cross && deriv_ok && swap_ok;
    }
    Ok(SymmetricReport {
        w_bar,
        theta_prime_at_w_bar: theta_prime,
        psi_prime_at_w_bar: psi_prime,
        report,
        player_swap_verified,
    })
}

/// The closed-form boundary `h(4/mu)` of the symmetric-game parameter
/// region, with `h(x) = x arctanh(sqrt(1-x)) + sqrt(1-x)`.
///
/// Convention: for `mu > 4`, `|q| < h(4/mu)` is the region with
/// `psi'(w_bar) > 1` (three equilibria, unstable symmetric point); for
/// `mu <= 4` no instability is possible and the boundary is undefined.
pub fn symmetric_boundary(mu: f64) -> Result<f64> {
    if !(mu > 4.0) {
        return Err(Error::Domain(format!(
            "symmetric boundary needs mu > 4, got {mu}"
        )));
    }
    let x = 4.0 / mu;
    let root = (1.0 - x).sqrt();
    Ok(x * root.atanh() + root)
}

/// Cost data realizing given `(mu, q)` for a symmetric 2x2 game: `delta`
/// is fixed to 1 without loss of generality, so `beta = mu`,
/// `kappa = (q - 1) / 2`, route a carries the congestion.
pub fn synthesize_symmetric_game(mu: f64, q: f64) -> Result<TrafficGame> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let kappa = (q - 1.0) / 2.0;
    // C^b = (0, 0), C^a = (kappa, kappa + 1): delta = 1, kappa and q as asked
    TrafficGame::new(
        2,
        2,
        vec![vec![kappa, kappa + 1.0], vec![0.0, 0.0]],
        vec![mu, mu],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical_game(beta: f64) -> TrafficGame {
        TrafficGame::new(2, 2, vec![vec![1.0, 3.0], vec![1.0, 3.0]], vec![beta, beta]).unwrap()
    }

    #[test]
    fn reduce_canonical_constants() {
        let red = reduce(&canonical_game(0.5)).unwrap();
        assert_eq!(red.delta, 4.0);
        assert_eq!(red.nu, 0.25);
        assert_eq!(red.kappa, -2.0);
        assert_eq!(red.c, 0.0);
        assert_eq!(red.q, Some(0.0));
        assert_eq!(red.mu, Some(2.0));
    }

    #[test]
    fn reduce_rejects_wrong_shape() {
        let game = TrafficGame::new(
            3,
            2,
            vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(reduce(&game).is_err());
    }

    #[test]
    fn constant_costs_reduce_to_constant_psi() {
        let game =
            TrafficGame::new(2, 2, vec![vec![2.0, 2.0], vec![5.0, 5.0]], vec![1.5, 1.5]).unwrap();
        let red = reduce(&game).unwrap();
        assert_eq!(red.delta, 0.0);
        assert_eq!(red.q, None);
        assert_eq!(red.phi(3.0), red.kappa);
        assert_eq!(red.psi(-7.0), 1.5 * red.kappa);
        let report = enumerate_fixed_points(&red).unwrap();
        assert_eq!(report.case, FixedPointCase::A);
        assert_eq!(report.points.len(), 1);
        assert_eq!(report.points[0].psi_prime, 0.0);
        assert_eq!(report.points[0].stability, PointStability::Stable);
    }

    #[test]
    fn psi_prime_matches_finite_differences() {
        let red = reduce(&canonical_game(1.2)).unwrap();
        let h = 1e-6;
        for w in [-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (red.psi(w + h) - red.psi(w - h)) / (2.0 * h);
            assert!((red.psi_prime(w) - fd).abs() < 1e-8, "w = {w}");
            assert!(red.phi_prime(w) < 0.0);
        }
    }

    #[test]
    fn canonical_stable_game_case_a() {
        let red = reduce(&canonical_game(0.5)).unwrap();
        let report = enumerate_fixed_points(&red).unwrap();
        assert_eq!(report.case, FixedPointCase::A);
        assert_eq!(report.points.len(), 1);
        let p = &report.points[0];
        assert!(p.w1.abs() < 1e-12);
        // psi'(0) = (mu/4)^2 = 0.25
        assert!((p.psi_prime - 0.25).abs() < 1e-12);
        assert_eq!(p.stability, PointStability::Stable);
        assert!(p.x.inf_distance(&EstimateProfile::new(2, 2, vec![2.0; 4]).unwrap()) < 1e-12);
    }

    #[test]
    fn canonical_unstable_game_case_c() {
        let red = reduce(&canonical_game(1.5)).unwrap();
        let report = enumerate_fixed_points(&red).unwrap();
        assert_eq!(report.case, FixedPointCase::C);
        assert_eq!(report.points.len(), 3);
        let mid = &report.points[1];
        assert!(mid.w1.abs() < 1e-10);
        assert!((mid.psi_prime - 2.25).abs() < 1e-10);
        assert_eq!(mid.stability, PointStability::Unstable);
        // outer roots frozen from a high-precision solve of psi(w) = w
        let w_outer = 2.5756789099203310864;
        assert!((report.points[2].w1 - w_outer).abs() < 1e-9);
        assert!((report.points[0].w1 + w_outer).abs() < 1e-9);
        assert_eq!(report.points[0].stability, PointStability::Stable);
        assert_eq!(report.points[2].stability, PointStability::Stable);
        assert!(order_chain(&report).unwrap());
    }

    #[test]
    fn lifted_points_are_rest_points() {
        let red = reduce(&canonical_game(1.5)).unwrap();
        for p in &enumerate_fixed_points(&red).unwrap().points {
            assert!(mean_field::residual(red.game(), &p.x) < 1e-10);
        }
    }

    #[test]
    fn stability_values_on_canonical_games() {
        let red = reduce(&canonical_game(0.5)).unwrap();
        let x = EstimateProfile::new(2, 2, vec![2.0; 4]).unwrap();
        let rest = RestPoint {
            residual: mean_field::residual(red.game(), &x),
            x,
        };
        let s = stability_2x2(&red, &rest);
        assert!((s.a4 - 3.0 / 64.0).abs() < 1e-14);
        assert_eq!(s.stability, PointStability::Stable);

        let red = reduce(&canonical_game(1.5)).unwrap();
        let x = EstimateProfile::new(2, 2, vec![2.0; 4]).unwrap();
        let rest = RestPoint {
            residual: mean_field::residual(red.game(), &x),
            x,
        };
        let s = stability_2x2(&red, &rest);
        // nu delta^2 Z = 2.25 -> a4 = (1/16)(1 - 2.25)
        assert!((s.a4 + 1.25 / 16.0).abs() < 1e-14);
        assert_eq!(s.stability, PointStability::Unstable);
    }

    #[test]
    fn order_chain_rejects_case_a() {
        let red = reduce(&canonical_game(0.5)).unwrap();
        let report = enumerate_fixed_points(&red).unwrap();
        assert!(order_chain(&report).is_err());
    }

    #[test]
    fn order_chain_negative_control() {
        let red = reduce(&canonical_game(1.5)).unwrap();
        let mut report = enumerate_fixed_points(&red).unwrap();
        report.points.swap(0, 2);
        assert!(!order_chain(&report).unwrap());
    }

    #[test]
    fn heteroclinic_orbits_reach_their_targets() {
        let game = canonical_game(1.5);
        let red = reduce(&game).unwrap();
        let report = enumerate_fixed_points(&red).unwrap();
        let (plus, minus) = heteroclinic_trace(&game, &report, 1e-4).unwrap();
        assert!(plus.final_state().inf_distance(&report.points[2].x) < 1e-6);
        assert!(minus.final_state().inf_distance(&report.points[0].x) < 1e-6);
        // monotone in time along the + orbit
        for pair in plus.states.windows(2) {
            assert!(order_leq_s(&pair[0], &pair[1], &SIGN_2X2).unwrap());
        }
        for pair in minus.states.windows(2) {
            assert!(order_leq_s(&pair[1], &pair[0], &SIGN_2X2).unwrap());
        }
        // halving epsilon keeps the same limits
        let (plus2, minus2) = heteroclinic_trace(&game, &report, 5e-5).unwrap();
        assert!(plus2.final_state().inf_distance(&report.points[2].x) < 1e-6);
        assert!(minus2.final_state().inf_distance(&report.points[0].x) < 1e-6);
    }

    #[test]
    fn symmetric_analysis_canonical() {
        let red = reduce(&canonical_game(0.5)).unwrap();
        let rep = symmetric_analysis(&red).unwrap();
        assert!(rep.w_bar.abs() < 1e-12);
        assert!((rep.psi_prime_at_w_bar - 0.25).abs() < 1e-12);
        assert_eq!(rep.report.points.len(), 1);

        let red = reduce(&canonical_game(1.5)).unwrap();
        let rep = symmetric_analysis(&red).unwrap();
        assert!(rep.w_bar.abs() < 1e-12);
        assert!((rep.psi_prime_at_w_bar - 2.25).abs() < 1e-12);
        assert_eq!(rep.report.points.len(), 3);
        assert!(rep.player_swap_verified);
    }

    #[test]
    fn symmetric_analysis_rejects_asymmetric_players() {
        let game =
            TrafficGame::new(2, 2, vec![vec![1.0, 3.0], vec![1.0, 3.0]], vec![0.5, 0.6]).unwrap();
        let red = reduce(&game).unwrap();
        assert!(symmetric_analysis(&red).is_err());
    }

    #[test]
    fn symmetric_boundary_values() {
        assert!(symmetric_boundary(4.0).is_err());
        assert!(symmetric_boundary(2.0).is_err());
        // h(4/mu) -> 0 as mu -> 4+
        assert!(symmetric_boundary(4.0 + 1e-12).unwrap() < 1e-5);
        // frozen from a 50-digit evaluation of h(0.8)
        assert!((symmetric_boundary(5.0).unwrap() - 0.8321830555476407).abs() < 1e-14);
    }

    #[test]
    fn synthesized_game_realizes_mu_and_q() {
        let game = synthesize_symmetric_game(6.0, 0.25).unwrap();
        let red = reduce(&game).unwrap();
        assert_eq!(red.delta, 1.0);
        assert_eq!(red.mu, Some(6.0));
        assert!((red.q.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn boundary_convention_against_psi_prime_oracle() {
        // mu = 5, q = 0: inside |q| < h(4/mu), so psi'(w_bar) must exceed 1
        // (the canonical game at mu = 5 has psi'(0) = (5/4)^2 = 1.5625)
        let game = synthesize_symmetric_game(5.0, 0.0).unwrap();
        let red = reduce(&game).unwrap();
        let rep = symmetric_analysis(&red).unwrap();
        assert!((rep.psi_prime_at_w_bar - 1.5625).abs() < 1e-10);
        assert_eq!(rep.report.points.len(), 3);
        // just outside the boundary the symmetric point is stable and unique
        let h = symmetric_boundary(5.0).unwrap();
        let game = synthesize_symmetric_game(5.0, h + 0.05).unwrap();
        let red = reduce(&game).unwrap();
        let rep = symmetric_analysis(&red).unwrap();
        assert!(rep.psi_prime_at_w_bar < 1.0);
        assert_eq!(rep.report.points.len(), 1);
    }
}
