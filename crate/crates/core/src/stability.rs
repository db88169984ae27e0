//! Linear stability of rest points: the analytic Jacobian, its
//! characteristic polynomial, the Routh-Hurwitz minor test, and independent
//! oracles (finite differences, Durand-Kerner roots).

use nalgebra::DMatrix;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{lambda, logit_probabilities, EstimateProfile, TrafficGame};
use crate::mean_field::{vector_field, RestPoint};
use crate::Result;

/// Residual above which the analytic Jacobian formula is refused: it drops
/// the `(C - x) * dpi` term, which vanishes only at rest points.
pub const REST_POINT_GATE: f64 = 1e-8;

/// Minors inside this band are reported as marginal rather than binarized.
pub const MARGINAL_BAND: f64 = 1e-12;

/// Jacobian of the mean-field vector field at a rest point, stored dense
/// with `M x M` blocks in player-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub matrix: DMatrix<f64>,
    pub num_players: usize,
    pub num_routes: usize,
}

impl JacobianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Analytic Jacobian per the rest-point formula
/// `dG^{ir}/dx^{ks} = pi^{ir} (beta_k pi_k^r (pi_k^s - delta_rs) Lambda_ik^r - delta_ik delta_rs)`.
pub fn jacobian_at_rest_point(game: &TrafficGame, rest: &RestPoint) -> Result<JacobianMatrix> {
    if !(rest.residual < REST_POINT_GATE) {
        return Err(Error::NotARestPoint {
            residual: rest.residual,
            limit: REST_POINT_GATE,
        });
    }
    let n = game.num_players();
    let m = game.num_routes();
    let pi = logit_probabilities(game, &rest.x);
    let mut jac = DMatrix::zeros(n * m, n * m);
    for i in 0..n {
        for r in 0..m {
            let row = i * m + r;
            for k in 0..n {
                let beta_k = game.beta(k);
                let lam = lambda(game, &pi, i, k, r);
                for s in 0..m {
                    let col = k * m + s;
                    let delta_rs = if r == s { 1.0 } else { 0.0 };
                    let delta_ik = if i == k { 1.0 } else { 0.0 };
                    jac[(row, col)] = pi.get(i, r)
                        * (beta_k * pi.get(k, r) * (pi.get(k, s) - delta_rs) * lam
                            - delta_ik * delta_rs);
                }
            }
        }
    }
    Ok(JacobianMatrix {
        matrix: jac,
        num_players: n,
        num_routes: m,
    })
}

/// Central-difference Jacobian of the vector field, valid at any `x`.
pub fn finite_difference_jacobian(game: &TrafficGame, x: &EstimateProfile, h: f64) -> DMatrix<f64> {
    assert!(h > 0.0);
    let dim = x.as_slice().len();
    let mut jac = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut plus = x.clone();
        plus.as_mut_slice()[col] += h;
        let mut minus = x.clone();
        minus.as_mut_slice()[col] -= h;
        let gp = vector_field(game, &plus);
        let gm = vector_field(game, &minus);
        for row in 0..dim {
            jac[(row, col)] = (gp.as_slice()[row] - gm.as_slice()[row]) / (2.0 * h);
        }
    }
    jac
}

/// Monic characteristic polynomial `det(lambda I - J)`, coefficients
/// `a_0 = 1, a_1, ..., a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharPoly {
    pub coefficients: Vec<f64>,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `a_k`, zero outside `0..=n`.
    pub fn coeff(&self, k: isize) -> f64 {
        if k < 0 || k as usize >= self.coefficients.len() {
            0.0
        } else {
            self.coefficients[k as usize]
        }
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    }
}

/// Characteristic polynomial via the Faddeev-LeVerrier recurrence.
pub fn characteristic_polynomial(matrix: &DMatrix<f64>) -> Result<CharPoly> {
    let n = matrix.nrows();
    assert_eq!(n, matrix.ncols());
    if n > 64 {
        return Err(Error::MatrixTooLarge(n));
    }
    let mut coefficients = Vec::with_capacity(n + 1);
    coefficients.push(1.0);
    let mut m = matrix.clone();
    for k in 1..=n {
        let c = -m.trace() / k as f64;
        coefficients.push(c);
        if k < n {
            for d in 0..n {
                m[(d, d)] += c;
            }
            m = matrix * m;
        }
    }
    Ok(CharPoly { coefficients })
}

/// Leading principal minors `Delta_1..Delta_n` of the Hurwitz matrix.
///
/// Row `i`, column `j` (0-based) holds `a_{2(j+1) - (i+1)}` with the usual
/// zero convention outside `0..=n`.
pub fn hurwitz_minors(p: &CharPoly) -> Vec<f64> {
    assert!(p.coefficients[0] > 0.0, "leading coefficient must be positive");
    let n = p.degree();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] = p.coeff(2 * (j as isize + 1) - (i as isize + 1));
        }
    }
    (1..=n)
        .map(|k| h.view((0, 0), (k, k)).into_owned().lu().determinant())
        .collect()
}

/// Which computation produced a stability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMethod {
    RouthHurwitz,
    RootsOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub marginal: bool,
    pub minors: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub method: VerdictMethod,
    pub max_real_part: Option<f64>,
}

/// Routh-Hurwitz test: stable iff every leading minor is positive. Minors
/// with `|Delta_k| < 1e-12` flag the verdict as marginal (boundary case,
/// e.g. a zero eigenvalue).
pub fn routh_hurwitz_stable(p: &CharPoly) -> StabilityVerdict {
    let minors = hurwitz_minors(p);
    let marginal = minors.iter().any(|d| d.abs() < MARGINAL_BAND);
    let stable = minors.iter().all(|d| *d > 0.0) && !marginal;
    StabilityVerdict {
        stable,
        marginal,
        minors,
        coefficients: p.coefficients.clone(),
        method: VerdictMethod::RouthHurwitz,
        max_real_part: None,
    }
}

/// The real root of `z^3 - 5 z^2 + 4 z - 1`, bisected at startup to 1e-14.
static Z_BAR: Lazy<f64> = Lazy::new(|| {
    let f = |z: f64| z * z * z - 5.0 * z * z + 4.0 * z - 1.0;
    let (mut lo, mut hi) = (4.0, 5.0);
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
});

/// Sufficient stability test: all `a_k > 0` and
/// `a_k a_{k+1} >= z_bar a_{k-1} a_{k+2}` for `k = 1..n-2`.
pub fn dimitrov_pena_sufficient(p: &CharPoly) -> bool {
    let n = p.degree() as isize;
    if p.coefficients.iter().skip(1).any(|a| *a <= 0.0) {
        return false;
    }
    (1..=n.saturating_sub(2)).all(|k| {
        p.coeff(k) * p.coeff(k + 1) >= *Z_BAR * p.coeff(k - 1) * p.coeff(k + 2)
    })
}

/// All complex roots by Durand-Kerner simultaneous iteration, residual
/// below 1e-12. Retries once on a radius-scaled polynomial.
pub fn polynomial_roots(p: &CharPoly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    assert!(n >= 1);
    durand_kerner(&p.coefficients, 1.0).or_else(|_| {
        // scale the variable by the root-magnitude bound and retry
        let scale = p
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| a.abs().powf(1.0 / k as f64))
            .fold(1.0, f64::max);
        durand_kerner(&p.coefficients, scale)
    })
}

fn durand_kerner(coefficients: &[f64], scale: f64) -> Result<Vec<Complex64>> {
    let n = coefficients.len() - 1;
    // work on the monic polynomial in w = z / scale
    let monic: Vec<f64> = coefficients
        .iter()
        .enumerate()
        .map(|(k, a)| a / coefficients[0] / scale.powi(k as i32))
        .collect();
    let eval = |z: Complex64| {
        monic
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    let max_iters = 10_000;
    for _ in 0..max_iters {
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    den *= roots[i] - roots[j];
                }
            }
            if den.norm() == 0.0 {
                roots[i] += Complex64::new(1e-8, 1e-8);
                continue;
            }
            let delta = eval(roots[i]) / den;
            roots[i] -= delta;
        }
        let residual = roots.iter().map(|z| eval(*z).norm()).fold(0.0, f64::max);
        if residual < 1e-12 {
            let mut out: Vec<Complex64> = roots.iter().map(|z| z * scale).collect();
            out.sort_by(|a, b| {
                a.re.partial_cmp(&b.re)
                    .unwrap()
                    .then(a.im.partial_cmp(&b.im).unwrap())
            });
            return Ok(out);
        }
    }
    Err(Error::RootsDiverged(max_iters))
}

pub fn max_real_part(roots: &[Complex64]) -> f64 {
    roots.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Full stability dossier for one rest point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestPointReport {
    pub x: EstimateProfile,
    pub residual: f64,
    pub verdict: StabilityVerdict,
}

/// Jacobian, characteristic polynomial, Routh-Hurwitz verdict and root
/// oracle for a computed rest point.
pub fn analyze_rest_point(game: &TrafficGame, rest: &RestPoint) -> Result<RestPointReport> {
    let jac = jacobian_at_rest_point(game, rest)?;
    let poly = characteristic_polynomial(&jac.matrix)?;
    let mut verdict = routh_hurwitz_stable(&poly);
    if let Ok(roots) = polynomial_roots(&poly) {
        verdict.max_real_part = Some(max_real_part(&roots));
    }
    Ok(RestPointReport {
        x: rest.x.clone(),
        residual: rest.residual,
        verdict,
    })
}
