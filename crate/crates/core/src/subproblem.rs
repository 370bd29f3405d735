//! Closed-form proximal subproblems.
//!
//! All solvers here are coordinatewise: the approximate Bregman mapping uses
//! the diagonal metric `∇²φ(x)/λ`, and the Bregman mapping under the
//! Boltzmann-Shannon entropy has a multiplicative closed form.

use ndarray::{Array1, Zip};

use crate::error::{Error, Result};
use crate::kernels::HessDiag;
use crate::problems::Regularizer;

/// Positive floor applied to coordinates the orthant prox sends to zero
/// when the kernel needs a strictly interior point.
pub const POSITIVE_FLOOR: f64 = 1e-300;

/// Exponent bound for the multiplicative update.
pub const EXP_CLAMP: f64 = 700.0;

#[derive(Debug, Clone, Copy)]
pub struct MappingRequest<'a> {
    pub x: &'a Array1<f64>,
    pub grad: &'a Array1<f64>,
    pub lambda: f64,
    pub hess: &'a HessDiag,
    pub reg: Regularizer,
    /// Lift exact zeros of the orthant case to [`POSITIVE_FLOOR`].
    pub strict_interior: bool,
}

impl MappingRequest<'_> {
    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        for len in [self.grad.len(), self.hess.diag.len()] {
            if len != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: len,
                });
            }
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if let Some(coord) = self.hess.diag.iter().position(|&h| !(h > 0.0)) {
            return Err(Error::Metric {
                coord,
                value: self.hess.diag[coord],
            });
        }
        Ok(())
    }
}

fn soft_threshold(z: f64, r: f64) -> f64 {
    if z > r {
        z - r
    } else if z < -r {
        z + r
    } else {
        0.0
    }
}

/// Minimizer of `⟨∇f(x), u − x⟩ + g(u) + (1/2λ) Σ hᵢ (uᵢ − xᵢ)²`.
///
/// Coordinates whose Hessian entry was clamped are held at `xᵢ`.
pub fn approx_prox(req: &MappingRequest<'_>) -> Result<Array1<f64>> {
    req.validate()?;
    let lambda = req.lambda;
    let mut y = Array1::zeros(req.x.len());
    Zip::from(&mut y)
        .and(req.x)
        .and(req.grad)
        .and(&req.hess.diag)
        .and(&req.hess.clamped)
        .for_each(|yi, &xi, &gi, &hi, &clamped| {
            *yi = if clamped {
                xi
            } else {
                match req.reg {
                    Regularizer::Zero => xi - lambda * gi / hi,
                    Regularizer::L1 { theta } => {
                        soft_threshold(xi - lambda * gi / hi, lambda * theta / hi)
                    }
                    Regularizer::L1Nonneg { theta } => {
                        let v = (xi - lambda * (gi + theta) / hi).max(0.0);
                        if req.strict_interior && v == 0.0 {
                            POSITIVE_FLOOR
                        } else {
                            v
                        }
                    }
                }
            };
        });
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpgStep {
    pub y: Array1<f64>,
    /// Set when some exponent had to be clamped to `±700`.
    pub exponent_clamped: bool,
}

/// Bregman proximal gradient step under `φ₀(x) = Σ xᵢ log xᵢ` with
/// `g = θ₁‖·‖₁ + δ_{ℝⁿ₊}`: `yᵢ = xᵢ exp(−λ(∇f(x)ᵢ + θ₁))`.
pub fn bpg_prox_shannon(
    x: &Array1<f64>,
    grad: &Array1<f64>,
    lambda: f64,
    theta1: f64,
) -> Result<BpgStep> {
    if x.len() != grad.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: grad.len(),
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if let Some(coord) = x.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Domain {
            coord,
            value: x[coord],
        });
    }
    let mut clamped = false;
    let y = Zip::from(x).and(grad).map_collect(|&xi, &gi| {
        let e = -lambda * (gi + theta1);
        let e = if e.abs() > EXP_CLAMP {
            clamped = true;
            e.clamp(-EXP_CLAMP, EXP_CLAMP)
        } else {
            e
        };
        xi * e.exp()
    });
    Ok(BpgStep {
        y,
        exponent_clamped: clamped,
    })
}

/// Value of the `i`-th separable term of the approximate subproblem at `u`.
pub fn coordinate_objective(req: &MappingRequest<'_>, i: usize, u: f64) -> f64 {
    let (xi, gi, hi) = (req.x[i], req.grad[i], req.hess.diag[i]);
    let g = match req.reg {
        Regularizer::Zero => 0.0,
        Regularizer::L1 { theta } => theta * u.abs(),
        Regularizer::L1Nonneg { theta } => {
            if u < 0.0 {
                return f64::INFINITY;
            }
            theta * u
        }
    };
    gi * (u - xi) + g + hi / (2.0 * req.lambda) * (u - xi) * (u - xi)
}

/// Largest per-coordinate excess of the subproblem objective at `y` over a
/// brute-force grid minimum.
///
/// Each coordinate's minimiser lies within `λ(|gᵢ| + θ)/hᵢ` of `xᵢ`, so a grid
/// on that interval is refined around its best point until the spacing is
/// negligible. Convexity of every coordinate term makes the refinement safe.
pub fn subproblem_oracle_check(req: &MappingRequest<'_>, y: &Array1<f64>) -> f64 {
    const POINTS: i64 = 200;
    let theta = req.reg.theta();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..y.len() {
        let obj = |u: f64| coordinate_objective(req, i, u);
        let radius = 1.5 * req.lambda * (req.grad[i].abs() + theta) / req.hess.diag[i] + 1e-3;
        let (mut lo, mut hi) = (req.x[i] - radius, req.x[i] + radius);
        let mut best = f64::INFINITY;
        for _ in 0..60 {
            let step = (hi - lo) / POINTS as f64;
            let (k_best, v_best) = (0..=POINTS).map(|k| (k, obj(lo + k as f64 * step))).fold(
                (0, f64::INFINITY),
                |acc, kv| if kv.1 < acc.1 { kv } else { acc },
            );
            best = best.min(v_best);
            // 0 is a kink of the ℓ1 term and the nonnegative boundary
            best = best.min(obj(0.0));
            let centre = lo + k_best as f64 * step;
            lo = centre - step;
            hi = centre + step;
            if step <= 1e-15 * (1.0 + centre.abs()) {
                break;
            }
        }
        worst = worst.max(obj(y[i]) - best);
    }
    worst
}
