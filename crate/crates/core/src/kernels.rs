//! Kernel generating distances and the Bregman distances they induce.
//!
//! Every shipped kernel is separable, so its Hessian is diagonal and is
//! represented by the vector of diagonal entries.

use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap applied to Hessian entries that blow up (the `|x|^(p-2)`
/// term of the lp kernel at the origin).
pub const DEFAULT_HESS_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Kernel {
    /// `½‖x‖²` on all of ℝⁿ.
    SquaredEuclidean,
    /// `Σ xᵢ log xᵢ` on the nonnegative orthant, with `0 log 0 = 0`.
    BoltzmannShannon,
    /// `−Σ log xᵢ` on the positive orthant.
    Burg,
    /// `½‖x‖² + (1/p)‖x‖ₚᵖ` on all of ℝⁿ.
    LpQuadratic { p: f64, hess_cap: f64 },
    /// Boltzmann-Shannon entropy plus `½‖x‖²`.
    ShannonQuadratic,
}

/// Diagonal of `∇²φ(x)` together with the coordinates that hit the cap.
#[derive(Debug, Clone, PartialEq)]
pub struct HessDiag {
    pub diag: Array1<f64>,
    pub clamped: Vec<bool>,
}

impl HessDiag {
    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }

    /// `⟨∇²φ(x) d, d⟩`.
    pub fn quad_form(&self, d: &Array1<f64>) -> f64 {
        self.diag
            .iter()
            .zip(d.iter())
            .map(|(h, di)| h * di * di)
            .sum()
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl Kernel {
    pub fn lp_quadratic(p: f64) -> Self {
        Kernel::LpQuadratic {
            p,
            hess_cap: DEFAULT_HESS_CAP,
        }
    }

    /// Whether the domain of φ is the (closed or open) nonnegative orthant
    /// rather than all of ℝⁿ.
    pub fn is_orthant(&self) -> bool {
        matches!(
            self,
            Kernel::BoltzmannShannon | Kernel::Burg | Kernel::ShannonQuadratic
        )
    }

    /// Lower bound σ on the strong convexity modulus; 0 when unknown.
    pub fn strong_convexity_lb(&self) -> f64 {
        match self {
            Kernel::SquaredEuclidean | Kernel::LpQuadratic { .. } | Kernel::ShannonQuadratic => 1.0,
            Kernel::BoltzmannShannon | Kernel::Burg => 0.0,
        }
    }

    fn coord_in_domain(&self, xi: f64) -> bool {
        match self {
            Kernel::SquaredEuclidean | Kernel::LpQuadratic { .. } => xi.is_finite(),
            Kernel::BoltzmannShannon | Kernel::ShannonQuadratic => xi >= 0.0 && xi.is_finite(),
            Kernel::Burg => xi > 0.0 && xi.is_finite(),
        }
    }

    fn coord_in_interior(&self, xi: f64) -> bool {
        if self.is_orthant() {
            xi > 0.0 && xi.is_finite()
        } else {
            xi.is_finite()
        }
    }

    /// First coordinate that is not in `dom φ`.
    pub fn domain_violation(&self, x: &Array1<f64>) -> Option<usize> {
        x.iter().position(|&xi| !self.coord_in_domain(xi))
    }

    /// First coordinate that is not in `int dom φ`.
    pub fn interior_violation(&self, x: &Array1<f64>) -> Option<usize> {
        x.iter().position(|&xi| !self.coord_in_interior(xi))
    }

    pub fn domain_contains(&self, x: &Array1<f64>) -> bool {
        self.domain_violation(x).is_none()
    }

    pub fn interior_contains(&self, x: &Array1<f64>) -> bool {
        self.interior_violation(x).is_none()
    }

    fn check_interior(&self, x: &Array1<f64>) -> Result<()> {
        match self.interior_violation(x) {
            Some(coord) => Err(Error::Domain {
                coord,
                value: x[coord],
            }),
            None => Ok(()),
        }
    }

    /// φ(x), or `+∞` outside the domain.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        if !self.domain_contains(x) {
            return f64::INFINITY;
        }
        match *self {
            Kernel::SquaredEuclidean => 0.5 * x.dot(x),
            Kernel::BoltzmannShannon => x.iter().map(|&xi| xlogx(xi)).sum(),
            Kernel::Burg => -x.iter().map(|xi| xi.ln()).sum::<f64>(),
            Kernel::LpQuadratic { p, .. } => x
                .iter()
                .map(|&xi| 0.5 * xi * xi + xi.abs().powf(p) / p)
                .sum(),
            Kernel::ShannonQuadratic => x.iter().map(|&xi| xlogx(xi) + 0.5 * xi * xi).sum(),
        }
    }

    /// ∇φ(x) on the interior of the domain.
    pub fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_interior(x)?;
        Ok(match *self {
            Kernel::SquaredEuclidean => x.clone(),
            Kernel::BoltzmannShannon => x.mapv(|xi| xi.ln() + 1.0),
            Kernel::Burg => x.mapv(|xi| -1.0 / xi),
            Kernel::LpQuadratic { p, .. } => x.mapv(|xi| xi + xi.signum() * xi.abs().powf(p - 1.0)),
            Kernel::ShannonQuadratic => x.mapv(|xi| xi.ln() + 1.0 + xi),
        })
    }

    /// Diagonal of ∇²φ(x) on the interior of the domain.
    pub fn hess_diag(&self, x: &Array1<f64>) -> Result<HessDiag> {
        self.check_interior(x)?;
        let n = x.len();
        let mut clamped = vec![false; n];
        let diag = match *self {
            Kernel::SquaredEuclidean => Array1::ones(n),
            Kernel::BoltzmannShannon => x.mapv(|xi| 1.0 / xi),
            Kernel::Burg => x.mapv(|xi| 1.0 / (xi * xi)),
            Kernel::ShannonQuadratic => x.mapv(|xi| 1.0 / xi + 1.0),
            Kernel::LpQuadratic { p, hess_cap } => {
                let mut h = Array1::zeros(n);
                for (i, &xi) in x.iter().enumerate() {
                    let v = 1.0 + (p - 1.0) * xi.abs().powf(p - 2.0);
                    if v.is_finite() && v <= hess_cap {
                        h[i] = v;
                    } else {
                        h[i] = hess_cap;
                        clamped[i] = true;
                    }
                }
                h
            }
        };
        Ok(HessDiag { diag, clamped })
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::SquaredEuclidean => write!(f, "sq_euclid"),
            Kernel::BoltzmannShannon => write!(f, "shannon"),
            Kernel::Burg => write!(f, "burg"),
            Kernel::LpQuadratic { p, .. } => write!(f, "lp_quad(p={p})"),
            Kernel::ShannonQuadratic => write!(f, "shannon_quad"),
        }
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "sq_euclid" => return Ok(Kernel::SquaredEuclidean),
            "shannon" => return Ok(Kernel::BoltzmannShannon),
            "burg" => return Ok(Kernel::Burg),
            "shannon_quad" => return Ok(Kernel::ShannonQuadratic),
            _ => {}
        }
        let p = s
            .strip_prefix("lp_quad(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|inner| inner.trim().strip_prefix("p="))
            .ok_or_else(|| Error::Config(format!("unknown kernel `{s}`")))?;
        let p: f64 = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad exponent in kernel `{s}`")))?;
        if !(p > 1.0) {
            return Err(Error::Config(format!("lp_quad needs p > 1, got {p}")));
        }
        Ok(Kernel::lp_quadratic(p))
    }
}

impl TryFrom<String> for Kernel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Kernel> for String {
    fn from(k: Kernel) -> String {
        k.to_string()
    }
}

/// `D_φ(x, y) = φ(x) − φ(y) − ⟨∇φ(y), x − y⟩`.
pub fn bregman_distance(kernel: &Kernel, x: &Array1<f64>, y: &Array1<f64>) -> Result<f64> {
    check_dims(x, y)?;
    if let Some(coord) = kernel.domain_violation(x) {
        return Err(Error::Domain {
            coord,
            value: x[coord],
        });
    }
    let grad = kernel.gradient(y)?;
    let diff = x - y;
    Ok(kernel.value(x) - kernel.value(y) - grad.dot(&diff))
}

/// Second-order surrogate `½⟨∇²φ(x)(u − x), u − x⟩`.
///
/// `u` is not required to lie in `dom φ`; feasibility is left to the caller.
pub fn approx_bregman_distance(kernel: &Kernel, u: &Array1<f64>, x: &Array1<f64>) -> Result<f64> {
    check_dims(x, u)?;
    let h = kernel.hess_diag(x)?;
    Ok(0.5 * h.quad_form(&(u - x)))
}

/// Largest coordinatewise `|central difference − ∇φ| / (1 + |∇φ|)`.
///
/// Returns `+∞` when the stencil leaves the domain.
pub fn kernel_grad_check(kernel: &Kernel, x: &Array1<f64>, h: f64) -> f64 {
    let grad = match kernel.gradient(x) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let mut worst = 0.0_f64;
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = kernel.value(&probe);
        probe[i] = x[i] - h;
        let down = kernel.value(&probe);
        probe[i] = x[i];
        if !(up.is_finite() && down.is_finite()) {
            return f64::INFINITY;
        }
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / (1.0 + grad[i].abs()));
    }
    worst
}

fn check_dims(a: &Array1<f64>, b: &Array1<f64>) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

pub fn catalog() -> Vec<Kernel> {
    vec![
        Kernel::SquaredEuclidean,
        Kernel::BoltzmannShannon,
        Kernel::Burg,
        Kernel::lp_quadratic(1.2),
        Kernel::ShannonQuadratic,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn squared_euclidean_distance_is_half_squared_norm() {
        let d = bregman_distance(
            &Kernel::SquaredEuclidean,
            &array![1.0, 2.0],
            &array![0.0, 0.0],
        )
        .unwrap();
        assert!((d - 2.5).abs() < 1e-15);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let x = array![0.3, 0.7];
        for k in catalog() {
            let d = bregman_distance(&k, &x, &x).unwrap();
            assert!(d.abs() < 1e-15, "{k}: {d}");
        }
    }

    #[test]
    fn burg_distance_is_itakura_saito() {
        let d = bregman_distance(&Kernel::Burg, &array![1.0], &array![2.0]).unwrap();
        let expected = 0.5 + 2f64.ln() - 1.0;
        assert!((d - expected).abs() < 1e-15);
        assert!((d - 0.19315).abs() < 1e-5);
    }

    #[test]
    fn domain_errors_name_the_coordinate() {
        let err =
            bregman_distance(&Kernel::Burg, &array![1.0, -1.0], &array![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Domain { coord: 1, .. }));
        let err = bregman_distance(
            &Kernel::BoltzmannShannon,
            &array![1.0, 1.0],
            &array![0.0, 1.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain { coord: 0, .. }));
    }

    #[test]
    fn shannon_uses_zero_log_zero() {
        let k = Kernel::BoltzmannShannon;
        assert_eq!(k.value(&array![0.0, 1.0]), 0.0);
        assert!(k.domain_contains(&array![0.0]));
        assert!(!k.interior_contains(&array![0.0]));
        assert_eq!(k.value(&array![-1.0]), f64::INFINITY);
    }

    #[test]
    fn approx_distance_examples() {
        let k = Kernel::SquaredEuclidean;
        assert_eq!(
            approx_bregman_distance(&k, &array![3.0], &array![1.0]).unwrap(),
            2.0
        );
        assert_eq!(
            approx_bregman_distance(&k, &array![1.0], &array![1.0]).unwrap(),
            0.0
        );
        let lp = Kernel::lp_quadratic(1.2);
        let v = approx_bregman_distance(&lp, &array![2.0], &array![1.0]).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn lp_hessian_is_clamped_at_origin() {
        let k = Kernel::lp_quadratic(1.2);
        let h = k.hess_diag(&array![0.0, 1.0]).unwrap();
        assert_eq!(h.diag[0], DEFAULT_HESS_CAP);
        assert_eq!(h.clamped, vec![true, false]);
        assert!((h.diag[1] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn grad_check_examples() {
        assert!(kernel_grad_check(&Kernel::SquaredEuclidean, &array![1.0, 2.0], 1e-5) < 1e-8);
        assert!(kernel_grad_check(&Kernel::BoltzmannShannon, &array![0.5, 0.5], 1e-6) < 1e-5);
        assert!(kernel_grad_check(&Kernel::Burg, &array![2.0], 1e-6) < 1e-5);
        assert_eq!(
            kernel_grad_check(&Kernel::Burg, &array![1e-9], 1e-6),
            f64::INFINITY
        );
    }

    #[test]
    fn names_round_trip() {
        for k in catalog() {
            let parsed: Kernel = k.to_string().parse().unwrap();
            assert_eq!(parsed, k);
        }
        assert_eq!(
            "lp_quad(p=1.5)".parse::<Kernel>().unwrap(),
            Kernel::lp_quadratic(1.5)
        );
        assert!("lp_quad(p=1)".parse::<Kernel>().is_err());
        assert!("gaussian".parse::<Kernel>().is_err());
    }

    fn interior_pair(k: Kernel) -> impl Strategy<Value = (Array1<f64>, Array1<f64>)> {
        let coord = if k.is_orthant() { 0.05..5.0 } else { -5.0..5.0 };
        (
            proptest::collection::vec(coord.clone(), 3),
            proptest::collection::vec(coord, 3),
        )
            .prop_map(|(a, b)| (Array1::from(a), Array1::from(b)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn distances_are_nonnegative_and_dominate_strong_convexity(
            idx in 0usize..5,
            pair in interior_pair(Kernel::BoltzmannShannon),
            shift in proptest::bool::ANY,
        ) {
            let k = catalog()[idx];
            let (mut x, mut y) = pair;
            if shift && !k.is_orthant() {
                x -= 2.5;
                y += 1.0;
            }
            let d = bregman_distance(&k, &x, &y).unwrap();
            prop_assert!(d >= -1e-12);
            let sep = (&x - &y).mapv(|v| v.abs()).fold(0.0_f64, |a, &b| a.max(b));
            if sep > 1e-6 {
                prop_assert!(d > 1e-10 * sep * sep);
            }
            let sigma = k.strong_convexity_lb();
            let h = k.hess_diag(&y).unwrap();
            prop_assert!(h.diag.iter().all(|&hi| hi > 0.0 && hi >= sigma));
            let approx = approx_bregman_distance(&k, &x, &y).unwrap();
            let sq = 0.5 * (&x - &y).mapv(|v| v * v).sum();
            prop_assert!(approx >= sigma * sq - 1e-12);
        }

        #[test]
        fn kernels_are_midpoint_convex(idx in 0usize..5, pair in interior_pair(Kernel::Burg)) {
            let k = catalog()[idx];
            let (x, y) = pair;
            let mid = (&x + &y) * 0.5;
            prop_assert!(k.value(&mid) <= 0.5 * (k.value(&x) + k.value(&y)) + 1e-12);
        }

        #[test]
        fn gradients_match_finite_differences(idx in 0usize..5, pair in interior_pair(Kernel::Burg)) {
            let k = catalog()[idx];
            let (x, _) = pair;
            prop_assert!(kernel_grad_check(&k, &x, 1e-6) < 1e-5);
        }
    }
}
