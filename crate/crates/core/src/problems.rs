//! Composite objectives `Ψ = f + g` and the two benchmark problem families.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;

/// Closure of the feasible set `cl C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibleSet {
    Whole,
    NonnegOrthant,
}

impl FeasibleSet {
    pub fn contains(&self, x: &Array1<f64>) -> bool {
        match self {
            FeasibleSet::Whole => x.iter().all(|v| v.is_finite()),
            FeasibleSet::NonnegOrthant => x.iter().all(|&v| v >= 0.0 && v.is_finite()),
        }
    }
}

/// The convex part `g`, restricted to the separable forms that admit a
/// closed-form proximal subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `θ‖x‖₁`.
    L1 {
        theta: f64,
    },
    /// `θ‖x‖₁ + δ_{ℝⁿ₊}(x)`.
    L1Nonneg {
        theta: f64,
    },
}

impl Regularizer {
    pub fn feasible_set(&self) -> FeasibleSet {
        match self {
            Regularizer::Zero | Regularizer::L1 { .. } => FeasibleSet::Whole,
            Regularizer::L1Nonneg { .. } => FeasibleSet::NonnegOrthant,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { theta } | Regularizer::L1Nonneg { theta } => theta,
        }
    }

    /// `g(x)`, `+∞` outside `dom g`.
    pub fn value(&self, x: &Array1<f64>) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { theta } => theta * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::L1Nonneg { theta } => {
                if x.iter().any(|&v| v < 0.0) {
                    f64::INFINITY
                } else {
                    theta * x.sum()
                }
            }
        }
    }

    pub fn subgradient(&self, x: &Array1<f64>) -> Array1<f64> {
        g_subgrad_l1(self.theta(), x, self.feasible_set())
    }
}

/// One element of `∂g(x)` for `g = θ‖·‖₁` (plus the orthant indicator).
///
/// On the whole space the selection is `θ·sgn(xᵢ)` with `0` at `xᵢ = 0`; on
/// the orthant `g` is linear and the selection is `θ·1`.
pub fn g_subgrad_l1(theta: f64, x: &Array1<f64>, feasible: FeasibleSet) -> Array1<f64> {
    match feasible {
        FeasibleSet::Whole => x.mapv(|v| {
            if v > 0.0 {
                theta
            } else if v < 0.0 {
                -theta
            } else {
                0.0
            }
        }),
        FeasibleSet::NonnegOrthant => Array1::from_elem(x.len(), theta),
    }
}

/// A smooth function `f` restricted to the ray `t ↦ x + t·d`.
pub trait Restriction {
    /// `f(x + t d)`.
    fn value(&self, t: f64) -> f64;
    /// `⟨∇f(x + t d), d⟩`; non-finite where `f` is not differentiable.
    fn slope(&self, t: f64) -> f64;
    /// `f(x + t d) − f(x)`. Overridden where the difference can be formed
    /// without cancellation, which matters once `‖t d‖` is near `√ε`.
    fn increment(&self, t: f64) -> f64 {
        self.value(t) - self.value(0.0)
    }
}

/// The smooth part `f` of the composite objective.
pub trait SmoothFn: Send + Sync {
    fn dim(&self) -> usize;

    /// `f(x)`, `+∞` outside `dom f`.
    fn value(&self, x: &Array1<f64>) -> f64;

    fn grad(&self, x: &Array1<f64>) -> Array1<f64>;

    /// Restriction of `f` to a ray. Implementors with linear structure can
    /// precompute products so that each evaluation is cheap.
    fn restrict<'a>(&'a self, x: &Array1<f64>, d: &Array1<f64>) -> Box<dyn Restriction + 'a> {
        Box::new(GenericRestriction {
            f: self,
            x: x.clone(),
            d: d.clone(),
        })
    }
}

struct GenericRestriction<'a, F: ?Sized> {
    f: &'a F,
    x: Array1<f64>,
    d: Array1<f64>,
}

impl<F: SmoothFn + ?Sized> Restriction for GenericRestriction<'_, F> {
    fn value(&self, t: f64) -> f64 {
        self.f.value(&(&self.x + &(t * &self.d)))
    }

    fn slope(&self, t: f64) -> f64 {
        self.f.grad(&(&self.x + &(t * &self.d))).dot(&self.d)
    }
}

/// A smooth function given by a pair of closures.
pub struct FnSmooth<F, G> {
    dim: usize,
    value: F,
    grad: G,
}

impl<F, G> FnSmooth<F, G>
where
    F: Fn(&Array1<f64>) -> f64 + Send + Sync,
    G: Fn(&Array1<f64>) -> Array1<f64> + Send + Sync,
{
    pub fn new(dim: usize, value: F, grad: G) -> Self {
        FnSmooth { dim, value, grad }
    }
}

impl<F, G> SmoothFn for FnSmooth<F, G>
where
    F: Fn(&Array1<f64>) -> f64 + Send + Sync,
    G: Fn(&Array1<f64>) -> Array1<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        (self.value)(x)
    }

    fn grad(&self, x: &Array1<f64>) -> Array1<f64> {
        (self.grad)(x)
    }
}

/// `½‖Ax − b‖² + (θ/p)‖x‖ₚᵖ`.
#[derive(Debug, Clone)]
pub struct LpLeastSquares {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub p: f64,
    pub theta: f64,
}

impl LpLeastSquares {
    fn penalty(&self, x: impl Iterator<Item = f64>) -> f64 {
        self.theta / self.p * x.map(|v| v.abs().powf(self.p)).sum::<f64>()
    }

    /// `(θ/p)(|x + s|ᵖ − |x|ᵖ)`.
    fn penalty_increment(&self, x: f64, s: f64) -> f64 {
        let (p, y) = (self.p, x + s);
        let diff = if x != 0.0 && y.signum() == x.signum() {
            x.abs().powf(p) * (p * (s / x).ln_1p()).exp_m1()
        } else {
            y.abs().powf(p) - x.abs().powf(p)
        };
        self.theta / p * diff
    }

    fn penalty_grad(&self, v: f64) -> f64 {
        self.theta * v.signum() * v.abs().powf(self.p - 1.0)
    }
}

impl SmoothFn for LpLeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        let r = self.a.dot(x) - &self.b;
        0.5 * r.dot(&r) + self.penalty(x.iter().copied())
    }

    fn grad(&self, x: &Array1<f64>) -> Array1<f64> {
        let r = self.a.dot(x) - &self.b;
        let mut g = self.a.t().dot(&r);
        g.zip_mut_with(x, |gi, &xi| *gi += self.penalty_grad(xi));
        g
    }

    fn restrict<'a>(&'a self, x: &Array1<f64>, d: &Array1<f64>) -> Box<dyn Restriction + 'a> {
        Box::new(LpRestriction {
            f: self,
            r0: self.a.dot(x) - &self.b,
            ad: self.a.dot(d),
            x: x.clone(),
            d: d.clone(),
        })
    }
}

struct LpRestriction<'a> {
    f: &'a LpLeastSquares,
    r0: Array1<f64>,
    ad: Array1<f64>,
    x: Array1<f64>,
    d: Array1<f64>,
}

impl Restriction for LpRestriction<'_> {
    fn value(&self, t: f64) -> f64 {
        let ls: f64 = self
            .r0
            .iter()
            .zip(self.ad.iter())
            .map(|(r, a)| {
                let v = r + t * a;
                v * v
            })
            .sum();
        let pts = self.x.iter().zip(self.d.iter()).map(|(x, d)| x + t * d);
        0.5 * ls + self.f.penalty(pts)
    }

    fn slope(&self, t: f64) -> f64 {
        let ls: f64 = self
            .r0
            .iter()
            .zip(self.ad.iter())
            .map(|(r, a)| (r + t * a) * a)
            .sum();
        let pen: f64 = self
            .x
            .iter()
            .zip(self.d.iter())
            .map(|(x, d)| self.f.penalty_grad(x + t * d) * d)
            .sum();
        ls + pen
    }

    fn increment(&self, t: f64) -> f64 {
        let (mut cross, mut sq) = (0.0, 0.0);
        for (r, a) in self.r0.iter().zip(self.ad.iter()) {
            cross += r * a;
            sq += a * a;
        }
        let pen: f64 = self
            .x
            .iter()
            .zip(self.d.iter())
            .map(|(x, d)| self.f.penalty_increment(*x, t * d))
            .sum();
        t * cross + 0.5 * t * t * sq + pen
    }
}

/// `D_KL(Ax, b) = Σᵢ (Ax)ᵢ log((Ax)ᵢ/bᵢ) + bᵢ − (Ax)ᵢ`.
#[derive(Debug, Clone)]
pub struct KlDivergence {
    pub a: Array2<f64>,
    pub b: Array1<f64>,
}

fn kl_terms(z: impl Iterator<Item = f64>, b: &Array1<f64>) -> f64 {
    let mut total = 0.0;
    for (zi, &bi) in z.zip(b.iter()) {
        if zi < 0.0 || zi.is_nan() {
            return f64::INFINITY;
        }
        let ent = if zi == 0.0 { 0.0 } else { zi * (zi / bi).ln() };
        total += ent + bi - zi;
    }
    total
}

impl SmoothFn for KlDivergence {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &Array1<f64>) -> f64 {
        kl_terms(self.a.dot(x).into_iter(), &self.b)
    }

    fn grad(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut z = self.a.dot(x);
        z.zip_mut_with(&self.b, |zi, &bi| *zi = (*zi / bi).ln());
        self.a.t().dot(&z)
    }

    fn restrict<'a>(&'a self, x: &Array1<f64>, d: &Array1<f64>) -> Box<dyn Restriction + 'a> {
        Box::new(KlRestriction {
            b: &self.b,
            z0: self.a.dot(x),
            ad: self.a.dot(d),
        })
    }
}

struct KlRestriction<'a> {
    b: &'a Array1<f64>,
    z0: Array1<f64>,
    ad: Array1<f64>,
}

impl Restriction for KlRestriction<'_> {
    fn value(&self, t: f64) -> f64 {
        kl_terms(
            self.z0.iter().zip(self.ad.iter()).map(|(z, a)| z + t * a),
            self.b,
        )
    }

    fn slope(&self, t: f64) -> f64 {
        self.z0
            .iter()
            .zip(self.ad.iter())
            .zip(self.b.iter())
            .map(|((z, a), b)| ((z + t * a) / b).ln() * a)
            .sum()
    }

    fn increment(&self, t: f64) -> f64 {
        // h(z) = z log(z/b) − z, so h(z+s) − h(z) = s log((z+s)/b) + z log1p(s/z) − s
        let mut total = 0.0;
        for ((&z, &a), &b) in self.z0.iter().zip(self.ad.iter()).zip(self.b.iter()) {
            let (s, y) = (t * a, z + t * a);
            if y < 0.0 || y.is_nan() {
                return f64::INFINITY;
            }
            let head = if y == 0.0 { 0.0 } else { s * (y / b).ln() };
            let tail = if z == 0.0 { 0.0 } else { z * (s / z).ln_1p() };
            total += head + tail - s;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LpLs,
    NonnegKl,
    Custom,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LpLs => "lp_ls",
            Family::NonnegKl => "nonneg_kl",
            Family::Custom => "custom",
        })
    }
}

/// A composite problem `min Ψ(x) = f(x) + g(x)` over `cl C`.
#[derive(Clone)]
pub struct Problem {
    smooth: Arc<dyn SmoothFn>,
    reg: Regularizer,
    kernel: Kernel,
    smad_l: Option<f64>,
    family: Family,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("family", &self.family)
            .field("dim", &self.dim())
            .field("reg", &self.reg)
            .field("kernel", &self.kernel)
            .field("smad_l", &self.smad_l)
            .finish()
    }
}

impl Problem {
    pub fn new(
        smooth: Arc<dyn SmoothFn>,
        reg: Regularizer,
        kernel: Kernel,
        smad_l: Option<f64>,
    ) -> Self {
        Problem {
            smooth,
            reg,
            kernel,
            smad_l,
            family: Family::Custom,
        }
    }

    pub fn lp_least_squares(a: Array2<f64>, b: Array1<f64>, p: f64, theta: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::Config(format!("lp_ls needs p > 1, got {p}")));
        }
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let smad_l = spectral_norm_sq(&a, 1e-10) + theta;
        Ok(Problem {
            smooth: Arc::new(LpLeastSquares { a, b, p, theta }),
            reg: Regularizer::Zero,
            kernel: Kernel::lp_quadratic(p),
            smad_l: Some(smad_l),
            family: Family::LpLs,
        })
    }

    /// KL objective with the ℓ₁ term and orthant constraint in `g`. The
    /// kernel is the entropy-plus-quadratic one used by the approximate
    /// methods; BPG uses the plain entropy internally.
    pub fn nonneg_kl(a: Array2<f64>, b: Array1<f64>, theta: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        if !(theta >= 0.0) {
            return Err(Error::Config(format!(
                "theta must be nonnegative, got {theta}"
            )));
        }
        Ok(Problem {
            smooth: Arc::new(KlDivergence { a, b }),
            reg: Regularizer::L1Nonneg { theta },
            kernel: Kernel::ShannonQuadratic,
            smad_l: Some(1.0),
            family: Family::NonnegKl,
        })
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        self.reg.feasible_set()
    }

    pub fn smad_l(&self) -> Option<f64> {
        self.smad_l
    }

    pub fn smooth(&self) -> &dyn SmoothFn {
        self.smooth.as_ref()
    }

    pub fn f_value(&self, x: &Array1<f64>) -> f64 {
        self.smooth.value(x)
    }

    pub fn f_grad(&self, x: &Array1<f64>) -> Array1<f64> {
        self.smooth.grad(x)
    }

    pub fn g_value(&self, x: &Array1<f64>) -> f64 {
        self.reg.value(x)
    }

    pub fn g_subgrad(&self, x: &Array1<f64>) -> Array1<f64> {
        self.reg.subgradient(x)
    }

    /// `Ψ(x) + δ_{cl C}(x)`.
    pub fn psi(&self, x: &Array1<f64>) -> f64 {
        if !self.feasible_set().contains(x) {
            return f64::INFINITY;
        }
        self.f_value(x) + self.g_value(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub m: usize,
    pub n: usize,
    pub sparsity: f64,
    pub seed: u64,
    pub family: Family,
    #[serde(default = "default_p")]
    pub p: f64,
    pub theta: f64,
    #[serde(default)]
    pub scaling: Scaling,
}

/// Normalisation applied to a generated `lp_ls` instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Entries of `A` and the support of `x*` are raw `N(0, 1)` draws.
    Raw,
    /// `A` is divided by `√n`, so rows have unit expected norm, and `x*` is
    /// rescaled to unit norm.
    #[default]
    UnitRows,
    /// `A` is divided by `√m`, so columns have unit expected norm, and `x*`
    /// is rescaled to unit norm.
    UnitColumns,
}

fn default_p() -> f64 {
    1.2
}

impl InstanceSpec {
    pub fn new(family: Family, m: usize, n: usize, theta: f64, seed: u64) -> Self {
        InstanceSpec {
            m,
            n,
            sparsity: match family {
                Family::LpLs => 0.1,
                _ => 0.05,
            },
            seed,
            family,
            p: default_p(),
            theta,
            scaling: Scaling::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config("instance dimensions must be positive".into()));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::Config(format!(
                "sparsity must lie in (0, 1], got {}",
                self.sparsity
            )));
        }
        if !(self.theta >= 0.0) {
            return Err(Error::Config(format!(
                "theta must be nonnegative, got {}",
                self.theta
            )));
        }
        if self.family == Family::LpLs && !(self.p > 1.0) {
            return Err(Error::Config(format!("lp_ls needs p > 1, got {}", self.p)));
        }
        Ok(())
    }

    fn support_size(&self) -> usize {
        ((self.sparsity * self.n as f64).round() as usize).clamp(1, self.n)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub spec: InstanceSpec,
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub x_star: Array1<f64>,
    pub problem: Problem,
}

pub fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((m, n), || rng.sample::<f64, _>(StandardNormal))
}

fn sparse_vector(rng: &mut ChaCha8Rng, n: usize, k: usize, nonneg: bool) -> Array1<f64> {
    let mut x = Array1::zeros(n);
    for i in index::sample(rng, n, k).into_iter() {
        let v: f64 = rng.sample(StandardNormal);
        x[i] = if nonneg { v.abs() } else { v };
    }
    x
}

pub fn build_lp_ls(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    if spec.family != Family::LpLs {
        return Err(Error::Config(format!(
            "expected lp_ls spec, got {}",
            spec.family
        )));
    }
    spec.validate()?;
    let mut rng = instance_rng(spec.seed);
    let mut a = normal_matrix(&mut rng, spec.m, spec.n);
    let mut x_star = sparse_vector(&mut rng, spec.n, spec.support_size(), false);
    match spec.scaling {
        Scaling::Raw => {}
        Scaling::UnitRows => a /= (spec.n as f64).sqrt(),
        Scaling::UnitColumns => a /= (spec.m as f64).sqrt(),
    }
    if spec.scaling != Scaling::Raw {
        let nrm = x_star.dot(&x_star).sqrt();
        if nrm > 0.0 {
            x_star /= nrm;
        }
    }
    let b = a.dot(&x_star);
    let problem = Problem::lp_least_squares(a.clone(), b.clone(), spec.p, spec.theta)?;
    Ok(GeneratedInstance {
        spec: spec.clone(),
        a,
        b,
        x_star,
        problem,
    })
}

pub fn build_nonneg_kl(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    if spec.family != Family::NonnegKl {
        return Err(Error::Config(format!(
            "expected nonneg_kl spec, got {}",
            spec.family
        )));
    }
    spec.validate()?;
    let mut rng = instance_rng(spec.seed);
    let mut a = normal_matrix(&mut rng, spec.m, spec.n).mapv_into(f64::abs);
    let sums = a.sum_axis(Axis(0));
    for (mut col, s) in a.axis_iter_mut(Axis(1)).zip(sums.iter()) {
        col /= *s;
    }
    for _ in 0..100 {
        let x_star = sparse_vector(&mut rng, spec.n, spec.support_size(), true);
        let b = a.dot(&x_star);
        if b.iter().all(|&v| v > 0.0) {
            let problem = Problem::nonneg_kl(a.clone(), b.clone(), spec.theta)?;
            return Ok(GeneratedInstance {
                spec: spec.clone(),
                a,
                b,
                x_star,
                problem,
            });
        }
    }
    Err(Error::Instance(
        "observation vector kept a zero entry after 100 draws".into(),
    ))
}

pub fn build_instance(spec: &InstanceSpec) -> Result<GeneratedInstance> {
    match spec.family {
        Family::LpLs => build_lp_ls(spec),
        Family::NonnegKl => build_nonneg_kl(spec),
        Family::Custom => Err(Error::Config("custom problems cannot be generated".into())),
    }
}

/// Estimate of `λ_max(AᵀA)` by power iteration.
///
/// Stops when the relative change of the Rayleigh quotient drops below
/// `tol`, or after 10 000 iterations.
pub fn spectral_norm_sq(a: &Array2<f64>, tol: f64) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut rng = instance_rng(0x5eed);
    let mut v: Array1<f64> = Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal));
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let nv = v.dot(&v).sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v /= nv;
        let av = a.dot(&v);
        let next = av.dot(&av);
        let w = a.t().dot(&av);
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        v = w;
        if done {
            break;
        }
    }
    lambda
}

const MATRIX_MAGIC: &[u8; 4] = b"BOPT";

/// Writes `a` as `"BOPT"`, `u32 m`, `u32 n` (little endian), then `m·n`
/// little-endian doubles in row-major order.
pub fn write_matrix<W: Write>(mut w: W, a: &Array2<f64>) -> Result<()> {
    let (m, n) = a.dim();
    let dims = |v: usize| {
        u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} does not fit in u32")))
    };
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&dims(m)?.to_le_bytes())?;
    w.write_all(&dims(n)?.to_le_bytes())?;
    for v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format("bad matrix magic".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let m = u32::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let n = u32::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(m * n);
    let mut buf = [0u8; 8];
    for _ in 0..m * n {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Array2::from_shape_vec((m, n), data).map_err(|e| Error::Format(e.to_string()))
}
