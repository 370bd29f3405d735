//! Step-size rules.
//!
//! The variable metric Armijo-Wolfe search accepts `t` when
//!
//! ```text
//! A(t) = Ψ(x+td) + δ(x+td) − Ψ(x) − c₁ t (⟨∇f(x),d⟩ + g(x+d) − g(x) + ⟨∇²φ(x)d,d⟩/2λ) < 0
//! W(t) = ⟨∇f(x+td) + ξ, d⟩ − c₂ ⟨∇f(x) + ξ, d⟩ > 0
//! ```
//!
//! and finds such a `t` by bracketing followed by bisection. The baseline
//! Armijo and descent-lemma backtracking rules live here as well.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::kernels::HessDiag;
use crate::kernels::Kernel;
use crate::problems::{Problem, Regularizer, Restriction};
use crate::subproblem::{approx_prox, MappingRequest};

/// Upper bound on trial steps during the expansion phase.
pub const MAX_STEP: f64 = 1e12;

/// The objective along the search ray `t ↦ x + t d`.
pub trait LineFunction {
    /// `Ψ(x + td) + δ_{cl C}(x + td)`.
    fn psi(&self, t: f64) -> f64;
    /// `⟨∇f(x + td), d⟩`.
    fn slope(&self, t: f64) -> Result<f64>;
    /// `Ψ(x + td) − Ψ(x)`, `+∞` where `x + td` is infeasible.
    fn increment(&self, t: f64) -> f64 {
        let v = self.psi(t);
        if v == f64::INFINITY {
            v
        } else {
            v - self.psi(0.0)
        }
    }
}

/// [`LineFunction`] for a [`Problem`].
pub struct ProblemLine<'a> {
    problem: &'a Problem,
    f: Box<dyn Restriction + 'a>,
    x: &'a Array1<f64>,
    d: &'a Array1<f64>,
    interior_of: Option<Kernel>,
}

impl<'a> ProblemLine<'a> {
    /// With `interior_of` set, points outside the interior of that kernel's
    /// domain count as infeasible.
    pub fn new(
        problem: &'a Problem,
        x: &'a Array1<f64>,
        d: &'a Array1<f64>,
        interior_of: Option<Kernel>,
    ) -> Self {
        ProblemLine {
            problem,
            f: problem.smooth().restrict(x, d),
            x,
            d,
            interior_of,
        }
    }

    pub fn point(&self, t: f64) -> Array1<f64> {
        self.x + &(t * self.d)
    }
}

impl ProblemLine<'_> {
    fn feasible_point(&self, t: f64) -> Option<Array1<f64>> {
        let pt = self.point(t);
        let inside = self.problem.feasible_set().contains(&pt)
            && self
                .interior_of
                .as_ref()
                .is_none_or(|k| k.interior_contains(&pt));
        inside.then_some(pt)
    }
}

fn nan_to_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl LineFunction for ProblemLine<'_> {
    fn psi(&self, t: f64) -> f64 {
        match self.feasible_point(t) {
            Some(pt) => nan_to_inf(self.f.value(t) + self.problem.g_value(&pt)),
            None => f64::INFINITY,
        }
    }

    fn increment(&self, t: f64) -> f64 {
        match self.feasible_point(t) {
            Some(pt) => {
                let g_gap = self.problem.g_value(&pt) - self.problem.g_value(self.x);
                nan_to_inf(self.f.increment(t) + g_gap)
            }
            None => f64::INFINITY,
        }
    }

    fn slope(&self, t: f64) -> Result<f64> {
        let s = self.f.slope(t);
        if s.is_finite() {
            Ok(s)
        } else {
            let pt = self.point(t);
            let coord = pt.iter().position(|v| *v <= 0.0).unwrap_or(0);
            Err(Error::Domain {
                coord,
                value: pt[coord],
            })
        }
    }
}

/// Scalars fixed for one line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchContext {
    pub psi_x: f64,
    /// `⟨∇f(x), d⟩`
    pub grad_dot_d: f64,
    /// `⟨ξ, d⟩`
    pub xi_dot_d: f64,
    /// `⟨∇²φ(x)d, d⟩`
    pub quad_term: f64,
    /// `g(x + d) − g(x)`
    pub g_gap: f64,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
}

impl LineSearchContext {
    /// Coefficient of `c₁ t` in the Armijo condition.
    pub fn armijo_slope(&self) -> f64 {
        self.grad_dot_d + self.g_gap + self.quad_term / (2.0 * self.lambda)
    }

    /// `⟨∇f(x) + ξ, d⟩`.
    pub fn directional_derivative(&self) -> f64 {
        self.grad_dot_d + self.xi_dot_d
    }
}

pub fn eval_a(ctx: &LineSearchContext, line: &dyn LineFunction, t: f64) -> f64 {
    let inc = line.increment(t);
    if inc == f64::INFINITY {
        return f64::INFINITY;
    }
    inc - ctx.c1 * t * ctx.armijo_slope()
}

pub fn eval_w(ctx: &LineSearchContext, line: &dyn LineFunction, t: f64) -> Result<f64> {
    Ok(line.slope(t)? + ctx.xi_dot_d - ctx.c2 * ctx.directional_derivative())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VmawParams {
    pub mu: f64,
    pub eta: f64,
    pub max_bracket: usize,
    pub max_bisect: usize,
}

impl Default for VmawParams {
    fn default() -> Self {
        VmawParams {
            mu: 0.9,
            eta: 2.0,
            max_bracket: 200,
            max_bisect: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchStatus {
    Accepted,
    CapHitFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub t: f64,
    pub a_evals: usize,
    pub w_evals: usize,
    pub status: LineSearchStatus,
}

impl LineSearchResult {
    pub fn evals(&self) -> usize {
        self.a_evals + self.w_evals
    }
}

struct Tracker<'a> {
    ctx: &'a LineSearchContext,
    line: &'a dyn LineFunction,
    a_evals: usize,
    w_evals: usize,
    best_descent: Option<f64>,
}

impl Tracker<'_> {
    fn a(&mut self, t: f64) -> f64 {
        self.a_evals += 1;
        let v = eval_a(self.ctx, self.line, t);
        if v < 0.0 && self.best_descent.is_none_or(|b| t > b) {
            self.best_descent = Some(t);
        }
        v
    }

    fn w(&mut self, t: f64) -> Result<f64> {
        self.w_evals += 1;
        eval_w(self.ctx, self.line, t)
    }

    fn finish(&self, t: f64, status: LineSearchStatus) -> LineSearchResult {
        LineSearchResult {
            t,
            a_evals: self.a_evals,
            w_evals: self.w_evals,
            status,
        }
    }

    fn fallback(&self, params: &VmawParams) -> LineSearchResult {
        let t = self
            .best_descent
            .unwrap_or_else(|| params.mu.powi(params.max_bracket as i32));
        self.finish(t, LineSearchStatus::CapHitFallback)
    }
}

/// Bracketing-then-bisection search for a step with `A(t) < 0` and
/// `W(t) > 0`.
///
/// Starting from `t = 1`, the trial step is contracted by `μ` while
/// `A ≥ 0`, or expanded by `η` while `A < 0`; the last two trials bracket
/// the sign change of `A` and are bisected. When a cap is hit the largest
/// trial with `A(t) < 0` is returned with [`LineSearchStatus::CapHitFallback`].
pub fn vmaw_search(
    ctx: &LineSearchContext,
    line: &dyn LineFunction,
    params: &VmawParams,
) -> LineSearchResult {
    let mut tr = Tracker {
        ctx,
        line,
        a_evals: 0,
        w_evals: 0,
        best_descent: None,
    };
    let mut q1 = 1.0;
    let mut q2;
    let mut steps = 0;
    if tr.a(q1) >= 0.0 {
        loop {
            q2 = q1;
            q1 *= params.mu;
            steps += 1;
            if steps > params.max_bracket {
                return tr.fallback(params);
            }
            if tr.a(q1) < 0.0 {
                break;
            }
        }
    } else {
        loop {
            q2 = q1;
            q1 *= params.eta;
            steps += 1;
            if steps > params.max_bracket || q1 > MAX_STEP {
                return tr.fallback(params);
            }
            if tr.a(q1) >= 0.0 {
                break;
            }
        }
    }
    let (mut alpha, mut beta) = (q1.min(q2), q1.max(q2));
    for _ in 0..params.max_bisect {
        let t = 0.5 * (alpha + beta);
        if tr.a(t) >= 0.0 {
            beta = t;
            continue;
        }
        match tr.w(t) {
            Ok(w) if w > 0.0 => return tr.finish(t, LineSearchStatus::Accepted),
            Ok(_) => alpha = t,
            // no derivative at t: treat as a failed curvature test, shrink from above
            Err(_) => beta = t,
        }
    }
    tr.fallback(params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacktrackResult {
    pub t: f64,
    pub evals: usize,
    pub flagged: bool,
}

/// Largest `t ∈ {1, δ, δ², …}` with
/// `Ψ(x+td) < Ψ(x) + c₁ t (⟨∇f(x),d⟩ + g(x+d) − g(x))` and `x+td` feasible.
pub fn armijo_backtrack(
    ctx: &LineSearchContext,
    line: &dyn LineFunction,
    delta: f64,
    max_iters: usize,
) -> BacktrackResult {
    let slope = ctx.grad_dot_d + ctx.g_gap;
    let mut t = 1.0;
    let mut smallest_feasible = None;
    for j in 0..max_iters {
        let inc = line.increment(t);
        if inc.is_finite() {
            smallest_feasible = Some(t);
            if inc < ctx.c1 * t * slope {
                return BacktrackResult {
                    t,
                    evals: j + 1,
                    flagged: false,
                };
            }
        }
        t *= delta;
    }
    BacktrackResult {
        t: smallest_feasible.unwrap_or(0.0),
        evals: max_iters,
        flagged: true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentLemmaResult {
    pub lambda: f64,
    pub y: Array1<f64>,
    pub shrinks: usize,
    pub flagged: bool,
}

/// Largest `λ = λ₀·shrinkʲ` (`j ≤ 100`) whose Euclidean prox step `y`
/// satisfies `f(y) ≤ f(x) + ⟨∇f(x), y−x⟩ + ‖y−x‖²/2λ`.
pub fn descent_lemma_backtrack(
    problem: &Problem,
    x: &Array1<f64>,
    fx: f64,
    grad: &Array1<f64>,
    lambda0: f64,
    shrink: f64,
) -> Result<DescentLemmaResult> {
    const MAX_SHRINKS: usize = 100;
    let identity = HessDiag {
        diag: Array1::ones(x.len()),
        clamped: vec![false; x.len()],
    };
    let mut lambda = lambda0;
    let mut j = 0;
    loop {
        let y = euclidean_prox(x, grad, lambda, &identity, *problem.regularizer())?;
        let diff = &y - x;
        let rhs = fx + grad.dot(&diff) + diff.dot(&diff) / (2.0 * lambda);
        let fy = problem.f_value(&y);
        if fy <= rhs + 1e-14 * (1.0 + fx.abs()) {
            return Ok(DescentLemmaResult {
                lambda,
                y,
                shrinks: j,
                flagged: false,
            });
        }
        if j == MAX_SHRINKS {
            return Ok(DescentLemmaResult {
                lambda,
                y,
                shrinks: j,
                flagged: true,
            });
        }
        lambda *= shrink;
        j += 1;
    }
}

pub(crate) fn euclidean_prox(
    x: &Array1<f64>,
    grad: &Array1<f64>,
    lambda: f64,
    identity: &HessDiag,
    reg: Regularizer,
) -> Result<Array1<f64>> {
    approx_prox(&MappingRequest {
        x,
        grad,
        lambda,
        hess: identity,
        reg,
        strict_interior: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{FnSmooth, Problem};
    use ndarray::array;
    use std::sync::Arc;

    /// 1-D line for `f(x) = ½x²`, `g ≡ 0`, from `x` along `d`.
    struct Quadratic1d {
        x: f64,
        d: f64,
    }

    impl LineFunction for Quadratic1d {
        fn psi(&self, t: f64) -> f64 {
            let z = self.x + t * self.d;
            0.5 * z * z
        }
        fn slope(&self, t: f64) -> Result<f64> {
            Ok((self.x + t * self.d) * self.d)
        }
    }

    fn quad_ctx(c1: f64, c2: f64) -> LineSearchContext {
        // x = 1, λ = 1, φ = ½x² gives d = −1
        LineSearchContext {
            psi_x: 0.5,
            grad_dot_d: -1.0,
            xi_dot_d: 0.0,
            quad_term: 1.0,
            g_gap: 0.0,
            lambda: 1.0,
            c1,
            c2,
        }
    }

    const QUAD: Quadratic1d = Quadratic1d { x: 1.0, d: -1.0 };

    #[test]
    fn a_vanishes_at_zero_step() {
        let ctx = quad_ctx(0.99, 0.999);
        assert_eq!(eval_a(&ctx, &QUAD, 0.0), 0.0);
    }

    #[test]
    fn a_at_unit_step() {
        for c1 in [0.1, 0.5, 0.99] {
            let ctx = quad_ctx(c1, 0.999);
            let expected = -0.5 + 0.5 * c1;
            assert!((eval_a(&ctx, &QUAD, 1.0) - expected).abs() < 1e-15);
            assert!(eval_a(&ctx, &QUAD, 1.0) < 0.0);
        }
    }

    #[test]
    fn w_examples() {
        let ctx = quad_ctx(0.99, 0.999);
        assert!((eval_w(&ctx, &QUAD, 1.0).unwrap() - 0.999).abs() < 1e-15);
        let w0 = eval_w(&ctx, &QUAD, 0.0).unwrap();
        assert!((w0 + (1.0 - 0.999)).abs() < 1e-15);
        let still = Quadratic1d { x: 1.0, d: 0.0 };
        let mut flat = ctx;
        flat.grad_dot_d = 0.0;
        for t in [0.0, 0.5, 3.0] {
            assert_eq!(eval_w(&flat, &still, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn infeasible_point_gives_infinite_a() {
        let p = Problem::nonneg_kl(array![[1.0]], array![1.0], 0.05).unwrap();
        let x = array![0.5];
        let d = array![-1.0];
        let line = ProblemLine::new(&p, &x, &d, None);
        let ctx = quad_ctx(0.99, 0.999);
        assert_eq!(eval_a(&ctx, &line, 2.0), f64::INFINITY);
        assert!(eval_a(&ctx, &line, 0.25).is_finite());
    }

    #[test]
    fn vmaw_terminates_on_quadratic() {
        let ctx = quad_ctx(0.99, 0.999);
        let res = vmaw_search(&ctx, &QUAD, &VmawParams::default());
        assert_eq!(res.status, LineSearchStatus::Accepted);
        assert!(res.a_evals <= 30);
        assert!(eval_a(&ctx, &QUAD, res.t) < 0.0);
        assert!(eval_w(&ctx, &QUAD, res.t).unwrap() > 0.0);
    }

    /// `Ψ(x + td) = −t` with no lower bound.
    struct Unbounded;

    impl LineFunction for Unbounded {
        fn psi(&self, t: f64) -> f64 {
            -t
        }
        fn slope(&self, _t: f64) -> Result<f64> {
            Ok(-1.0)
        }
    }

    #[test]
    fn unbounded_ray_hits_cap() {
        let ctx = LineSearchContext {
            psi_x: 0.0,
            grad_dot_d: -1.0,
            xi_dot_d: 0.0,
            quad_term: 1.0,
            g_gap: 0.0,
            lambda: 1.0,
            c1: 0.5,
            c2: 0.9,
        };
        let res = vmaw_search(&ctx, &Unbounded, &VmawParams::default());
        assert_eq!(res.status, LineSearchStatus::CapHitFallback);
        assert!(res.t.is_finite() && res.t > 1.0);
        assert!(eval_a(&ctx, &Unbounded, res.t) < 0.0);
    }

    /// Ascent direction: `Ψ(x + td) = t`.
    struct Ascent;

    impl LineFunction for Ascent {
        fn psi(&self, t: f64) -> f64 {
            t
        }
        fn slope(&self, _t: f64) -> Result<f64> {
            Ok(1.0)
        }
    }

    #[test]
    fn contraction_cap_falls_back() {
        let ctx = LineSearchContext {
            psi_x: 0.0,
            grad_dot_d: 1.0,
            xi_dot_d: 0.0,
            quad_term: 0.0,
            g_gap: 0.0,
            lambda: 1.0,
            c1: 0.5,
            c2: 0.9,
        };
        let params = VmawParams::default();
        let res = vmaw_search(&ctx, &Ascent, &params);
        assert_eq!(res.status, LineSearchStatus::CapHitFallback);
        let expected = params.mu.powi(params.max_bracket as i32);
        assert!((res.t / expected - 1.0).abs() < 1e-12);

        let bt = armijo_backtrack(&ctx, &Ascent, 0.9, 50);
        assert!(bt.flagged);
        assert!((bt.t - 0.9f64.powi(49)).abs() < 1e-15);
    }

    #[test]
    fn armijo_accepts_unit_step_with_small_c1() {
        // at t = 1: 0 < ½ − c₁ holds for c₁ < ½
        let ctx = quad_ctx(0.4, 0.999);
        let bt = armijo_backtrack(&ctx, &QUAD, 0.9, 100);
        assert_eq!(bt.t, 1.0);
        assert_eq!(bt.evals, 1);
    }

    #[test]
    fn armijo_first_accepted_power_on_quadratic() {
        // ½(1−t)² < ½ − 0.99t  ⇔  t < 0.02, and 0.9^38 is the first power below
        let ctx = quad_ctx(0.99, 0.999);
        let bt = armijo_backtrack(&ctx, &QUAD, 0.9, 100);
        assert!(0.9f64.powi(37) >= 0.02 && 0.9f64.powi(38) < 0.02);
        assert!((bt.t - 0.9f64.powi(38)).abs() < 1e-15);
        assert_eq!(bt.evals, 39);
        assert!(!bt.flagged);
        assert!(QUAD.psi(bt.t) < ctx.psi_x + ctx.c1 * bt.t * ctx.grad_dot_d);
    }

    fn quartic() -> Problem {
        let f = FnSmooth::new(
            1,
            |x: &Array1<f64>| x[0].powi(4),
            |x: &Array1<f64>| array![4.0 * x[0].powi(3)],
        );
        Problem::new(
            Arc::new(f),
            Regularizer::Zero,
            Kernel::SquaredEuclidean,
            None,
        )
    }

    fn half_square(n: usize) -> Problem {
        let f = FnSmooth::new(
            n,
            |x: &Array1<f64>| 0.5 * x.dot(x),
            |x: &Array1<f64>| x.clone(),
        );
        Problem::new(
            Arc::new(f),
            Regularizer::Zero,
            Kernel::SquaredEuclidean,
            Some(1.0),
        )
    }

    #[test]
    fn descent_lemma_examples() {
        let p = half_square(2);
        let x = array![1.0, -2.0];
        let res = descent_lemma_backtrack(&p, &x, p.f_value(&x), &p.f_grad(&x), 1.0, 0.5).unwrap();
        assert_eq!(res.shrinks, 0);
        assert_eq!(res.lambda, 1.0);

        let q = quartic();
        let x = array![2.0];
        let res = descent_lemma_backtrack(&q, &x, 16.0, &q.f_grad(&x), 10.0, 0.5).unwrap();
        assert!(res.shrinks > 0);
        assert!(res.lambda < 10.0);
        assert!(!res.flagged);

        let zero = array![0.0, 0.0];
        let res = descent_lemma_backtrack(&p, &zero, 0.0, &array![0.0, 0.0], 1.0, 0.5).unwrap();
        assert_eq!(res.y, zero);
        assert_eq!(res.shrinks, 0);
    }
}
