//! Iteration drivers sharing one trace and stopping layer.
//!
//! | method      | direction                       | step                      |
//! |-------------|---------------------------------|---------------------------|
//! | `abpg_vmaw` | approximate Bregman prox        | Armijo-Wolfe bisection, then the better of `y` and `x + td` |
//! | `abpg`      | approximate Bregman prox        | Armijo backtracking       |
//! | `pg`        | Euclidean prox, step `1/L`      | none                      |
//! | `pgl`       | Euclidean prox                  | descent-lemma backtracking on `λ` |
//! | `bpg`       | entropy Bregman prox            | none                      |

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{HessDiag, Kernel};
use crate::linesearch::{
    armijo_backtrack, descent_lemma_backtrack, euclidean_prox, eval_a, eval_w, vmaw_search,
    LineSearchContext, LineSearchStatus, ProblemLine, VmawParams,
};
use crate::problems::{Family, FeasibleSet, Problem};
use crate::subproblem::{approx_prox, bpg_prox_shannon, MappingRequest};

/// Relative slack used by the runtime inequality checks.
pub const DIAG_SLACK: f64 = 1e-10;

fn slack(a: f64, b: f64) -> f64 {
    DIAG_SLACK * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AbpgVmaw,
    Abpg,
    Pg,
    Pgl,
    Bpg,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::AbpgVmaw,
        Method::Abpg,
        Method::Pg,
        Method::Pgl,
        Method::Bpg,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Method::AbpgVmaw => "abpg_vmaw",
            Method::Abpg => "abpg",
            Method::Pg => "pg",
            Method::Pgl => "pgl",
            Method::Bpg => "bpg",
        }
    }

    /// Whether `Ψ(x^k)` is non-increasing by construction.
    pub fn is_monotone(&self) -> bool {
        matches!(self, Method::AbpgVmaw | Method::Abpg | Method::Bpg)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AbpgVmaw => "ABPG-VMAW",
            Method::Abpg => "ABPG",
            Method::Pg => "PG",
            Method::Pgl => "PGL",
            Method::Bpg => "BPG",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s || m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    /// Step parameter. Defaults to `0.99/L` for the Bregman methods and
    /// `1/L` for PG and PGL.
    pub lambda: Option<f64>,
    /// Replaces the problem's kernel for the Bregman methods.
    pub kernel: Option<Kernel>,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub eta: f64,
    pub delta: f64,
    pub shrink: f64,
    pub max_bracket: usize,
    pub max_bisect: usize,
    pub max_backtrack: usize,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub diagnostics: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::AbpgVmaw,
            lambda: None,
            kernel: None,
            c1: 0.99,
            c2: 0.999,
            mu: 0.9,
            eta: 2.0,
            delta: 0.9,
            shrink: 0.5,
            max_bracket: 200,
            max_bisect: 60,
            max_backtrack: 100,
            max_iters: 1000,
            stop_tol: 1e-8,
            diagnostics: false,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.diagnostics = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return bad(format!(
                "need 0 < c1 < c2 < 1, got c1={} c2={}",
                self.c1, self.c2
            ));
        }
        if !(0.0 < self.mu && self.mu < 1.0 && self.eta > 1.0) {
            return bad(format!(
                "need 0 < mu < 1 < eta, got mu={} eta={}",
                self.mu, self.eta
            ));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(0.0 < self.shrink && self.shrink < 1.0) {
            return bad(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("lambda must be positive, got {l}"));
            }
        }
        if !(self.stop_tol >= 0.0) {
            return bad(format!(
                "stop_tol must be nonnegative, got {}",
                self.stop_tol
            ));
        }
        Ok(())
    }

    fn vmaw_params(&self) -> VmawParams {
        VmawParams {
            mu: self.mu,
            eta: self.eta,
            max_bracket: self.max_bracket,
            max_bisect: self.max_bisect,
        }
    }

    /// The step parameter this configuration uses on `problem`.
    pub fn resolve_lambda(&self, problem: &Problem) -> Result<f64> {
        if let Some(l) = self.lambda {
            return Ok(l);
        }
        let l = problem.smad_l().ok_or_else(|| {
            Error::Config(format!(
                "{} needs lambda or a known smoothness constant",
                self.method
            ))
        })?;
        Ok(match self.method {
            Method::Pg | Method::Pgl => 1.0 / l,
            _ => 0.99 / l,
        })
    }
}

/// One row of a solver trace. Row `0` describes the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub obj: f64,
    pub acc: Option<f64>,
    pub step_t: f64,
    pub lambda_used: f64,
    pub ls_evals: usize,
    pub dk_norm: f64,
    pub xdiff: f64,
    pub wall_ns: u64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub method: Method,
    pub x_final: Array1<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRecord>,
    pub diagnostics_violations: usize,
    /// First few violation messages, for reporting.
    pub violation_log: Vec<String>,
    /// Line searches that ended in [`LineSearchStatus::CapHitFallback`].
    pub ls_fallbacks: usize,
    /// Backtracking loops that ran out of trials.
    pub backtrack_flags: usize,
    /// Line searches that returned an accepted step.
    pub ls_accepted: usize,
    /// `‖∇f(x) + ξ‖` at the final iterate.
    pub stationarity: f64,
    /// Smallest coordinate over all iterates, `x^0` included.
    pub min_coordinate: f64,
}

impl SolveOutcome {
    pub fn final_obj(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.obj)
    }

    pub fn final_acc(&self) -> Option<f64> {
        self.trace.last().and_then(|r| r.acc)
    }

    pub fn wall_seconds(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.wall_ns as f64 * 1e-9)
    }
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn distance(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

enum Step {
    Stationary,
    Moved {
        x: Array1<f64>,
        psi: f64,
        t: f64,
        lambda: f64,
        evals: usize,
        dk_norm: f64,
    },
}

struct Run<'a> {
    problem: &'a Problem,
    cfg: &'a SolverConfig,
    lambda: f64,
    violations: usize,
    violation_log: Vec<String>,
    ls_fallbacks: usize,
    ls_accepted: usize,
    backtrack_flags: usize,
}

impl Run<'_> {
    fn violation(&mut self, iter: usize, msg: String) {
        self.violations += 1;
        if self.violation_log.len() < 20 {
            self.violation_log.push(format!("iter {iter}: {msg}"));
        }
    }

    fn interior_kernel(&self) -> Option<Kernel> {
        let k = *self.problem.kernel();
        k.is_orthant().then_some(k)
    }

    /// Direction from the approximate Bregman mapping plus the line-search
    /// context at `x`.
    fn approx_direction(&mut self, x: &Array1<f64>, psi_x: f64) -> Result<Option<Direction>> {
        let p = self.problem;
        let grad = p.f_grad(x);
        let hess = p.kernel().hess_diag(x)?;
        let y = approx_prox(&MappingRequest {
            x,
            grad: &grad,
            lambda: self.lambda,
            hess: &hess,
            reg: *p.regularizer(),
            strict_interior: p.kernel().is_orthant(),
        })?;
        let d = &y - x;
        if d.iter().all(|&v| v == 0.0) {
            return Ok(None);
        }
        let xi = p.g_subgrad(x);
        let ctx = LineSearchContext {
            psi_x,
            grad_dot_d: grad.dot(&d),
            xi_dot_d: xi.dot(&d),
            quad_term: hess.quad_form(&d),
            g_gap: p.g_value(&y) - p.g_value(x),
            lambda: self.lambda,
            c1: self.cfg.c1,
            c2: self.cfg.c2,
        };
        if ctx.directional_derivative() == 0.0 {
            return Ok(None);
        }
        Ok(Some((y, d, hess, ctx)))
    }

    fn check_descent_chain(&mut self, iter: usize, ctx: &LineSearchContext) {
        let first = ctx.directional_derivative();
        let second = ctx.grad_dot_d + ctx.g_gap;
        let third = -ctx.quad_term / ctx.lambda;
        if first > second + slack(first, second) {
            self.violation(
                iter,
                format!("<∇f+ξ,d> = {first} exceeds <∇f,d>+Δg = {second}"),
            );
        }
        if second > third + slack(second, third) {
            self.violation(
                iter,
                format!("<∇f,d>+Δg = {second} exceeds -<Hd,d>/λ = {third}"),
            );
        }
        if !(third < 0.0) {
            self.violation(iter, format!("metric term {third} is not negative"));
        }
    }

    fn check_decrease(&mut self, iter: usize, psi_x: f64, psi_next: f64, bound: f64) {
        let change = psi_next - psi_x;
        if change > bound + slack(psi_x, psi_next) {
            self.violation(iter, format!("Ψ change {change} exceeds bound {bound}"));
        }
    }

    fn step_vmaw(&mut self, iter: usize, x: &Array1<f64>, psi_x: f64) -> Result<Step> {
        let Some((y, d, _hess, ctx)) = self.approx_direction(x, psi_x)? else {
            return Ok(Step::Stationary);
        };
        let line = ProblemLine::new(self.problem, x, &d, self.interior_kernel());
        let res = vmaw_search(&ctx, &line, &self.cfg.vmaw_params());
        match res.status {
            LineSearchStatus::Accepted => self.ls_accepted += 1,
            LineSearchStatus::CapHitFallback => self.ls_fallbacks += 1,
        }
        let x_ls = line.point(res.t);
        let psi_ls = self.problem.psi(&x_ls);
        let psi_y = self.problem.psi(&y);
        let (x_next, psi_next) = if psi_y < psi_ls {
            (y, psi_y)
        } else {
            (x_ls, psi_ls)
        };
        if self.cfg.diagnostics {
            self.check_descent_chain(iter, &ctx);
            if res.status == LineSearchStatus::Accepted {
                let a = eval_a(&ctx, &line, res.t);
                let w = eval_w(&ctx, &line, res.t);
                if !(a < 0.0) || !matches!(w, Ok(w) if w > 0.0) {
                    self.violation(iter, format!("accepted t={} has A={a} W={w:?}", res.t));
                }
            }
            let bound = -self.cfg.c1 * res.t / (2.0 * self.lambda) * ctx.quad_term;
            self.check_decrease(iter, psi_x, psi_next, bound);
        }
        Ok(Step::Moved {
            x: x_next,
            psi: psi_next,
            t: res.t,
            lambda: self.lambda,
            evals: res.evals(),
            dk_norm: norm(&d),
        })
    }

    fn step_abpg(&mut self, iter: usize, x: &Array1<f64>, psi_x: f64) -> Result<Step> {
        let Some((_y, d, _hess, ctx)) = self.approx_direction(x, psi_x)? else {
            return Ok(Step::Stationary);
        };
        let line = ProblemLine::new(self.problem, x, &d, self.interior_kernel());
        let bt = armijo_backtrack(&ctx, &line, self.cfg.delta, self.cfg.max_backtrack);
        if bt.flagged {
            self.backtrack_flags += 1;
        }
        let x_next = line.point(bt.t);
        let psi_next = self.problem.psi(&x_next);
        if self.cfg.diagnostics {
            self.check_descent_chain(iter, &ctx);
            if !bt.flagged {
                self.check_decrease(iter, psi_x, psi_next, 0.0);
            }
        }
        Ok(Step::Moved {
            x: x_next,
            psi: psi_next,
            t: bt.t,
            lambda: self.lambda,
            evals: bt.evals,
            dk_norm: norm(&d),
        })
    }

    fn step_pg(&mut self, x: &Array1<f64>) -> Result<Step> {
        let grad = self.problem.f_grad(x);
        let n = x.len();
        let identity = HessDiag {
            diag: Array1::ones(n),
            clamped: vec![false; n],
        };
        let y = euclidean_prox(
            x,
            &grad,
            self.lambda,
            &identity,
            *self.problem.regularizer(),
        )?;
        let dk_norm = distance(&y, x);
        if dk_norm == 0.0 {
            return Ok(Step::Stationary);
        }
        let psi = self.problem.psi(&y);
        Ok(Step::Moved {
            x: y,
            psi,
            t: 1.0,
            lambda: self.lambda,
            evals: 0,
            dk_norm,
        })
    }

    fn step_pgl(&mut self, x: &Array1<f64>) -> Result<Step> {
        let grad = self.problem.f_grad(x);
        let fx = self.problem.f_value(x);
        let res =
            descent_lemma_backtrack(self.problem, x, fx, &grad, self.lambda, self.cfg.shrink)?;
        if res.flagged {
            self.backtrack_flags += 1;
        }
        let dk_norm = distance(&res.y, x);
        if dk_norm == 0.0 {
            return Ok(Step::Stationary);
        }
        let psi = self.problem.psi(&res.y);
        Ok(Step::Moved {
            x: res.y,
            psi,
            t: 1.0,
            lambda: res.lambda,
            evals: res.shrinks + 1,
            dk_norm,
        })
    }

    fn step_bpg(&mut self, iter: usize, x: &Array1<f64>, psi_x: f64) -> Result<Step> {
        let grad = self.problem.f_grad(x);
        let theta = self.problem.regularizer().theta();
        let step = bpg_prox_shannon(x, &grad, self.lambda, theta)?;
        let dk_norm = distance(&step.y, x);
        if dk_norm == 0.0 {
            return Ok(Step::Stationary);
        }
        let psi = self.problem.psi(&step.y);
        if self.cfg.diagnostics {
            self.check_decrease(iter, psi_x, psi, 0.0);
        }
        Ok(Step::Moved {
            x: step.y,
            psi,
            t: 1.0,
            lambda: self.lambda,
            evals: 0,
            dk_norm,
        })
    }

    fn step(&mut self, iter: usize, x: &Array1<f64>, psi_x: f64) -> Result<Step> {
        match self.cfg.method {
            Method::AbpgVmaw => self.step_vmaw(iter, x, psi_x),
            Method::Abpg => self.step_abpg(iter, x, psi_x),
            Method::Pg => self.step_pg(x),
            Method::Pgl => self.step_pgl(x),
            Method::Bpg => self.step_bpg(iter, x, psi_x),
        }
    }

    fn check_start(&self, x0: &Array1<f64>) -> Result<()> {
        let p = self.problem;
        if x0.len() != p.dim() {
            return Err(Error::Dimension {
                expected: p.dim(),
                got: x0.len(),
            });
        }
        let needs_interior = match self.cfg.method {
            Method::AbpgVmaw | Method::Abpg => p.kernel().is_orthant(),
            Method::Bpg => true,
            Method::Pg | Method::Pgl => false,
        };
        if needs_interior {
            if let Some(coord) = x0.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::Domain {
                    coord,
                    value: x0[coord],
                });
            }
        }
        if !p.psi(x0).is_finite() {
            return Err(Error::Config(
                "starting point has infinite objective".into(),
            ));
        }
        Ok(())
    }

    fn feasible(&self, x: &Array1<f64>) -> bool {
        if !self.problem.feasible_set().contains(x) {
            return false;
        }
        match self.cfg.method {
            Method::AbpgVmaw | Method::Abpg if self.problem.kernel().is_orthant() => {
                self.problem.kernel().interior_contains(x)
            }
            Method::Bpg => x.iter().all(|&v| v > 0.0),
            _ => true,
        }
    }
}

/// Runs the method selected in `cfg` from `x0`.
pub fn solve(problem: &Problem, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve_with_truth(problem, x0, cfg, None)
}

/// Like [`solve`], and the trace also records `‖x^k − x*‖`.
pub fn solve_with_truth(
    problem: &Problem,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
    truth: Option<&Array1<f64>>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    if cfg.method == Method::Bpg && problem.family() != Family::NonnegKl {
        return Err(Error::Config(format!(
            "BPG has a closed-form step only for nonneg_kl problems, got {}",
            problem.family()
        )));
    }
    if let Some(t) = truth {
        if t.len() != problem.dim() {
            return Err(Error::Dimension {
                expected: problem.dim(),
                got: t.len(),
            });
        }
    }
    let swapped;
    let problem = match cfg.kernel {
        Some(k) if k != *problem.kernel() => {
            check_kernel(cfg.method, k, problem)?;
            swapped = problem.clone().with_kernel(k);
            &swapped
        }
        _ => problem,
    };
    let lambda = cfg.resolve_lambda(problem)?;
    let mut run = Run {
        problem,
        cfg,
        lambda,
        violations: 0,
        violation_log: Vec::new(),
        ls_fallbacks: 0,
        ls_accepted: 0,
        backtrack_flags: 0,
    };
    run.check_start(x0)?;

    let clock = Instant::now();
    let acc = |x: &Array1<f64>| truth.map(|t| distance(x, t));
    let mut x = x0.clone();
    let mut psi = problem.psi(&x);
    let mut trace = vec![TraceRecord {
        iter: 0,
        obj: psi,
        acc: acc(&x),
        step_t: 0.0,
        lambda_used: lambda,
        ls_evals: 0,
        dk_norm: 0.0,
        xdiff: 0.0,
        wall_ns: 0,
    }];
    let min_of = |v: &Array1<f64>| v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut min_coordinate = min_of(&x);
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..cfg.max_iters {
        let step = run.step(k, &x, psi).map_err(|e| e.at_iteration(k))?;
        let Step::Moved {
            x: x_next,
            psi: psi_next,
            t,
            lambda: lambda_used,
            evals,
            dk_norm,
        } = step
        else {
            converged = true;
            break;
        };
        if cfg.diagnostics {
            if !run.feasible(&x_next) {
                run.violation(k, "iterate left the feasible set".into());
            }
            if cfg.method.is_monotone() && psi_next > psi + slack(psi, psi_next) {
                run.violation(k, format!("objective increased from {psi} to {psi_next}"));
            }
        }
        let xdiff = distance(&x_next, &x);
        min_coordinate = min_coordinate.min(min_of(&x_next));
        x = x_next;
        psi = psi_next;
        iterations = k + 1;
        let wall_ns = clock.elapsed().as_nanos() as u64;
        let prev_ns = trace.last().map_or(0, |r| r.wall_ns);
        trace.push(TraceRecord {
            iter: iterations,
            obj: psi,
            acc: acc(&x),
            step_t: t,
            lambda_used,
            ls_evals: evals,
            dk_norm,
            xdiff,
            wall_ns: wall_ns.max(prev_ns + 1),
        });
        if xdiff <= cfg.stop_tol {
            converged = true;
            break;
        }
    }
    let stationarity = norm(&(problem.f_grad(&x) + problem.g_subgrad(&x)));
    Ok(SolveOutcome {
        method: cfg.method,
        x_final: x,
        iterations,
        converged,
        trace,
        diagnostics_violations: run.violations,
        violation_log: run.violation_log,
        ls_fallbacks: run.ls_fallbacks,
        backtrack_flags: run.backtrack_flags,
        ls_accepted: run.ls_accepted,
        stationarity,
        min_coordinate,
    })
}

/// `(y, d, ∇²φ(x), context)` at one iterate.
type Direction = (Array1<f64>, Array1<f64>, HessDiag, LineSearchContext);

fn check_kernel(method: Method, kernel: Kernel, problem: &Problem) -> Result<()> {
    match method {
        Method::Bpg if kernel != Kernel::BoltzmannShannon => Err(Error::Config(format!(
            "BPG uses the shannon kernel, got {kernel}"
        ))),
        _ if kernel.is_orthant() && problem.feasible_set() == FeasibleSet::Whole => Err(
            Error::Config(format!("kernel {kernel} needs a nonnegative feasible set")),
        ),
        _ => Ok(()),
    }
}

pub fn solve_abpg_vmaw(
    problem: &Problem,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    solve(problem, x0, &with_method(cfg, Method::AbpgVmaw))
}

pub fn solve_abpg(problem: &Problem, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve(problem, x0, &with_method(cfg, Method::Abpg))
}

pub fn solve_pg(problem: &Problem, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve(problem, x0, &with_method(cfg, Method::Pg))
}

pub fn solve_pgl(problem: &Problem, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve(problem, x0, &with_method(cfg, Method::Pgl))
}

pub fn solve_bpg(problem: &Problem, x0: &Array1<f64>, cfg: &SolverConfig) -> Result<SolveOutcome> {
    solve(problem, x0, &with_method(cfg, Method::Bpg))
}

fn with_method(cfg: &SolverConfig, method: Method) -> SolverConfig {
    SolverConfig {
        method,
        ..cfg.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_instance, FnSmooth, InstanceSpec, Regularizer};
    use ndarray::array;
    use std::sync::Arc;

    fn half_square(n: usize, reg: Regularizer) -> Problem {
        let f = FnSmooth::new(
            n,
            |x: &Array1<f64>| 0.5 * x.dot(x),
            |x: &Array1<f64>| x.clone(),
        );
        Problem::new(Arc::new(f), reg, Kernel::SquaredEuclidean, Some(1.0))
    }

    fn quad_cfg(method: Method) -> SolverConfig {
        SolverConfig {
            lambda: Some(0.9),
            diagnostics: true,
            ..SolverConfig::new(method)
        }
    }

    #[test]
    fn vmaw_contracts_one_dimensional_quadratic() {
        let p = half_square(1, Regularizer::Zero);
        let out = solve_abpg_vmaw(&p, &array![1.0], &quad_cfg(Method::AbpgVmaw)).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 25, "{} iterations", out.iterations);
        assert!(out.x_final[0].abs() <= 1e-8);
        assert_eq!(out.diagnostics_violations, 0, "{:?}", out.violation_log);
    }

    #[test]
    fn abpg_reaches_the_same_minimum() {
        let p = half_square(1, Regularizer::Zero);
        let vmaw = solve_abpg_vmaw(&p, &array![1.0], &quad_cfg(Method::AbpgVmaw)).unwrap();
        let abpg = solve_abpg(&p, &array![1.0], &quad_cfg(Method::Abpg)).unwrap();
        assert!(abpg.converged);
        assert!((abpg.final_obj() - vmaw.final_obj()).abs() <= 1e-12);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let p = half_square(3, Regularizer::Zero);
        for method in [Method::AbpgVmaw, Method::Abpg, Method::Pg, Method::Pgl] {
            let out = solve(&p, &Array1::zeros(3), &SolverConfig::new(method)).unwrap();
            assert!(out.converged, "{method}");
            assert_eq!(out.iterations, 0, "{method}");
            assert_eq!(out.trace.len(), 1);
        }
    }

    #[test]
    fn pg_solves_unit_quadratic_in_one_step() {
        let p = half_square(3, Regularizer::Zero);
        let out = solve_pg(&p, &array![3.0, -1.0, 2.0], &SolverConfig::new(Method::Pg)).unwrap();
        assert_eq!(out.trace[1].obj, 0.0);
        // x¹ = 0 is detected as stationary before a second step
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn pg_matches_hand_ista_step() {
        // x⁺ = S_{λθ}(x − λx) with λ = 0.5, θ = 0.3
        let p = half_square(3, Regularizer::L1 { theta: 0.3 });
        let cfg = SolverConfig {
            lambda: Some(0.5),
            max_iters: 1,
            ..SolverConfig::new(Method::Pg)
        };
        let out = solve_pg(&p, &array![2.0, -0.2, -1.0], &cfg).unwrap();
        let expected = [0.85, 0.0, -0.35];
        for (got, want) in out.x_final.iter().zip(expected) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn pgl_shrinks_on_quartic() {
        let f = FnSmooth::new(
            1,
            |x: &Array1<f64>| x[0].powi(4),
            |x: &Array1<f64>| array![4.0 * x[0].powi(3)],
        );
        let p = Problem::new(
            Arc::new(f),
            Regularizer::Zero,
            Kernel::SquaredEuclidean,
            Some(1.0),
        );
        let out = solve_pgl(&p, &array![2.0], &SolverConfig::new(Method::Pgl)).unwrap();
        assert!(out.trace[1].lambda_used < 1.0);
        assert!(out.trace[1].obj < out.trace[0].obj);
    }

    #[test]
    fn bpg_descends_and_stays_positive() {
        let kl = build_instance(&InstanceSpec::new(Family::NonnegKl, 60, 20, 0.05, 3)).unwrap();
        let x0 = Array1::from_elem(20, 0.5);
        let cfg = SolverConfig {
            max_iters: 200,
            ..SolverConfig::new(Method::Bpg).with_diagnostics(true)
        };
        let out = solve_bpg(&kl.problem, &x0, &cfg).unwrap();
        assert_eq!(out.diagnostics_violations, 0, "{:?}", out.violation_log);
        assert!(out.min_coordinate > 0.0);
        assert!(out.trace.windows(2).all(|w| w[1].obj <= w[0].obj + 1e-12));
    }

    #[test]
    fn bpg_rejects_other_families() {
        let lp = build_instance(&InstanceSpec::new(Family::LpLs, 5, 10, 0.1, 1)).unwrap();
        let err = solve_bpg(
            &lp.problem,
            &Array1::ones(10),
            &SolverConfig::new(Method::Bpg),
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn orthant_kernel_needs_orthant_problem() {
        let p = half_square(2, Regularizer::Zero);
        let cfg = SolverConfig {
            kernel: Some(Kernel::Burg),
            ..SolverConfig::new(Method::AbpgVmaw)
        };
        assert!(solve(&p, &array![1.0, 1.0], &cfg).is_err());
    }

    #[test]
    fn trace_records_are_consistent() {
        let lp = build_instance(&InstanceSpec::new(Family::LpLs, 10, 30, 0.1, 2)).unwrap();
        let x0 = Array1::from_elem(30, 0.5);
        let out = solve_with_truth(
            &lp.problem,
            &x0,
            &SolverConfig::new(Method::AbpgVmaw),
            Some(&lp.x_star),
        )
        .unwrap();
        assert_eq!(out.trace[0].iter, 0);
        assert!(out.trace.windows(2).all(|w| w[1].iter == w[0].iter + 1));
        assert!(out.trace.windows(2).all(|w| w[1].wall_ns > w[0].wall_ns));
        assert!(out.trace.iter().all(|r| r.acc.is_some()));
        let last = out.trace.last().unwrap();
        assert!(out.converged && last.xdiff <= 1e-8);
        assert_eq!(out.iterations, last.iter);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig {
                c1: 0.999,
                c2: 0.99,
                ..Default::default()
            },
            SolverConfig {
                mu: 1.0,
                ..Default::default()
            },
            SolverConfig {
                eta: 1.0,
                ..Default::default()
            },
            SolverConfig {
                lambda: Some(0.0),
                ..Default::default()
            },
            SolverConfig {
                delta: 1.0,
                ..Default::default()
            },
        ];
        assert!(bad.iter().all(|c| c.validate().is_err()));
    }

    #[test]
    fn default_lambda_by_method() {
        let p = half_square(1, Regularizer::Zero);
        assert_eq!(
            SolverConfig::new(Method::Abpg).resolve_lambda(&p).unwrap(),
            0.99
        );
        assert_eq!(
            SolverConfig::new(Method::Pg).resolve_lambda(&p).unwrap(),
            1.0
        );
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("newton".parse::<Method>().is_err());
    }
}
