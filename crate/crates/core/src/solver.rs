//! Least-energy solutions: the concentrated test function as initial guess,
//! Sobolev-gradient descent on the Nehari manifold and `epsilon`-continuation.

use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, Problem};
use crate::error::{Error, Result};
use crate::operator::{dot, pcg_solve_from, Jacobi, Preconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once `||g||_A <= tol * max(1, ||u||_A)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking factor of the line search.
    pub shrink: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Re-project onto the Nehari manifold every this many steps.
    pub reproject_every: usize,
    /// Seed each continuation step with the previous solution.
    pub warm_start: bool,
    /// Step/gradient-change pairs kept for the quasi-Newton direction;
    /// 0 gives plain Sobolev-gradient descent.
    pub memory: usize,
    pub preconditioner: LiftPreconditioner,
}

/// Preconditioner for the CG solves that lift the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftPreconditioner {
    /// Multigrid V-cycle where the grid coarsens, Jacobi otherwise.
    Multigrid,
    Jacobi,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 60,
            reproject_every: 1,
            warm_start: true,
            memory: 8,
            preconditioner: LiftPreconditioner::Multigrid,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", reason: "must be positive".into() });
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParameter { name: "shrink", reason: "must lie in (0, 1)".into() });
        }
        if self.reproject_every == 0 {
            return Err(Error::InvalidParameter { name: "reproject_every", reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    /// `||g||_A / max(1, ||u||_A)`.
    pub gradient: f64,
    pub step: f64,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Solution at the unknowns.
    pub u: Vec<f64>,
    pub energy: EnergyBreakdown,
    /// `||g||_A` of the Sobolev gradient.
    pub grad_norm: f64,
    pub relative_gradient: f64,
    pub nehari_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Unknowns with `u < 0` (flagged, never clamped).
    pub negative_nodes: usize,
    pub wall_time: f64,
    pub trace: Vec<TraceEntry>,
}

/// `U(s)`: `log(1/s)` outside the unit disc, `(1 - s^2)/2` inside.
pub fn profile_u(s: f64) -> f64 {
    if s >= 1.0 {
        -s.ln()
    } else {
        0.5 * (1.0 - s * s)
    }
}

/// `C^1` cutoff: 1 on `[0, 1]`, cubic fade on `(1, 2)`, 0 beyond.
pub fn cutoff(y: f64) -> f64 {
    if y <= 1.0 {
        1.0
    } else if y >= 2.0 {
        0.0
    } else {
        let t = y - 1.0;
        1.0 - 3.0 * t * t + 2.0 * t * t * t
    }
}

/// Nodal values of `q(x) (U((x - c)/eps) + log(tau/eps)) phi((x - c)/rho)` at
/// the unknowns, where `rho` is half the distance from `c` to the boundary.
pub fn initial_guess(problem: &Problem, center: [f64; 2], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter { name: "tau", reason: format!("must be positive, got {tau}") });
    }
    let eps = problem.epsilon;
    let rho = 0.5 * problem.grid().distance_to_boundary(center);
    if rho < 2.0 * eps {
        return Err(Error::CenterTooClose { rho, epsilon: eps });
    }
    Ok(test_function(problem, center, tau, eps, rho))
}

/// The test function with core radius `scale` in place of `eps`.
fn test_function(problem: &Problem, center: [f64; 2], tau: f64, scale: f64, rho: f64) -> Vec<f64> {
    let grid = problem.grid();
    let shift = (tau / scale).ln();
    grid.unknown_nodes()
        .iter()
        .zip(&problem.disc.q)
        .map(|(&k, &q)| {
            let x = grid.coords(k);
            let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
            q * (profile_u(d / scale) + shift) * cutoff(d / rho)
        })
        .collect()
}

/// Argmin of `q^2/b` over unknown nodes at distance at least `4 eps` from the
/// boundary; ties go to the node nearest the middle of the rectangle, then to
/// the lowest node index. Falls back to the most interior node.
pub fn default_center(problem: &Problem) -> [f64; 2] {
    let grid = problem.grid();
    let disc = &problem.disc;
    let g = &grid.geometry;
    let mid = [0.5 * (g.x1[0] + g.x1[1]), 0.5 * (g.x2[0] + g.x2[1])];
    let mut best: Option<(f64, f64, usize)> = None;
    let mut deepest = (f64::NEG_INFINITY, 0);
    for &k in grid.unknown_nodes() {
        let x = grid.coords(k);
        let d = grid.distance_to_boundary(x);
        if d > deepest.0 {
            deepest = (d, k);
        }
        if d < 4.0 * problem.epsilon {
            continue;
        }
        let v = disc.q_nodes.values[k].powi(2) / disc.b_nodes.values[k];
        let off = (x[0] - mid[0]).powi(2) + (x[1] - mid[1]).powi(2);
        if best.map_or(true, |(bv, boff, _)| v < bv || (v == bv && off < boff)) {
            best = Some((v, off, k));
        }
    }
    grid.coords(best.map_or(deepest.1, |(_, _, k)| k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauChoice {
    pub tau: f64,
    /// `g(tau)` changed sign on the search interval.
    pub bracketed: bool,
    /// `g(tau) = <E'(v), v> / log(1/eps)` at the returned `tau`.
    pub g: f64,
}

/// Smallest relative residual requested from the inner CG solves; below it
/// the recomputed residual stagnates on strongly graded weights.
pub const INNER_FLOOR: f64 = 1e-8;

pub const TAU_RANGE: (f64, f64) = (1e-3, 1e3);

/// `g(tau) = <E'(v_tau), v_tau> / log(1/eps)`.
pub fn tau_balance(problem: &Problem, center: [f64; 2], tau: f64) -> Result<f64> {
    let v = initial_guess(problem, center, tau)?;
    Ok(problem.energy(&v).pairing / problem.log_inv_eps())
}

/// Bisection in `log tau` for a sign change of `g` over [`TAU_RANGE`];
/// falls back to `tau = 1` without a bracket.
pub fn choose_tau(problem: &Problem, center: [f64; 2]) -> Result<TauChoice> {
    let g = |t: f64| tau_balance(problem, center, t);
    let (mut lo, mut hi) = (TAU_RANGE.0.ln(), TAU_RANGE.1.ln());
    let (glo, ghi) = (g(lo.exp())?, g(hi.exp())?);
    if !(glo > 0.0 && ghi < 0.0) {
        return Ok(TauChoice { tau: 1.0, bracketed: false, g: g(1.0)? });
    }
    let scale = glo.abs();
    let mut gm = glo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        gm = g(mid.exp())?;
        if gm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if gm.abs() <= 1e-10 * scale || hi - lo < 1e-15 {
            break;
        }
    }
    Ok(TauChoice { tau: (0.5 * (lo + hi)).exp(), bracketed: true, g: gm })
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    /// `A^-1 y`, the difference of two consecutive lifted gradients.
    ay: Vec<f64>,
    rho: f64,
}

/// Quasi-Newton direction in the `A` metric: the two-loop recursion with
/// initial inverse Hessian `gamma A^-1`, where `A^-1 r = lift`.
fn quasi_newton_direction(history: &VecDeque<Pair>, r: &[f64], lift: &[f64]) -> Vec<f64> {
    let mut q = r.to_vec();
    let mut z = lift.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let a = pair.rho * dot(&pair.s, &q);
        for i in 0..q.len() {
            q[i] -= a * pair.y[i];
            z[i] -= a * pair.ay[i];
        }
        alphas.push(a);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.ay);
        z.iter_mut().for_each(|v| *v *= gamma);
    }
    for (pair, a) in history.iter().zip(alphas.iter().rev()) {
        let beta = pair.rho * dot(&pair.y, &z);
        for i in 0..z.len() {
            z[i] += pair.s[i] * (a - beta);
        }
    }
    z.iter().map(|v| -v).collect()
}

/// Sobolev-gradient descent of `E_eps` on the Nehari manifold, from `u0`.
///
/// Each step lifts the gradient through `A` (warm-started CG), builds a
/// search direction from the lifted gradient and, when `opts.memory > 0`,
/// the last `memory` step/gradient-change pairs, then backtracks on the
/// energy of the Nehari-projected candidates.
pub fn minimize(problem: &Problem, u0: &[f64], opts: &SolverOptions) -> Result<SolveResult> {
    opts.validate()?;
    let start = Instant::now();
    let op = problem.disc.op();
    let jacobi;
    let precond: &dyn Preconditioner = match (opts.preconditioner, problem.disc.multigrid()?) {
        (LiftPreconditioner::Multigrid, Some(mg)) => mg,
        _ => {
            jacobi = Jacobi::new(op);
            &jacobi
        }
    };
    let (_, mut w) = problem.nehari_project(u0)?;
    let mut e = problem.energy(&w);
    let mut lift = vec![0.0; w.len()];
    let mut prev_rel = 1.0_f64;
    let mut trace = Vec::new();
    let mut step = 0.0;
    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut previous: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    for it in 0..=opts.max_iter {
        let r = problem.gradient(&w);
        let wnorm = (2.0 * e.quadratic).max(0.0).sqrt();
        if wnorm < 1e-12 {
            return Err(Error::CollapsedToZero);
        }
        let inner = (0.1 * prev_rel).clamp((0.1 * opts.tol).max(INNER_FLOOR), 1e-2);
        let rep = pcg_solve_from(op, precond, &r, &mut lift, inner, 10 * op.dim + 100);
        if !rep.converged {
            return Err(Error::LinearSolveFailure { iterations: rep.iterations, residual: rep.residual });
        }
        let gnorm2 = dot(&lift, &r).max(0.0);
        let gnorm = gnorm2.sqrt();
        let rel = gnorm / wnorm.max(1.0);
        trace.push(TraceEntry { iteration: it, energy: e.total, gradient: rel, step, cg_iterations: rep.iterations });
        prev_rel = rel;
        if rel <= opts.tol {
            return Ok(finish(problem, w, e, gnorm, rel, it, true, start, trace));
        }
        if it == opts.max_iter {
            break;
        }
        if let Some((w0, r0, g0)) = previous.take() {
            if opts.memory > 0 {
                let s: Vec<f64> = w.iter().zip(&w0).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = r.iter().zip(&r0).map(|(a, b)| a - b).collect();
                let ay: Vec<f64> = lift.iter().zip(&g0).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && dot(&y, &ay) > 0.0 {
                    if history.len() == opts.memory {
                        history.pop_front();
                    }
                    history.push_back(Pair { s, y, ay, rho: 1.0 / sy });
                }
            }
        }
        let mut dir = quasi_newton_direction(&history, &r, &lift);
        let mut slope = dot(&r, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = lift.iter().map(|v| -v).collect();
            slope = -gnorm2;
        }
        let project = (it + 1) % opts.reproject_every == 0;
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial: Vec<f64> = w.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            let cand = if project {
                match problem.nehari_project(&trial) {
                    Ok((_, c)) => Some(c),
                    Err(Error::NoNehariRoot { .. }) | Err(Error::CollapsedToZero) => None,
                    Err(other) => return Err(other),
                }
            } else {
                Some(trial)
            };
            if let Some(c) = cand {
                let de = problem.energy_change(&w, &c);
                if de < 0.0 && de <= opts.armijo * s * slope {
                    let ec = problem.energy(&c);
                    accepted = Some((c, ec));
                    break;
                }
            }
            s *= opts.shrink;
        }
        match accepted {
            Some((c, ec)) => {
                previous = Some((std::mem::replace(&mut w, c), r, lift.clone()));
                e = ec;
                step = s;
            }
            None if !history.is_empty() => {
                // retry from the plain lifted gradient
                history.clear();
                previous = None;
            }
            None => return Err(Error::LineSearchFailed { iteration: it, gradient: rel }),
        }
    }
    Err(Error::MaxIterations { iterations: opts.max_iter, gradient: prev_rel })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &Problem,
    u: Vec<f64>,
    energy: EnergyBreakdown,
    grad_norm: f64,
    relative_gradient: f64,
    iterations: usize,
    converged: bool,
    start: Instant,
    trace: Vec<TraceEntry>,
) -> SolveResult {
    let nehari_residual = problem.nehari_residual(&u);
    let negative_nodes = u.iter().filter(|&&v| v < 0.0).count();
    SolveResult {
        u,
        energy,
        grad_norm,
        relative_gradient,
        nehari_residual,
        iterations,
        converged,
        negative_nodes,
        wall_time: start.elapsed().as_secs_f64(),
        trace,
    }
}

/// Cold start: test function at [`default_center`] with [`choose_tau`]. When
/// the center is closer than `4 eps` to the boundary the core radius drops to
/// `rho/2` with `tau = 1`.
pub fn cold_start(problem: &Problem) -> Result<Vec<f64>> {
    let center = default_center(problem);
    let rho = 0.5 * problem.grid().distance_to_boundary(center);
    if rho < 2.0 * problem.epsilon {
        // the domain is too small for a core of radius eps: start from the
        // widest core that fits and let the descent shrink it
        return Ok(test_function(problem, center, 1.0, 0.5 * rho, rho));
    }
    let tau = choose_tau(problem, center)?;
    initial_guess(problem, center, tau.tau)
}

/// Solve for each `epsilon` in decreasing order on one discretization; the
/// first from [`cold_start`], later ones warm-started from the previous
/// solution when `opts.warm_start` is set.
pub fn continuation(base: &Problem, epsilons: &[f64], opts: &SolverOptions) -> Result<Vec<SolveResult>> {
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter { name: "epsilons", reason: "must be strictly decreasing".into() });
    }
    let mut out: Vec<SolveResult> = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let problem = base.at_epsilon(eps)?;
        let u0 = match out.last() {
            Some(prev) if opts.warm_start => prev.u.clone(),
            _ => cold_start(&problem)?,
        };
        out.push(minimize(&problem, &u0, opts)?);
    }
    Ok(out)
}
