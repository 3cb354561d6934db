//! Vortex-core statistics, circulation, per-`epsilon` report rows and sweep
//! trends, and reconstruction of the physical flow from a computed `u`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::energy::{pos_pow, Problem};
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::{predicted_target, Target, WeightProfile};
use crate::solver::{cold_start, minimize, SolveResult, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreStats {
    /// Nodes with `u > q_eps`, in node order.
    pub nodes: Vec<usize>,
    pub area: f64,
    pub diameter: f64,
    /// Argmax of `u - q_eps`.
    pub peak: [f64; 2],
    pub peak_node: usize,
    /// Centroid weighted by quadrature mass.
    pub centroid: [f64; 2],
    pub distance_to_boundary: f64,
    pub components: usize,
}

/// The vortex core `{u > q_eps}` of the unknown vector `x`.
pub fn extract_core(problem: &Problem, x: &[f64]) -> Result<CoreStats> {
    let grid = problem.grid();
    let psi = problem.psi_nodes(x);
    let inside: Vec<bool> = psi.values.iter().map(|&v| v > 0.0).collect();
    let nodes: Vec<usize> = (0..grid.node_count()).filter(|&k| inside[k]).collect();
    if nodes.is_empty() {
        return Err(Error::EmptyCore);
    }
    let mass = grid.mass();
    let mut area = 0.0;
    let mut centroid = [0.0, 0.0];
    let mut peak_node = nodes[0];
    let mut distance_to_boundary = f64::INFINITY;
    for &k in &nodes {
        let x = grid.coords(k);
        area += mass[k];
        centroid[0] += mass[k] * x[0];
        centroid[1] += mass[k] * x[1];
        if psi.values[k] > psi.values[peak_node] {
            peak_node = k;
        }
        distance_to_boundary = distance_to_boundary.min(grid.distance_to_boundary(x));
    }
    if area > 0.0 {
        centroid = [centroid[0] / area, centroid[1] / area];
    }
    let edge: Vec<[f64; 2]> = nodes
        .iter()
        .filter(|&&k| grid.neighbours(k).any(|n| !inside[n]) || grid.neighbours(k).count() < 4)
        .map(|&k| grid.coords(k))
        .collect();
    let mut diameter: f64 = 0.0;
    for (a, p) in edge.iter().enumerate() {
        for q in &edge[a + 1..] {
            diameter = diameter.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    Ok(CoreStats {
        components: count_components(grid, &inside, &nodes),
        nodes,
        area,
        diameter,
        peak: grid.coords(peak_node),
        peak_node,
        centroid,
        distance_to_boundary,
    })
}

fn count_components(grid: &Grid, inside: &[bool], nodes: &[usize]) -> usize {
    let mut seen = vec![false; inside.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for &start in nodes {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            for n in grid.neighbours(k) {
                if inside[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
    }
    count
}

/// `kappa_eps = eps^-2 int b (u - q_eps)_+^p`, the integral of the vorticity
/// `(b/eps^2)(u - q_eps)_+^p` over the computational plane.
pub fn circulation(problem: &Problem, x: &[f64]) -> f64 {
    problem.source(x).iter().sum()
}

/// One row of the asymptotics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub epsilon: f64,
    pub energy: f64,
    pub kappa: f64,
    /// `kappa b(a)/q(a)` at the core peak `a`.
    pub kappa_ratio: f64,
    /// `E/(pi log(1/eps))`.
    pub energy_density: f64,
    /// `q(a)^2/b(a)`.
    pub q2_over_b_peak: f64,
    /// `E/(pi log(1/eps) inf q^2/b)`.
    pub upper_bound_ratio: f64,
    pub b_peak: f64,
    pub peak: [f64; 2],
    pub centroid: [f64; 2],
    pub diameter: f64,
    pub diameter_over_eps: f64,
    pub core_area: f64,
    pub components: usize,
    pub distance_to_boundary: f64,
    pub iterations: usize,
    pub gradient: f64,
    pub nehari_residual: f64,
    pub negative_nodes: usize,
    pub converged: bool,
}

/// Report row of a solve; `target` supplies `inf q^2/b`.
pub fn energy_report(problem: &Problem, result: &SolveResult, target: &Target) -> Result<ReportRow> {
    let core = extract_core(problem, &result.u)?;
    let disc = &problem.disc;
    let b = disc.b_nodes.values[core.peak_node];
    let q = disc.q_nodes.values[core.peak_node];
    let kappa = circulation(problem, &result.u);
    let l = problem.log_inv_eps();
    let energy = result.energy.total;
    Ok(ReportRow {
        epsilon: problem.epsilon,
        energy,
        kappa,
        kappa_ratio: kappa * b / q,
        energy_density: energy / (PI * l),
        q2_over_b_peak: q * q / b,
        upper_bound_ratio: energy / (PI * l * target.limit_energy_density),
        b_peak: b,
        peak: core.peak,
        centroid: core.centroid,
        diameter: core.diameter,
        diameter_over_eps: core.diameter / problem.epsilon,
        core_area: core.area,
        components: core.components,
        distance_to_boundary: core.distance_to_boundary,
        iterations: result.iterations,
        gradient: result.relative_gradient,
        nehari_residual: result.nehari_residual,
        negative_nodes: result.negative_nodes,
        converged: result.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterFit {
    /// Least-squares slope of `log diam` against `log eps`.
    pub slope: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Scaling of the core diameter across a sweep of at least three rows, all
/// with a core wider than one node.
pub fn diameter_scaling(rows: &[ReportRow]) -> Result<DiameterFit> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.diameter)).collect();
    diameter_fit(&pts)
}

/// [`diameter_scaling`] on raw `(epsilon, diameter)` pairs.
pub fn diameter_fit(points: &[(f64, f64)]) -> Result<DiameterFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, got: points.len() });
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0 && p.1 > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "diameter",
            reason: format!("need positive epsilon and diameter, got ({}, {})", p.0, p.1),
        });
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ratios: Vec<f64> = points.iter().map(|p| p.1 / p.0).collect();
    Ok(DiameterFit {
        slope: sxy / sxx,
        min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Report of a whole sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub target: Target,
    /// Limit of `kappa b(a)/q(a)`.
    pub limit_kappa_ratio: f64,
    pub rows: Vec<ReportRow>,
    /// `None` with fewer than three rows.
    pub diameter_fit: Option<DiameterFit>,
}

impl AsymptoticsReport {
    pub fn new(target: Target, rows: Vec<ReportRow>) -> Self {
        let diameter_fit = diameter_scaling(&rows).ok();
        Self { target, limit_kappa_ratio: 2.0 * PI, rows, diameter_fit }
    }
}

/// Solve a sweep and tabulate it.
pub fn sweep_report(problem: &Problem, results: &[SolveResult], epsilons: &[f64]) -> Result<AsymptoticsReport> {
    let target = predicted_target(&problem.disc.spec, problem.grid())?;
    let mut rows = Vec::with_capacity(results.len());
    for (res, &eps) in results.iter().zip(epsilons) {
        rows.push(energy_report(&problem.at_epsilon(eps)?, res, &target)?);
    }
    Ok(AsymptoticsReport::new(target, rows))
}

/// Reconstructed velocity, vorticity and pressure head.
///
/// `v1` lives on the links `(i, j)-(i, j+1)` (index `i * (n2-1) + j`) and
/// `v2` on the links `(i, j)-(i+1, j)` (index `i * n2 + j`); `w1`, `w2` hold
/// `b` at the same link midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowFields {
    pub psi: Field,
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub vorticity: Field,
    /// Pressure for rings, surface height for lakes.
    pub head: Field,
    /// `+1` when the stream function is `curl`-oriented (lakes), `-1` for the
    /// meridian convention of rings.
    pub orientation: f64,
}

fn link_weight(weight: &WeightProfile, b_nodes: &Field, a: usize, b: usize, mid: [f64; 2]) -> f64 {
    match weight.eval(mid[0], mid[1]) {
        Some(v) => v,
        None => 0.5 * (b_nodes.values[a] + b_nodes.values[b]),
    }
}

fn reconstruct(problem: &Problem, x: &[f64], orientation: f64) -> FlowFields {
    let grid = problem.grid();
    let disc = &problem.disc;
    let weight = &disc.spec.weight;
    let (n1, n2, h1, h2) = (grid.n1, grid.n2, grid.h1, grid.h2);
    let psi = problem.psi_nodes(x);
    let mut v1 = Vec::with_capacity(n1 * (n2 - 1));
    let mut w1 = Vec::with_capacity(n1 * (n2 - 1));
    for i in 0..n1 {
        for j in 0..n2 - 1 {
            let (a, b) = (grid.node(i, j), grid.node(i, j + 1));
            let [x1, x2] = grid.coords(a);
            let w = link_weight(weight, &disc.b_nodes, a, b, [x1, x2 + 0.5 * h2]);
            let d = (psi.values[b] - psi.values[a]) / h2;
            // the stream function is even across the axis, where b vanishes
            let v = if w > 0.0 { orientation * d / w } else { 0.0 };
            v1.push(v);
            w1.push(w);
        }
    }
    let mut v2 = Vec::with_capacity((n1 - 1) * n2);
    let mut w2 = Vec::with_capacity((n1 - 1) * n2);
    for i in 0..n1 - 1 {
        for j in 0..n2 {
            let (a, b) = (grid.node(i, j), grid.node(i + 1, j));
            let [x1, x2] = grid.coords(a);
            let w = link_weight(weight, &disc.b_nodes, a, b, [x1 + 0.5 * h1, x2]);
            v2.push(-orientation * (psi.values[b] - psi.values[a]) / (h1 * w));
            w2.push(w);
        }
    }
    let p = problem.p;
    let inv = 1.0 / (problem.epsilon * problem.epsilon);
    let vorticity = Field {
        values: psi.values.iter().zip(&disc.b_nodes.values).map(|(&s, &b)| inv * b * pos_pow(s, p)).collect(),
    };
    let mut head = Field::zeros(grid);
    for i in 0..n1 {
        for j in 0..n2 {
            let k = grid.node(i, j);
            let mut s1 = 0.0;
            let mut c1 = 0.0;
            if j + 1 < n2 {
                s1 += v1[i * (n2 - 1) + j].powi(2);
                c1 += 1.0;
            }
            if j > 0 {
                s1 += v1[i * (n2 - 1) + j - 1].powi(2);
                c1 += 1.0;
            }
            let mut s2 = 0.0;
            let mut c2 = 0.0;
            if i + 1 < n1 {
                s2 += v2[i * n2 + j].powi(2);
                c2 += 1.0;
            }
            if i > 0 {
                s2 += v2[(i - 1) * n2 + j].powi(2);
                c2 += 1.0;
            }
            let speed2 = s1 / c1 + s2 / c2;
            let f = inv * pos_pow(psi.values[k], p + 1.0) / (p + 1.0);
            head.values[k] = -f - 0.5 * speed2;
        }
    }
    FlowFields { psi, v1, v2, w1, w2, vorticity, head, orientation }
}

/// Axisymmetric Euler flow of a ring solution: `psi = u - q_eps`,
/// `v_r = -psi_z / r`, `v_z = psi_r / r`, `omega = (r/eps^2) psi_+^p`,
/// pressure `-F(psi) - |v|^2/2` with `F(s) = s_+^(p+1) / ((p+1) eps^2)`.
pub fn reconstruct_euler_flow(problem: &Problem, x: &[f64]) -> Result<FlowFields> {
    if !problem.disc.spec.scenario.is_ring() {
        return Err(Error::WrongScenario { expected: "vortex ring" });
    }
    Ok(reconstruct(problem, x, -1.0))
}

/// Lake flow: `b v = curl psi`, i.e. `v = (psi_2, -psi_1)/b`, vorticity
/// `(b/eps^2) psi_+^p` and height `-F(psi) - |v|^2/2`.
pub fn reconstruct_lake_flow(problem: &Problem, x: &[f64]) -> Result<FlowFields> {
    if !problem.disc.spec.scenario.is_lake() {
        return Err(Error::WrongScenario { expected: "lake" });
    }
    Ok(reconstruct(problem, x, 1.0))
}

impl FlowFields {
    /// Largest cell divergence of `b v`, scaled by the cell size.
    pub fn max_divergence(&self, grid: &Grid) -> f64 {
        let (n1, n2) = (grid.n1, grid.n2);
        let mut worst: f64 = 0.0;
        for i in 0..n1 - 1 {
            for j in 0..n2 - 1 {
                let f1 = |ii: usize| self.w1[ii * (n2 - 1) + j] * self.v1[ii * (n2 - 1) + j];
                let f2 = |jj: usize| self.w2[i * n2 + jj] * self.v2[i * n2 + jj];
                let div = (f1(i + 1) - f1(i)) * grid.h2 + (f2(j + 1) - f2(j)) * grid.h1;
                worst = worst.max(div.abs());
            }
        }
        worst
    }

    /// Integral of the vorticity by the trapezoid rule.
    pub fn vorticity_integral(&self, grid: &Grid) -> f64 {
        grid.mass().iter().zip(&self.vorticity.values).map(|(m, w)| m * w).sum()
    }

    /// Line integral of `v` around the dual cells of the node block
    /// `[lo.0, hi.0] x [lo.1, hi.1]`, oriented so that it equals the
    /// enclosed circulation.
    pub fn loop_circulation(&self, grid: &Grid, lo: (usize, usize), hi: (usize, usize)) -> Result<f64> {
        let (n1, n2) = (grid.n1, grid.n2);
        if !(lo.0 >= 1 && lo.1 >= 1 && hi.0 + 1 < n1 && hi.1 + 1 < n2 && lo.0 <= hi.0 && lo.1 <= hi.1) {
            return Err(Error::InvalidParameter { name: "loop", reason: "block must lie inside the grid".into() });
        }
        let v1 = |i: usize, j: usize| self.v1[i * (n2 - 1) + j];
        let v2 = |i: usize, j: usize| self.v2[i * n2 + j];
        let mut ccw = 0.0;
        for j in lo.1..=hi.1 {
            ccw += grid.h2 * v2(hi.0, j);
            ccw -= grid.h2 * v2(lo.0 - 1, j);
        }
        for i in lo.0..=hi.0 {
            ccw -= grid.h1 * v1(i, hi.1);
            ccw += grid.h1 * v1(i, lo.1 - 1);
        }
        Ok(self.orientation * ccw)
    }
}

/// Node block enclosing the core with a margin, clipped to the unknowns.
pub fn core_block(grid: &Grid, core: &CoreStats, margin: usize) -> ((usize, usize), (usize, usize)) {
    let (mut lo, mut hi) = ((usize::MAX, usize::MAX), (0, 0));
    for &k in &core.nodes {
        let (i, j) = grid.ij(k);
        lo = (lo.0.min(i), lo.1.min(j));
        hi = (hi.0.max(i), hi.1.max(j));
    }
    (
        (lo.0.saturating_sub(margin).max(1), lo.1.saturating_sub(margin).max(1)),
        ((hi.0 + margin).min(grid.n1 - 2), (hi.1 + margin).min(grid.n2 - 2)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictGap {
    pub c_eps: f64,
    pub c_eps_inf: f64,
    /// `c_eps_inf - c_eps`.
    pub gap: f64,
}

/// Least-energy levels of an obstructed problem and its translation-invariant
/// companion, both from cold starts.
pub fn strict_inequality_check(exterior: &Problem, invariant: &Problem, opts: &SolverOptions) -> Result<StrictGap> {
    let a = minimize(exterior, &cold_start(exterior)?, opts)?;
    let b = minimize(invariant, &cold_start(invariant)?, opts)?;
    Ok(StrictGap { c_eps: a.energy.total, c_eps_inf: b.energy.total, gap: b.energy.total - a.energy.total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryProfile, DomainGeometry, ProblemSpec, Scenario};

    fn flat(cells: usize, epsilon: f64) -> Problem {
        let spec = ProblemSpec::new(
            Scenario::Lake,
            DomainGeometry::rectangle([-2.0, 2.0], [-2.0, 2.0]),
            WeightProfile::Constant { value: 1.0 },
            BoundaryProfile::LakeConstant { value: 1.0 },
        )
        .unwrap()
        .with_epsilon(epsilon)
        .unwrap();
        Problem::from_spec(&spec, cells, cells).unwrap()
    }

    #[test]
    fn empty_core() {
        let pb = flat(16, 0.5);
        let z = vec![0.0; pb.disc.dim()];
        assert!(matches!(extract_core(&pb, &z), Err(Error::EmptyCore)));
        assert_eq!(circulation(&pb, &z), 0.0);
    }

    #[test]
    fn synthetic_disc_core() {
        let pb = flat(64, 0.5);
        let grid = pb.grid();
        let qe = pb.qe[0];
        let d = 0.6;
        let u = Field::from_fn(grid, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            qe + (d * d - r2)
        })
        .clamped(grid);
        let core = extract_core(&pb, &u.unknowns(grid)).unwrap();
        assert!((core.diameter - 2.0 * d).abs() <= 2.0 * grid.h1);
        assert_eq!(core.components, 1);
        assert_eq!(core.peak, [0.0, 0.0]);
    }

    #[test]
    fn circulation_of_known_bump() {
        // (u - q_eps)_+^2 = (d^2 - r^2)_+ with p = 2: psi = sqrt(d^2 - r^2)
        let pb = flat(128, 0.5);
        let grid = pb.grid();
        let qe = pb.qe[0];
        let d: f64 = 0.8;
        let u = Field::from_fn(grid, |x| qe + (d * d - x[0] * x[0] - x[1] * x[1]).max(0.0).sqrt());
        let kappa = circulation(&pb, &u.unknowns(grid));
        let exact = PI * d.powi(4) / 2.0 / 0.25;
        assert!((kappa - exact).abs() < 1e-3 * exact, "{kappa} vs {exact}");
    }

    #[test]
    fn exact_power_law_slope() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| (e, 3.0 * e)).collect();
        let fit = diameter_fit(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.max_ratio - 3.0).abs() < 1e-12 && (fit.min_ratio - 3.0).abs() < 1e-12);
        assert!(matches!(diameter_fit(&pts[..2]), Err(Error::InsufficientPoints { .. })));
    }

    #[test]
    fn lake_flow_identities() {
        let pb = flat(32, 0.3);
        let res = minimize(&pb, &cold_start(&pb).unwrap(), &SolverOptions::default()).unwrap();
        let flow = reconstruct_lake_flow(&pb, &res.u).unwrap();
        let grid = pb.grid();
        assert!(flow.max_divergence(grid) < 1e-12);
        let kappa = circulation(&pb, &res.u);
        assert!((flow.vorticity_integral(grid) - kappa).abs() <= 1e-12 * kappa);
        for k in 0..grid.node_count() {
            assert_eq!(flow.vorticity.values[k] > 0.0, flow.psi.values[k] > 0.0);
        }
        let core = extract_core(&pb, &res.u).unwrap();
        let (lo, hi) = core_block(grid, &core, 3);
        let line = flow.loop_circulation(grid, lo, hi).unwrap();
        assert!((line - kappa).abs() <= 1e-5 * kappa, "{line} vs {kappa}");
        assert!(reconstruct_euler_flow(&pb, &res.u).is_err());
    }
}
