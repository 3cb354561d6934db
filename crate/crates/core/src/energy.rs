//! The energy functional `E_eps`, its gradient, the Nehari constraint and the
//! exact identities of the continuous problem as checkable residuals.
//!
//! Fields are handled here as vectors over the unknown nodes; see
//! [`Field::unknowns`] and [`Field::from_unknowns`] for the conversion.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::grid::{face_coefficients, face_quadratic, sample_profile, Field, Grid, Profile};
use crate::model::{ProblemSpec, WeightProfile};
use crate::operator::{assemble, dot, Assembly, Multigrid, SparseOperator};

/// Grid, operator and sampled coefficients shared by every `epsilon`.
#[derive(Debug)]
pub struct Discretization {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub asm: Assembly,
    /// `b` at every node.
    pub b_nodes: Field,
    /// `q` at every node (0 inside obstacles).
    pub q_nodes: Field,
    /// `mass * b` at the unknowns.
    pub mb: Vec<f64>,
    /// `q` at the unknowns.
    pub q: Vec<f64>,
    multigrid: OnceLock<Option<Multigrid>>,
}

impl Discretization {
    pub fn new(spec: &ProblemSpec, cells1: usize, cells2: usize) -> Result<Arc<Self>> {
        spec.validate()?;
        let grid = Grid::new(&spec.geometry, cells1, cells2)?;
        let asm = assemble(&grid, &spec.weight)?;
        let b_nodes = sample_profile(&grid, Profile::Weight(&spec.weight))?;
        let q_nodes = sample_profile(&grid, Profile::Boundary(&spec.profile))?;
        let mut mb = Vec::with_capacity(grid.unknown_count());
        let mut q = Vec::with_capacity(grid.unknown_count());
        for &k in grid.unknown_nodes() {
            let [x1, x2] = grid.coords(k);
            let bk = b_nodes.values[k];
            if !(bk > 0.0) {
                return Err(Error::NonPositiveWeight { x1, x2, value: bk });
            }
            let qk = q_nodes.values[k];
            if !(qk > 0.0) {
                return Err(Error::BadSample { x1, x2, what: format!("profile q = {qk} must be positive") });
            }
            mb.push(grid.mass()[k] * bk);
            q.push(qk);
        }
        Ok(Arc::new(Self { spec: spec.clone(), grid, asm, b_nodes, q_nodes, mb, q, multigrid: OnceLock::new() }))
    }

    pub fn op(&self) -> &SparseOperator {
        &self.asm.op
    }

    pub fn dim(&self) -> usize {
        self.asm.op.dim
    }

    /// Multigrid hierarchy for the operator, built on first use; `None` when
    /// the grid admits no coarsening.
    pub fn multigrid(&self) -> Result<Option<&Multigrid>> {
        if let Some(mg) = self.multigrid.get() {
            return Ok(mg.as_ref());
        }
        let mg = Multigrid::new(&self.grid, &self.spec.weight, &self.asm.op)?;
        Ok(self.multigrid.get_or_init(|| mg).as_ref())
    }

    /// `||x||_A = sqrt(x^T A x)`, the discrete `H^1_0(b)` norm.
    pub fn norm(&self, x: &[f64]) -> f64 {
        self.asm.op.quadratic(x).max(0.0).sqrt()
    }
}

/// One `(epsilon, p)` instance on a shared discretization.
#[derive(Debug, Clone)]
pub struct Problem {
    pub disc: Arc<Discretization>,
    pub epsilon: f64,
    pub p: f64,
    /// `q_eps = log(1/eps) q` at the unknowns.
    pub qe: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    /// `1/2 int |grad u|^2 / b`.
    pub quadratic: f64,
    /// `1/((p+1) eps^2) int b (u - q_eps)_+^(p+1)`.
    pub nonlinear: f64,
    pub total: f64,
    /// `<E'(u), u>`.
    pub pairing: f64,
}

#[inline]
pub(crate) fn pos_pow(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if p == 2.0 {
        x * x
    } else {
        x.powf(p)
    }
}

impl Problem {
    pub fn new(disc: Arc<Discretization>, epsilon: f64, p: f64) -> Result<Self> {
        let spec = disc.spec.clone().with_epsilon(epsilon)?.with_exponent(p)?;
        let l = spec.log_inv_eps();
        let qe = disc.q.iter().map(|q| l * q).collect();
        Ok(Self { disc, epsilon, p, qe })
    }

    /// Discretize `spec` on `cells1 x cells2` cells at its own `(epsilon, p)`.
    pub fn from_spec(spec: &ProblemSpec, cells1: usize, cells2: usize) -> Result<Self> {
        Self::new(Discretization::new(spec, cells1, cells2)?, spec.epsilon, spec.p)
    }

    /// Same discretization at another `epsilon`.
    pub fn at_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.disc.clone(), epsilon, self.p)
    }

    pub fn grid(&self) -> &Grid {
        &self.disc.grid
    }

    pub fn log_inv_eps(&self) -> f64 {
        (1.0 / self.epsilon).ln()
    }

    fn inv_eps2(&self) -> f64 {
        1.0 / (self.epsilon * self.epsilon)
    }

    /// `q_eps` at every node.
    pub fn qe_nodes(&self) -> Field {
        let l = self.log_inv_eps();
        Field { values: self.disc.q_nodes.values.iter().map(|q| l * q).collect() }
    }

    /// `u - q_eps` at every node, with `u = 0` on Dirichlet nodes.
    pub fn psi_nodes(&self, x: &[f64]) -> Field {
        let u = Field::from_unknowns(self.grid(), x);
        let qe = self.qe_nodes();
        Field { values: u.values.iter().zip(&qe.values).map(|(u, q)| u - q).collect() }
    }

    pub fn energy(&self, x: &[f64]) -> EnergyBreakdown {
        let ax = self.disc.op().mul(x);
        let grad2 = dot(x, &ax);
        let (mut s_p1, mut s_pu) = (0.0, 0.0);
        for i in 0..x.len() {
            let psi = x[i] - self.qe[i];
            if psi > 0.0 {
                let f = self.disc.mb[i] * pos_pow(psi, self.p);
                s_p1 += f * psi;
                s_pu += f * x[i];
            }
        }
        let quadratic = 0.5 * grad2;
        let nonlinear = self.inv_eps2() * s_p1 / (self.p + 1.0);
        EnergyBreakdown {
            quadratic,
            nonlinear,
            total: quadratic - nonlinear,
            pairing: grad2 - self.inv_eps2() * s_pu,
        }
    }

    /// `E(to) - E(from)`, accurate relative to the change itself rather than
    /// to the energies: the quadratic part is `1/2 d^T A (to + from)` and each
    /// nonlinear term is differenced through `expm1`/`ln_1p`.
    pub fn energy_change(&self, from: &[f64], to: &[f64]) -> f64 {
        let d: Vec<f64> = to.iter().zip(from).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = to.iter().zip(from).map(|(a, b)| a + b).collect();
        let quadratic = 0.5 * dot(&d, &self.disc.op().mul(&sum));
        let e = self.p + 1.0;
        let mut nonlinear = 0.0;
        for i in 0..d.len() {
            let a = to[i] - self.qe[i];
            let b = from[i] - self.qe[i];
            let diff = match (a > 0.0, b > 0.0) {
                (false, false) => continue,
                (true, false) => a.powf(e),
                (false, true) => -b.powf(e),
                (true, true) => b.powf(e) * (e * (d[i] / b).ln_1p()).exp_m1(),
            };
            nonlinear += self.disc.mb[i] * diff;
        }
        quadratic - self.inv_eps2() * nonlinear / e
    }

    /// Source term `mass * b * (u - q_eps)_+^p / eps^2` at the unknowns.
    pub fn source(&self, x: &[f64]) -> Vec<f64> {
        let s = self.inv_eps2();
        x.iter()
            .zip(&self.qe)
            .zip(&self.disc.mb)
            .map(|((u, q), mb)| s * mb * pos_pow(u - q, self.p))
            .collect()
    }

    /// Dual gradient `A u - mass * b (u - q_eps)_+^p / eps^2`; its dot product
    /// with `v` is the directional derivative of [`Problem::energy`].
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.disc.op().mul(x);
        for (gi, si) in g.iter_mut().zip(self.source(x)) {
            *gi -= si;
        }
        g
    }

    /// `h(t) = <E'(t u), t u>`.
    pub fn nehari_h(&self, x: &[f64], t: f64) -> f64 {
        self.nehari_h_with(x, self.disc.op().quadratic(x), t)
    }

    fn nehari_h_with(&self, x: &[f64], grad2: f64, t: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let tu = t * x[i];
            let psi = tu - self.qe[i];
            if psi > 0.0 {
                s += self.disc.mb[i] * pos_pow(psi, self.p) * tu;
            }
        }
        t * t * grad2 - self.inv_eps2() * s
    }

    /// Scale the ray through `x` onto the Nehari manifold: returns `(t*, t* x)`
    /// with `h(t*) = 0`. The root is unique because `h(t)/t^2` is strictly
    /// decreasing wherever the truncation is active (`q >= 0`, `p > 1`).
    pub fn nehari_project(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        const T_MAX: f64 = 1e8;
        const T_MIN: f64 = 1e-12;
        let grad2 = self.disc.op().quadratic(x);
        if !(grad2 > 0.0) {
            return Err(Error::CollapsedToZero);
        }
        let h = |t: f64| self.nehari_h_with(x, grad2, t);
        let h1 = h(1.0);
        if h1.abs() <= 1e-13 * grad2 {
            return Ok((1.0, x.to_vec()));
        }
        let (mut lo, mut hi) = if h1 > 0.0 {
            let mut t = 1.0;
            loop {
                let next = 2.0 * t;
                if next > T_MAX {
                    return Err(Error::NoNehariRoot { t_max: T_MAX });
                }
                if h(next) <= 0.0 {
                    break (t, next);
                }
                t = next;
            }
        } else {
            let mut t = 1.0;
            loop {
                let next = 0.5 * t;
                if next < T_MIN {
                    return Err(Error::NoNehariRoot { t_max: T_MAX });
                }
                if h(next) > 0.0 {
                    break (next, t);
                }
                t = next;
            }
        };
        while hi - lo > 1e-14 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let hm = h(mid);
            if hm > 0.0 {
                lo = mid;
            } else if hm < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        let t = if h(hi).abs() < h(lo).abs() { hi } else { lo };
        Ok((t, x.iter().map(|v| t * v).collect()))
    }

    /// `|h(1)| / ||u||_A^2`.
    pub fn nehari_residual(&self, x: &[f64]) -> f64 {
        let grad2 = self.disc.op().quadratic(x);
        if grad2 == 0.0 {
            return 0.0;
        }
        self.nehari_h_with(x, grad2, 1.0).abs() / grad2
    }

    /// `E(u) - <E'(u),u>/(p+1) - (1/2 - 1/(p+1)) int |grad u|^2/b` together
    /// with the magnitude of the terms involved.
    pub fn energy_lower_bound_residual(&self, x: &[f64]) -> (f64, f64) {
        let e = self.energy(x);
        let k = 1.0 / (self.p + 1.0);
        let rhs = e.total - k * e.pairing;
        let lhs = (0.5 - k) * 2.0 * e.quadratic;
        let scale = 2.0 * e.quadratic + e.nonlinear * (self.p + 1.0) + e.pairing.abs();
        (rhs - lhs, scale)
    }

    /// Relative residuals of the two integral identities satisfied by
    /// solutions, with `psi = u - q_eps` and core `A = {psi > 0}`:
    ///
    /// (a) `eps^-2 int b psi_+^p q_eps = int |grad u|^2/b - int_A |grad psi|^2/b`
    /// (b) `eps^-2 int_A b psi^(p+1) = int_A |grad psi|^2/b`
    ///
    /// The core Dirichlet integral is the face sum of `c (d psi)(d psi_+)`,
    /// i.e. faces inside the core count fully and faces crossing its edge
    /// count through the positive endpoint only.
    pub fn integral_identities(&self, x: &[f64]) -> IdentityResiduals {
        let grid = self.grid();
        let psi = self.psi_nodes(x);
        let plus: Vec<f64> = psi.values.iter().map(|v| v.max(0.0)).collect();
        let core = face_quadratic(grid, &self.disc.asm.coef, &psi.values, &plus);
        let grad2 = self.disc.op().quadratic(x);
        let (mut lhs_a, mut lhs_b) = (0.0, 0.0);
        for i in 0..x.len() {
            let d = x[i] - self.qe[i];
            if d > 0.0 {
                let f = self.disc.mb[i] * pos_pow(d, self.p);
                lhs_a += f * self.qe[i];
                lhs_b += f * d;
            }
        }
        lhs_a *= self.inv_eps2();
        lhs_b *= self.inv_eps2();
        let rel = |a: f64, b: f64| {
            let s = a.abs().max(b.abs());
            if s == 0.0 { 0.0 } else { (a - b).abs() / s }
        };
        IdentityResiduals {
            res_a: rel(lhs_a, grad2 - core),
            res_b: rel(lhs_b, core),
            empty_core: !plus.iter().any(|&v| v > 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub res_a: f64,
    pub res_b: f64,
    /// Both identities degenerate (`u <= q_eps` everywhere).
    pub empty_core: bool,
}

/// Relative gap between `int |grad u|^2/b` and `int (q^2/b) |grad(u/q)|^2`.
/// Faces use `q_a q_b` for `q^2`, so the gap is exactly the discrete
/// `int grad q . grad(u^2/q) / b` and vanishes when `q` is discretely
/// weighted-harmonic.
pub fn change_weight_residual(grid: &Grid, weight: &WeightProfile, u: &Field, q: &Field) -> Result<f64> {
    u.check(grid)?;
    q.check(grid)?;
    let coef = face_coefficients(grid, weight)?;
    let mut ratio = vec![0.0; grid.node_count()];
    for k in 0..grid.node_count() {
        if grid.is_dirichlet(k) {
            continue;
        }
        let qk = q.values[k];
        if !(qk > 0.0) {
            let [x1, x2] = grid.coords(k);
            return Err(Error::BadSample { x1, x2, what: format!("q = {qk} must be positive") });
        }
        ratio[k] = u.values[k] / qk;
    }
    let u = u.clamped(grid);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (f, c) in grid.faces().iter().zip(&coef) {
        let du = u.values[f.a] - u.values[f.b];
        let dr = ratio[f.a] - ratio[f.b];
        lhs += c * du * du;
        rhs += c * q.values[f.a] * q.values[f.b] * dr * dr;
    }
    let s = lhs.abs().max(rhs.abs());
    Ok(if s == 0.0 { 0.0 } else { (lhs - rhs).abs() / s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyCheck {
    /// `int u^2 / x1^(alpha+2)`.
    pub lhs: f64,
    /// `(2/(alpha+1))^2 int |grad u|^2 / x1^alpha`.
    pub rhs: f64,
    pub ok: bool,
}

pub const HARDY_SLACK: f64 = 0.05;

/// Weighted Hardy inequality for a field vanishing on the Dirichlet nodes.
/// Quadrature skips the axis column, where `u = 0`.
pub fn hardy_check(grid: &Grid, alpha: f64, u: &Field) -> Result<HardyCheck> {
    u.check(grid)?;
    if grid.geometry.x1[0] < 0.0 {
        return Err(Error::InvalidGeometry("Hardy check needs x1 >= 0".into()));
    }
    let u = u.clamped(grid);
    let mut lhs = 0.0;
    for (k, (&m, &v)) in grid.mass().iter().zip(&u.values).enumerate() {
        let x1 = grid.coords(k)[0];
        if m > 0.0 && x1 > 0.0 && v != 0.0 {
            lhs += m * v * v / x1.powf(alpha + 2.0);
        }
    }
    let coef = face_coefficients(grid, &WeightProfile::Power { alpha })?;
    let c = (2.0 / (alpha + 1.0)).powi(2);
    let rhs = c * face_quadratic(grid, &coef, &u.values, &u.values);
    Ok(HardyCheck { lhs, rhs, ok: lhs <= rhs * (1.0 + HARDY_SLACK) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoundaryProfile, DomainGeometry, Scenario};
    use crate::operator::solve_weighted_harmonic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat_lake(cells: usize, epsilon: f64, p: f64) -> Problem {
        let spec = ProblemSpec::new(
            Scenario::Lake,
            DomainGeometry::rectangle([-1.0, 1.0], [-1.0, 1.0]),
            WeightProfile::Constant { value: 1.0 },
            BoundaryProfile::LakeConstant { value: 1.0 },
        )
        .unwrap()
        .with_epsilon(epsilon)
        .unwrap()
        .with_exponent(p)
        .unwrap();
        Problem::from_spec(&spec, cells, cells).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(0.0..amp)).collect()
    }

    #[test]
    fn zero_field() {
        let pb = flat_lake(8, 0.5, 2.0);
        let z = vec![0.0; pb.disc.dim()];
        let e = pb.energy(&z);
        assert_eq!((e.total, e.pairing), (0.0, 0.0));
        assert!(pb.gradient(&z).iter().all(|&g| g == 0.0));
        assert_eq!(pb.energy_lower_bound_residual(&z).0, 0.0);
    }

    #[test]
    fn inactive_truncation_is_pure_quadratic() {
        let pb = flat_lake(8, 0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&mut rng, pb.disc.dim(), 0.5);
        let e = pb.energy(&x);
        assert_eq!(e.nonlinear, 0.0);
        assert_eq!(e.total, e.quadratic);
        assert_eq!(pb.energy_lower_bound_residual(&x).0.abs() <= 1e-15 * e.quadratic, true);
        let t = 0.5;
        assert!((pb.nehari_h(&x, t) - t * t * 2.0 * e.quadratic).abs() < 1e-14);
    }

    #[test]
    fn energy_matches_dense_evaluation() {
        let pb = flat_lake(8, 0.5, 2.0);
        let grid = pb.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, pb.disc.dim(), 3.0);
        let u = Field::from_unknowns(grid, &x);
        let h = 0.25;
        let qe = 2f64.ln();
        let (mut quad, mut nl) = (0.0, 0.0);
        for i in 0..9 {
            for j in 0..9 {
                let k = i * 9 + j;
                if i < 8 {
                    quad += (u.values[k] - u.values[k + 9]).powi(2);
                }
                if j < 8 {
                    quad += (u.values[k] - u.values[k + 1]).powi(2);
                }
                if !grid.is_dirichlet(k) {
                    nl += h * h * (u.values[k] - qe).max(0.0).powi(3);
                }
            }
        }
        let total = 0.5 * quad - nl / (3.0 * 0.25);
        let e = pb.energy(&x);
        assert!((e.total - total).abs() <= 1e-13 * total.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let pb = flat_lake(16, 0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let x = random(&mut rng, pb.disc.dim(), 3.0);
            let v: Vec<f64> = (0..pb.disc.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = 1e-5;
            let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - t * b).collect();
            let fd = (pb.energy(&plus).total - pb.energy(&minus).total) / (2.0 * t);
            let an = dot(&pb.gradient(&x), &v);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    /// `h(t)` for `p = 2`, `q_eps = c`: `t^2 G - sum_i m_i (t u_i - c)^2 t u_i`
    /// over active nodes, expanded as a cubic in `t` on each activity interval.
    fn cubic_h(pb: &Problem, x: &[f64], t: f64) -> f64 {
        let g = pb.disc.op().quadratic(x);
        let c = pb.qe[0];
        let mut s = 0.0;
        for i in 0..x.len() {
            if t * x[i] > c {
                let m = pb.disc.mb[i];
                let u = x[i];
                s += m * (u * u * u * t * t * t - 2.0 * c * u * u * t * t + c * c * u * t);
            }
        }
        g * t * t - s / (pb.epsilon * pb.epsilon)
    }

    #[test]
    fn nehari_h_matches_polynomial() {
        let pb = flat_lake(4, 0.5, 2.0);
        assert_eq!(pb.disc.dim(), 9);
        let x = vec![2.0, 0.1, 2.0, 0.3, 2.0, 0.0, 1.0, 2.0, 0.5];
        for &t in &[0.0, 0.3, 0.7, 1.0, 1.5, 4.0, 20.0] {
            let h = pb.nehari_h(&x, t);
            let poly = cubic_h(&pb, &x, t);
            assert!((h - poly).abs() <= 1e-12 * poly.abs().max(1.0), "t={t}: {h} vs {poly}");
        }
        assert_eq!(pb.nehari_h(&x, 0.0), 0.0);
    }

    #[test]
    fn nehari_projection_matches_scan() {
        let pb = flat_lake(4, 0.5, 2.0);
        let x = vec![2.0, 0.1, 2.0, 0.3, 2.0, 0.0, 1.0, 2.0, 0.5];
        let (t, y) = pb.nehari_project(&x).unwrap();
        // dense scan over (0, 1e4] on a log grid, then bisection on the sign change
        let mut prev = 1e-6;
        let mut found = None;
        for k in 1..=20_000 {
            let s = 1e-6 * (1e10f64).powf(k as f64 / 20_000.0);
            if cubic_h(&pb, &x, prev) > 0.0 && cubic_h(&pb, &x, s) <= 0.0 {
                let (mut lo, mut hi) = (prev, s);
                for _ in 0..200 {
                    let m = 0.5 * (lo + hi);
                    if cubic_h(&pb, &x, m) > 0.0 { lo = m } else { hi = m }
                }
                found = Some(0.5 * (lo + hi));
                break;
            }
            prev = s;
        }
        let oracle = found.unwrap();
        assert!((t - oracle).abs() <= 1e-10 * oracle);
        assert!(pb.nehari_residual(&y) <= 1e-10);
        let (t1, _) = pb.nehari_project(&y).unwrap();
        assert!((t1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projection_without_positive_part_fails() {
        let pb = flat_lake(8, 0.5, 2.0);
        let x = vec![-1.0; pb.disc.dim()];
        assert!(matches!(pb.nehari_project(&x), Err(Error::NoNehariRoot { .. })));
        assert!(matches!(pb.nehari_project(&vec![0.0; pb.disc.dim()]), Err(Error::CollapsedToZero)));
    }

    #[test]
    fn lower_bound_residual_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &p in &[1.5, 2.0, 3.0] {
            let pb = flat_lake(8, 0.5, p);
            for _ in 0..100 {
                let x: Vec<f64> = (0..pb.disc.dim()).map(|_| rng.gen_range(-2.0..6.0)).collect();
                let (r, scale) = pb.energy_lower_bound_residual(&x);
                assert!(r >= -1e-12 * scale);
            }
        }
    }

    #[test]
    fn change_weight_exact_cases() {
        let pb = flat_lake(12, 0.5, 2.0);
        let grid = pb.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = Field::from_unknowns(grid, &random(&mut rng, pb.disc.dim(), 1.0));
        let one = Field::from_fn(grid, |_| 1.0);
        let w = WeightProfile::Constant { value: 1.0 };
        assert_eq!(change_weight_residual(grid, &w, &u, &one).unwrap(), 0.0);
        // q = x1^2/2 + 1 is exactly discretely harmonic for b = r
        let ring = DomainGeometry::meridian(3.0, 1.5);
        let g = Grid::new(&ring, 24, 24).unwrap();
        let q = Field::from_fn(&g, |x| 0.5 * x[0] * x[0] + 1.0);
        let u = Field::from_fn(&g, |x| (x[0] * (3.0 - x[0]) * (2.25 - x[1] * x[1])).max(0.0)).clamped(&g);
        let r = change_weight_residual(&g, &WeightProfile::Power { alpha: 1.0 }, &u, &q).unwrap();
        assert!(r < 1e-13, "{r}");
    }

    #[test]
    fn change_weight_converges_for_continuum_harmonic_profile() {
        let geometry = DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]);
        let w = WeightProfile::Constant { value: 1.0 };
        let res: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                let g = Grid::new(&geometry, n, n).unwrap();
                let q = Field::from_fn(&g, |x| (2.0 * x[0]).exp() * (2.0 * x[1]).cos() + 10.0);
                let u = Field::from_fn(&g, |x| 3.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
                change_weight_residual(&g, &w, &u, &q).unwrap()
            })
            .collect();
        assert!(res[0] > res[1] && res[1] > res[2]);
        assert!((res[1] / res[2]).log2() >= 1.0);
    }

    #[test]
    fn change_weight_of_profile_multiple() {
        let geometry = DomainGeometry::rectangle([-1.0, 1.0], [-1.0, 1.0]);
        let g = Grid::new(&geometry, 32, 32).unwrap();
        let w = WeightProfile::gaussian_bump([0.2, 0.1]);
        let data = Field::from_fn(&g, |x| 2.0 + 0.3 * x[0]);
        let q = solve_weighted_harmonic(&g, &w, &data, 1e-13).unwrap();
        let u = Field { values: q.values.iter().map(|v| 1.5 * v).collect() }.clamped(&g);
        let r = change_weight_residual(&g, &w, &u, &q).unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn hardy_examples() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 3.0], [0.0, 1.0]), 60, 20).unwrap();
        let z = hardy_check(&g, 0.0, &Field::zeros(&g)).unwrap();
        assert_eq!((z.lhs, z.rhs, z.ok), (0.0, 0.0, true));
        let bump = Field::from_fn(&g, |x| {
            if x[0] > 1.0 && x[0] < 2.0 {
                ((x[0] - 1.0) * (2.0 - x[0]) * x[1] * (1.0 - x[1])).powi(2)
            } else {
                0.0
            }
        });
        let h = hardy_check(&g, 0.0, &bump).unwrap();
        assert!(h.ok && h.lhs < 0.5 * h.rhs);
    }

    #[test]
    fn energy_change_matches_difference_and_resolves_small_steps() {
        let pb = flat_lake(16, 0.3, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x = random(&mut rng, pb.disc.dim(), 3.0);
            let y = random(&mut rng, pb.disc.dim(), 3.0);
            let de = pb.energy(&y).total - pb.energy(&x).total;
            let scale = pb.energy(&x).quadratic.abs().max(1.0);
            assert!((pb.energy_change(&x, &y) - de).abs() <= 1e-12 * scale);

            // far below the roundoff of the total, the change follows the slope
            let v: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = 1e-12;
            let z: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            let step: Vec<f64> = z.iter().zip(&x).map(|(a, b)| a - b).collect();
            let linear = dot(&pb.gradient(&x), &step);
            let dc = pb.energy_change(&x, &z);
            assert!((dc - linear).abs() <= 1e-6 * linear.abs(), "{dc} vs {linear}");
            assert_eq!(pb.energy_change(&x, &x), 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn nehari_projection_maximizes_along_the_ray(
            seed in 0u64..10_000,
            p in 1.2f64..4.0,
            eps in 0.1f64..0.9,
        ) {
            let pb = flat_lake(6, eps, p);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..pb.disc.dim()).map(|_| rng.gen_range(-1.0..4.0)).collect();
            let (t, y) = pb.nehari_project(&x).unwrap();
            proptest::prop_assert!(t > 0.0);
            proptest::prop_assert!(pb.nehari_residual(&y) <= 1e-9);
            let top = pb.energy(&y).total;
            proptest::prop_assert!(top > 0.0);
            for s in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
                let z: Vec<f64> = y.iter().map(|v| s * v).collect();
                proptest::prop_assert!(pb.energy(&z).total <= top * (1.0 + 1e-12));
            }
            let (r, scale) = pb.energy_lower_bound_residual(&y);
            proptest::prop_assert!(r >= -1e-12 * scale);
        }
    }
}
