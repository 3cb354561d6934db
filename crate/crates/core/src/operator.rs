//! The discrete weighted Laplacian `A ~ -div(grad . / b)` on the unknowns,
//! a Jacobi-preconditioned conjugate-gradient solver, and weighted-harmonic
//! extension of Dirichlet data.

use std::io::Write;

use crate::error::{Error, Result};
use crate::grid::{face_coefficients, fmt_f64, Field, Grid, NOT_UNKNOWN};
use crate::model::{DomainGeometry, Obstacle, WeightProfile};

/// Symmetric matrix in compressed row storage.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    /// Set once every off-diagonal pair has been compared bitwise.
    pub symmetric: bool,
    diag: Vec<f64>,
}

impl SparseOperator {
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            cols.push(j);
            vals.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut op = Self { dim, row_ptr, cols, vals, symmetric: false, diag: Vec::new() };
        op.diag = (0..dim).map(|i| op.get(i, i)).collect();
        op.symmetric = op.verify_symmetry();
        op
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.vals[self.row_ptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn verify_symmetry(&self) -> bool {
        (0..self.dim).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|e| {
                let j = self.cols[e];
                self.get(j, i).to_bits() == self.vals[e].to_bits()
            })
        })
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let mut s = 0.0;
            for e in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[e] * x[self.cols[e]];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        y
    }

    /// `x^T A x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul(x))
    }

    /// Matrix-market coordinate dump of the lower triangle.
    pub fn write_matrix_market(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        let lower: Vec<(usize, usize, f64)> = (0..self.dim)
            .flat_map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .filter(move |&e| self.cols[e] <= i)
                    .map(move |e| (i, self.cols[e], self.vals[e]))
            })
            .collect();
        writeln!(out, "{} {} {}", self.dim, self.dim, lower.len())?;
        for (i, j, v) in lower {
            writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(v))?;
        }
        Ok(())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Operator plus the couplings from unknowns to Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub op: SparseOperator,
    /// `(unknown, dirichlet node, coefficient)` for every boundary face.
    pub boundary: Vec<(usize, usize, f64)>,
    /// Face coefficients `shape / b(mid)`, in grid face order.
    pub coef: Vec<f64>,
}

/// Five-point stencil over the grid faces: each face contributes `c` to both
/// diagonals and `-c` to the shared off-diagonal pair.
pub fn assemble(grid: &Grid, weight: &WeightProfile) -> Result<Assembly> {
    let coef = face_coefficients(grid, weight)?;
    let mut entries = Vec::with_capacity(5 * grid.unknown_count());
    let mut boundary = Vec::new();
    for (f, &c) in grid.faces().iter().zip(&coef) {
        let ua = grid.unknown_of(f.a);
        let ub = grid.unknown_of(f.b);
        match (ua != NOT_UNKNOWN, ub != NOT_UNKNOWN) {
            (true, true) => {
                entries.push((ua, ua, c));
                entries.push((ub, ub, c));
                entries.push((ua, ub, -c));
                entries.push((ub, ua, -c));
            }
            (true, false) => {
                entries.push((ua, ua, c));
                boundary.push((ua, f.b, c));
            }
            (false, true) => {
                entries.push((ub, ub, c));
                boundary.push((ub, f.a, c));
            }
            (false, false) => {}
        }
    }
    let op = SparseOperator::from_triplets(grid.unknown_count(), entries);
    Ok(Assembly { op, boundary, coef })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    pub iterations: usize,
    /// `||A x - rhs|| / ||rhs||`, recomputed after the iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Approximate inverse of a symmetric positive definite operator; must itself
/// be symmetric positive definite for preconditioned CG.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// Diagonal scaling.
#[derive(Debug, Clone)]
pub struct Jacobi {
    dinv: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseOperator) -> Self {
        Self { dinv: a.diagonal().iter().map(|d| 1.0 / d).collect() }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.dinv) {
            *z = r * d;
        }
    }
}

/// Jacobi-preconditioned CG from the initial iterate `x`.
pub fn cg_solve_from(
    a: &SparseOperator,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    maxit: usize,
) -> LinearSolveReport {
    pcg_solve_from(a, &Jacobi::new(a), rhs, x, tol, maxit)
}

/// Preconditioned CG from the initial iterate `x`. The residual is
/// recomputed from scratch whenever the recursive one reaches `tol`, and the
/// iteration restarts if the true residual has not.
pub fn pcg_solve_from(
    a: &SparseOperator,
    m: &dyn Preconditioner,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    maxit: usize,
) -> LinearSolveReport {
    const RESTARTS: usize = 3;
    let n = a.dim;
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return LinearSolveReport { iterations: 0, residual: 0.0, converged: true };
    }
    let mut ap = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for _ in 0..=RESTARTS {
        a.apply(x, &mut ap);
        let mut r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, y)| b - y).collect();
        residual = norm(&r) / bnorm;
        if residual <= tol || iterations >= maxit {
            break;
        }
        m.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while norm(&r) > tol * bnorm && iterations < maxit {
            a.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            m.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            iterations += 1;
        }
    }
    LinearSolveReport { iterations, residual, converged: residual <= tol }
}

/// Coarse levels stop once this many unknowns remain or a cell count is odd.
const COARSEST_UNKNOWNS: usize = 400;
const SMOOTHING_SWEEPS: usize = 2;

#[derive(Debug, Clone)]
struct Level {
    op: SparseOperator,
    colour: Vec<bool>,
    /// Bilinear interpolation from the next coarser level: for each unknown
    /// of this level, the coarse unknowns and weights it draws from.
    prolong: Vec<Vec<(usize, f64)>>,
}

/// Geometric multigrid V-cycle with red-black Gauss-Seidel smoothing. Coarse
/// operators are re-assembled on grids with half the cells per axis, the
/// restriction is the transpose of bilinear interpolation, and the coarsest
/// level is solved by Jacobi CG to near machine precision.
#[derive(Debug, Clone)]
pub struct Multigrid {
    levels: Vec<Level>,
}

impl Multigrid {
    /// `None` when the grid cannot be coarsened at least once.
    pub fn new(grid: &Grid, weight: &WeightProfile, op: &SparseOperator) -> Result<Option<Self>> {
        let mut levels = vec![Level { op: op.clone(), colour: colouring(grid), prolong: Vec::new() }];
        let mut fine = grid.clone();
        loop {
            let (c1, c2) = (fine.n1 - 1, fine.n2 - 1);
            if fine.unknown_count() <= COARSEST_UNKNOWNS || c1 % 2 != 0 || c2 % 2 != 0 || c1 < 4 || c2 < 4 {
                break;
            }
            let coarse = Grid::new(&coarsen_geometry(&fine), c1 / 2, c2 / 2)?;
            if coarse.unknown_count() == 0 {
                break;
            }
            levels.last_mut().unwrap().prolong = interpolation(&fine, &coarse);
            let asm = assemble(&coarse, weight)?;
            levels.push(Level { op: asm.op, colour: colouring(&coarse), prolong: Vec::new() });
            fine = coarse;
        }
        Ok((levels.len() > 1).then_some(Self { levels }))
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let a = &level.op;
        if l + 1 == self.levels.len() {
            x.iter_mut().for_each(|v| *v = 0.0);
            cg_solve_from(a, b, x, 1e-13, 20 * a.dim + 100);
            return;
        }
        x.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..SMOOTHING_SWEEPS {
            gauss_seidel(a, &level.colour, b, x, false);
        }
        let ax = a.mul(x);
        let coarse_dim = self.levels[l + 1].op.dim;
        let mut rc = vec![0.0; coarse_dim];
        for (i, row) in level.prolong.iter().enumerate() {
            let r = b[i] - ax[i];
            for &(c, w) in row {
                rc[c] += w * r;
            }
        }
        let mut ec = vec![0.0; coarse_dim];
        self.cycle(l + 1, &rc, &mut ec);
        for (i, row) in level.prolong.iter().enumerate() {
            x[i] += row.iter().map(|&(c, w)| w * ec[c]).sum::<f64>();
        }
        for _ in 0..SMOOTHING_SWEEPS {
            gauss_seidel(a, &level.colour, b, x, true);
        }
    }
}

impl Preconditioner for Multigrid {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }
}

/// Red-black Gauss-Seidel sweep; `colour[i]` is the parity of the node of
/// unknown `i`. The backward sweep visits the colours in reverse, making the
/// pair symmetric, and the ordering commutes with grid reflections.
fn gauss_seidel(a: &SparseOperator, colour: &[bool], b: &[f64], x: &mut [f64], backward: bool) {
    let order: [bool; 2] = if backward { [true, false] } else { [false, true] };
    for c in order {
        for i in (0..a.dim).filter(|&i| colour[i] == c) {
            let mut s = b[i];
            for e in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[e];
                if j != i {
                    s -= a.vals[e] * x[j];
                }
            }
            x[i] = s / a.diag[i];
        }
    }
}

fn colouring(grid: &Grid) -> Vec<bool> {
    grid.unknown_nodes()
        .iter()
        .map(|&k| {
            let (i, j) = grid.ij(k);
            (i + j) % 2 == 1
        })
        .collect()
}

/// Same domain; a mask obstacle keeps every other node.
fn coarsen_geometry(fine: &Grid) -> DomainGeometry {
    let mut g = fine.geometry.clone();
    if let Obstacle::Mask { n1, n2, cells } = &fine.geometry.obstacle {
        let (m1, m2) = ((n1 + 1) / 2, (n2 + 1) / 2);
        let sub = (0..m1).flat_map(|i| (0..m2).map(move |j| (i, j))).map(|(i, j)| cells[2 * i * n2 + 2 * j]).collect();
        g.obstacle = Obstacle::Mask { n1: m1, n2: m2, cells: sub };
    }
    g
}

fn interpolation(fine: &Grid, coarse: &Grid) -> Vec<Vec<(usize, f64)>> {
    fine.unknown_nodes()
        .iter()
        .map(|&k| {
            let (i, j) = fine.ij(k);
            let is: &[usize] = if i % 2 == 0 { &[i / 2][..] } else { &[i / 2, i / 2 + 1][..] };
            let js: &[usize] = if j % 2 == 0 { &[j / 2][..] } else { &[j / 2, j / 2 + 1][..] };
            let w = 1.0 / (is.len() * js.len()) as f64;
            let mut row = Vec::with_capacity(4);
            for &ci in is {
                for &cj in js {
                    let u = coarse.unknown_of(coarse.node(ci, cj));
                    if u != NOT_UNKNOWN {
                        row.push((u, w));
                    }
                }
            }
            row
        })
        .collect()
}

/// Solve `A x = rhs` from zero; the report carries `converged = false` when
/// `maxit` is exhausted.
pub fn cg_solve(a: &SparseOperator, rhs: &[f64], tol: f64, maxit: usize) -> (Vec<f64>, LinearSolveReport) {
    let mut x = vec![0.0; a.dim];
    let report = cg_solve_from(a, rhs, &mut x, tol, maxit);
    (x, report)
}

/// Discrete weighted-harmonic extension of the Dirichlet values of
/// `boundary`; unknown-node values of `boundary` are ignored.
pub fn solve_weighted_harmonic(grid: &Grid, weight: &WeightProfile, boundary: &Field, tol: f64) -> Result<Field> {
    boundary.check(grid)?;
    let asm = assemble(grid, weight)?;
    let mut rhs = vec![0.0; grid.unknown_count()];
    for &(u, d, c) in &asm.boundary {
        rhs[u] += c * boundary.values[d];
    }
    let (x, report) = cg_solve(&asm.op, &rhs, tol, 20 * grid.unknown_count() + 100);
    if !report.converged {
        return Err(Error::LinearSolveFailure { iterations: report.iterations, residual: report.residual });
    }
    let mut out = boundary.clone();
    for (&k, v) in grid.unknown_nodes().iter().zip(x) {
        out.values[k] = v;
    }
    Ok(out)
}

/// Far-field Dirichlet data: `k` on obstacle nodes and
/// `W x1^(alpha+1)/(alpha+1) + k` on the rest of the boundary.
pub fn far_field_boundary(grid: &Grid, w: f64, alpha: f64, k: f64) -> Field {
    let mut f = Field::zeros(grid);
    for n in 0..grid.node_count() {
        if !grid.is_dirichlet(n) {
            continue;
        }
        f.values[n] = if grid.is_removed(n) {
            k
        } else {
            let x1 = grid.coords(n)[0];
            w * x1.powf(alpha + 1.0) / (alpha + 1.0) + k
        };
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::dirichlet_energy;
    use crate::model::{DomainGeometry, Obstacle};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(op: &SparseOperator) -> DMatrix<f64> {
        DMatrix::from_fn(op.dim, op.dim, |i, j| op.get(i, j))
    }

    #[test]
    fn constant_coefficient_stencil() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]), 4, 4).unwrap();
        let asm = assemble(&g, &WeightProfile::Constant { value: 1.0 }).unwrap();
        assert_eq!(asm.op.dim, 9);
        assert!(asm.op.symmetric);
        for i in 0..9 {
            assert_eq!(asm.op.get(i, i), 4.0);
        }
        assert_eq!(asm.op.get(0, 1), -1.0);
        assert_eq!(asm.op.get(0, 3), -1.0);
        assert_eq!(asm.op.get(0, 4), 0.0);
    }

    #[test]
    fn quadratic_form_is_dirichlet_energy() {
        let g = Grid::new(&DomainGeometry::meridian(3.0, 1.5), 12, 10).unwrap();
        let w = WeightProfile::Power { alpha: 1.0 };
        let asm = assemble(&g, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..g.unknown_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let e = dirichlet_energy(&g, &Field::from_unknowns(&g, &x), &w).unwrap();
            let qf = asm.op.quadratic(&x);
            assert!((e - qf).abs() <= 1e-13 * e.abs().max(1.0), "{e} vs {qf}");
            assert!(qf > 0.0);
        }
    }

    #[test]
    fn interior_rows_annihilate_constants() {
        let g = Grid::new(&DomainGeometry::meridian(2.0, 1.0), 10, 10).unwrap();
        let asm = assemble(&g, &WeightProfile::Power { alpha: 1.0 }).unwrap();
        for (u, &k) in g.unknown_nodes().iter().enumerate() {
            if g.neighbours(k).any(|n| g.is_dirichlet(n)) {
                continue;
            }
            let s: f64 = (asm.op.row_ptr[u]..asm.op.row_ptr[u + 1]).map(|e| asm.op.vals[e]).sum();
            assert!(s.abs() < 1e-12 * asm.op.get(u, u));
        }
    }

    #[test]
    fn sign_pattern() {
        let g = Grid::new(&DomainGeometry::rectangle([-1.0, 1.0], [-1.0, 1.0]), 9, 7).unwrap();
        let asm = assemble(&g, &WeightProfile::gaussian_bump([0.2, 0.1])).unwrap();
        for i in 0..asm.op.dim {
            for e in asm.op.row_ptr[i]..asm.op.row_ptr[i + 1] {
                if asm.op.cols[e] == i {
                    assert!(asm.op.vals[e] > 0.0);
                } else {
                    assert!(asm.op.vals[e] < 0.0);
                    assert_eq!(asm.op.vals[e].to_bits(), asm.op.get(asm.op.cols[e], i).to_bits());
                }
            }
        }
    }

    #[test]
    fn cg_recovers_known_solution() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]), 20, 20).unwrap();
        let asm = assemble(&g, &WeightProfile::gaussian_bump([0.5, 0.5])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..asm.op.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rhs = asm.op.mul(&x);
        let (y, rep) = cg_solve(&asm.op, &rhs, 1e-12, 10_000);
        assert!(rep.converged && rep.residual <= 1e-12);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn cg_matches_dense_elimination() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]), 7, 7).unwrap();
        let asm = assemble(&g, &WeightProfile::Constant { value: 1.0 }).unwrap();
        assert_eq!(asm.op.dim, 36);
        let rhs: Vec<f64> = (0..36).map(|i| (i as f64 * 0.37).sin()).collect();
        let (x, _) = cg_solve(&asm.op, &rhs, 1e-14, 1000);
        let exact = dense(&asm.op).lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..36 {
            assert!((x[i] - exact[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn zero_rhs_is_free() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]), 6, 6).unwrap();
        let asm = assemble(&g, &WeightProfile::Constant { value: 1.0 }).unwrap();
        let (x, rep) = cg_solve(&asm.op, &vec![0.0; asm.op.dim], 1e-10, 100);
        assert_eq!(rep.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harmonic_extension_reproduces_linears() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 2.0], [-1.0, 1.0]), 16, 12).unwrap();
        let lin = Field::from_fn(&g, |x| 3.0 * x[0] - 0.5 * x[1] + 1.0);
        let q = solve_weighted_harmonic(&g, &WeightProfile::Constant { value: 1.0 }, &lin, 1e-14).unwrap();
        for k in 0..g.node_count() {
            assert!((q.values[k] - lin.values[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn far_field_is_discretely_harmonic_for_the_ring_weight() {
        let g = Grid::new(&DomainGeometry::meridian(3.0, 2.0), 24, 16).unwrap();
        let data = far_field_boundary(&g, 1.0, 1.0, 0.7);
        let q = solve_weighted_harmonic(&g, &WeightProfile::Power { alpha: 1.0 }, &data, 1e-13).unwrap();
        for k in 0..g.node_count() {
            let x1 = g.coords(k)[0];
            assert!((q.values[k] - (0.5 * x1 * x1 + 0.7)).abs() < 1e-10);
        }
    }

    #[test]
    fn obstacle_flow_stays_below_far_field() {
        let geometry = DomainGeometry::meridian(4.0, 4.0)
            .with_obstacle(Obstacle::Disc { center: [0.0, 0.0], radius: 1.0 });
        let g = Grid::new(&geometry, 32, 32).unwrap();
        let data = far_field_boundary(&g, 1.0, 1.0, 1.0);
        let q = solve_weighted_harmonic(&g, &WeightProfile::Power { alpha: 1.0 }, &data, 1e-13).unwrap();
        let lo = data.values.iter().enumerate().filter(|(k, _)| g.is_dirichlet(*k)).map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        for &k in g.unknown_nodes() {
            let x1 = g.coords(k)[0];
            let qinf = 0.5 * x1 * x1 + 1.0;
            assert!(q.values[k] < qinf);
            assert!(q.values[k] >= lo);
        }
    }

    fn multigrid_case() -> (Grid, WeightProfile, Assembly, Multigrid) {
        let geometry = DomainGeometry::meridian(4.0, 4.0)
            .with_obstacle(Obstacle::Disc { center: [0.0, 0.0], radius: 1.0 });
        let g = Grid::new(&geometry, 64, 64).unwrap();
        let w = WeightProfile::Power { alpha: 1.0 };
        let asm = assemble(&g, &w).unwrap();
        let mg = Multigrid::new(&g, &w, &asm.op).unwrap().unwrap();
        (g, w, asm, mg)
    }

    #[test]
    fn multigrid_is_symmetric_and_positive() {
        let (_, _, asm, mg) = multigrid_case();
        assert!(mg.depth() >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = asm.op.dim;
        let (mut mx, mut my) = (vec![0.0; n], vec![0.0; n]);
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            mg.apply(&x, &mut mx);
            mg.apply(&y, &mut my);
            let (a, b) = (dot(&y, &mx), dot(&x, &my));
            assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()), "{a} vs {b}");
            assert!(dot(&x, &mx) > 0.0);
        }
    }

    #[test]
    fn multigrid_pcg_agrees_with_jacobi() {
        let (_, _, asm, mg) = multigrid_case();
        let n = asm.op.dim;
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.013).cos()).collect();
        let mut x_mg = vec![0.0; n];
        let rep_mg = pcg_solve_from(&asm.op, &mg, &rhs, &mut x_mg, 1e-12, 1000);
        let mut x_j = vec![0.0; n];
        let rep_j = cg_solve_from(&asm.op, &rhs, &mut x_j, 1e-12, 100_000);
        assert!(rep_mg.converged && rep_j.converged);
        assert!(rep_mg.iterations * 5 < rep_j.iterations, "{} vs {}", rep_mg.iterations, rep_j.iterations);
        let scale = x_j.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = x_mg.iter().zip(&x_j).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * scale, "{err}");
    }

    #[test]
    fn multigrid_matches_dense_solve_on_small_grid() {
        let g = Grid::new(&DomainGeometry::rectangle([-1.0, 1.0], [-1.0, 1.0]), 32, 32).unwrap();
        let w = WeightProfile::gaussian_bump([0.3, 0.2]);
        let asm = assemble(&g, &w).unwrap();
        let mg = Multigrid::new(&g, &w, &asm.op).unwrap().unwrap();
        let rhs: Vec<f64> = (0..asm.op.dim).map(|i| (i as f64 * 0.41).sin()).collect();
        let mut x = vec![0.0; asm.op.dim];
        assert!(pcg_solve_from(&asm.op, &mg, &rhs, &mut x, 1e-13, 500).converged);
        let exact = dense(&asm.op).lu().solve(&DVector::from_vec(rhs)).unwrap();
        for i in 0..asm.op.dim {
            assert!((x[i] - exact[i]).abs() <= 1e-9 * exact.amax());
        }
    }

    #[test]
    fn tiny_grids_have_no_hierarchy() {
        let g = Grid::new(&DomainGeometry::rectangle([0.0, 1.0], [0.0, 1.0]), 7, 9).unwrap();
        let w = WeightProfile::Constant { value: 1.0 };
        let asm = assemble(&g, &w).unwrap();
        assert!(Multigrid::new(&g, &w, &asm.op).unwrap().is_none());
    }

    proptest::proptest! {
        #[test]
        fn assembled_operator_is_symmetric_positive(
            n1 in 3usize..12,
            n2 in 3usize..12,
            c1 in -0.8f64..0.8,
            c2 in -0.8f64..0.8,
            seed in 0u64..1000,
        ) {
            let g = Grid::new(&DomainGeometry::rectangle([-1.0, 1.0], [-1.0, 1.0]), n1, n2).unwrap();
            let asm = assemble(&g, &WeightProfile::gaussian_bump([c1, c2])).unwrap();
            for i in 0..asm.op.dim {
                for e in asm.op.row_ptr[i]..asm.op.row_ptr[i + 1] {
                    proptest::prop_assert_eq!(asm.op.vals[e], asm.op.get(asm.op.cols[e], i));
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..asm.op.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            proptest::prop_assert!(asm.op.quadratic(&x) > 0.0);
        }
    }
}
