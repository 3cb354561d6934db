//! Structured node grid over the (possibly obstructed) rectangle, nodal
//! fields, trapezoid quadrature and the face-based weighted Dirichlet energy.
//!
//! Nodes are numbered `k = i * n2 + j` with `i` along `x1`, which is also the
//! lexicographic export order. Dirichlet nodes are the rectangle edges, the
//! axis column and every node removed by the obstacle; all remaining nodes
//! are unknowns, numbered consecutively in node order.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{BoundaryProfile, DomainGeometry, Obstacle, WeightProfile};

/// Sentinel in the node-to-unknown map for Dirichlet nodes.
pub const NOT_UNKNOWN: usize = usize::MAX;

/// Link between two neighbouring nodes with at least one unknown endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub a: usize,
    pub b: usize,
    pub mid: [f64; 2],
    /// Perpendicular face length over node spacing.
    pub shape: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub geometry: DomainGeometry,
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    dirichlet: Vec<bool>,
    removed: Vec<bool>,
    unknown_of: Vec<usize>,
    node_of: Vec<usize>,
    mass: Vec<f64>,
    faces: Vec<Face>,
}

impl Grid {
    /// Grid with `cells1 x cells2` cells, i.e. `(cells1 + 1) x (cells2 + 1)` nodes.
    pub fn new(geometry: &DomainGeometry, cells1: usize, cells2: usize) -> Result<Self> {
        geometry.validate()?;
        if cells1 < 2 || cells2 < 2 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: format!("need at least 2 cells per axis, got {cells1} x {cells2}"),
            });
        }
        let n1 = cells1 + 1;
        let n2 = cells2 + 1;
        let h1 = (geometry.x1[1] - geometry.x1[0]) / cells1 as f64;
        let h2 = (geometry.x2[1] - geometry.x2[0]) / cells2 as f64;
        if let Obstacle::Mask { n1: m1, n2: m2, .. } = &geometry.obstacle {
            if *m1 != n1 || *m2 != n2 {
                return Err(Error::InvalidGeometry(format!(
                    "mask is {m1} x {m2} but the grid has {n1} x {n2} nodes"
                )));
            }
        }
        let total = n1 * n2;
        let mut removed = vec![false; total];
        let mut dirichlet = vec![false; total];
        for i in 0..n1 {
            for j in 0..n2 {
                let k = i * n2 + j;
                let x1 = geometry.x1[0] + i as f64 * h1;
                let x2 = geometry.x2[0] + j as f64 * h2;
                removed[k] = match &geometry.obstacle {
                    Obstacle::Mask { cells, .. } => cells[k],
                    other => other.contains(x1, x2),
                };
                dirichlet[k] = removed[k] || i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1;
            }
        }
        let mut unknown_of = vec![NOT_UNKNOWN; total];
        let mut node_of = Vec::new();
        for k in 0..total {
            if !dirichlet[k] {
                unknown_of[k] = node_of.len();
                node_of.push(k);
            }
        }
        if node_of.is_empty() {
            return Err(Error::InvalidGeometry("grid has no unknown nodes".into()));
        }
        let mut mass = vec![0.0; total];
        for i in 0..n1 {
            for j in 0..n2 {
                let k = i * n2 + j;
                if removed[k] {
                    continue;
                }
                let w1 = if i == 0 || i == n1 - 1 { 0.5 } else { 1.0 };
                let w2 = if j == 0 || j == n2 - 1 { 0.5 } else { 1.0 };
                mass[k] = w1 * w2 * h1 * h2;
            }
        }
        let mut grid = Self { geometry: geometry.clone(), n1, n2, h1, h2, dirichlet, removed, unknown_of, node_of, mass, faces: Vec::new() };
        grid.faces = grid.build_faces();
        Ok(grid)
    }

    fn build_faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                let k = self.node(i, j);
                let [x1, x2] = self.coords(k);
                if i + 1 < self.n1 {
                    let l = self.node(i + 1, j);
                    if !(self.dirichlet[k] && self.dirichlet[l]) {
                        faces.push(Face { a: k, b: l, mid: [x1 + 0.5 * self.h1, x2], shape: self.h2 / self.h1 });
                    }
                }
                if j + 1 < self.n2 {
                    let l = self.node(i, j + 1);
                    if !(self.dirichlet[k] && self.dirichlet[l]) {
                        faces.push(Face { a: k, b: l, mid: [x1, x2 + 0.5 * self.h2], shape: self.h1 / self.h2 });
                    }
                }
            }
        }
        faces
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.n2, k % self.n2)
    }

    pub fn coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.geometry.x1[0] + i as f64 * self.h1, self.geometry.x2[0] + j as f64 * self.h2]
    }

    pub fn node_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn unknown_count(&self) -> usize {
        self.node_of.len()
    }

    pub fn is_dirichlet(&self, k: usize) -> bool {
        self.dirichlet[k]
    }

    /// Node lies inside the obstacle (carries no quadrature mass).
    pub fn is_removed(&self, k: usize) -> bool {
        self.removed[k]
    }

    /// Unknown index of node `k`, or [`NOT_UNKNOWN`].
    pub fn unknown_of(&self, k: usize) -> usize {
        self.unknown_of[k]
    }

    /// Node of each unknown, in increasing node order.
    pub fn unknown_nodes(&self) -> &[usize] {
        &self.node_of
    }

    /// Trapezoid quadrature weight of every node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    /// 4-neighbours of node `k`.
    pub fn neighbours(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.ij(k);
        let mut out = [NOT_UNKNOWN; 4];
        if i > 0 {
            out[0] = self.node(i - 1, j);
        }
        if i + 1 < self.n1 {
            out[1] = self.node(i + 1, j);
        }
        if j > 0 {
            out[2] = self.node(i, j - 1);
        }
        if j + 1 < self.n2 {
            out[3] = self.node(i, j + 1);
        }
        out.into_iter().filter(|&n| n != NOT_UNKNOWN)
    }

    /// Euclidean distance from a point to the Dirichlet part of the boundary
    /// (rectangle edges, axis and obstacle).
    pub fn distance_to_boundary(&self, x: [f64; 2]) -> f64 {
        let g = &self.geometry;
        let mut d = (x[0] - g.x1[0]).min(g.x1[1] - x[0]).min(x[1] - g.x2[0]).min(g.x2[1] - x[1]);
        match &g.obstacle {
            Obstacle::None => {}
            Obstacle::Disc { center, radius } => {
                let r = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
                d = d.min((r - radius).max(0.0));
            }
            Obstacle::Mask { cells, .. } => {
                for (k, _) in cells.iter().enumerate().filter(|(_, &c)| c) {
                    let y = self.coords(k);
                    d = d.min(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt());
                }
            }
        }
        d.max(0.0)
    }

    /// Same node lattice, refined or coarsened.
    pub fn with_cells(&self, cells1: usize, cells2: usize) -> Result<Self> {
        Self::new(&self.geometry, cells1, cells2)
    }
}

/// Nodal scalar function on a grid, one value per node in node order.
/// Solution-type fields hold 0 at Dirichlet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.node_count()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::FieldMismatch { expected: grid.node_count(), got: values.len() });
        }
        Ok(Self { values })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        Self { values: (0..grid.node_count()).map(|k| f(grid.coords(k))).collect() }
    }

    /// Scatter unknown values into a solution field (Dirichlet nodes 0).
    pub fn from_unknowns(grid: &Grid, x: &[f64]) -> Self {
        let mut values = vec![0.0; grid.node_count()];
        for (&k, &v) in grid.unknown_nodes().iter().zip(x) {
            values[k] = v;
        }
        Self { values }
    }

    pub fn unknowns(&self, grid: &Grid) -> Vec<f64> {
        grid.unknown_nodes().iter().map(|&k| self.values[k]).collect()
    }

    /// Copy with every Dirichlet value set to 0.
    pub fn clamped(&self, grid: &Grid) -> Self {
        let mut out = self.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            if grid.is_dirichlet(k) {
                *v = 0.0;
            }
        }
        out
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.values.len() != grid.node_count() {
            return Err(Error::FieldMismatch { expected: grid.node_count(), got: self.values.len() });
        }
        Ok(())
    }
}

/// Trapezoid approximation of the integral of `f * w` over the domain.
pub fn integrate(grid: &Grid, f: &Field, w: impl Fn([f64; 2]) -> f64) -> f64 {
    let mut sum = 0.0;
    for (k, (&m, &v)) in grid.mass().iter().zip(&f.values).enumerate() {
        if m != 0.0 {
            sum += m * v * w(grid.coords(k));
        }
    }
    sum
}

/// `1/b` times the shape factor on every face, in face order.
pub fn face_coefficients(grid: &Grid, weight: &WeightProfile) -> Result<Vec<f64>> {
    let table = tabulated_weight(grid, weight)?;
    grid.faces()
        .iter()
        .map(|f| {
            let b = match &table {
                Some(t) => 0.5 * (t[f.a] + t[f.b]),
                None => weight.eval(f.mid[0], f.mid[1]).unwrap_or(f64::NAN),
            };
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::NonPositiveWeight { x1: f.mid[0], x2: f.mid[1], value: b });
            }
            Ok(f.shape / b)
        })
        .collect()
}

fn tabulated_weight<'a>(grid: &Grid, weight: &'a WeightProfile) -> Result<Option<&'a [f64]>> {
    match weight {
        WeightProfile::Tabulated(t) => {
            if t.n1 != grid.n1 || t.n2 != grid.n2 {
                return Err(Error::FieldMismatch { expected: grid.node_count(), got: t.values.len() });
            }
            Ok(Some(&t.values))
        }
        _ => Ok(None),
    }
}

/// Discrete `int |grad u|^2 / b`: sum over faces of the squared difference
/// quotient times `1/b` at the face midpoint times the face area. Dirichlet
/// values of `u` are taken as stored.
pub fn dirichlet_energy(grid: &Grid, u: &Field, weight: &WeightProfile) -> Result<f64> {
    u.check(grid)?;
    let coef = face_coefficients(grid, weight)?;
    Ok(face_quadratic(grid, &coef, &u.values, &u.values))
}

/// `sum_f c_f (x_a - x_b)(y_a - y_b)` over the grid faces.
pub fn face_quadratic(grid: &Grid, coef: &[f64], x: &[f64], y: &[f64]) -> f64 {
    grid.faces()
        .iter()
        .zip(coef)
        .map(|(f, c)| c * (x[f.a] - x[f.b]) * (y[f.a] - y[f.b]))
        .sum()
}

/// Either kind of profile, for [`sample_profile`].
pub enum Profile<'a> {
    Weight(&'a WeightProfile),
    Boundary(&'a BoundaryProfile),
}

/// Nodal samples of a weight or boundary profile at every node. Nodes inside
/// an obstacle are set to 0 for boundary profiles.
pub fn sample_profile(grid: &Grid, profile: Profile<'_>) -> Result<Field> {
    let n = grid.node_count();
    let values = match profile {
        Profile::Weight(w) => match tabulated_weight(grid, w)? {
            Some(t) => t.to_vec(),
            None => (0..n).map(|k| {
                let [x1, x2] = grid.coords(k);
                w.eval(x1, x2).unwrap_or(f64::NAN)
            }).collect(),
        },
        Profile::Boundary(q) => match q.nodal() {
            Some((m1, m2, v)) => {
                if m1 != grid.n1 || m2 != grid.n2 {
                    return Err(Error::FieldMismatch { expected: n, got: v.len() });
                }
                v
            }
            None => (0..n)
                .map(|k| {
                    if grid.is_removed(k) {
                        return 0.0;
                    }
                    let [x1, x2] = grid.coords(k);
                    q.eval(x1, x2).unwrap_or(f64::NAN)
                })
                .collect(),
        },
    };
    for (k, v) in values.iter().enumerate() {
        if !v.is_finite() {
            let [x1, x2] = grid.coords(k);
            return Err(Error::BadSample { x1, x2, what: format!("value {v}") });
        }
    }
    Ok(Field { values })
}

/// Round-trip decimal form used in every text export.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with columns `x1,x2,<names...>`, one row per node in node order.
pub fn write_csv(grid: &Grid, columns: &[(&str, &Field)], out: &mut impl Write) -> Result<()> {
    for (_, f) in columns {
        f.check(grid)?;
    }
    let mut header = String::from("x1,x2");
    for (name, _) in columns {
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for k in 0..grid.node_count() {
        let [x1, x2] = grid.coords(k);
        let mut line = format!("{},{}", fmt_f64(x1), fmt_f64(x2));
        for (_, f) in columns {
            line.push(',');
            line.push_str(&fmt_f64(f.values[k]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Single-column export with header `x1,x2,value`.
pub fn export_field(grid: &Grid, field: &Field, out: &mut impl Write) -> Result<()> {
    write_csv(grid, &[("value", field)], out)
}
