//! Lattice domains, scalar fields on them, and 1-D radial grids.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Analytic domain descriptor; the lattice is sampled from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Ball { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
    Rectangle { lo: Point, hi: Point },
}

impl Domain {
    pub fn ball(center: Point, radius: f64) -> Self {
        Domain::Ball { center, radius }
    }

    pub fn annulus(center: Point, inner: f64, outer: f64) -> Self {
        Domain::Annulus { center, inner, outer }
    }

    pub fn rectangle(lo: Point, hi: Point) -> Self {
        Domain::Rectangle { lo, hi }
    }

    /// Strict interior membership.
    pub fn contains(&self, x: Point) -> bool {
        match *self {
            Domain::Ball { center, radius } => dist(x, center) < radius,
            Domain::Annulus { center, inner, outer } => {
                let r = dist(x, center);
                r > inner && r < outer
            }
            Domain::Rectangle { lo, hi } => x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1],
        }
    }

    fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Domain::Ball { center, radius }
            | Domain::Annulus {
                center, outer: radius, ..
            } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Domain::Rectangle { lo, hi } => (lo, hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Ball { radius, .. } => radius > 0.0,
            Domain::Annulus { inner, outer, .. } => inner >= 0.0 && outer > inner,
            Domain::Rectangle { lo, hi } => hi[0] > lo[0] && hi[1] > lo[1],
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateDomain(format!("invalid domain parameters {self:?}")))
        }
    }

    pub fn translated(&self, by: Point) -> Self {
        let sh = |p: Point| [p[0] + by[0], p[1] + by[1]];
        match *self {
            Domain::Ball { center, radius } => Domain::Ball {
                center: sh(center),
                radius,
            },
            Domain::Annulus { center, inner, outer } => Domain::Annulus {
                center: sh(center),
                inner,
                outer,
            },
            Domain::Rectangle { lo, hi } => Domain::Rectangle { lo: sh(lo), hi: sh(hi) },
        }
    }
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Outside,
    Inside,
    Boundary,
}

/// Minimum number of inside nodes for a usable domain.
pub const MIN_INSIDE_NODES: usize = 9;

/// Rectangular lattice `x = (i0 + i) h, y = (j0 + j) h` with a node classification.
///
/// Boundary nodes are the non-inside lattice nodes at Chebyshev distance one
/// from some inside node, so every 3x3 neighbourhood of an inside node is
/// fully classified.
#[derive(Debug, Clone)]
pub struct Grid2D {
    h: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    class: Vec<NodeClass>,
    inside: Vec<usize>,
    boundary: Vec<usize>,
    diameter: f64,
    domain: Domain,
}

pub fn build_grid(domain: Domain, h: f64) -> Result<Grid2D> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    domain.validate()?;
    let (lo, hi) = domain.bounding_box();
    let i0 = (lo[0] / h).floor() as i64 - 1;
    let j0 = (lo[1] / h).floor() as i64 - 1;
    let i1 = (hi[0] / h).ceil() as i64 + 1;
    let j1 = (hi[1] / h).ceil() as i64 + 1;
    let nx = (i1 - i0 + 1) as usize;
    let ny = (j1 - j0 + 1) as usize;

    let mut class = vec![NodeClass::Outside; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = [(i0 + i as i64) as f64 * h, (j0 + j as i64) as f64 * h];
            if domain.contains(x) {
                class[j * nx + i] = NodeClass::Inside;
            }
        }
    }
    let inside: Vec<usize> = (0..nx * ny).filter(|&k| class[k] == NodeClass::Inside).collect();
    if inside.len() < MIN_INSIDE_NODES {
        return Err(Error::DegenerateDomain(format!(
            "only {} inside nodes at h = {h} (need at least {MIN_INSIDE_NODES})",
            inside.len()
        )));
    }
    for &k in &inside {
        let (i, j) = ((k % nx) as i64, (k / nx) as i64);
        for dj in -1..=1 {
            for di in -1..=1 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let q = b as usize * nx + a as usize;
                if class[q] == NodeClass::Outside {
                    class[q] = NodeClass::Boundary;
                }
            }
        }
    }
    let boundary: Vec<usize> = (0..nx * ny).filter(|&k| class[k] == NodeClass::Boundary).collect();

    let mut grid = Grid2D {
        h,
        i0,
        j0,
        nx,
        ny,
        class,
        inside,
        boundary,
        diameter: 0.0,
        domain,
    };
    let pts: Vec<Point> = grid.classified().map(|k| grid.coords(k)).collect();
    grid.diameter = point_set_diameter(&pts);
    Ok(grid)
}

impl Grid2D {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.inside.is_empty()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn class(&self, k: usize) -> NodeClass {
        self.class[k]
    }

    pub fn is_classified(&self, k: usize) -> bool {
        self.class[k] != NodeClass::Outside
    }

    pub fn inside(&self) -> &[usize] {
        &self.inside
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Inside then boundary node indices.
    pub fn classified(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside.iter().chain(self.boundary.iter()).copied()
    }

    pub fn n_classified(&self) -> usize {
        self.inside.len() + self.boundary.len()
    }

    /// Diameter over all classified nodes (discrete, not the analytic domain).
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Index of `(i + di, j + dj)` if it is on the lattice array.
    #[inline]
    pub fn offset(&self, k: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.ij(k);
        let (a, b) = (i as i64 + di, j as i64 + dj);
        if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
            None
        } else {
            Some(b as usize * self.nx + a as usize)
        }
    }

    #[inline]
    pub fn coords(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        [
            (self.i0 + i as i64) as f64 * self.h,
            (self.j0 + j as i64) as f64 * self.h,
        ]
    }

    /// Nearest inside node to `x`.
    pub fn nearest_inside(&self, x: Point) -> usize {
        *self
            .inside
            .iter()
            .min_by(|&&a, &&b| dist(self.coords(a), x).total_cmp(&dist(self.coords(b), x)))
            .expect("grid has inside nodes")
    }

    /// Largest Chebyshev radius `r <= k_max` such that every node within
    /// Chebyshev distance `r` of `k` is classified (at least 1 for inside nodes).
    pub fn clear_radius(&self, k: usize, k_max: usize) -> usize {
        let mut r = 0;
        'outer: for rr in 1..=k_max as i64 {
            for d in -rr..=rr {
                for (di, dj) in [(d, -rr), (d, rr), (-rr, d), (rr, d)] {
                    match self.offset(k, di, dj) {
                        Some(q) if self.is_classified(q) => {}
                        _ => break 'outer,
                    }
                }
            }
            r = rr as usize;
        }
        r
    }
}

/// Diameter of a planar point set via its convex hull.
pub fn point_set_diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut d: f64 = 0.0;
    for (a, pa) in hull.iter().enumerate() {
        for pb in &hull[a + 1..] {
            d = d.max(dist(*pa, *pb));
        }
    }
    d
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Nodal values on a grid. Entries at `Outside` nodes are NaN.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn from_fn(grid: &Arc<Grid2D>, mut f: impl FnMut(Point) -> f64) -> Self {
        let mut values = vec![f64::NAN; grid.len()];
        for k in grid.classified() {
            values[k] = f(grid.coords(k));
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn constant(grid: &Arc<Grid2D>, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Wraps a dense value vector; must have one entry per lattice node and be
    /// finite at every classified node.
    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = grid.classified().find(|&k| !values[k].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value at node {k} ({:?})",
                grid.coords(k)
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<Grid2D>, values: Vec<f64>) -> Self {
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut values = vec![f64::NAN; self.values.len()];
        for k in self.grid.classified() {
            values[k] = f(self.values[k]);
        }
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn zip_map(&self, other: &ScalarField, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.grid.len() == other.grid.len());
        let mut values = vec![f64::NAN; self.values.len()];
        for k in self.grid.classified() {
            values[k] = f(self.values[k], other.values[k]);
        }
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(0.0))
    }

    /// Sup norm over inside nodes.
    pub fn sup_norm_inside(&self) -> f64 {
        self.grid
            .inside()
            .iter()
            .map(|&k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// Sup norm over all classified nodes.
    pub fn sup_norm(&self) -> f64 {
        self.grid.classified().map(|k| self.values[k].abs()).fold(0.0, f64::max)
    }

    /// Max over inside nodes of `|self - other|`.
    pub fn sup_distance_inside(&self, other: &ScalarField) -> f64 {
        self.grid
            .inside()
            .iter()
            .map(|&k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns_csv(w, &self.grid, &["value"], &[&self.values])
    }
}

/// Writes `x,y,<names...>` rows for every classified node.
pub fn write_columns_csv<W: Write>(mut w: W, grid: &Grid2D, names: &[&str], cols: &[&[f64]]) -> Result<()> {
    write!(w, "x,y")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    writeln!(w)?;
    for k in grid.classified() {
        let x = grid.coords(k);
        write!(w, "{},{}", x[0], x[1])?;
        for c in cols {
            write!(w, ",{}", c[k])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrema {
    pub sup_inside: f64,
    pub sup_boundary: f64,
    pub sup_inside_plus: f64,
    pub sup_boundary_plus: f64,
    pub sup_inside_minus: f64,
    pub sup_boundary_minus: f64,
}

pub fn field_extrema(u: &ScalarField) -> Extrema {
    let g = u.grid();
    let max_over =
        |ix: &[usize], f: &dyn Fn(f64) -> f64| ix.iter().map(|&k| f(u.get(k))).fold(f64::NEG_INFINITY, f64::max);
    let id = |v: f64| v;
    let plus = |v: f64| v.max(0.0);
    let minus = |v: f64| (-v).max(0.0);
    Extrema {
        sup_inside: max_over(g.inside(), &id),
        sup_boundary: max_over(g.boundary(), &id),
        sup_inside_plus: max_over(g.inside(), &plus),
        sup_boundary_plus: max_over(g.boundary(), &plus),
        sup_inside_minus: max_over(g.inside(), &minus),
        sup_boundary_minus: max_over(g.boundary(), &minus),
    }
}

/// Uniform 1-D grid on `[rho0, rho1]` for radial profiles in dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n: u32,
    rho0: f64,
    rho1: f64,
    m: usize,
}

impl RadialGrid {
    pub fn new(n: u32, rho0: f64, rho1: f64, m: usize) -> Result<Self> {
        if !(rho0 >= 0.0 && rho0 < rho1) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= rho0 < rho1, got [{rho0}, {rho1}]"
            )));
        }
        if m < 3 {
            return Err(Error::InvalidArgument(format!(
                "radial grid needs m >= 3 nodes, got {m}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("dimension must be >= 2, got {n}")));
        }
        Ok(Self { n, rho0, rho1, m })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rho0(&self) -> f64 {
        self.rho0
    }

    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    pub fn spacing(&self) -> f64 {
        (self.rho1 - self.rho0) / (self.m - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.m {
            self.rho1
        } else {
            self.rho0 + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn sample(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }
}
