//! Dirichlet solver for `-Delta_p^N u = f` by monotone pseudo-time iteration,
//! and the comparison-with-cusps check.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::operators::{laplacian_at, AnalyticFunction, PreparedStencil, Stencil};
use crate::params::PExponent;

#[derive(Debug, Clone, Serialize)]
pub struct SolveOptions {
    /// Fraction `theta` of the largest monotone local step `1 / diag(x)`.
    pub relaxation: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Stencil radius; `None` picks `round(h^{-1/2})`.
    pub k: Option<usize>,
    /// Shell directions are re-optimized every this many sweeps and reused
    /// in between. `1` evaluates the full operator every sweep.
    pub policy_refresh: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            relaxation: 1.0,
            tol: 1e-8,
            max_iters: 1_000_000,
            k: None,
            policy_refresh: 16,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.policy_refresh == 0 {
            return Err(Error::InvalidArgument("policy_refresh must be at least 1".into()));
        }
        if self.k == Some(0) {
            return Err(Error::InvalidArgument("stencil radius must be at least 1".into()));
        }
        Ok(())
    }

    pub fn stencil_radius(&self, h: f64) -> usize {
        self.k.unwrap_or_else(|| Stencil::default_radius(h))
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: ScalarField,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// `false` when `f` changes sign, where uniqueness of viscosity solutions can fail.
    pub uniqueness_guaranteed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub uniqueness_guaranteed: bool,
}

impl SolveResult {
    pub fn summary(&self) -> SolveSummary {
        SolveSummary {
            iterations: self.iterations,
            final_residual: self.final_residual,
            converged: self.converged,
            uniqueness_guaranteed: self.uniqueness_guaranteed,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &self.summary())?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        self.u.write_csv(w)
    }
}

/// The discrete operator `F[u](x) = Delta_p^N u(x) + f(x)` bound to one grid.
struct Scheme<'a> {
    prep: PreparedStencil,
    a: f64,
    b: f64,
    f: &'a [f64],
    /// Local step `theta / diag(x)` per inside node.
    step: Vec<f64>,
}

impl<'a> Scheme<'a> {
    fn new(pe: &PExponent, f: &'a ScalarField, k: usize, theta: f64) -> Self {
        let grid = f.grid();
        let prep = Stencil::new(k).prepare(grid);
        let (a, b) = pe.operator_weights();
        let h = grid.h();
        let step = (0..grid.inside().len())
            .map(|pos| {
                let r = prep.node_radius(pos) as f64 * h;
                theta / (4.0 * a / (h * h) + 2.0 * b / (r * r))
            })
            .collect();
        Self {
            prep,
            a,
            b,
            f: f.values(),
            step,
        }
    }

    fn grid(&self) -> &Arc<Grid2D> {
        self.prep.grid()
    }

    #[inline]
    fn lap(&self, v: &[f64], k: usize) -> f64 {
        if self.a == 0.0 {
            0.0
        } else {
            self.a * laplacian_at(self.grid(), v, k)
        }
    }

    #[inline]
    fn full(&self, v: &[f64], pos: usize, k: usize) -> (f64, u32, u32) {
        let r = self.prep.node_radius(pos);
        let (hi, ihi, lo, ilo) = self.prep.extremes(v, k, r);
        let rr = r as f64 * self.grid().h();
        let val = self.lap(v, k) + self.b * (hi + lo) / (rr * rr) + self.f[k];
        (val, ihi as u32, ilo as u32)
    }

    #[inline]
    fn frozen(&self, v: &[f64], pos: usize, k: usize, pol: (u32, u32)) -> f64 {
        let r = self.prep.node_radius(pos);
        let hi = self.prep.increment(v, k, r, pol.0 as usize);
        let lo = self.prep.increment(v, k, r, pol.1 as usize);
        let rr = r as f64 * self.grid().h();
        self.lap(v, k) + self.b * (hi + lo) / (rr * rr) + self.f[k]
    }

    /// One full Jacobi sweep into `next`; returns the residual of `v`.
    fn sweep_full(&self, v: &[f64], next: &mut [f64], policy: &mut [(u32, u32)]) -> f64 {
        let inside = self.grid().inside();
        next.par_iter_mut()
            .zip(policy.par_iter_mut())
            .enumerate()
            .with_min_len(256)
            .map(|(pos, (nv, pol))| {
                let k = inside[pos];
                let (val, ihi, ilo) = self.full(v, pos, k);
                *pol = (ihi, ilo);
                *nv = v[k] + self.step[pos] * val;
                val.abs()
            })
            .reduce(|| 0.0, f64::max)
    }

    fn sweep_frozen(&self, v: &[f64], next: &mut [f64], policy: &[(u32, u32)]) {
        let inside = self.grid().inside();
        next.par_iter_mut()
            .zip(policy.par_iter())
            .enumerate()
            .with_min_len(256)
            .for_each(|(pos, (nv, &pol))| {
                let k = inside[pos];
                *nv = v[k] + self.step[pos] * self.frozen(v, pos, k, pol);
            });
    }

    fn residual(&self, v: &[f64]) -> f64 {
        let inside = self.grid().inside();
        inside
            .par_iter()
            .enumerate()
            .with_min_len(256)
            .map(|(pos, &k)| self.full(v, pos, k).0.abs())
            .reduce(|| 0.0, f64::max)
    }
}

fn check_inputs(pe: &PExponent, f: &ScalarField, g: &ScalarField) -> Result<()> {
    if pe.n() != 2 {
        return Err(Error::InvalidArgument(format!(
            "lattice solver is two-dimensional, got n = {}",
            pe.n()
        )));
    }
    if !Arc::ptr_eq(f.grid(), g.grid()) {
        return Err(Error::InvalidArgument("f and g live on different grids".into()));
    }
    let grid = f.grid();
    if let Some(&k) = grid.inside().iter().find(|&&k| !f.get(k).is_finite()) {
        return Err(Error::InvalidArgument(format!("f is not finite at node {k}")));
    }
    if let Some(&k) = grid.boundary().iter().find(|&&k| !g.get(k).is_finite()) {
        return Err(Error::InvalidArgument(format!("g is not finite at boundary node {k}")));
    }
    Ok(())
}

fn sign_changes(f: &ScalarField) -> bool {
    let inside = f.grid().inside();
    inside.iter().any(|&k| f.get(k) > 0.0) && inside.iter().any(|&k| f.get(k) < 0.0)
}

/// Inverse-square-distance blend of the boundary data, written as
/// `g0 + sum w (g - g0) / sum w` so constant data is reproduced exactly.
pub fn initial_guess(g: &ScalarField) -> ScalarField {
    let grid = g.grid();
    let bnd: Vec<([f64; 2], f64)> = grid.boundary().iter().map(|&k| (grid.coords(k), g.get(k))).collect();
    let mut u = g.clone();
    let Some(&(_, g0)) = bnd.first() else {
        return u;
    };
    let vals: Vec<f64> = grid
        .inside()
        .par_iter()
        .with_min_len(64)
        .map(|&k| {
            let x = grid.coords(k);
            let (mut num, mut den) = (0.0, 0.0);
            for &(y, gy) in &bnd {
                let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                let w = 1.0 / d2;
                num += w * (gy - g0);
                den += w;
            }
            g0 + num / den
        })
        .collect();
    let v = u.values_mut();
    for (&k, val) in grid.inside().iter().zip(vals) {
        v[k] = val;
    }
    u
}

/// Solve `-Delta_p^N u = f` inside with `u = g` on boundary nodes.
///
/// Non-convergence within `max_iters` is reported through `converged`.
pub fn solve_dirichlet(pe: &PExponent, f: &ScalarField, g: &ScalarField, opts: &SolveOptions) -> Result<SolveResult> {
    check_inputs(pe, f, g)?;
    solve_dirichlet_from(pe, f, g, initial_guess(g), opts)
}

/// As [`solve_dirichlet`], starting from `init` (its boundary values are replaced by `g`).
pub fn solve_dirichlet_from(
    pe: &PExponent,
    f: &ScalarField,
    g: &ScalarField,
    init: ScalarField,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    check_inputs(pe, f, g)?;
    if !Arc::ptr_eq(init.grid(), g.grid()) {
        return Err(Error::InvalidArgument("initial guess lives on a different grid".into()));
    }
    let grid = Arc::clone(g.grid());
    let scheme = Scheme::new(pe, f, opts.stencil_radius(grid.h()), opts.relaxation);
    let mut u = init;
    {
        let v = u.values_mut();
        for &k in grid.boundary() {
            v[k] = g.get(k);
        }
        if let Some(&k) = grid.inside().iter().find(|&&k| !v[k].is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial guess is not finite at node {k}"
            )));
        }
    }
    let n = grid.inside().len();
    let mut next = vec![0.0; n];
    let mut policy = vec![(0u32, 0u32); n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        if iterations % opts.policy_refresh == 0 {
            residual = scheme.sweep_full(u.values(), &mut next, &mut policy);
            if residual <= opts.tol {
                break;
            }
        } else {
            scheme.sweep_frozen(u.values(), &mut next, &policy);
        }
        let v = u.values_mut();
        for (&k, &nv) in grid.inside().iter().zip(&next) {
            v[k] = nv;
        }
        iterations += 1;
    }
    if iterations == opts.max_iters {
        residual = scheme.residual(u.values());
    }
    Ok(SolveResult {
        u,
        iterations,
        final_residual: residual,
        converged: residual <= opts.tol,
        uniqueness_guaranteed: !sign_changes(f),
    })
}

/// One full Jacobi sweep `u + theta/diag * (Delta_p^N u + f)` with boundary values kept.
pub fn jacobi_step(u: &ScalarField, pe: &PExponent, f: &ScalarField, k: usize, theta: f64) -> ScalarField {
    let scheme = Scheme::new(pe, f, k, theta);
    let n = u.grid().inside().len();
    let mut next = vec![0.0; n];
    let mut policy = vec![(0u32, 0u32); n];
    scheme.sweep_full(u.values(), &mut next, &mut policy);
    let mut out = u.clone();
    let v = out.values_mut();
    for (&k, nv) in u.grid().inside().iter().zip(next) {
        v[k] = nv;
    }
    out
}

/// `sup |Delta_p^N u + f|` over inside nodes.
pub fn residual(u: &ScalarField, pe: &PExponent, f: &ScalarField, k: usize) -> f64 {
    Scheme::new(pe, f, k, 1.0).residual(u.values())
}

#[derive(Debug, Clone, Serialize)]
pub struct CuspComparison {
    pub upper_boundary_ok: bool,
    /// `max (u - cusp)` over inside nodes.
    pub upper_interior_excess: f64,
    pub lower_boundary_ok: bool,
    /// `max (lower - u)` over inside nodes, `lower = 2 height - cusp`.
    pub lower_interior_excess: f64,
    pub holds: bool,
}

/// Checks both implications: `u <= cusp` on the boundary gives `u <= cusp + slack`
/// inside, and `u >= 2 height - cusp` on the boundary gives the mirrored bound.
pub fn comparison_with_cusps(u: &ScalarField, cusp: &AnalyticFunction, slack: f64) -> Result<CuspComparison> {
    let AnalyticFunction::Cusp { height, .. } = *cusp else {
        return Err(Error::InvalidArgument("comparison needs a cusp".into()));
    };
    let grid = u.grid();
    let upper = |k: usize| cusp.value(grid.coords(k));
    let upper_boundary_ok = grid.boundary().iter().all(|&k| u.get(k) <= upper(k));
    let lower_boundary_ok = grid.boundary().iter().all(|&k| u.get(k) >= 2.0 * height - upper(k));
    let mut up = f64::NEG_INFINITY;
    let mut lo = f64::NEG_INFINITY;
    for &k in grid.inside() {
        let c = upper(k);
        up = up.max(u.get(k) - c);
        lo = lo.max(2.0 * height - c - u.get(k));
    }
    let holds = (!upper_boundary_ok || up <= slack) && (!lower_boundary_ok || lo <= slack);
    Ok(CuspComparison {
        upper_boundary_ok,
        upper_interior_excess: up,
        lower_boundary_ok,
        lower_interior_excess: lo,
        holds,
    })
}

pub fn comparison_with_cusps_check(u: &ScalarField, cusp: &AnalyticFunction, slack: f64) -> bool {
    comparison_with_cusps(u, cusp, slack).map(|c| c.holds).unwrap_or(false)
}
