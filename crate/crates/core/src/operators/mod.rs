//! Discrete operators on lattice fields and their analytic counterparts.
//!
//! Every grid operator returns a field holding its value at inside nodes;
//! boundary entries are zero and carry no meaning.

mod analytic;
mod radial;
mod stencil;

pub use analytic::{cusp_gradient_nonvanishing, AnalyticFunction, ExactOperators, ProfileJet};
pub use radial::{radial_operators, RadialOperators, RadialSource};
pub use stencil::{Direction, PreparedStencil, Shell, Stencil};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::params::{Exponent, PExponent};

/// Gradient magnitude below which the variational operator is taken to vanish.
pub const GRADIENT_FLOOR: f64 = 1e-12;

#[inline]
pub(crate) fn five_point_neighbours(grid: &Grid2D, k: usize) -> [usize; 4] {
    let nx = grid.nx();
    [k + 1, k - 1, k + nx, k - nx]
}

/// `sum (u_nb - u) / h^2` over the four axis neighbours.
#[inline]
pub(crate) fn laplacian_at(grid: &Grid2D, values: &[f64], k: usize) -> f64 {
    let u0 = values[k];
    let [e, w, n, s] = five_point_neighbours(grid, k);
    ((values[e] - u0) + (values[w] - u0) + (values[n] - u0) + (values[s] - u0)) / (grid.h() * grid.h())
}

#[inline]
pub(crate) fn inf_laplacian_at(prep: &PreparedStencil, values: &[f64], pos: usize, k: usize) -> f64 {
    let r = prep.node_radius(pos);
    let (hi, _, lo, _) = prep.extremes(values, k, r);
    let rr = r as f64 * prep.grid().h();
    (hi + lo) / (rr * rr)
}

fn inside_field(grid: &Arc<Grid2D>, mut f: impl FnMut(usize, usize) -> f64) -> ScalarField {
    let mut out = vec![f64::NAN; grid.len()];
    for &k in grid.boundary() {
        out[k] = 0.0;
    }
    for (pos, &k) in grid.inside().iter().enumerate() {
        out[k] = f(pos, k);
    }
    ScalarField::from_values_unchecked(grid, out)
}

/// Standard 5-point Laplacian.
pub fn laplacian_5pt(u: &ScalarField) -> ScalarField {
    let g = u.grid();
    inside_field(g, |_, k| laplacian_at(g, u.values(), k))
}

/// Wide-stencil normalized infinity Laplacian
/// `(max_e u(x + r e) + min_e u(x + r e) - 2 u(x)) / r^2`.
pub fn inf_laplacian_wide(u: &ScalarField, s: &Stencil) -> ScalarField {
    inf_laplacian_prepared(u, &s.prepare(u.grid()))
}

pub fn inf_laplacian_prepared(u: &ScalarField, prep: &PreparedStencil) -> ScalarField {
    inside_field(u.grid(), |pos, k| inf_laplacian_at(prep, u.values(), pos, k))
}

/// `(1/p) Delta u + ((p-2)/p) Delta_inf^N u`; the infinity Laplacian alone at `p = inf`.
pub fn p_laplacian_normalized(u: &ScalarField, pe: &PExponent, s: &Stencil) -> Result<ScalarField> {
    Ok(p_laplacian_normalized_prepared(u, pe, &s.prepare(u.grid())))
}

pub fn p_laplacian_normalized_prepared(u: &ScalarField, pe: &PExponent, prep: &PreparedStencil) -> ScalarField {
    let g = u.grid();
    let (a, b) = pe.operator_weights();
    inside_field(g, |pos, k| {
        let inf = inf_laplacian_at(prep, u.values(), pos, k);
        if pe.is_infinite() {
            inf
        } else {
            a * laplacian_at(g, u.values(), k) + b * inf
        }
    })
}

/// Variational `|grad u|^{p-2} (Delta u + (p-2) Delta_inf^N u)` with a central
/// difference gradient; zero where `|grad u| < GRADIENT_FLOOR`.
pub fn p_laplacian_variational(u: &ScalarField, pe: &PExponent, s: &Stencil) -> Result<ScalarField> {
    let p = match pe.p() {
        Exponent::Finite(p) => p,
        Exponent::Infinite => return Err(Error::InvalidExponent("variational p-Laplacian needs finite p".into())),
    };
    let g = u.grid();
    let prep = s.prepare(g);
    let v = u.values();
    let h = g.h();
    Ok(inside_field(g, |pos, k| {
        let [e, w, n, so] = five_point_neighbours(g, k);
        let gx = (v[e] - v[w]) / (2.0 * h);
        let gy = (v[n] - v[so]) / (2.0 * h);
        let gn = gx.hypot(gy);
        if gn < GRADIENT_FLOOR {
            return 0.0;
        }
        let lap = laplacian_at(g, v, k);
        let inf = inf_laplacian_at(&prep, v, pos, k);
        gn.powf(p - 2.0) * (lap + (p - 2.0) * inf)
    }))
}

/// `Delta_1^N u = Delta u - Delta_inf^N u`.
pub fn curvature_laplacian_1n(u: &ScalarField, s: &Stencil) -> ScalarField {
    let g = u.grid();
    let prep = s.prepare(g);
    inside_field(g, |pos, k| {
        laplacian_at(g, u.values(), k) - inf_laplacian_at(&prep, u.values(), pos, k)
    })
}
