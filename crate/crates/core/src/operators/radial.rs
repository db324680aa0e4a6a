//! Radial operator profiles in arbitrary dimension.

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, RadialProfile};
use crate::params::{Exponent, PExponent};

use super::AnalyticFunction;

pub enum RadialSource<'a> {
    /// Exact derivatives from the closed form, sampled on the given grid.
    Analytic(&'a AnalyticFunction, &'a RadialGrid),
    /// Central differences of sampled values.
    Sampled(&'a RadialProfile),
}

#[derive(Debug, Clone)]
pub struct RadialOperators {
    pub rho: Vec<f64>,
    pub inf_lap: Vec<f64>,
    pub lap: Vec<f64>,
    pub p_lap_norm: Vec<f64>,
    /// `None` for `p = inf`.
    pub p_lap_var: Option<Vec<f64>>,
}

/// `Delta_inf^N v = v''`, `Delta v = v'' + (n-1) v'/rho`, and their
/// normalized / variational `p` combinations, at every node of the grid.
pub fn radial_operators(src: RadialSource<'_>, pe: &PExponent) -> Result<RadialOperators> {
    let (grid, d1, d2) = match src {
        RadialSource::Analytic(f, grid) => {
            check_grid(grid)?;
            if !f.is_radial() {
                return Err(Error::InvalidArgument("radial operators need a radial function".into()));
            }
            let mut d1 = Vec::with_capacity(grid.m());
            let mut d2 = Vec::with_capacity(grid.m());
            for rho in grid.nodes() {
                let j = f.profile(rho).expect("radial");
                d1.push(j.dv);
                d2.push(j.d2v);
            }
            (grid.clone(), d1, d2)
        }
        RadialSource::Sampled(prof) => {
            check_grid(&prof.grid)?;
            let (d1, d2) = central_derivatives(&prof.values, prof.grid.spacing());
            (prof.grid.clone(), d1, d2)
        }
    };
    if grid.n() != pe.n() {
        return Err(Error::InvalidArgument(format!(
            "radial grid dimension {} differs from exponent dimension {}",
            grid.n(),
            pe.n()
        )));
    }
    let rho = grid.nodes();
    let nm1 = pe.n() as f64 - 1.0;
    let (a, b) = pe.operator_weights();
    let lap: Vec<f64> = (0..rho.len()).map(|i| d2[i] + nm1 * d1[i] / rho[i]).collect();
    let p_lap_norm = (0..rho.len()).map(|i| a * lap[i] + b * d2[i]).collect();
    let p_lap_var = match pe.p() {
        Exponent::Finite(p) => Some(
            (0..rho.len())
                .map(|i| d1[i].abs().powf(p - 2.0) * ((p - 1.0) * d2[i] + nm1 * d1[i] / rho[i]))
                .collect(),
        ),
        Exponent::Infinite => None,
    };
    Ok(RadialOperators {
        rho,
        inf_lap: d2,
        lap,
        p_lap_norm,
        p_lap_var,
    })
}

fn check_grid(g: &RadialGrid) -> Result<()> {
    if g.rho0() <= 0.0 {
        return Err(Error::InvalidArgument(
            "radial operators need rho0 > 0 (stay off the singular center)".into(),
        ));
    }
    Ok(())
}

/// Second-order first and second derivatives, one-sided at the ends.
fn central_derivatives(v: &[f64], dr: f64) -> (Vec<f64>, Vec<f64>) {
    let m = v.len();
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for i in 1..m - 1 {
        d1[i] = (v[i + 1] - v[i - 1]) / (2.0 * dr);
        d2[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dr * dr);
    }
    d1[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dr);
    d1[m - 1] = (3.0 * v[m - 1] - 4.0 * v[m - 2] + v[m - 3]) / (2.0 * dr);
    if m >= 4 {
        d2[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (dr * dr);
        d2[m - 1] = (2.0 * v[m - 1] - 5.0 * v[m - 2] + 4.0 * v[m - 3] - v[m - 4]) / (dr * dr);
    } else {
        d2[0] = d2[1];
        d2[m - 1] = d2[m - 2];
    }
    (d1, d2)
}
