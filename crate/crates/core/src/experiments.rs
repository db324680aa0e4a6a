//! The p -> inf sweep and the two radial examples of the failure of classical ABP.

use std::io::Write;

use serde::Serialize;

use crate::envelope::{abp_level_integral, default_band};
use crate::error::{Error, Result};
use crate::estimates::{verify_abp_samples, verify_c_alpha_norm, AbpVariant, EstimateReport};
use crate::grid::{RadialGrid, ScalarField};
use crate::operators::AnalyticFunction;
use crate::params::{unit_ball_volume, unit_sphere_area, Exponent, PExponent};
use crate::solver::{solve_dirichlet, SolveOptions};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub p: Exponent,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    /// `sup_inside |u_p - u_inf|`.
    pub distance: f64,
    pub c_alpha: EstimateReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "p,iterations,converged,final_residual,distance,c_alpha_lhs,c_alpha_rhs,c_alpha_pass"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.p,
                r.iterations,
                r.converged,
                r.final_residual,
                r.distance,
                r.c_alpha.lhs,
                r.c_alpha.rhs,
                r.c_alpha.pass
            )?;
        }
        Ok(())
    }
}

/// Solves the same Dirichlet problem for every `p` and measures the distance to the `p = inf` solution.
pub fn p_sweep(ps: &[Exponent], f: &ScalarField, g: &ScalarField, opts: &SolveOptions) -> Result<SweepTable> {
    if !ps.iter().any(|p| p.is_infinite()) {
        return Err(Error::InvalidArgument("the sweep needs p = inf as reference".into()));
    }
    let mut ps: Vec<Exponent> = ps.to_vec();
    ps.sort_by(|a, b| a.as_f64().total_cmp(&b.as_f64()));
    ps.dedup();
    let mut solved = Vec::with_capacity(ps.len());
    for &p in &ps {
        let pe = PExponent::new(2, p)?;
        let res = solve_dirichlet(&pe, f, g, opts)?;
        let report = verify_c_alpha_norm(&res.u, f, &pe)?;
        solved.push((p, res, report));
    }
    let reference = solved.last().expect("non-empty").1.u.clone();
    let rows = solved
        .into_iter()
        .map(|(p, res, c_alpha)| SweepRow {
            p,
            iterations: res.iterations,
            converged: res.converged,
            final_residual: res.final_residual,
            distance: res.u.sup_distance_inside(&reference),
            c_alpha,
        })
        .collect();
    Ok(SweepTable { rows })
}

/// Grading exponent making `int_0^1 rho^{n eps - 1} d rho` non-singular after `rho = t^q`.
fn grading_exponent(n: u32, eps: f64) -> f64 {
    (2.0 / (n as f64 * eps)).clamp(2.0, 64.0)
}

/// Composite midpoint rule for `int_0^1 phi(rho) d rho` on graded nodes `rho = t^q`.
pub fn graded_midpoint(m: usize, q: f64, phi: impl Fn(f64) -> f64) -> f64 {
    let dt = 1.0 / m as f64;
    (0..m)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let rho = t.powf(q);
            phi(rho) * q * t.powf(q - 1.0) * dt
        })
        .sum()
}

/// `||g||_{L^n(B_1)}^n = |S^{n-1}| int_0^1 |g(rho)|^n rho^{n-1} d rho` for a radial `g`,
/// on graded nodes `rho = t^q`. The integrand is assembled in log form because
/// `|g|^n` overflows at the innermost nodes of a strongly graded mesh.
pub fn radial_ln_norm_pow(n: u32, m: usize, q: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let area = unit_sphere_area(n)?;
    let nf = n as f64;
    let dt = 1.0 / m as f64;
    let sum: f64 = (0..m)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let lt = t.ln();
            let gv = g(t.powf(q)).abs();
            if gv == 0.0 {
                return 0.0;
            }
            (nf * gv.ln() + (nf - 1.0) * q * lt + q.ln() + (q - 1.0) * lt).exp() * dt
        })
        .sum();
    Ok(area * sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRow {
    pub eps: f64,
    pub sup_u: f64,
    /// `||Delta_inf^N u_eps||_{L^n}^n` by quadrature.
    pub norm_pow: f64,
    /// `|B_1| eps^{n-1}`.
    pub norm_pow_exact: f64,
    pub rel_err: f64,
    /// `sup u_eps / ||Delta_inf^N u_eps||_{L^n}`.
    pub ratio: f64,
    /// Norms of the smoothed profiles for each entry of `deltas`.
    pub smoothed_norm_pow: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureTable {
    pub n: u32,
    pub m: usize,
    pub deltas: Vec<f64>,
    pub rows: Vec<FailureRow>,
    /// Least-squares slope of `log R` against `log eps`.
    pub slope: f64,
    /// The slope predicted by the leading-order scaling, `-(n-1)/n`.
    pub expected_slope: f64,
}

impl FailureTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "eps,sup_u,norm_pow,norm_pow_exact,rel_err,ratio")?;
        for d in &self.deltas {
            write!(w, ",smoothed_delta_{d}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{},{},{}",
                r.eps, r.sup_u, r.norm_pow, r.norm_pow_exact, r.rel_err, r.ratio
            )?;
            for s in &r.smoothed_norm_pow {
                write!(w, ",{s}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub const SMOOTHING_DELTAS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6];

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Ratio of `sup u_eps` to the `L^n` norm of its infinity Laplacian for the
/// family `u_eps = (1 - rho^{1+eps})/(1+eps)`.
pub fn classical_abp_failure(eps_list: &[f64], n: u32, m: usize) -> Result<FailureTable> {
    if eps_list.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidArgument("eps must lie in (0, 1)".into()));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("quadrature needs m >= 1".into()));
    }
    let vol = unit_ball_volume(n)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let q = grading_exponent(n, eps);
        let cusp = AnalyticFunction::CounterexampleCusp { eps };
        let norm_pow = radial_ln_norm_pow(n, m, q, |r| cusp.profile(r).expect("radial").d2v)?;
        let exact = vol * eps.powi(n as i32 - 1);
        let sup_u = 1.0 / (1.0 + eps);
        let smoothed = SMOOTHING_DELTAS
            .iter()
            .map(|&delta| {
                let s = AnalyticFunction::SmoothedCusp { eps, delta };
                radial_ln_norm_pow(n, m, q, |r| s.profile(r).expect("radial").d2v)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FailureRow {
            eps,
            sup_u,
            norm_pow,
            norm_pow_exact: exact,
            rel_err: (norm_pow - exact).abs() / exact,
            ratio: sup_u / norm_pow.powf(1.0 / n as f64),
            smoothed_norm_pow: smoothed,
        });
    }
    let slope = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
        least_squares_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(FailureTable {
        n,
        m,
        deltas: SMOOTHING_DELTAS.to_vec(),
        rows,
        slope,
        expected_slope: -((n - 1) as f64) / n as f64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessRow {
    pub eps: f64,
    /// `||Delta_inf^N w_eps||_inf` over the samples.
    pub plain: f64,
    pub level_integral: f64,
    pub level_integral_exact: f64,
    pub band: f64,
    pub lhs: f64,
    pub abp: EstimateReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SharpnessTable {
    pub m: usize,
    pub d: f64,
    pub rows: Vec<SharpnessRow>,
}

impl SharpnessTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eps,plain,level_integral,level_integral_exact,band,lhs,rhs,pass")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.eps, r.plain, r.level_integral, r.level_integral_exact, r.band, r.lhs, r.abp.rhs, r.abp.pass
            )?;
        }
        Ok(())
    }
}

/// For the caps `w_eps` on the unit disk: the level-set integral stays at 1/2
/// while `||Delta_inf^N w_eps||_inf = 1/eps` diverges.
pub fn sharper_estimate_demo(eps_list: &[f64], m: usize) -> Result<SharpnessTable> {
    if eps_list.iter().any(|&e| !(e > 0.0 && e <= 0.5)) {
        return Err(Error::InvalidArgument("eps must lie in (0, 1/2]".into()));
    }
    let grid = RadialGrid::new(2, 0.0, 1.0, m)?;
    let rho = grid.nodes();
    let pe = PExponent::infinite(2)?;
    let d = 2.0;
    let n_r = 2 * m / 10;
    let mask = vec![true; rho.len()];
    let mut rows = Vec::new();
    for &eps in eps_list {
        let cap = AnalyticFunction::Cap { eps };
        let u: Vec<f64> = rho.iter().map(|&r| cap.value([r, 0.0])).collect();
        let w: Vec<f64> = rho.iter().map(|&r| -cap.profile(r).expect("radial").d2v).collect();
        let plain = w.iter().copied().fold(0.0, f64::max);
        let sup = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lip = rho
            .windows(2)
            .zip(u.windows(2))
            .map(|(r, v)| (v[1] - v[0]).abs() / (r[1] - r[0]))
            .fold(0.0, f64::max);
        let band = default_band(grid.spacing() * lip, 0.0, sup, n_r);
        let level_integral = abp_level_integral(&w, &u, &mask, 0.0, sup, n_r, band);
        let abp = verify_abp_samples(AbpVariant::InfNormalized, &pe, d, &u, &w, &mask, 0.0, n_r, band)?;
        rows.push(SharpnessRow {
            eps,
            plain,
            level_integral,
            level_integral_exact: 0.5,
            band,
            lhs: abp.lhs,
            abp,
        });
    }
    Ok(SharpnessTable { m, d, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn graded_quadrature_is_exact_for_monomials() {
        // int_0^1 rho^{s} d rho = 1/(s+1)
        for s in [-0.9f64, -0.5, 0.0, 2.0] {
            let q = 2.0 / (s + 1.0);
            let v = graded_midpoint(1000, q.max(2.0), |r| r.powf(s));
            assert!((v - 1.0 / (s + 1.0)).abs() < 1e-5 * (1.0 / (s + 1.0)), "s={s}: {v}");
        }
    }

    #[test]
    fn norms_match_closed_form() {
        let t = classical_abp_failure(&[0.4, 0.2, 0.1, 0.05, 0.025], 2, 10_000).unwrap();
        for r in &t.rows {
            assert!(r.rel_err < 1e-6, "{r:?}");
            assert!((r.norm_pow_exact - PI * r.eps).abs() < 1e-14);
        }
        let t3 = classical_abp_failure(&[0.3], 3, 10_000).unwrap();
        assert!(t3.rows[0].rel_err < 1e-6);
    }

    #[test]
    fn ratio_quadruples_to_double() {
        // R(eps/4)/R(eps) = 2 (1+eps)/(1+eps/4) -> 2
        let eps = [0.4, 0.1, 0.025];
        let t = classical_abp_failure(&eps, 2, 10_000).unwrap();
        let r1 = t.rows[1].ratio / t.rows[0].ratio;
        let r2 = t.rows[2].ratio / t.rows[1].ratio;
        assert!((r1 - 2.0 * 1.4 / 1.1).abs() < 1e-5);
        assert!((r2 - 2.0 * 1.1 / 1.025).abs() < 1e-5);
        assert!(r2 - 2.0 < r1 - 2.0);
    }

    #[test]
    fn smoothed_norms_converge() {
        let t = classical_abp_failure(&[0.2], 2, 10_000).unwrap();
        let r = &t.rows[0];
        let errs: Vec<f64> = r.smoothed_norm_pow.iter().map(|s| (s - r.norm_pow).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        // the gap closes like delta^{2 eps}
        assert!(errs[4] / r.norm_pow < 2e-2, "{errs:?}");
    }

    #[test]
    fn failure_rejects_bad_eps() {
        assert!(classical_abp_failure(&[1.0], 2, 100).is_err());
        assert!(classical_abp_failure(&[0.0], 2, 100).is_err());
    }

    #[test]
    fn sharpness_examples() {
        let t = sharper_estimate_demo(&[0.5, 0.2, 0.1], 10_000).unwrap();
        for r in &t.rows {
            assert_eq!(r.plain, 1.0 / r.eps);
            assert!((r.level_integral - 0.5).abs() < 0.025, "{r:?}");
            assert!((r.lhs - (1.0 - r.eps / 2.0).powi(2)).abs() < 1e-12);
            assert!(r.abp.pass);
        }
        assert!(sharper_estimate_demo(&[0.6], 100).is_err());
    }

    #[test]
    fn sweep_single_and_ordering() {
        let g = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 1.0 / 8.0).unwrap());
        let f = ScalarField::constant(&g, 1.0);
        let z = ScalarField::constant(&g, 0.0);
        let opts = SolveOptions {
            tol: 1e-9,
            ..Default::default()
        };
        let single = p_sweep(&[Exponent::Infinite], &f, &z, &opts).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert_eq!(single.rows[0].distance, 0.0);
        let t = p_sweep(
            &[Exponent::Infinite, Exponent::Finite(5.0), Exponent::Finite(3.0)],
            &f,
            &z,
            &opts,
        )
        .unwrap();
        let ps: Vec<f64> = t.rows.iter().map(|r| r.p.as_f64()).collect();
        assert_eq!(ps, vec![3.0, 5.0, f64::INFINITY]);
        assert!(t.rows[0].distance >= t.rows[1].distance);
        assert!(t.rows.iter().all(|r| r.c_alpha.pass));
        assert!(p_sweep(&[Exponent::Finite(3.0)], &f, &z, &opts).is_err());
    }

    #[test]
    fn sweep_on_cone_is_flat() {
        let h = 1.0 / 16.0;
        let g = Arc::new(build_grid(Domain::annulus([0.0, 0.0], 0.5, 1.0), h).unwrap());
        let cone = ScalarField::from_fn(&g, |x| 1.0 - x[0].hypot(x[1]));
        let z = ScalarField::constant(&g, 0.0);
        let t = p_sweep(
            &[Exponent::Finite(3.0), Exponent::Finite(9.0), Exponent::Infinite],
            &z,
            &cone,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(t.all_converged());
        assert!(t.rows.iter().all(|r| r.distance <= 2.0 * h));
    }
}
