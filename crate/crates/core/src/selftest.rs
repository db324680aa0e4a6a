//! Fast closed-form checks run by `abplab selftest`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::envelope::{
    abp_level_integral, concave_envelope, hessian_decomposition_check, level_band_sup, level_curvature_integral,
    EnvelopeOptions,
};
use crate::estimates::{holder_seminorm, NodeSelection};
use crate::experiments::{classical_abp_failure, sharper_estimate_demo};
use crate::grid::{build_grid, Domain, ScalarField};
use crate::operators::{inf_laplacian_wide, p_laplacian_normalized, AnalyticFunction, Stencil};
use crate::params::{classical_abp_factor, PExponent};
use crate::solver::{residual, solve_dirichlet, SolveOptions};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.checks.push(Check {
            name: name.into(),
            pass: (got - want).abs() <= tol,
            detail: format!("got {got}, expected {want} (tol {tol})"),
        });
    }

    fn truth(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            pass: ok,
            detail,
        });
    }

    fn run(&mut self, name: &str, f: impl FnOnce(&mut Suite) -> Result<()>) {
        if let Err(e) = f(self) {
            self.truth(name, false, format!("error: {e}"));
        }
    }
}

pub fn run() -> SelftestReport {
    let mut s = Suite { checks: Vec::new() };

    s.run("constants", |s| {
        let a = PExponent::finite(2, 3.0)?;
        s.close("alpha(2,3)", a.alpha(), 0.5, 1e-15);
        s.close("c_p(2,3)", a.c_p(), 1.0, 1e-15);
        s.close("c_tilde(2,3)", a.c_tilde(), 1.5, 1e-15);
        let b = PExponent::finite(3, 4.0)?;
        s.close("alpha(3,4)", b.alpha(), 2.0 / 3.0, 1e-15);
        s.close("c_p(3,4)", b.c_p(), 0.8, 1e-15);
        let i = PExponent::infinite(2)?;
        s.close("alpha(2,inf)", i.alpha(), 0.0, 0.0);
        s.close("c_p(2,inf)", i.c_p(), 1.0, 0.0);
        s.close(
            "classical factor (2,4,d=2)",
            classical_abp_factor(&PExponent::finite(2, 4.0)?, 2.0)?,
            4.0 / (3.0 * PI).sqrt(),
            1e-12,
        );
        s.truth("p <= n rejected", PExponent::finite(2, 2.0).is_err(), String::new());
        Ok(())
    });

    s.run("grid", |s| {
        let g = build_grid(Domain::ball([0.0, 0.0], 1.0), 0.5)?;
        s.close("ball h=1/2 inside nodes", g.inside().len() as f64, 9.0, 0.0);
        let sq = build_grid(Domain::rectangle([0.0, 0.0], [1.0, 1.0]), 0.25)?;
        s.close("unit square inside nodes", sq.inside().len() as f64, 9.0, 0.0);
        s.close("unit square diameter", sq.diameter(), 2f64.sqrt(), 1e-12);
        Ok(())
    });

    s.run("operators", |s| {
        let g = Arc::new(build_grid(Domain::rectangle([0.0, -1.0], [2.0, 1.0]), 1.0 / 16.0)?);
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0]);
        let k = g.nearest_inside([1.0, 0.0]);
        s.close(
            "inf-Laplacian of x1^2 at (1,0)",
            inf_laplacian_wide(&u, &Stencil::new(4)).get(k),
            2.0,
            1e-9,
        );
        let b = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 1.0 / 16.0)?);
        let para = ScalarField::from_fn(&b, |x| -0.5 * (x[0] * x[0] + x[1] * x[1]));
        let pe = PExponent::finite(2, 3.0)?;
        let l = p_laplacian_normalized(&para, &pe, &Stencil::new(1))?;
        s.close(
            "normalized p-Laplacian of -|x|^2/2",
            l.get(b.nearest_inside([0.25, 0.0])),
            -1.0,
            1e-9,
        );
        let cusp = AnalyticFunction::cusp(3.0, 1.0, 0.0, [0.0, 0.0], &pe);
        let ex = cusp.exact_operators([0.3, 0.4], &pe).expect("non-critical");
        s.close("cusp operator equals -B/C_p", ex.p_lap_norm, -1.0 / pe.c_p(), 1e-12);
        let ce = AnalyticFunction::CounterexampleCusp { eps: 0.5 };
        let ex = ce
            .exact_operators([0.25, 0.0], &PExponent::infinite(2)?)
            .expect("non-critical");
        s.close("counterexample -inf-Laplacian at rho=1/4", -ex.inf_lap, 1.0, 1e-12);
        Ok(())
    });

    s.run("solver", |s| {
        let g = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 0.125)?);
        let c = ScalarField::constant(&g, 0.7);
        let z = ScalarField::constant(&g, 0.0);
        let pe = PExponent::finite(2, 3.0)?;
        let r = solve_dirichlet(&pe, &z, &c, &SolveOptions::default())?;
        s.truth(
            "constants are fixed points",
            r.iterations == 0 && g.classified().all(|k| r.u.get(k) == 0.7),
            format!("{} iterations", r.iterations),
        );
        let one = ScalarField::constant(&g, 1.0);
        s.close("residual of 0 with f = 1", residual(&z, &pe, &one, 2), 1.0, 0.0);
        Ok(())
    });

    s.run("envelope", |s| {
        let g = Arc::new(build_grid(Domain::rectangle([-1.0, -1.0], [1.0, 1.0]), 0.125)?);
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0] + x[1] * x[1]);
        let env = concave_envelope(&u, &EnvelopeOptions::default())?;
        s.close(
            "envelope of |x|^2 at the origin",
            env.gamma.get(g.nearest_inside([0.0, 0.0])),
            2.0,
            1e-12,
        );
        let eps = 0.2;
        let cap = AnalyticFunction::Cap { eps };
        let rho: Vec<f64> = (0..=10_000).map(|i| i as f64 / 10_000.0).collect();
        let uu: Vec<f64> = rho.iter().map(|&r| cap.value([r, 0.0])).collect();
        let w: Vec<f64> = rho.iter().map(|&r| if r <= eps { 1.0 / eps } else { 0.0 }).collect();
        let mask = vec![true; rho.len()];
        s.close(
            "band sup above the cap",
            level_band_sup(&w, &uu, &mask, 0.95, 1e-3),
            0.0,
            0.0,
        );
        s.close(
            "cap level integral",
            abp_level_integral(&w, &uu, &mask, 0.0, 0.9, 2000, 2.5e-4),
            0.5,
            5e-3,
        );
        let b = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 1.0 / 32.0)?);
        let para = ScalarField::from_fn(&b, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        s.close(
            "Gauss-Bonnet turning",
            level_curvature_integral(&para, 0.5)?.turning,
            2.0 * PI,
            0.05,
        );
        let q = AnalyticFunction::Quadratic {
            q: [[-2.0, 0.0], [0.0, -2.0]],
            b: [0.0, 0.0],
            c: 1.0,
        };
        s.close(
            "Hessian decomposition (paraboloid)",
            hessian_decomposition_check(&q, [0.5, 0.0])?,
            0.0,
            1e-10,
        );
        s.close(
            "Hessian decomposition (cap)",
            hessian_decomposition_check(&AnalyticFunction::Cap { eps: 0.3 }, [0.15, 0.0])?,
            0.0,
            1e-10,
        );
        s.close(
            "Hessian decomposition (cone)",
            hessian_decomposition_check(&AnalyticFunction::cone([0.0, 0.0]), [0.3, 0.4])?,
            0.0,
            1e-10,
        );
        Ok(())
    });

    s.run("estimates", |s| {
        let g = Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), 1.0 / 16.0)?);
        let cone = ScalarField::from_fn(&g, |x| 1.0 - x[0].hypot(x[1]));
        s.close(
            "Lipschitz seminorm of the cone",
            holder_seminorm(&cone, 1.0, NodeSelection::Inside).value,
            1.0,
            1e-12,
        );
        s.close(
            "seminorm of a constant",
            holder_seminorm(&ScalarField::constant(&g, 2.0), 0.5, NodeSelection::All).value,
            0.0,
            0.0,
        );
        Ok(())
    });

    s.run("experiments", |s| {
        let t = classical_abp_failure(&[0.2], 2, 10_000)?;
        s.close(
            "||inf-Laplacian u_eps||^2 = pi eps",
            t.rows[0].norm_pow,
            PI * 0.2,
            1e-6 * PI * 0.2,
        );
        let d = sharper_estimate_demo(&[0.2], 10_000)?;
        s.close("plain sup norm of cap operator", d.rows[0].plain, 5.0, 0.0);
        s.close("cap LHS", d.rows[0].lhs, 0.81, 1e-12);
        s.truth(
            "cap level-set estimate",
            d.rows[0].abp.pass,
            format!("slack {}", d.rows[0].abp.slack),
        );
        Ok(())
    });

    SelftestReport { checks: s.checks }
}

#[cfg(test)]
mod tests {
    #[test]
    fn selftest_passes() {
        let r = super::run();
        let failed: Vec<_> = r.checks.iter().filter(|c| !c.pass).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(r.checks.len() > 25);
    }
}
