//! Closed-form test functions with exact derivatives.

use serde::Serialize;

use crate::grid::{dist, Point};
use crate::params::PExponent;

/// Closed-form functions used as manufactured solutions, comparison functions
/// and counterexamples. Radial kinds are described by a profile `v(rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticFunction {
    /// `height + a/(1-alpha) rho^{1-alpha} - (b/2) rho^2`, `rho = |x - center|`.
    Cusp {
        a: f64,
        b: f64,
        height: f64,
        center: Point,
        alpha: f64,
    },
    /// `1 - |x - center|`.
    Cone { center: Point },
    /// `(1 - rho^{1+eps})/(1+eps)`.
    CounterexampleCusp { eps: f64 },
    /// `((1+delta^2)^{(1+eps)/2} - (rho^2+delta^2)^{(1+eps)/2})/(1+eps)`.
    SmoothedCusp { eps: f64, delta: f64 },
    /// `1 - rho` for `rho > eps`, `1 - eps/2 - rho^2/(2 eps)` inside.
    Cap { eps: f64 },
    /// `<q x, x>/2 + <b, x> + c`.
    Quadratic { q: [[f64; 2]; 2], b: [f64; 2], c: f64 },
}

/// Value and first two radial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileJet {
    pub v: f64,
    pub dv: f64,
    pub d2v: f64,
}

/// Exact operator values at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactOperators {
    pub inf_lap: f64,
    pub lap: f64,
    pub p_lap_norm: f64,
    /// `None` for `p = inf`.
    pub p_lap_var: Option<f64>,
}

impl AnalyticFunction {
    /// Cusp with the Hölder defect of `pe`.
    pub fn cusp(a: f64, b: f64, height: f64, center: Point, pe: &PExponent) -> Self {
        AnalyticFunction::Cusp {
            a,
            b,
            height,
            center,
            alpha: pe.alpha(),
        }
    }

    pub fn cone(center: Point) -> Self {
        AnalyticFunction::Cone { center }
    }

    pub fn is_radial(&self) -> bool {
        !matches!(self, AnalyticFunction::Quadratic { .. })
    }

    pub fn center(&self) -> Point {
        match *self {
            AnalyticFunction::Cusp { center, .. } | AnalyticFunction::Cone { center } => center,
            _ => [0.0, 0.0],
        }
    }

    /// Radial profile jet at `rho > 0`; `None` for non-radial kinds.
    pub fn profile(&self, rho: f64) -> Option<ProfileJet> {
        let jet = match *self {
            AnalyticFunction::Cusp {
                a, b, height, alpha, ..
            } => {
                let s = rho.powf(-alpha);
                ProfileJet {
                    v: height + a / (1.0 - alpha) * rho * s - 0.5 * b * rho * rho,
                    dv: a * s - b * rho,
                    d2v: -alpha * a * s / rho - b,
                }
            }
            AnalyticFunction::Cone { .. } => ProfileJet {
                v: 1.0 - rho,
                dv: -1.0,
                d2v: 0.0,
            },
            AnalyticFunction::CounterexampleCusp { eps } => ProfileJet {
                v: (1.0 - rho.powf(1.0 + eps)) / (1.0 + eps),
                dv: -rho.powf(eps),
                d2v: -eps * rho.powf(eps - 1.0),
            },
            AnalyticFunction::SmoothedCusp { eps, delta } => {
                let s = rho * rho + delta * delta;
                let e = 0.5 * (1.0 + eps);
                ProfileJet {
                    v: ((1.0 + delta * delta).powf(e) - s.powf(e)) / (1.0 + eps),
                    dv: -rho * s.powf(0.5 * (eps - 1.0)),
                    d2v: -s.powf(0.5 * (eps - 3.0)) * (delta * delta + eps * rho * rho),
                }
            }
            AnalyticFunction::Cap { eps } => {
                if rho <= eps {
                    ProfileJet {
                        v: 1.0 - 0.5 * eps - rho * rho / (2.0 * eps),
                        dv: -rho / eps,
                        d2v: -1.0 / eps,
                    }
                } else {
                    ProfileJet {
                        v: 1.0 - rho,
                        dv: -1.0,
                        d2v: 0.0,
                    }
                }
            }
            AnalyticFunction::Quadratic { .. } => return None,
        };
        Some(jet)
    }

    /// Profile value at the center, where it is finite for every radial kind.
    fn center_value(&self) -> f64 {
        match *self {
            AnalyticFunction::Cusp { height, .. } => height,
            AnalyticFunction::Cone { .. } => 1.0,
            AnalyticFunction::CounterexampleCusp { eps } => 1.0 / (1.0 + eps),
            AnalyticFunction::SmoothedCusp { eps, delta } => {
                let e = 0.5 * (1.0 + eps);
                ((1.0 + delta * delta).powf(e) - (delta * delta).powf(e)) / (1.0 + eps)
            }
            AnalyticFunction::Cap { eps } => 1.0 - 0.5 * eps,
            AnalyticFunction::Quadratic { c, .. } => c,
        }
    }

    /// Second derivative of the profile at 0 for kinds that are C^2 there.
    fn smooth_center_curvature(&self) -> Option<f64> {
        match *self {
            AnalyticFunction::SmoothedCusp { eps, delta } => Some(-delta.powf(eps - 1.0)),
            AnalyticFunction::Cap { eps } => Some(-1.0 / eps),
            _ => None,
        }
    }

    pub fn value(&self, x: Point) -> f64 {
        if let AnalyticFunction::Quadratic { q, b, c } = *self {
            let qx = [q[0][0] * x[0] + q[0][1] * x[1], q[1][0] * x[0] + q[1][1] * x[1]];
            return 0.5 * (qx[0] * x[0] + qx[1] * x[1]) + b[0] * x[0] + b[1] * x[1] + c;
        }
        let rho = dist(x, self.center());
        if rho == 0.0 {
            self.center_value()
        } else {
            self.profile(rho).expect("radial kind").v
        }
    }

    pub fn gradient(&self, x: Point) -> Option<Point> {
        if let AnalyticFunction::Quadratic { q, b, .. } = *self {
            return Some([
                q[0][0] * x[0] + q[0][1] * x[1] + b[0],
                q[1][0] * x[0] + q[1][1] * x[1] + b[1],
            ]);
        }
        let c = self.center();
        let rho = dist(x, c);
        if rho == 0.0 {
            return self.smooth_center_curvature().map(|_| [0.0, 0.0]);
        }
        let jet = self.profile(rho)?;
        Some([jet.dv * (x[0] - c[0]) / rho, jet.dv * (x[1] - c[1]) / rho])
    }

    /// Cartesian Hessian `(v'/rho) I + (v'' - v'/rho) e e^T` for radial kinds.
    pub fn hessian(&self, x: Point) -> Option<[[f64; 2]; 2]> {
        if let AnalyticFunction::Quadratic { q, .. } = *self {
            return Some(q);
        }
        let c = self.center();
        let rho = dist(x, c);
        if rho == 0.0 {
            return self.smooth_center_curvature().map(|k| [[k, 0.0], [0.0, k]]);
        }
        let jet = self.profile(rho)?;
        let e = [(x[0] - c[0]) / rho, (x[1] - c[1]) / rho];
        let t = jet.dv / rho;
        let s = jet.d2v - t;
        Some([
            [t + s * e[0] * e[0], s * e[0] * e[1]],
            [s * e[1] * e[0], t + s * e[1] * e[1]],
        ])
    }

    /// Exact operator values in the plane at a non-critical point.
    pub fn exact_operators(&self, x: Point, pe: &PExponent) -> Option<ExactOperators> {
        let g = self.gradient(x)?;
        let hs = self.hessian(x)?;
        let gn = g[0].hypot(g[1]);
        if gn == 0.0 {
            return None;
        }
        let e = [g[0] / gn, g[1] / gn];
        let inf_lap = hs[0][0] * e[0] * e[0] + 2.0 * hs[0][1] * e[0] * e[1] + hs[1][1] * e[1] * e[1];
        let lap = hs[0][0] + hs[1][1];
        let (a, b) = pe.operator_weights();
        let p_lap_var = match pe.p() {
            crate::params::Exponent::Finite(p) => Some(gn.powf(p - 2.0) * (lap + (p - 2.0) * inf_lap)),
            crate::params::Exponent::Infinite => None,
        };
        Some(ExactOperators {
            inf_lap,
            lap,
            p_lap_norm: a * lap + b * inf_lap,
            p_lap_var,
        })
    }

    pub fn sup_value(&self) -> Option<f64> {
        match self {
            AnalyticFunction::Quadratic { .. } => None,
            AnalyticFunction::Cusp { .. } => None,
            _ => Some(self.center_value()),
        }
    }
}

/// Sufficient condition `A > B d^{1+alpha}` for the cusp gradient to stay
/// non-zero on a domain of diameter `d`.
pub fn cusp_gradient_nonvanishing(a: f64, b: f64, pe: &PExponent, d: f64) -> bool {
    a > b * d.powf(1.0 + pe.alpha())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pe(p: f64) -> PExponent {
        PExponent::finite(2, p).unwrap()
    }

    #[test]
    fn cusp_has_constant_normalized_operator() {
        for (n, p) in [(2u32, 3.0), (2, 5.0), (3, 4.0)] {
            let pe = PExponent::finite(n, p).unwrap();
            let v = AnalyticFunction::cusp(3.0, 1.5, 0.2, [0.0, 0.0], &pe);
            for rho in [0.1, 0.3, 0.7, 1.1] {
                let j = v.profile(rho).unwrap();
                let inf = j.d2v;
                let lap = j.d2v + (n as f64 - 1.0) * j.dv / rho;
                let (a, b) = pe.operator_weights();
                let norm = a * lap + b * inf;
                assert!((-norm - 1.5 / pe.c_p()).abs() < 1e-12, "n={n} p={p} rho={rho}");
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let fns = [
            AnalyticFunction::cusp(2.0, 1.0, 0.0, [0.1, -0.2], &pe(3.0)),
            AnalyticFunction::Cone { center: [0.0, 0.0] },
            AnalyticFunction::CounterexampleCusp { eps: 0.5 },
            AnalyticFunction::SmoothedCusp { eps: 0.3, delta: 0.2 },
            AnalyticFunction::Cap { eps: 0.4 },
        ];
        let x = [0.31, 0.22];
        let h = 1e-4;
        for f in fns {
            let hs = f.hessian(x).unwrap();
            let g = f.gradient(x).unwrap();
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd_g = (f.value(xp) - f.value(xm)) / (2.0 * h);
                assert!((fd_g - g[i]).abs() < 1e-6, "{f:?} grad {i}");
                let gp = f.gradient(xp).unwrap();
                let gm = f.gradient(xm).unwrap();
                for j in 0..2 {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd - hs[j][i]).abs() < 1e-5, "{f:?} hess {i}{j}: {fd} vs {}", hs[j][i]);
                }
            }
        }
    }

    #[test]
    fn counterexample_operator_value() {
        let u = AnalyticFunction::CounterexampleCusp { eps: 0.5 };
        let j = u.profile(0.25).unwrap();
        assert!((-j.d2v - 1.0).abs() < 1e-14);
        assert_eq!(u.sup_value(), Some(1.0 / 1.5));
    }

    #[test]
    fn cap_pieces() {
        let w = AnalyticFunction::Cap { eps: 0.2 };
        assert_eq!(w.profile(0.1).unwrap().d2v, -5.0);
        assert_eq!(w.profile(0.3).unwrap().d2v, 0.0);
        assert!((w.sup_value().unwrap() - 0.9).abs() < 1e-15);
        // continuity at rho = eps
        let a = w.profile(0.2).unwrap().v;
        let b = w.profile(0.2 + 1e-12).unwrap().v;
        assert!((a - b).abs() < 1e-11);
    }

    #[test]
    fn smoothed_cusp_tends_to_cusp() {
        let c = AnalyticFunction::CounterexampleCusp { eps: 0.3 };
        let s = AnalyticFunction::SmoothedCusp { eps: 0.3, delta: 1e-6 };
        for rho in [0.05, 0.4, 0.9] {
            let (a, b) = (c.profile(rho).unwrap(), s.profile(rho).unwrap());
            assert!((a.v - b.v).abs() < 1e-8);
            assert!((a.d2v - b.d2v).abs() < 1e-6);
        }
    }

    #[test]
    fn quadratic_exact_operators() {
        let q = AnalyticFunction::Quadratic {
            q: [[-1.0, 0.0], [0.0, -1.0]],
            b: [0.0, 0.0],
            c: 0.0,
        };
        let ops = q
            .exact_operators([1.0, 0.0], &PExponent::finite(2, 4.0).unwrap())
            .unwrap();
        assert_eq!(ops.lap, -2.0);
        assert_eq!(ops.inf_lap, -1.0);
        assert_eq!(ops.p_lap_norm, -1.0);
        assert_eq!(ops.p_lap_var, Some(-4.0));
    }

    #[test]
    fn gradient_condition() {
        let inf = PExponent::infinite(2).unwrap();
        assert!(cusp_gradient_nonvanishing(3.0, 1.0, &inf, 2.0));
        assert!(!cusp_gradient_nonvanishing(2.0, 1.0, &inf, 2.0));
        assert!(cusp_gradient_nonvanishing(5.0, 1.0, &pe(3.0), 2.0));
        assert!(!cusp_gradient_nonvanishing(2.8, 1.0, &pe(3.0), 2.0));
    }

    #[test]
    fn gradient_condition_keeps_gradient_nonzero() {
        let pe = pe(3.0);
        let (b, d): (f64, f64) = (1.0, 2.0);
        let a = 1.01 * b * d.powf(1.0 + pe.alpha());
        let v = AnalyticFunction::cusp(a, b, 0.0, [0.0, 0.0], &pe);
        for i in 1..=200 {
            let rho = d * i as f64 / 200.0;
            assert!(v.profile(rho).unwrap().dv > 0.0);
        }
    }
}
