//! Level curves and the Hessian decomposition along level sets.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dist, Point, ScalarField};
use crate::operators::AnalyticFunction;

#[derive(Debug, Clone, Serialize)]
pub struct LevelCurveIntegral {
    /// Total turning of the outer unit normal `-grad u / |grad u|` around the curve.
    pub turning: f64,
    /// `sum kappa |segment|` with the level-set curvature from finite differences.
    pub curvature_quadrature: f64,
    pub length: f64,
    pub n_segments: usize,
}

type Seg = (usize, usize);

/// Extracts `{u = r}` by marching squares and integrates its curvature.
///
/// Fails if the level set is empty, touches the edge of the classified
/// region, or has more than one component.
pub fn level_curvature_integral(u: &ScalarField, r: f64) -> Result<LevelCurveIntegral> {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let h = g.h();
    let v = u.values();
    let above = |k: usize| v[k] >= r;
    // edge ids: 2k for (i,j)-(i+1,j), 2k+1 for (i,j)-(i,j+1)
    let mut points: HashMap<usize, Point> = HashMap::new();
    let mut segs: Vec<Seg> = Vec::new();
    let mut crossing = |e: usize, a: usize, b: usize| -> usize {
        points.entry(e).or_insert_with(|| {
            let (xa, xb) = (g.coords(a), g.coords(b));
            let t = (r - v[a]) / (v[b] - v[a]);
            [xa[0] + t * (xb[0] - xa[0]), xa[1] + t * (xb[1] - xa[1])]
        });
        e
    };
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let k00 = g.index(i, j);
            let k10 = g.index(i + 1, j);
            let k01 = g.index(i, j + 1);
            let k11 = g.index(i + 1, j + 1);
            let corners = [k00, k10, k11, k01];
            let inside: Vec<bool> = corners.iter().map(|&k| g.is_classified(k)).collect();
            let n_above = corners.iter().filter(|&&k| g.is_classified(k) && above(k)).count();
            if !inside.iter().all(|&b| b) {
                if n_above > 0 && corners.iter().any(|&k| g.is_classified(k) && !above(k)) {
                    return Err(Error::LevelSet(format!("level {r} reaches the edge of the domain")));
                }
                continue;
            }
            if n_above == 0 || n_above == 4 {
                continue;
            }
            // edges in counterclockwise order: bottom, right, top, left
            let edges = [
                (2 * k00, k00, k10),
                (2 * k10 + 1, k10, k11),
                (2 * k01, k01, k11),
                (2 * k00 + 1, k00, k01),
            ];
            let cut: Vec<usize> = (0..4)
                .filter(|&e| above(corners[e]) != above(corners[(e + 1) % 4]))
                .collect();
            if cut.len() == 2 {
                let a = crossing(edges[cut[0]].0, edges[cut[0]].1, edges[cut[0]].2);
                let b = crossing(edges[cut[1]].0, edges[cut[1]].1, edges[cut[1]].2);
                segs.push((a, b));
            } else {
                // saddle: decide by the cell mean
                let mean = corners.iter().map(|&k| v[k]).sum::<f64>() / 4.0;
                let ids: Vec<usize> = (0..4).map(|e| crossing(edges[e].0, edges[e].1, edges[e].2)).collect();
                let center_above = mean >= r;
                if center_above == above(k00) {
                    segs.push((ids[0], ids[1]));
                    segs.push((ids[2], ids[3]));
                } else {
                    segs.push((ids[3], ids[0]));
                    segs.push((ids[1], ids[2]));
                }
            }
        }
    }
    if segs.is_empty() {
        return Err(Error::LevelSet(format!("level set {{u = {r}}} is empty")));
    }
    let loop_ids = chain(&segs)?;
    let pts: Vec<Point> = loop_ids.iter().map(|e| points[e]).collect();
    let m = pts.len();
    if m < 3 {
        return Err(Error::LevelSet("degenerate level curve".into()));
    }
    let mut normals = Vec::with_capacity(m);
    let mut curv = 0.0;
    let mut length = 0.0;
    for s in 0..m {
        let (a, b) = (pts[s], pts[(s + 1) % m]);
        let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        let jet =
            bilinear_jet(u, mid, h).ok_or_else(|| Error::LevelSet("curve leaves the derivative stencil".into()))?;
        let gn = jet.0[0].hypot(jet.0[1]);
        if gn == 0.0 {
            return Err(Error::LevelSet("critical point on the level curve".into()));
        }
        normals.push((-jet.0[1]).atan2(-jet.0[0]));
        let len = dist(a, b);
        length += len;
        curv += jet.1 * len;
    }
    let mut turning = 0.0;
    for s in 0..m {
        let mut d = normals[(s + 1) % m] - normals[s];
        while d > PI {
            d -= 2.0 * PI;
        }
        while d <= -PI {
            d += 2.0 * PI;
        }
        turning += d;
    }
    Ok(LevelCurveIntegral {
        turning: turning.abs(),
        curvature_quadrature: curv.abs(),
        length,
        n_segments: m,
    })
}

/// Orders segments into a single closed chain of edge ids.
fn chain(segs: &[Seg]) -> Result<Vec<usize>> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segs.iter().enumerate() {
        adj.entry(a).or_default().push(s);
        adj.entry(b).or_default().push(s);
    }
    if adj.values().any(|v| v.len() != 2) {
        return Err(Error::LevelSet("level curve is open".into()));
    }
    let mut used = vec![false; segs.len()];
    let mut order = vec![segs[0].0];
    let mut cur = segs[0].1;
    used[0] = true;
    while cur != order[0] {
        order.push(cur);
        let next = adj[&cur].iter().copied().find(|&s| !used[s]);
        let Some(s) = next else {
            return Err(Error::LevelSet("level curve is open".into()));
        };
        used[s] = true;
        cur = if segs[s].0 == cur { segs[s].1 } else { segs[s].0 };
    }
    if used.iter().any(|&u| !u) {
        return Err(Error::LevelSet("level set has several components".into()));
    }
    Ok(order)
}

/// Gradient and level-set curvature `-div(grad u / |grad u|)` at `x`, bilinearly
/// interpolated from central differences at the four surrounding nodes.
fn bilinear_jet(u: &ScalarField, x: Point, h: f64) -> Option<(Point, f64)> {
    let g = u.grid();
    let o = g.coords(g.index(0, 0));
    let fi = (x[0] - o[0]) / h;
    let fj = (x[1] - o[1]) / h;
    let (i, j) = (fi.floor() as isize, fj.floor() as isize);
    let (tx, ty) = (fi - i as f64, fj - j as f64);
    let mut grad = [0.0; 2];
    let mut kappa = 0.0;
    for (di, dj, w) in [
        (0, 0, (1.0 - tx) * (1.0 - ty)),
        (1, 0, tx * (1.0 - ty)),
        (0, 1, (1.0 - tx) * ty),
        (1, 1, tx * ty),
    ] {
        let (ii, jj) = (i + di, j + dj);
        if ii < 0 || jj < 0 || ii as usize >= g.nx() || jj as usize >= g.ny() {
            return None;
        }
        let k = g.index(ii as usize, jj as usize);
        let (gr, ka) = nodal_jet(u, k, h)?;
        grad[0] += w * gr[0];
        grad[1] += w * gr[1];
        kappa += w * ka;
    }
    Some((grad, kappa))
}

fn nodal_jet(u: &ScalarField, k: usize, h: f64) -> Option<(Point, f64)> {
    let g = u.grid();
    let at = |di: i64, dj: i64| -> Option<f64> {
        let q = g.offset(k, di, dj)?;
        g.is_classified(q).then(|| u.get(q))
    };
    let c = at(0, 0)?;
    let (e, w, n, s) = (at(1, 0)?, at(-1, 0)?, at(0, 1)?, at(0, -1)?);
    let (ne, nw, se, sw) = (at(1, 1)?, at(-1, 1)?, at(1, -1)?, at(-1, -1)?);
    let ux = (e - w) / (2.0 * h);
    let uy = (n - s) / (2.0 * h);
    let uxx = (e - 2.0 * c + w) / (h * h);
    let uyy = (n - 2.0 * c + s) / (h * h);
    let uxy = (ne - nw - se + sw) / (4.0 * h * h);
    let gn2 = ux * ux + uy * uy;
    if gn2 == 0.0 {
        return Some(([0.0, 0.0], 0.0));
    }
    let kappa = -(uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / gn2.powf(1.5);
    Some(([ux, uy], kappa))
}

/// Max-abs entry of `-D^2 w` assembled from the level-set decomposition
/// `|grad w| kappa tau (x) tau - d_{nu tau} w (tau (x) nu + nu (x) tau) - Delta_inf^N w nu (x) nu`
/// minus the analytic `-D^2 w`, with `nu = -grad w / |grad w|`.
///
/// Supports radial kinds and isotropic quadratics, whose level sets are circles
/// with curvature `1/rho`.
pub fn hessian_decomposition_check(w: &AnalyticFunction, x: Point) -> Result<f64> {
    let (center, dv, d2v) = match *w {
        AnalyticFunction::Quadratic { q, b, .. } => {
            let lam = q[0][0];
            if q[0][1] != 0.0 || q[1][0] != 0.0 || q[1][1] != lam || lam == 0.0 {
                return Err(Error::InvalidArgument(
                    "decomposition check needs circular level sets".into(),
                ));
            }
            let c = [-b[0] / lam, -b[1] / lam];
            (c, lam * dist(x, c), lam)
        }
        _ if w.is_radial() => {
            let c = w.center();
            let rho = dist(x, c);
            if rho == 0.0 {
                return Err(Error::InvalidArgument("gradient vanishes at the center".into()));
            }
            let jet = w.profile(rho).expect("radial");
            (c, jet.dv, jet.d2v)
        }
        _ => unreachable!(),
    };
    let rho = dist(x, center);
    if rho == 0.0 || dv == 0.0 {
        return Err(Error::InvalidArgument("gradient vanishes at x".into()));
    }
    let e = [(x[0] - center[0]) / rho, (x[1] - center[1]) / rho];
    let nu = if dv < 0.0 { e } else { [-e[0], -e[1]] };
    let tau = [-nu[1], nu[0]];
    let grad_norm = dv.abs();
    // level circles curve towards the center; signed with respect to nu
    let kappa = if dv < 0.0 { 1.0 / rho } else { -1.0 / rho };
    let mixed = 0.0;
    let inf_lap = d2v;
    let mut assembled = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            assembled[a][b] = grad_norm * kappa * tau[a] * tau[b]
                - mixed * (tau[a] * nu[b] + nu[a] * tau[b])
                - inf_lap * nu[a] * nu[b];
        }
    }
    let hs = w
        .hessian(x)
        .ok_or_else(|| Error::InvalidArgument("no Hessian at x".into()))?;
    let mut res: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            res = res.max((assembled[a][b] + hs[a][b]).abs());
        }
    }
    Ok(res)
}
