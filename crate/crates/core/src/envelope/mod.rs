//! Concave envelope, upper contact set, and level-set functionals.

mod geometry;

pub use geometry::{hessian_decomposition_check, level_curvature_integral, LevelCurveIntegral};

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{write_columns_csv, Grid2D, ScalarField};

#[derive(Debug, Clone, Default, Serialize)]
pub struct EnvelopeOptions {
    /// Slopes per axis; `None` sizes the grid so the slope error stays below `h * Lip`.
    pub n_slopes: Option<usize>,
    /// Half-width `S` of the slope box; `None` uses `1.5 * Lip`.
    pub slope_bound: Option<f64>,
    /// Contact tolerance; `None` uses `2 h Lip`.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub gamma: ScalarField,
    /// Dense mask, true at inside nodes where `gamma - u <= tau`.
    pub contact: Vec<bool>,
    pub tau: f64,
    pub slope_bound: f64,
    pub n_slopes: usize,
    pub lipschitz: f64,
}

impl EnvelopeResult {
    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|&&c| c).count()
    }

    /// Writes `x,y,u,gamma,contact` rows.
    pub fn write_csv<W: Write>(&self, u: &ScalarField, w: W) -> Result<()> {
        let c: Vec<f64> = self.contact.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        write_columns_csv(
            w,
            self.gamma.grid(),
            &["u", "gamma", "contact"],
            &[u.values(), self.gamma.values(), &c],
        )
    }
}

/// Largest difference quotient over pairs of classified nodes at Chebyshev distance 1.
pub fn discrete_lipschitz(u: &ScalarField) -> f64 {
    let g = u.grid();
    let h = g.h();
    let diag = h * std::f64::consts::SQRT_2;
    g.classified()
        .map(|k| {
            let mut m: f64 = 0.0;
            for (di, dj, d) in [(1, 0, h), (0, 1, h), (1, 1, diag), (-1, 1, diag)] {
                if let Some(q) = g.offset(k, di, dj).filter(|&q| g.is_classified(q)) {
                    m = m.max((u.get(q) - u.get(k)).abs() / d);
                }
            }
            m
        })
        .fold(0.0, f64::max)
}

fn auto_slopes(grid: &Grid2D) -> usize {
    (2.2 * grid.diameter() / grid.h()).ceil() as usize + 1
}

fn odd_at_least(n: usize, min: usize) -> usize {
    let n = n.max(min);
    n | 1
}

/// Slope-grid biconjugate
/// `Gamma(x) = min_s [ max_y (u(y) - <s, y>) + <s, x> ]`
/// over classified nodes `y`, evaluated at classified nodes `x`.
///
/// The slope count is forced odd so that the zero slope is always present.
pub fn concave_envelope(u: &ScalarField, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    let grid = Arc::clone(u.grid());
    if let Some(k) = grid.classified().find(|&k| !u.get(k).is_finite()) {
        return Err(Error::Envelope(format!("u is not finite at node {k}")));
    }
    let lip = discrete_lipschitz(u);
    let s = match opts.slope_bound {
        Some(s) if s >= lip && s.is_finite() => s,
        Some(s) if s.is_nan() || s < 0.0 => return Err(Error::Envelope(format!("invalid slope bound {s}"))),
        _ => 1.5 * lip,
    };
    let mut n = odd_at_least(opts.n_slopes.unwrap_or_else(|| auto_slopes(&grid)), 3);
    let tau = opts.tau.unwrap_or(2.0 * grid.h() * lip);
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Envelope(format!("invalid contact tolerance {tau}")));
    }
    for attempt in 0..2 {
        let gamma = biconjugate(&grid, u.values(), s, n);
        let below = grid
            .classified()
            .find(|&k| gamma[k] < u.get(k) - 1e-12 * u.get(k).abs().max(1.0));
        if below.is_none() {
            let mut contact = vec![false; grid.len()];
            for &k in grid.inside() {
                contact[k] = gamma[k] - u.get(k) <= tau;
            }
            return Ok(EnvelopeResult {
                gamma: ScalarField::from_values_unchecked(&grid, gamma),
                contact,
                tau,
                slope_bound: s,
                n_slopes: n,
                lipschitz: lip,
            });
        }
        if attempt == 0 {
            n = odd_at_least(2 * n, 3);
        }
    }
    Err(Error::Envelope(format!(
        "envelope fell below u with {n} slopes per axis; slope grid too coarse"
    )))
}

/// Separable evaluation of the biconjugate: rows, then slope pairs, then columns.
fn biconjugate(grid: &Grid2D, vals: &[f64], s: f64, n: usize) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let slopes: Vec<f64> = (0..n)
        .map(|a| {
            if n == 1 {
                0.0
            } else {
                -s + 2.0 * s * a as f64 / (n - 1) as f64
            }
        })
        .collect();
    let xs: Vec<f64> = (0..nx).map(|i| grid.coords(grid.index(i, 0))[0]).collect();
    let ys: Vec<f64> = (0..ny).map(|j| grid.coords(grid.index(0, j))[1]).collect();
    let data = |i: usize, j: usize| {
        let k = grid.index(i, j);
        if grid.is_classified(k) {
            Some(vals[k])
        } else {
            None
        }
    };
    // row[j][a] = max_i (u(i,j) - s_a x_i)
    let row: Vec<f64> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|j| {
            let pts: Vec<(f64, f64)> = (0..nx).filter_map(|i| data(i, j).map(|v| (xs[i], v))).collect();
            slopes
                .iter()
                .map(move |&sa| pts.iter().map(|&(x, v)| v - sa * x).fold(f64::NEG_INFINITY, f64::max))
                .collect::<Vec<_>>()
        })
        .collect();
    // conj[a][b] = max_j (row[j][a] - s_b y_j)
    let conj: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let row = &row;
            let ys = &ys;
            slopes.iter().map(move |&sb| {
                (0..ny)
                    .map(|j| row[j * n + a] - sb * ys[j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
        })
        .collect();
    // col[i][b] = min_a (s_a x_i + conj[a][b])
    let col: Vec<f64> = (0..nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = xs[i];
            let conj = &conj;
            let slopes = &slopes;
            (0..n).map(move |b| {
                slopes
                    .iter()
                    .enumerate()
                    .map(|(a, &sa)| sa * x + conj[a * n + b])
                    .fold(f64::INFINITY, f64::min)
            })
        })
        .collect();
    let mut gamma = vec![f64::NAN; grid.len()];
    let out: Vec<(usize, f64)> = grid
        .classified()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&k| {
            let (i, j) = grid.ij(k);
            let y = ys[j];
            let v = slopes
                .iter()
                .enumerate()
                .map(|(b, &sb)| sb * y + col[i * n + b])
                .fold(f64::INFINITY, f64::min);
            (k, v)
        })
        .collect();
    for (k, v) in out {
        gamma[k] = v;
    }
    gamma
}

/// Sup of `w` over entries with `mask` set and `|u^+ - r| <= band`; 0 when no entry qualifies.
pub fn level_band_sup(w: &[f64], u: &[f64], mask: &[bool], r: f64, band: f64) -> f64 {
    w.iter()
        .zip(u)
        .zip(mask)
        .filter(|&((_, &uu), &m)| m && (uu.max(0.0) - r).abs() <= band)
        .map(|((&ww, _), _)| ww)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .unwrap_or(0.0)
}

/// Midpoint rule for `int_{r_lo}^{r_hi} level_band_sup(r) dr` with `n_r` cells.
pub fn abp_level_integral(w: &[f64], u: &[f64], mask: &[bool], r_lo: f64, r_hi: f64, n_r: usize, band: f64) -> f64 {
    if r_hi <= r_lo || n_r == 0 {
        return 0.0;
    }
    let dr = (r_hi - r_lo) / n_r as f64;
    (0..n_r)
        .map(|i| level_band_sup(w, u, mask, r_lo + (i as f64 + 0.5) * dr, band) * dr)
        .sum()
}

/// `max(h Lip, (r_hi - r_lo) / (2 n_r))`, so adjacent bands tile the value range.
pub fn default_band(h_lip: f64, r_lo: f64, r_hi: f64, n_r: usize) -> f64 {
    h_lip.max((r_hi - r_lo) / (2.0 * n_r.max(1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use crate::operators::AnalyticFunction;
    use proptest::prelude::*;

    fn ball(h: f64) -> Arc<Grid2D> {
        Arc::new(build_grid(Domain::ball([0.0, 0.0], 1.0), h).unwrap())
    }

    /// Direct minimum over affine majorants with slopes from the same grid.
    fn brute_force(u: &ScalarField, s: f64, n: usize) -> Vec<f64> {
        let g = u.grid();
        let pts: Vec<_> = g.classified().map(|k| (g.coords(k), u.get(k))).collect();
        let slopes: Vec<f64> = (0..n).map(|a| -s + 2.0 * s * a as f64 / (n - 1) as f64).collect();
        let mut out = vec![f64::NAN; g.len()];
        for k in g.classified() {
            let x = g.coords(k);
            let mut best = f64::INFINITY;
            for &sa in &slopes {
                for &sb in &slopes {
                    let c = pts
                        .iter()
                        .map(|&(y, v)| v - sa * y[0] - sb * y[1])
                        .fold(f64::NEG_INFINITY, f64::max);
                    best = best.min(c + sa * x[0] + sb * x[1]);
                }
            }
            out[k] = best;
        }
        out
    }

    #[test]
    fn separable_transform_matches_brute_force() {
        let g = Arc::new(build_grid(Domain::annulus([0.1, 0.0], 0.3, 1.0), 0.2).unwrap());
        let u = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let opts = EnvelopeOptions {
            n_slopes: Some(15),
            slope_bound: Some(4.0),
            tau: None,
        };
        let env = concave_envelope(&u, &opts).unwrap();
        let bf = brute_force(&u, 4.0, 15);
        for k in g.classified() {
            assert!((env.gamma.get(k) - bf[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn squared_norm_on_square() {
        let g = Arc::new(build_grid(Domain::rectangle([-1.0, -1.0], [1.0, 1.0]), 0.125).unwrap());
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0] + x[1] * x[1]);
        let env = concave_envelope(&u, &EnvelopeOptions::default()).unwrap();
        let k = g.nearest_inside([0.0, 0.0]);
        assert_eq!(g.coords(k), [0.0, 0.0]);
        assert!((env.gamma.get(k) - 2.0).abs() < 1e-12, "{}", env.gamma.get(k));
        assert_eq!(brute_force(&u, env.slope_bound, 9)[k], 2.0);
    }

    #[test]
    fn concave_inputs_are_their_own_envelope() {
        let g = ball(1.0 / 32.0);
        for f in [AnalyticFunction::cone([0.0, 0.0]), AnalyticFunction::Cap { eps: 0.3 }] {
            let u = ScalarField::from_fn(&g, |x| f.value(x));
            let env = concave_envelope(&u, &EnvelopeOptions::default()).unwrap();
            let err = g.classified().map(|k| env.gamma.get(k) - u.get(k)).fold(0.0, f64::max);
            assert!(err <= env.tau, "{f:?}: {err} > {}", env.tau);
            assert_eq!(env.contact_count(), g.inside().len());
        }
    }

    #[test]
    fn contact_set_of_bump_pair_excludes_valley() {
        let g = ball(1.0 / 16.0);
        let u = ScalarField::from_fn(&g, |x| {
            let a = (-20.0 * ((x[0] - 0.4).powi(2) + x[1] * x[1])).exp();
            let b = (-20.0 * ((x[0] + 0.4).powi(2) + x[1] * x[1])).exp();
            a + b
        });
        let env = concave_envelope(&u, &EnvelopeOptions::default()).unwrap();
        let k = g.nearest_inside([0.0, 0.0]);
        assert!(!env.contact[k]);
        assert!(env.contact[g.nearest_inside([0.4, 0.0])]);
    }

    #[test]
    fn envelope_rejects_nan_and_bad_options() {
        let g = ball(0.25);
        let mut u = ScalarField::constant(&g, 1.0);
        assert!(concave_envelope(
            &u,
            &EnvelopeOptions {
                tau: Some(-1.0),
                ..Default::default()
            }
        )
        .is_err());
        u.values_mut()[g.inside()[0]] = f64::NAN;
        assert!(concave_envelope(&u, &EnvelopeOptions::default()).is_err());
    }

    #[test]
    fn slope_bound_is_raised_to_lipschitz() {
        let g = ball(0.125);
        let u = ScalarField::from_fn(&g, |x| 3.0 * x[0]);
        let env = concave_envelope(
            &u,
            &EnvelopeOptions {
                slope_bound: Some(0.1),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(env.slope_bound >= env.lipschitz);
        assert!((env.lipschitz - 3.0).abs() < 1e-12);
    }

    fn field_strategy() -> impl Strategy<Value = (Vec<f64>, f64, f64)> {
        (prop::collection::vec(-1.0f64..1.0, 9), -2.0f64..2.0, 0.1f64..3.0)
    }

    fn sample(g: &Arc<Grid2D>, c: &[f64]) -> ScalarField {
        ScalarField::from_fn(g, |x| {
            c[0] + c[1] * x[0]
                + c[2] * x[1]
                + c[3] * x[0] * x[0]
                + c[4] * x[1] * x[1]
                + c[5] * x[0] * x[1]
                + c[6] * (3.0 * x[0]).sin()
                + c[7] * (2.0 * x[1]).cos()
                + c[8] * (x[0] * x[1] * 4.0).sin()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn envelope_invariants((c, shift, lambda) in field_strategy()) {
            let g = ball(0.125);
            let u = sample(&g, &c);
            let opts = EnvelopeOptions { n_slopes: Some(41), slope_bound: Some(12.0), tau: None };
            let env = concave_envelope(&u, &opts).unwrap();
            for k in g.classified() {
                prop_assert!(env.gamma.get(k) >= u.get(k) - 1e-12);
            }
            // idempotence
            let again = concave_envelope(&env.gamma, &opts).unwrap();
            for k in g.classified() {
                prop_assert!((again.gamma.get(k) - env.gamma.get(k)).abs() < 1e-10);
            }
            // translation in value
            let shifted = concave_envelope(&u.map(|v| v + shift), &opts).unwrap();
            for k in g.classified() {
                prop_assert!((shifted.gamma.get(k) - env.gamma.get(k) - shift).abs() < 1e-10);
            }
            // positive homogeneity with the slope box scaled alongside
            let scaled_opts = EnvelopeOptions { slope_bound: Some(12.0 * lambda), ..opts.clone() };
            let scaled = concave_envelope(&u.map(|v| lambda * v), &scaled_opts).unwrap();
            for k in g.classified() {
                prop_assert!((scaled.gamma.get(k) - lambda * env.gamma.get(k)).abs() < 1e-9);
            }
            // monotonicity
            let bigger = u.zip_map(&sample(&g, &c.iter().map(|v| v.abs()).collect::<Vec<_>>()), |a, b| a + 0.1 * b * b);
            let env2 = concave_envelope(&bigger, &opts).unwrap();
            for k in g.classified() {
                prop_assert!(env2.gamma.get(k) >= env.gamma.get(k) - 1e-12);
            }
        }

        #[test]
        fn level_integral_monotone_in_mask_and_additive(seed in 0u64..1000, split in 1usize..20) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..200).map(|_| rng.gen_range(-0.2..1.0)).collect();
            let w: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..3.0)).collect();
            let small: Vec<bool> = (0..200).map(|_| rng.gen_bool(0.3)).collect();
            let large: Vec<bool> = small.iter().map(|&m| m || rng.gen_bool(0.5)).collect();
            let band = 0.02;
            let a = abp_level_integral(&w, &u, &small, 0.0, 1.0, 20, band);
            let b = abp_level_integral(&w, &u, &large, 0.0, 1.0, 20, band);
            prop_assert!(b >= a);
            let mid = split as f64 / 20.0;
            let left = abp_level_integral(&w, &u, &large, 0.0, mid, split, band);
            let right = abp_level_integral(&w, &u, &large, mid, 1.0, 20 - split, band);
            prop_assert!((left + right - b).abs() < 1e-12);
        }
    }

    #[test]
    fn level_band_examples() {
        let g = ball(1.0 / 32.0);
        let cone = ScalarField::from_fn(&g, |x| 1.0 - x[0].hypot(x[1]));
        let ones = vec![1.0; g.len()];
        let all: Vec<bool> = (0..g.len()).map(|k| g.is_classified(k)).collect();
        assert_eq!(level_band_sup(&ones, cone.values(), &all, 0.5, g.h()), 1.0);
        let none = vec![false; g.len()];
        assert_eq!(level_band_sup(&ones, cone.values(), &none, 0.5, g.h()), 0.0);
        assert_eq!(abp_level_integral(&ones, cone.values(), &all, 0.3, 0.3, 10, 0.1), 0.0);
        let c = 2.5;
        let w = vec![c; g.len()];
        let v = abp_level_integral(&w, cone.values(), &all, 0.1, 0.9, 16, 0.05);
        assert!((v - c * 0.8).abs() < 1e-12);
    }

    #[test]
    fn cap_level_sup_above_range_is_zero() {
        let eps = 0.2;
        let cap = AnalyticFunction::Cap { eps };
        let rho: Vec<f64> = (0..2001).map(|i| i as f64 / 2000.0).collect();
        let u: Vec<f64> = rho.iter().map(|&r| cap.value([r, 0.0])).collect();
        let w: Vec<f64> = rho.iter().map(|&r| if r <= eps { 1.0 / eps } else { 0.0 }).collect();
        let mask = vec![true; rho.len()];
        assert_eq!(level_band_sup(&w, &u, &mask, 0.95, 1e-3), 0.0);
        let integral = abp_level_integral(&w, &u, &mask, 0.0, 1.0 - eps / 2.0, 900, 5e-4);
        assert!((integral - 0.5).abs() < 0.01, "{integral}");
    }
}
