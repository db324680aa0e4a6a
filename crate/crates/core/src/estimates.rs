//! Both sides of the ABP-type and Hölder estimates, with slack.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::envelope::{abp_level_integral, concave_envelope, default_band, EnvelopeOptions, EnvelopeResult};
use crate::error::{Error, Result};
use crate::grid::{dist, Grid2D, ScalarField};
use crate::params::{classical_abp_factor, Exponent, PExponent};

/// Pairs are enumerated exhaustively up to this many nodes.
pub const EXACT_PAIR_LIMIT: usize = 4096;
/// Random pairs drawn above [`EXACT_PAIR_LIMIT`].
pub const SAMPLED_PAIRS: usize = 10_000_000;
const PAIR_SEED: u64 = 0x05ee_dab9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbpVariant {
    InfNormalized,
    InfVariational,
    PNormalized,
    PVariational,
}

impl AbpVariant {
    pub const ALL: [AbpVariant; 4] = [
        AbpVariant::InfNormalized,
        AbpVariant::InfVariational,
        AbpVariant::PNormalized,
        AbpVariant::PVariational,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AbpVariant::InfNormalized => "inf_normalized",
            AbpVariant::InfVariational => "inf_variational",
            AbpVariant::PNormalized => "p_normalized",
            AbpVariant::PVariational => "p_variational",
        }
    }

    /// Variants whose equation matches the operator `Delta_p^N` solved on the lattice.
    pub fn normalized_for(pe: &PExponent) -> AbpVariant {
        if pe.is_infinite() {
            AbpVariant::InfNormalized
        } else {
            AbpVariant::PNormalized
        }
    }

    /// `(K, q)` with `LHS = (sup u - sup_bdry u^+)^q <= K * integral`.
    pub fn constant(self, pe: &PExponent, d: f64) -> Result<(f64, f64)> {
        match (self, pe.p()) {
            (AbpVariant::InfNormalized, Exponent::Infinite) => Ok((2.0 * d * d, 2.0)),
            (AbpVariant::InfVariational, Exponent::Infinite) => Ok((4.0 * d.powi(4), 4.0)),
            (AbpVariant::PNormalized, Exponent::Finite(p)) => Ok((2.0 * p * d * d / (p - 1.0), 2.0)),
            (AbpVariant::PVariational, Exponent::Finite(p)) => Ok((p * d.powf(p) / (p - 1.0), p)),
            (v, p) => Err(Error::InvalidExponent(format!(
                "variant {} does not apply to p = {p}",
                v.name()
            ))),
        }
    }
}

impl fmt::Display for AbpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Subsolution bound (upper) or its supersolution mirror (lower, via `-u`, `-f`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Sub,
    Super,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EstimateConstants {
    pub d: f64,
    pub alpha: f64,
    pub c_p: f64,
    pub c_tilde: f64,
    pub tau: Option<f64>,
    pub band: Option<f64>,
}

impl EstimateConstants {
    fn new(pe: &PExponent, d: f64) -> Self {
        Self {
            d,
            alpha: pe.alpha(),
            c_p: pe.c_p(),
            c_tilde: pe.c_tilde(),
            tau: None,
            band: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub variant: String,
    pub lhs: f64,
    pub rhs: f64,
    pub constants: EstimateConstants,
    pub slack: f64,
    pub pass: bool,
    pub caveats: Vec<String>,
}

impl EstimateReport {
    pub fn new(
        variant: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constants: EstimateConstants,
        caveats: Vec<String>,
    ) -> Self {
        let slack = rhs - lhs;
        let margin = 1e-9 * rhs.abs().max(1.0);
        Self {
            variant: variant.into(),
            lhs,
            rhs,
            constants,
            slack,
            pass: slack >= -margin,
            caveats,
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// One row per report.
pub fn write_reports_csv<W: Write>(mut w: W, reports: &[EstimateReport]) -> Result<()> {
    writeln!(w, "variant,lhs,rhs,slack,pass,d,alpha,c_p,c_tilde,tau,band,caveats")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports {
        let c = &r.constants;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},\"{}\"",
            r.variant,
            r.lhs,
            r.rhs,
            r.slack,
            r.pass,
            c.d,
            c.alpha,
            c.c_p,
            c.c_tilde,
            opt(c.tau),
            opt(c.band),
            r.caveats.join("; ")
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelOptions {
    /// Midpoint cells over the value range.
    pub n_r: usize,
    /// Band half-width; `None` uses `max(h Lip, range / (2 n_r))`.
    pub band: Option<f64>,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self { n_r: 200, band: None }
    }
}

fn oriented(u: &ScalarField, f: &ScalarField, side: Side) -> (ScalarField, ScalarField) {
    match side {
        Side::Sub => (u.clone(), f.clone()),
        Side::Super => (u.map(|v| -v), f.map(|v| -v)),
    }
}

/// Envelope of `u^+` (or of `u^-` for the supersolution side) used by the ABP verifiers.
pub fn abp_envelope(u: &ScalarField, side: Side, opts: &EnvelopeOptions) -> Result<EnvelopeResult> {
    let v = match side {
        Side::Sub => u.positive_part(),
        Side::Super => u.negative_part(),
    };
    concave_envelope(&v, opts)
}

fn sign_caveats(f: &ScalarField) -> Vec<String> {
    let inside = f.grid().inside();
    let pos = inside.iter().any(|&k| f.get(k) > 0.0);
    let neg = inside.iter().any(|&k| f.get(k) < 0.0);
    let mut c = vec!["discrete diameter".to_string()];
    if pos && neg {
        c.push("sign-changing f".to_string());
    }
    c
}

fn sup_over(u: &ScalarField, nodes: &[usize]) -> f64 {
    nodes.iter().map(|&k| u.get(k)).fold(f64::NEG_INFINITY, f64::max)
}

/// Level-set ABP estimate of the chosen variant on a lattice solution.
///
/// `env` must be [`abp_envelope`] of `u` for the same `side`.
pub fn verify_abp(
    variant: AbpVariant,
    side: Side,
    u: &ScalarField,
    f: &ScalarField,
    env: &EnvelopeResult,
    pe: &PExponent,
    opts: &LevelOptions,
) -> Result<EstimateReport> {
    let g = u.grid();
    let d = g.diameter();
    let (k_const, _) = variant.constant(pe, d)?;
    let (v, fv) = oriented(u, f, side);
    let sup = sup_over(&v, g.inside());
    let sup_b = sup_over(&v, g.boundary()).max(0.0);
    let w: Vec<f64> = fv.values().iter().map(|x| x.max(0.0)).collect();
    let h_lip = g.h() * env.lipschitz;
    let n_r = opts.n_r.max(1);
    let band = opts
        .band
        .unwrap_or_else(|| default_band(h_lip, sup_b, sup.max(sup_b), n_r));
    let integral = abp_level_integral(&w, v.values(), &env.contact, sup_b, sup, n_r, band);
    let mut constants = EstimateConstants::new(pe, d);
    constants.tau = Some(env.tau);
    constants.band = Some(band);
    let mut caveats = sign_caveats(f);
    if side == Side::Super {
        caveats.push("supersolution side".into());
    }
    Ok(abp_report(
        variant,
        pe,
        sup - sup_b,
        k_const * integral,
        constants,
        caveats,
    ))
}

fn abp_report(
    variant: AbpVariant,
    pe: &PExponent,
    gap: f64,
    rhs: f64,
    constants: EstimateConstants,
    caveats: Vec<String>,
) -> EstimateReport {
    let q = variant.constant(pe, 1.0).map(|(_, q)| q).unwrap_or(2.0);
    let lhs = gap.max(0.0).powf(q);
    EstimateReport::new(variant.name(), lhs, rhs, constants, caveats)
}

/// Level-set ABP estimate from samples, e.g. a radial profile.
///
/// `u` and `w = f^+` are sampled at the same points; `mask` marks the contact
/// points, `sup_boundary_plus` is `sup_{bdry} u^+`.
#[allow(clippy::too_many_arguments)]
pub fn verify_abp_samples(
    variant: AbpVariant,
    pe: &PExponent,
    d: f64,
    u: &[f64],
    w: &[f64],
    mask: &[bool],
    sup_boundary_plus: f64,
    n_r: usize,
    band: f64,
) -> Result<EstimateReport> {
    let (k_const, _) = variant.constant(pe, d)?;
    let sup = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let wp: Vec<f64> = w.iter().map(|x| x.max(0.0)).collect();
    let integral = abp_level_integral(&wp, u, mask, sup_boundary_plus, sup, n_r, band);
    let mut constants = EstimateConstants::new(pe, d);
    constants.band = Some(band);
    Ok(abp_report(
        variant,
        pe,
        sup - sup_boundary_plus,
        k_const * integral,
        constants,
        vec![],
    ))
}

/// Classical `L^n` ABP bound with nodal weight `h^2`.
pub fn verify_classical_abp(
    side: Side,
    u: &ScalarField,
    f: &ScalarField,
    env: &EnvelopeResult,
    pe: &PExponent,
) -> Result<EstimateReport> {
    if pe.is_infinite() {
        return Err(Error::InvalidExponent(
            "classical ABP has no finite constant at p = inf".into(),
        ));
    }
    if pe.n() != 2 {
        return Err(Error::InvalidArgument("lattice estimates are two-dimensional".into()));
    }
    let g = u.grid();
    let d = g.diameter();
    let factor = classical_abp_factor(pe, d)?;
    let (v, fv) = oriented(u, f, side);
    let lhs = sup_over(&v, g.inside()) - sup_over(&v, g.boundary()).max(0.0);
    let h2 = g.h() * g.h();
    let norm = g
        .inside()
        .iter()
        .filter(|&&k| env.contact[k])
        .map(|&k| fv.get(k).max(0.0).powi(2) * h2)
        .sum::<f64>()
        .sqrt();
    let mut constants = EstimateConstants::new(pe, d);
    constants.tau = Some(env.tau);
    Ok(EstimateReport::new(
        "classical",
        lhs,
        factor * norm,
        constants,
        sign_caveats(f),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    Inside,
    Boundary,
    All,
}

fn select(g: &Grid2D, sel: NodeSelection) -> Vec<usize> {
    match sel {
        NodeSelection::Inside => g.inside().to_vec(),
        NodeSelection::Boundary => g.boundary().to_vec(),
        NodeSelection::All => g.classified().collect(),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderValue {
    pub value: f64,
    /// `false` when pairs were sampled, making `value` a lower bound.
    pub exact: bool,
}

#[inline]
fn quotient(du: f64, r: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        du / r
    } else {
        du / r.powf(beta)
    }
}

/// `sup |u(x) - u(y)| / |x - y|^beta` over pairs of the selected nodes.
pub fn holder_seminorm(u: &ScalarField, beta: f64, sel: NodeSelection) -> HolderValue {
    let g = u.grid();
    let nodes = select(g, sel);
    let pts: Vec<([f64; 2], f64)> = nodes.iter().map(|&k| (g.coords(k), u.get(k))).collect();
    holder_over_points(&pts, beta, g, &nodes)
}

fn holder_over_points(pts: &[([f64; 2], f64)], beta: f64, g: &Grid2D, nodes: &[usize]) -> HolderValue {
    let m = pts.len();
    if m < 2 {
        return HolderValue {
            value: 0.0,
            exact: true,
        };
    }
    if m <= EXACT_PAIR_LIMIT {
        let value = (0..m)
            .into_par_iter()
            .map(|i| {
                let (x, ux) = pts[i];
                pts[i + 1..]
                    .iter()
                    .map(|&(y, uy)| quotient((ux - uy).abs(), dist(x, y), beta))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        return HolderValue { value, exact: true };
    }
    let chunks = 64;
    let per = SAMPLED_PAIRS / chunks;
    let sampled = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SEED + c as u64);
            let mut best: f64 = 0.0;
            for _ in 0..per {
                let i = rng.gen_range(0..m);
                let j = rng.gen_range(0..m);
                if i != j {
                    let ((x, ux), (y, uy)) = (pts[i], pts[j]);
                    best = best.max(quotient((ux - uy).abs(), dist(x, y), beta));
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    // every pair within Chebyshev distance 2
    let mut pos = vec![usize::MAX; g.len()];
    for (i, &k) in nodes.iter().enumerate() {
        pos[k] = i;
    }
    let local = (0..m)
        .into_par_iter()
        .map(|i| {
            let k = nodes[i];
            let (x, ux) = pts[i];
            let mut best: f64 = 0.0;
            for dj in -2i64..=2 {
                for di in -2i64..=2 {
                    if let Some(q) = g.offset(k, di, dj) {
                        let j = pos[q];
                        if j != usize::MAX && j != i {
                            let (y, uy) = pts[j];
                            best = best.max(quotient((ux - uy).abs(), dist(x, y), beta));
                        }
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    HolderValue {
        value: sampled.max(local),
        exact: false,
    }
}

/// Boundary seminorm `[g]_{beta, bdry}`, always over all boundary pairs.
pub fn boundary_seminorm(u: &ScalarField, beta: f64) -> f64 {
    let g = u.grid();
    let pts: Vec<([f64; 2], f64)> = g.boundary().iter().map(|&k| (g.coords(k), u.get(k))).collect();
    let m = pts.len();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let (x, ux) = pts[i];
            pts[i + 1..]
                .iter()
                .map(|&(y, uy)| quotient((ux - uy).abs(), dist(x, y), beta))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn f_sup(f: &ScalarField) -> f64 {
    f.sup_norm_inside()
}

fn holder_caveat(h: HolderValue, caveats: &mut Vec<String>) {
    if !h.exact {
        caveats.push("sampled seminorm (lower bound)".into());
    }
}

/// Interior Hölder bound at the inside node `x`.
pub fn verify_holder_interior(u: &ScalarField, f: &ScalarField, x: usize, pe: &PExponent) -> Result<EstimateReport> {
    let g = u.grid();
    if g.class(x) != crate::grid::NodeClass::Inside {
        return Err(Error::InvalidArgument(format!("node {x} is not an inside node")));
    }
    let beta = pe.holder_exponent();
    let alpha = pe.alpha();
    let d = g.diameter();
    let xc = g.coords(x);
    let ux = u.get(x);
    let ratio = |k: usize| quotient((u.get(k) - ux).abs(), dist(g.coords(k), xc), beta);
    let lhs = g.classified().filter(|&k| k != x).map(ratio).fold(0.0, f64::max);
    let bterm = g.boundary().iter().map(|&k| ratio(k)).fold(0.0, f64::max);
    let rhs = bterm + pe.c_p() / (1.0 - alpha) * d.powf(1.0 + alpha) * f_sup(f);
    Ok(EstimateReport::new(
        "holder_interior",
        lhs,
        rhs,
        EstimateConstants::new(pe, d),
        sign_caveats(f),
    ))
}

/// Global Hölder bound with `g` read from the boundary values of `u`.
pub fn verify_holder_global(u: &ScalarField, f: &ScalarField, pe: &PExponent) -> Result<EstimateReport> {
    let g = u.grid();
    let beta = pe.holder_exponent();
    let d = g.diameter();
    let semi = holder_seminorm(u, beta, NodeSelection::All);
    let rhs = pe.c_p() * f_sup(f) * d.powf(1.0 + pe.alpha()) + boundary_seminorm(u, beta);
    let mut caveats = sign_caveats(f);
    holder_caveat(semi, &mut caveats);
    Ok(EstimateReport::new(
        "holder_global",
        semi.value,
        rhs,
        EstimateConstants::new(pe, d),
        caveats,
    ))
}

/// `||u||_inf + [u] <= ||g||_inf + [g] + (2 C~_p d^2 + C_p d^{1+alpha}) ||f||_inf`.
pub fn verify_c_alpha_norm(u: &ScalarField, f: &ScalarField, pe: &PExponent) -> Result<EstimateReport> {
    let g = u.grid();
    let beta = pe.holder_exponent();
    let d = g.diameter();
    let semi = holder_seminorm(u, beta, NodeSelection::All);
    let lhs = u.sup_norm() + semi.value;
    let g_sup = g.boundary().iter().map(|&k| u.get(k).abs()).fold(0.0, f64::max);
    let g_norm = g_sup + boundary_seminorm(u, beta);
    let rhs = g_norm + (2.0 * pe.c_tilde() * d * d + pe.c_p() * d.powf(1.0 + pe.alpha())) * f_sup(f);
    let mut caveats = sign_caveats(f);
    holder_caveat(semi, &mut caveats);
    Ok(EstimateReport::new(
        "c_alpha_norm",
        lhs,
        rhs,
        EstimateConstants::new(pe, d),
        caveats,
    ))
}
