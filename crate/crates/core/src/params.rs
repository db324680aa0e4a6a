//! The exponent pair `(n, p)` and the closed-form constants built from it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// An exponent `p` that is either a finite real or the distinguished infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite)
    }

    /// `p` as a float, `f64::INFINITY` for the infinite case.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Exponent::Finite(p) => p,
            Exponent::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinite),
            _ => t
                .parse::<f64>()
                .map_err(|_| Error::InvalidExponent(format!("cannot parse exponent {t:?}")))
                .and_then(|p| {
                    if p.is_finite() {
                        Ok(Exponent::Finite(p))
                    } else {
                        Err(Error::InvalidExponent(format!(
                            "use \"inf\" for the infinite exponent, got {t:?}"
                        )))
                    }
                }),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Dimension `n >= 2` together with an exponent `p` in `(n, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PExponent {
    n: u32,
    p: Exponent,
}

/// The constants that drive every estimate: Hölder defect, cusp constant and
/// the `L^inf` bound constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub c_p: f64,
    pub c_tilde: f64,
}

impl PExponent {
    pub fn new(n: u32, p: Exponent) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidExponent(format!("dimension must be >= 2, got {n}")));
        }
        if let Exponent::Finite(pv) = p {
            if pv.is_nan() || pv <= n as f64 {
                return Err(Error::InvalidExponent(format!(
                    "need n < p <= inf, got n = {n}, p = {pv}"
                )));
            }
        }
        Ok(Self { n, p })
    }

    pub fn finite(n: u32, p: f64) -> Result<Self> {
        Self::new(n, Exponent::Finite(p))
    }

    pub fn infinite(n: u32) -> Result<Self> {
        Self::new(n, Exponent::Infinite)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn is_infinite(&self) -> bool {
        self.p.is_infinite()
    }

    /// `alpha_p = (n-1)/(p-1)`, zero at `p = inf`.
    pub fn alpha(&self) -> f64 {
        match self.p {
            Exponent::Finite(p) => (self.n as f64 - 1.0) / (p - 1.0),
            Exponent::Infinite => 0.0,
        }
    }

    /// `C_p = p/(p+n-2)`, one at `p = inf`.
    pub fn c_p(&self) -> f64 {
        match self.p {
            Exponent::Finite(p) => p / (p + self.n as f64 - 2.0),
            Exponent::Infinite => 1.0,
        }
    }

    /// `C~_p = p/(p-1)`, one at `p = inf`.
    pub fn c_tilde(&self) -> f64 {
        match self.p {
            Exponent::Finite(p) => p / (p - 1.0),
            Exponent::Infinite => 1.0,
        }
    }

    /// Hölder exponent `1 - alpha_p = (p-n)/(p-1)`.
    pub fn holder_exponent(&self) -> f64 {
        match self.p {
            Exponent::Finite(p) => (p - self.n as f64) / (p - 1.0),
            Exponent::Infinite => 1.0,
        }
    }

    /// Weights `(a, b)` with `Delta_p^N = a * Delta + b * Delta_inf^N`.
    pub fn operator_weights(&self) -> (f64, f64) {
        match self.p {
            Exponent::Finite(p) => (1.0 / p, (p - 2.0) / p),
            Exponent::Infinite => (0.0, 1.0),
        }
    }
}

impl fmt::Display for PExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, p={})", self.n, self.p)
    }
}

pub fn derived_constants(pe: &PExponent) -> DerivedConstants {
    DerivedConstants {
        alpha: pe.alpha(),
        c_p: pe.c_p(),
        c_tilde: pe.c_tilde(),
    }
}

/// Volume of the unit ball for the dimensions the crate supports.
pub fn unit_ball_volume(n: u32) -> Result<f64> {
    match n {
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        4 => Ok(PI * PI / 2.0),
        _ => Err(Error::InvalidArgument(format!(
            "unit ball volume only tabulated for n in {{2,3,4}}, got {n}"
        ))),
    }
}

/// Surface area of the unit sphere `S^{n-1}`, i.e. `n |B_1|`.
pub fn unit_sphere_area(n: u32) -> Result<f64> {
    Ok(n as f64 * unit_ball_volume(n)?)
}

/// Factor in front of `||f+||_{L^n(C+)}` in the classical (`p`-unstable) ABP bound:
/// `d p / (n |B_1|^{1/n} (p-1)^{1/n})`.
pub fn classical_abp_factor(pe: &PExponent, d: f64) -> Result<f64> {
    let p = match pe.p() {
        Exponent::Finite(p) => p,
        Exponent::Infinite => {
            return Err(Error::InvalidExponent(
                "classical ABP factor is undefined at p = inf".into(),
            ))
        }
    };
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidArgument(format!("diameter must be positive, got {d}")));
    }
    let n = pe.n() as f64;
    let ball = unit_ball_volume(pe.n())?;
    Ok(d * p / (n * ball.powf(1.0 / n) * (p - 1.0).powf(1.0 / n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * (1.0 + b.abs())
    }

    #[test]
    fn constants_n3_p4() {
        let c = derived_constants(&PExponent::finite(3, 4.0).unwrap());
        assert!(close(c.alpha, 2.0 / 3.0));
        assert!(close(c.c_p, 4.0 / 5.0));
        assert!(close(c.c_tilde, 4.0 / 3.0));
    }

    #[test]
    fn constants_at_infinity() {
        let c = derived_constants(&PExponent::infinite(2).unwrap());
        assert_eq!(c.alpha, 0.0);
        assert_eq!(c.c_p, 1.0);
        assert_eq!(c.c_tilde, 1.0);
    }

    #[test]
    fn constants_n2_p3() {
        let c = derived_constants(&PExponent::finite(2, 3.0).unwrap());
        assert!(close(c.alpha, 0.5));
        assert!(close(c.c_p, 1.0));
        assert!(close(c.c_tilde, 1.5));
    }

    #[test]
    fn rejects_p_at_or_below_n() {
        assert!(PExponent::finite(2, 2.0).is_err());
        assert!(PExponent::finite(3, 2.5).is_err());
        assert!(PExponent::finite(1, 3.0).is_err());
        assert!(PExponent::finite(2, f64::NAN).is_err());
    }

    #[test]
    fn classical_factor_values() {
        // independent evaluation: 2*4 / (2 * sqrt(pi) * sqrt(3)) = 4/sqrt(3 pi)
        let v = classical_abp_factor(&PExponent::finite(2, 4.0).unwrap(), 2.0).unwrap();
        assert!(close(v, 4.0 / (3.0 * PI).sqrt()));
        assert!((v - 1.30294).abs() < 1e-5);
        let v3 = classical_abp_factor(&PExponent::finite(3, 4.0).unwrap(), 1.0).unwrap();
        let expect = 4.0 / (3.0 * (4.0 * PI / 3.0).cbrt() * 3f64.cbrt());
        assert!(close(v3, expect));
    }

    #[test]
    fn classical_factor_rejections() {
        assert!(classical_abp_factor(&PExponent::infinite(2).unwrap(), 1.0).is_err());
        assert!(classical_abp_factor(&PExponent::finite(5, 6.0).unwrap(), 1.0).is_err());
        assert!(classical_abp_factor(&PExponent::finite(2, 3.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn classical_factor_blows_up() {
        let mut prev = 0.0;
        for p in [2.5, 4.0, 10.0, 100.0, 1e4, 1e8] {
            let v = classical_abp_factor(&PExponent::finite(2, p).unwrap(), 1.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 1e3);
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinite);
        assert_eq!(" 3.5 ".parse::<Exponent>().unwrap(), Exponent::Finite(3.5));
        assert!("abc".parse::<Exponent>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn family_is_in_range(n in 2u32..5, extra in 1e-3f64..1e6) {
                let pe = PExponent::finite(n, n as f64 + extra).unwrap();
                let c = derived_constants(&pe);
                prop_assert!(c.alpha > 0.0 && c.alpha < 1.0);
                prop_assert!(c.c_p > 0.0 && c.c_p <= 1.0);
                prop_assert!(c.c_tilde > 1.0);
                let p = n as f64 + extra;
                prop_assert!((1.0 - c.alpha - (p - n as f64) / (p - 1.0)).abs() < 1e-12);
                prop_assert!((pe.holder_exponent() - (1.0 - c.alpha)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn limits_are_continuous() {
        let inf = derived_constants(&PExponent::infinite(2).unwrap());
        let big = derived_constants(&PExponent::finite(2, 1e9).unwrap());
        assert!((big.alpha - inf.alpha).abs() < 1e-8);
        assert!((big.c_p - inf.c_p).abs() < 1e-8);
        assert!((big.c_tilde - inf.c_tilde).abs() < 1e-8);
    }
}
