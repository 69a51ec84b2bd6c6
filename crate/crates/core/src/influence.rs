//! Influence functions sandwiched between `-log(1 - x + C_p|x|^p)` and
//! `log(1 + x + C_p|x|^p)`.
//!
//! `C_p` is the smallest constant for which such a non-decreasing function
//! exists. Four shapes are provided:
//!
//! * [`InfluenceKind::Wide`] follows the outer edges of the envelope and is
//!   unbounded (odd, logarithmic growth).
//! * [`InfluenceKind::Narrow`] follows the inner edges and is constant beyond
//!   `±(p C_p)^(-1/(p-1))`.
//! * [`InfluenceKind::BoundedAt`] is the wide function frozen outside
//!   `[-a2, a1]`.
//! * [`InfluenceKind::LinearTestOnly`] is `φ(x) = x`. It violates the
//!   envelope and exists so that estimators can be checked against the
//!   sample mean.

use crate::error::{Error, Result};

/// Nonlinearity constant for moment order `p ∈ (1, 2]`.
///
/// Evaluates `(ε/(1+ε))^((1+ε)/2) · ((1-ε)/ε)^((1-ε)/2)` with `ε = p - 1`
/// and `0^0 = 1`, so `cp_constant(2.0) == 0.5`.
pub fn cp_constant(p: f64) -> Result<f64> {
    check_order(p)?;
    let eps = p - 1.0;
    let head = (eps / (1.0 + eps)).powf((1.0 + eps) / 2.0);
    // At p = 2 the second factor is 0^0.
    let tail = if eps == 1.0 {
        1.0
    } else {
        ((1.0 - eps) / eps).powf((1.0 - eps) / 2.0)
    };
    Ok(head * tail)
}

/// Lipschitz bound `max{1 + p C_p, p}` shared by every envelope-respecting
/// influence function of order `p`.
pub fn lipschitz_constant(p: f64) -> Result<f64> {
    let c = cp_constant(p)?;
    Ok((1.0 + p * c).max(p))
}

fn check_order(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 && p <= 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("moment order p must lie in (1, 2], got {p}")))
    }
}

/// Moment order `p = 1 + ε` with its envelope constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentOrder {
    p: f64,
    epsilon: f64,
    c_p: f64,
}

impl MomentOrder {
    pub fn new(p: f64) -> Result<Self> {
        let c_p = cp_constant(p)?;
        Ok(Self {
            p,
            epsilon: p - 1.0,
            c_p,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn c_p(&self) -> f64 {
        self.c_p
    }

    /// Abscissa `(p C_p)^(-1/(p-1))` where the inner envelope edges turn flat.
    pub fn narrow_cut(&self) -> f64 {
        (self.p * self.c_p).powf(-1.0 / self.epsilon)
    }

    /// `log(1 + x + C_p|x|^p)`.
    #[inline]
    pub fn upper_envelope(&self, x: f64) -> f64 {
        (x + self.c_p * x.abs().powf(self.p)).ln_1p()
    }

    /// `-log(1 - x + C_p|x|^p)`.
    #[inline]
    pub fn lower_envelope(&self, x: f64) -> f64 {
        -(-x + self.c_p * x.abs().powf(self.p)).ln_1p()
    }
}

/// Moment order together with the bound `v` on the p-th central moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentParams {
    order: MomentOrder,
    v: f64,
}

impl MomentParams {
    pub fn new(p: f64, v: f64) -> Result<Self> {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("moment bound v must be positive, got {v}")));
        }
        Ok(Self {
            order: MomentOrder::new(p)?,
            v,
        })
    }

    pub fn order(&self) -> MomentOrder {
        self.order
    }

    pub fn p(&self) -> f64 {
        self.order.p
    }

    pub fn epsilon(&self) -> f64 {
        self.order.epsilon
    }

    pub fn c_p(&self) -> f64 {
        self.order.c_p
    }

    pub fn v(&self) -> f64 {
        self.v
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InfluenceKind {
    Wide,
    Narrow,
    /// Wide function frozen at `a1` on the right and `-a2` on the left.
    BoundedAt { a1: f64, a2: f64 },
    LinearTestOnly,
}

/// A concrete influence function. Construct through [`InfluenceSpec::wide`],
/// [`InfluenceSpec::narrow`], [`InfluenceSpec::bounded`] or
/// [`InfluenceSpec::linear_test_only`]; saturation geometry is precomputed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceSpec {
    kind: InfluenceKind,
    order: MomentOrder,
    // Flat beyond these abscissae (infinite for unbounded kinds).
    lower_cut: f64,
    upper_cut: f64,
    lower_level: f64,
    upper_level: f64,
}

impl InfluenceSpec {
    pub fn wide(p: f64) -> Result<Self> {
        let order = MomentOrder::new(p)?;
        Ok(Self {
            kind: InfluenceKind::Wide,
            order,
            lower_cut: f64::NEG_INFINITY,
            upper_cut: f64::INFINITY,
            lower_level: f64::NEG_INFINITY,
            upper_level: f64::INFINITY,
        })
    }

    pub fn narrow(p: f64) -> Result<Self> {
        let order = MomentOrder::new(p)?;
        let cut = order.narrow_cut();
        let inner = 1.0 - (order.epsilon / order.p) * cut;
        if !(inner > 0.0 && inner.is_finite()) {
            return Err(Error::Domain(format!(
                "narrow influence saturation undefined for p = {p}: 1 - ((p-1)/p)·cut = {inner}"
            )));
        }
        let level = -inner.ln();
        Ok(Self {
            kind: InfluenceKind::Narrow,
            order,
            lower_cut: -cut,
            upper_cut: cut,
            lower_level: -level,
            upper_level: level,
        })
    }

    pub fn bounded(p: f64, a1: f64, a2: f64) -> Result<Self> {
        let order = MomentOrder::new(p)?;
        let cut = order.narrow_cut();
        for (name, a) in [("a1", a1), ("a2", a2)] {
            if !(a.is_finite() && a > cut) {
                return Err(Error::Domain(format!(
                    "bounded influence needs {name} > (p C_p)^(-1/(p-1)) = {cut}, got {a}"
                )));
            }
        }
        Ok(Self {
            kind: InfluenceKind::BoundedAt { a1, a2 },
            order,
            lower_cut: -a2,
            upper_cut: a1,
            lower_level: order.lower_envelope(-a2),
            upper_level: order.upper_envelope(a1),
        })
    }

    pub fn linear_test_only(p: f64) -> Result<Self> {
        let mut spec = Self::wide(p)?;
        spec.kind = InfluenceKind::LinearTestOnly;
        Ok(spec)
    }

    pub fn kind(&self) -> InfluenceKind {
        self.kind
    }

    pub fn order(&self) -> MomentOrder {
        self.order
    }

    pub fn p(&self) -> f64 {
        self.order.p
    }

    /// True for kinds that are constant outside a finite interval.
    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, InfluenceKind::Narrow | InfluenceKind::BoundedAt { .. })
    }

    /// `(lower, upper)` abscissae beyond which φ is flat, for bounded kinds.
    pub fn cuts(&self) -> Option<(f64, f64)> {
        self.is_bounded().then_some((self.lower_cut, self.upper_cut))
    }

    /// `(lower, upper)` saturation values, for bounded kinds.
    pub fn saturation_levels(&self) -> Option<(f64, f64)> {
        self.is_bounded().then_some((self.lower_level, self.upper_level))
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        let o = &self.order;
        match self.kind {
            InfluenceKind::Wide => {
                if x >= 0.0 {
                    o.upper_envelope(x)
                } else {
                    o.lower_envelope(x)
                }
            }
            InfluenceKind::Narrow => {
                if x <= self.lower_cut {
                    self.lower_level
                } else if x <= 0.0 {
                    o.upper_envelope(x)
                } else if x <= self.upper_cut {
                    o.lower_envelope(x)
                } else {
                    self.upper_level
                }
            }
            InfluenceKind::BoundedAt { .. } => {
                if x <= self.lower_cut {
                    self.lower_level
                } else if x <= 0.0 {
                    o.lower_envelope(x)
                } else if x <= self.upper_cut {
                    o.upper_envelope(x)
                } else {
                    self.upper_level
                }
            }
            InfluenceKind::LinearTestOnly => x,
        }
    }

    /// Derivative of [`phi`](Self::phi). Right-hand derivative at 0, and 0
    /// at or beyond the saturation abscissae.
    #[inline]
    pub fn phi_prime(&self, x: f64) -> f64 {
        let o = &self.order;
        let a = x.abs();
        // d/dx log(1 + x + C|x|^p) and d/dx -log(1 - x + C|x|^p)
        let outer = |a: f64| (1.0 + o.p * o.c_p * a.powf(o.epsilon)) / (1.0 + a + o.c_p * a.powf(o.p));
        let inner = |a: f64| (1.0 - o.p * o.c_p * a.powf(o.epsilon)) / (1.0 - a + o.c_p * a.powf(o.p));
        match self.kind {
            InfluenceKind::Wide => outer(a),
            InfluenceKind::Narrow => {
                if x <= self.lower_cut || x >= self.upper_cut {
                    0.0
                } else {
                    inner(a).max(0.0)
                }
            }
            InfluenceKind::BoundedAt { .. } => {
                if x <= self.lower_cut || x >= self.upper_cut {
                    0.0
                } else {
                    outer(a)
                }
            }
            InfluenceKind::LinearTestOnly => 1.0,
        }
    }

    /// Checks `-log(1 - x + C_p|x|^p) - tol ≤ φ(x) ≤ log(1 + x + C_p|x|^p) + tol`.
    pub fn envelope_holds(&self, x: f64, tol: f64) -> Result<bool> {
        if self.kind == InfluenceKind::LinearTestOnly {
            return Err(Error::InvalidInput(
                "the linear influence function does not satisfy the envelope".into(),
            ));
        }
        let value = self.phi(x);
        Ok(self.order.lower_envelope(x) - tol <= value && value <= self.order.upper_envelope(x) + tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ORDERS: [f64; 3] = [1.1, 1.5, 1.9];

    fn all_specs(p: f64) -> Vec<InfluenceSpec> {
        let cut = MomentOrder::new(p).unwrap().narrow_cut();
        vec![
            InfluenceSpec::wide(p).unwrap(),
            InfluenceSpec::narrow(p).unwrap(),
            InfluenceSpec::bounded(p, 1.5 * cut, 2.0 * cut).unwrap(),
        ]
    }

    #[test]
    fn cp_reference_values() {
        assert_eq!(cp_constant(2.0).unwrap(), 0.5);
        // 3^(-3/4), 50-digit mpmath value
        assert!((cp_constant(1.5).unwrap() - 0.438_691_337_650_830_8).abs() < 1e-15);
        assert!((cp_constant(1.1).unwrap() - 0.718_858_069_766_063_9).abs() < 1e-14);
    }

    #[test]
    fn cp_rejects_out_of_range() {
        for p in [1.0, 0.5, 2.0001, f64::NAN, f64::INFINITY] {
            assert!(matches!(cp_constant(p), Err(Error::Domain(_))), "p = {p}");
        }
    }

    #[test]
    fn cp_feasibility_is_tight_at_minimizer() {
        for p in [1.05, 1.3, 1.5, 1.7, 1.95] {
            let c = cp_constant(p).unwrap();
            let e = p - 1.0;
            let g = |x: f64| c * c * x.powf(2.0 * e) + 2.0 * c * x.powf(e - 1.0);
            let x_star = ((1.0 - e) / (c * e)).powf(1.0 / (1.0 + e));
            assert!((g(x_star) - 1.0).abs() < 1e-12, "p = {p}: {}", g(x_star));
            // brute-force minimum over a fine log grid agrees
            let grid_min = (0..200_000)
                .map(|k| 10f64.powf(-3.0 + 6.0 * k as f64 / 200_000.0))
                .map(g)
                .fold(f64::INFINITY, f64::min);
            assert!((1.0 - 1e-10..1.0 + 1e-6).contains(&grid_min));
        }
    }

    #[test]
    fn phi_reference_values() {
        let wide = InfluenceSpec::wide(1.5).unwrap();
        assert_eq!(wide.phi(0.0), 0.0);
        assert!((wide.phi(1.0) - 0.891_461_558_396_610_7).abs() < 1e-14);

        let narrow = InfluenceSpec::narrow(1.5).unwrap();
        let (lo, hi) = narrow.cuts().unwrap();
        assert!((hi - 2.309_401_076_758_503).abs() < 1e-12);
        assert_eq!(lo, -hi);
        assert!((narrow.phi(10.0) - 1.468_808_341_859_345_3).abs() < 1e-12);
        assert!((narrow.phi(-10.0) + 1.468_808_341_859_345_3).abs() < 1e-12);
        // continuous at the cut
        assert!((narrow.phi(hi) - narrow.phi(hi + 1e-9)).abs() < 1e-8);
        assert!((narrow.phi(lo) - narrow.phi(lo - 1e-9)).abs() < 1e-8);
    }

    #[test]
    fn phi_prime_reference_values() {
        for p in ORDERS {
            assert_eq!(InfluenceSpec::wide(p).unwrap().phi_prime(0.0), 1.0);
            assert_eq!(InfluenceSpec::narrow(p).unwrap().phi_prime(0.0), 1.0);
        }
        assert_eq!(InfluenceSpec::narrow(1.5).unwrap().phi_prime(3.0), 0.0);
        assert!((InfluenceSpec::wide(2.0).unwrap().phi_prime(1.0) - 0.8).abs() < 1e-15);
        assert_eq!(InfluenceSpec::linear_test_only(1.5).unwrap().phi_prime(-7.0), 1.0);
    }

    #[test]
    fn phi_prime_matches_central_differences() {
        let h = 1e-6;
        for p in ORDERS {
            for spec in all_specs(p) {
                let (lo, hi) = spec.cuts().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
                for k in -400..=400 {
                    let x = k as f64 * 0.0247 + 0.0013;
                    let near_junction =
                        x.abs() < 1e-3 || (x - lo).abs() < 1e-3 || (x - hi).abs() < 1e-3;
                    if near_junction {
                        continue;
                    }
                    let fd = (spec.phi(x + h) - spec.phi(x - h)) / (2.0 * h);
                    assert!(
                        (fd - spec.phi_prime(x)).abs() < 1e-5,
                        "{:?} p={p} x={x}: fd {fd} vs {}",
                        spec.kind(),
                        spec.phi_prime(x)
                    );
                }
            }
        }
    }

    #[test]
    fn wide_is_odd() {
        for p in ORDERS {
            let spec = InfluenceSpec::wide(p).unwrap();
            for k in 0..10_000 {
                let x = (k as f64 - 5000.0) * 0.0213;
                assert!((spec.phi(-x) + spec.phi(x)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn monotone_and_enveloped_on_grid() {
        for p in ORDERS {
            for spec in all_specs(p) {
                let mut prev = f64::NEG_INFINITY;
                for k in 0..=20_000 {
                    let x = -100.0 + k as f64 * 0.01;
                    let y = spec.phi(x);
                    assert!(y >= prev, "{:?} p={p} decreasing at {x}", spec.kind());
                    assert!(spec.phi_prime(x) >= 0.0);
                    prev = y;
                }
                for k in 0..=10_000 {
                    let x = -50.0 + k as f64 * 0.01;
                    assert!(spec.envelope_holds(x, 1e-12).unwrap(), "{:?} p={p} x={x}", spec.kind());
                }
            }
        }
    }

    #[test]
    fn wide_equals_upper_envelope_on_positive_axis() {
        let spec = InfluenceSpec::wide(1.3).unwrap();
        for k in 0..1000 {
            assert!(spec.envelope_holds(k as f64 * 0.37, 0.0).unwrap());
        }
    }

    #[test]
    fn linear_rejected_by_envelope_check() {
        let spec = InfluenceSpec::linear_test_only(1.5).unwrap();
        assert!(matches!(spec.envelope_holds(1.0, 0.0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bounded_requires_cut_exceeding_narrow() {
        let cut = MomentOrder::new(1.5).unwrap().narrow_cut();
        assert!(InfluenceSpec::bounded(1.5, cut, 2.0 * cut).is_err());
        assert!(InfluenceSpec::bounded(1.5, 2.0 * cut, 0.5).is_err());
        assert!(InfluenceSpec::bounded(1.5, 1.01 * cut, 1.01 * cut).is_ok());
    }

    #[test]
    fn lipschitz_reference_values() {
        assert_eq!(lipschitz_constant(2.0).unwrap(), 2.0);
        assert!((lipschitz_constant(1.5).unwrap() - 1.658_037_006_476_246).abs() < 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lipschitz_bound_holds(p in 1.01f64..=2.0, x1 in -60.0f64..60.0, x2 in -60.0f64..60.0, which in 0usize..3) {
                let spec = all_specs(p)[which];
                let l = lipschitz_constant(p).unwrap();
                prop_assert!((spec.phi(x1) - spec.phi(x2)).abs() <= l * (x1 - x2).abs() + 1e-12);
            }

            #[test]
            fn narrow_never_exceeds_wide_in_magnitude(p in 1.01f64..=2.0, x in -80.0f64..80.0) {
                let n = InfluenceSpec::narrow(p).unwrap().phi(x);
                let w = InfluenceSpec::wide(p).unwrap().phi(x);
                prop_assert!(n.abs() <= w.abs() + 1e-12);
                prop_assert!(n * w >= 0.0);
            }
        }
    }
}
