use super::{Loop, PathKind, PathString};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::model::OperatorInstance;
use crate::scalar::Scalar;
use crate::C64;

/// Evaluation point for `Cont(P, t)`: `V_n(t) = f(t + x₀ + n·ω)` for `n ≠ 0`,
/// `V_0(t) = f(x₀)`, hopping at phase `x₀ + t`.
#[derive(Clone, Copy, Debug)]
pub struct PathWeightContext<'a> {
    pub instance: &'a OperatorInstance,
    pub shift: f64,
}

impl<'a> PathWeightContext<'a> {
    pub fn new(instance: &'a OperatorInstance) -> Self {
        PathWeightContext { instance, shift: 0.0 }
    }

    pub fn shifted(instance: &'a OperatorInstance, shift: f64) -> Self {
        PathWeightContext { instance, shift }
    }

    pub fn at(&self, shift: f64) -> Self {
        PathWeightContext {
            instance: self.instance,
            shift,
        }
    }

    /// `(V_0 − V_n(t))^{-1}`.
    pub fn inv_den<S: Scalar>(&self, n: &Site) -> Result<S> {
        let v0 = self.instance.v0()?;
        let vn = self.instance.v_shifted(n, self.shift)?;
        if (v0 - vn).abs() < self.instance.delta_res {
            return Err(Error::ResonantSite(*n));
        }
        Ok(S::one() / (S::from_real(v0) - S::from_real(vn)))
    }

    /// `Φ^j_{to,from}(x₀ + t)`.
    pub fn hop<S: Scalar>(&self, j: u32, to: &Site, from: &Site) -> Result<S> {
        let k = &self.instance.hopping;
        if (*to - *from).norm_inf() > j as i32 * k.base_range() {
            return Err(Error::RangeViolation {
                from: *from,
                to: *to,
                order: j,
            });
        }
        S::from_complex(self.instance.hop(j, to, from, self.shift))
    }
}

/// `Cont(P)` as a complex number.
pub fn cont(path: &PathString, ctx: &PathWeightContext) -> Result<C64> {
    cont_with::<C64>(path, ctx)
}

/// `Cont(P)` in the field `S`.
pub fn cont_with<S: Scalar>(path: &PathString, ctx: &PathWeightContext) -> Result<S> {
    loop_weight(&path.root, ctx, path.kind == PathKind::Eigenvalue, path.dim)
}

/// Product of the weights on one sheet and everything above it. For a loop
/// that closes, the final factor is the bare hopping into the sheet origin.
pub(crate) fn loop_weight<S: Scalar>(
    lp: &Loop,
    ctx: &PathWeightContext,
    closes: bool,
    dim: usize,
) -> Result<S> {
    let origin = Site::zero(dim);
    let mut prev = origin;
    let mut w = S::one();
    for v in &lp.visits {
        let inv: S = ctx.inv_den(&v.site)?;
        w = w * ctx.hop::<S>(v.order_in, &v.site, &prev)? * inv.clone();
        for a in &v.attachments {
            w = -(w * loop_weight::<S>(a, ctx, true, dim)? * inv.clone());
        }
        prev = v.site;
    }
    if closes {
        w = w * ctx.hop::<S>(lp.closing_order, &origin, &prev)?;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::attach;
    use crate::scalar::High;

    fn inst() -> OperatorInstance {
        OperatorInstance::maryland_golden(0.1, 0.05).unwrap()
    }

    #[test]
    fn single_round_trip() {
        let i = inst();
        let ctx = PathWeightContext::new(&i);
        let w = cont(&PathString::parse("(1)").unwrap(), &ctx).unwrap();
        let v0 = i.v0().unwrap();
        let v1 = i.v(&Site::d1(1)).unwrap();
        assert!((w.re - 1.0 / (v0 - v1)).abs() < 1e-15);
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn hand_multiplied_loop() {
        let i = inst();
        let ctx = PathWeightContext::new(&i);
        let v0 = i.v0().unwrap();
        let d = |n: i32| v0 - i.v(&Site::d1(n)).unwrap();
        let expect = 1.0 / d(1) * (1.0 / d(2)) * (1.0 / d(1));
        let w: f64 = cont_with(&PathString::parse("(121)").unwrap(), &ctx).unwrap();
        assert!((w - expect).abs() < 1e-15 * expect.abs());
        let h: High = cont_with(&PathString::parse("(121)").unwrap(), &ctx).unwrap();
        assert!((h.to_f64() - expect).abs() < 1e-15 * expect.abs());
    }

    #[test]
    fn attachment_identity() {
        let i = inst();
        let ctx = PathWeightContext::new(&i);
        let base = PathString::parse("(12321)").unwrap();
        let lp = PathString::parse("(-1-2-1)").unwrap();
        let joined = attach(&base, &lp, 2).unwrap();
        let lhs: f64 = cont_with(&joined, &ctx).unwrap();
        let d3 = i.v0().unwrap() - i.v(&Site::d1(3)).unwrap();
        let rhs = cont_with::<f64>(&base, &ctx).unwrap() * (-1.0 / d3) * cont_with::<f64>(&lp, &ctx).unwrap();
        assert!((lhs - rhs).abs() < 1e-14 * rhs.abs());
    }

    #[test]
    fn range_violation() {
        let i = inst();
        let ctx = PathWeightContext::new(&i);
        let r = cont(&PathString::parse("(13)").unwrap(), &ctx);
        assert!(matches!(r, Err(Error::RangeViolation { .. })));
    }
}
