//! `|x|^e` with fast paths for integer and half-integer exponents.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Power {
    Int(i32),
    /// `k + ½`
    Half(i32),
    Real(f64),
}

impl Power {
    pub(crate) fn new(e: f64) -> Self {
        let twice = 2.0 * e;
        if twice.fract() == 0.0 && twice.abs() < 64.0 {
            let t = twice as i32;
            if t % 2 == 0 {
                Power::Int(t / 2)
            } else {
                Power::Half(t.div_euclid(2))
            }
        } else {
            Power::Real(e)
        }
    }

    /// `|x|^e`
    #[inline]
    pub(crate) fn abs(self, x: f64) -> f64 {
        let a = x.abs();
        match self {
            Power::Int(k) => a.powi(k),
            Power::Half(k) => a.powi(k) * a.sqrt(),
            Power::Real(e) => a.powf(e),
        }
    }

    /// `|x|^e·sgn(x)`
    #[inline]
    pub(crate) fn signed(self, x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            self.abs(x).copysign(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_powf() {
        for e in [2.0, 2.5, 1.5, 3.0, 3.5, 4.0, 2.37, 0.5] {
            let p = Power::new(e);
            for x in [0.0, 1e-3, 0.4, 1.0, 2.7, -0.6] {
                let want = if x == 0.0 { 0.0 } else { f64::abs(x).powf(e) };
                assert!((p.abs(x) - want).abs() <= 1e-14 * want.max(1.0), "{e} {x}");
                assert_eq!(
                    p.signed(x).signum() * (x != 0.0) as i32 as f64,
                    x.signum() * (x != 0.0) as i32 as f64
                );
            }
        }
        assert_eq!(Power::new(2.5), Power::Half(2));
        assert_eq!(Power::new(3.0), Power::Int(3));
    }
}
