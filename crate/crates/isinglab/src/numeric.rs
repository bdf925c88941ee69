//! Small numeric helpers shared by the exact and Monte Carlo layers.

/// Compensated (Kahan) accumulator; `total` is accurate to a few ulps even
/// over tens of millions of addends, and the result depends only on the
/// order of `add` calls, never on how the sum is split across calls.
#[derive(Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub(crate) fn total(self) -> f64 {
        self.sum
    }
}
