//! Scalar helpers on top of `libm`.

pub(crate) use libm::{exp, expm1, fabs, log, sqrt};

/// Largest exponent magnitude accepted before a Boltzmann factor is treated as out of range.
pub(crate) const EXP_GUARD: f64 = 700.0;

/// `ln Σ exp(x_i)`, skipping `-inf` terms. Returns `-inf` for an empty or all-`-inf` input.
pub(crate) fn log_sum_exp<I>(terms: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = terms.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for x in iter {
        if x > f64::NEG_INFINITY {
            acc += exp(x - max);
        }
    }
    max + log(acc)
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if fabs(self.sum) >= fabs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `x ln x` with `0 ln 0 = 0`.
pub(crate) fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * log(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [0.0, -1.0, -2.5];
        let direct = log(exp(0.0) + exp(-1.0) + exp(-2.5));
        assert!((log_sum_exp(xs) - direct).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_survives_large_arguments() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + log(2.0))).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-17);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-16).abs() < 1e-30);
    }
}
