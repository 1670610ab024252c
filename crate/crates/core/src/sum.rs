//! Neumaier-compensated accumulation, so that serial and parallel
//! reductions over the same terms agree to the last few ulps.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(mut self, other: CompensatedSum) -> CompensatedSum {
        self.add(other.sum);
        self.add(other.comp);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn merge(self, other: ComplexSum) -> ComplexSum {
        ComplexSum {
            re: self.re.merge(other.re),
            im: self.im.merge(other.im),
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn sum_f64<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = CompensatedSum::default();
    it.into_iter().for_each(|x| s.add(x));
    s.value()
}

pub fn sum_complex<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut s = ComplexSum::default();
    it.into_iter().for_each(|z| s.add(z));
    s.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let naive: f64 = [1e16, 1.0, -1e16].iter().sum();
        assert_eq!(naive, 0.0);
        assert_eq!(sum_f64([1e16, 1.0, -1e16]), 1.0);
    }

    #[test]
    fn merge_matches_serial() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 7919) % 1013) as f64 * 1e-3 - 0.5)
            .collect();
        let serial = sum_f64(xs.iter().copied());
        let mut a = CompensatedSum::default();
        let mut b = CompensatedSum::default();
        xs[..400].iter().for_each(|&x| a.add(x));
        xs[400..].iter().for_each(|&x| b.add(x));
        assert!((a.merge(b).value() - serial).abs() < 1e-13);
    }
}
