//! Empirical distribution utilities used by every verification path.

use std::io::Write;

use crate::error::{invalid, Error, Result};

/// A finite, sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    /// Rejects NaN and infinities; sorts on ingestion.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample value {v}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of the sample `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.values.len() as f64
    }

    /// Type-7 (linear interpolation) quantile.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::Empty);
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("quantile level {p} outside [0, 1]")));
        }
        let h = (self.values.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        Ok(self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo]))
    }
}

/// Two-sample Kolmogorov-Smirnov distance and its scaled form
/// `D * sqrt(nm / (n + m))`. Ties are resolved by advancing through whole
/// tied blocks before comparing the ECDFs.
pub fn ks_two_sample(x: &SampleSet, y: &SampleSet) -> Result<(f64, f64)> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty);
    }
    let (xs, ys) = (x.values(), y.values());
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok((d, d * (nf * mf / (nf + mf)).sqrt()))
}

/// One-sample Kolmogorov-Smirnov distance against a CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &SampleSet, cdf: F) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let n = x.len() as f64;
    Ok(x
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            ((i as f64 + 1.0) / n - f).abs().max((f - i as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

/// m-th raw moment and its standard error `sd(x^m) / sqrt(n)`.
pub fn moments_with_se(x: &SampleSet, m: u32) -> Result<(f64, f64)> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    if m == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    let powered: Vec<f64> = x.values().iter().map(|v| v.powi(m as i32)).collect();
    Ok(mean_se(&powered))
}

/// Sample mean and its standard error (Bessel-corrected variance).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance (Bessel-corrected).
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Equal-width histogram over the sample range.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub fn histogram(x: &SampleSet, bins: usize) -> Result<Histogram> {
    if x.is_empty() {
        return Err(Error::Empty);
    }
    if bins == 0 {
        return Err(invalid("histogram needs at least one bin"));
    }
    let (lo, hi) = (x.values()[0], x.values()[x.len() - 1]);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0u64; bins];
    for &v in x.values() {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

impl Histogram {
    /// CSV with header `bin_left,bin_right,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_left,bin_right,count")?;
        for (k, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edges[k], self.edges[k + 1], c)?;
        }
        Ok(())
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `P[N > x]`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn set(v: &[f64]) -> SampleSet {
        SampleSet::new(v.to_vec()).unwrap()
    }

    // Brute-force ECDF difference over every observed point.
    fn ks_brute(x: &[f64], y: &[f64]) -> f64 {
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        x.iter()
            .chain(y)
            .map(|&t| (ecdf(x, t) - ecdf(y, t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_sample_examples() {
        assert_eq!(ks_two_sample(&set(&[1.0, 2.0, 2.0]), &set(&[2.0, 1.0, 2.0])).unwrap().0, 0.0);
        assert_eq!(ks_two_sample(&set(&[0.0; 3]), &set(&[1.0; 3])).unwrap().0, 1.0);
        let (d, scaled) = ks_two_sample(&set(&[1.0, 2.0, 3.0]), &set(&[1.5, 2.5, 3.5])).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-15);
        assert!((scaled - (1.0 / 3.0) * 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(ks_brute(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5]), d);
        assert!(matches!(
            ks_two_sample(&set(&[]), &set(&[1.0])),
            Err(Error::Empty)
        ));
    }

    #[test]
    fn one_sample_examples() {
        let n = 200;
        // exact quantiles of the uniform on [0, 1]
        let q: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let d = ks_one_sample(&set(&q), |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / n as f64).abs() < 1e-15);
        assert_eq!(ks_one_sample(&set(&[0.0]), normal_cdf).unwrap(), 0.5);

        let mut rng = seeded(3);
        let draws: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let d = ks_one_sample(&set(&draws), normal_cdf).unwrap();
        assert!(d < 1.63 / (1e5f64).sqrt(), "{d}");
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moments_with_se(&set(&[2.0, 2.0, 2.0]), 1).unwrap(), (2.0, 0.0));
        assert_eq!(moments_with_se(&set(&[0.0, 2.0]), 1).unwrap(), (1.0, 1.0));
        assert_eq!(moments_with_se(&set(&[1.0, -1.0]), 2).unwrap(), (1.0, 0.0));
        assert!(matches!(moments_with_se(&set(&[]), 1), Err(Error::Empty)));
    }

    #[test]
    fn nan_rejected() {
        assert!(SampleSet::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn quantiles_and_histogram() {
        let s = set(&[4.0, 1.0, 3.0, 2.0]);
        assert_eq!(s.quantile(0.0).unwrap(), 1.0);
        assert_eq!(s.quantile(1.0).unwrap(), 4.0);
        assert_eq!(s.quantile(0.5).unwrap(), 2.5);
        let h = histogram(&s, 3).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 4);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,bin_right,count\n1,2,"));
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let sf = normal_sf(2.0);
        assert!((sf - 0.022_750_131_948_179_2).abs() < 1e-15, "{sf:e}");
    }

    proptest! {
        #[test]
        fn ks_symmetric_and_transform_invariant(
            x in prop::collection::vec(-50i32..50, 1..40),
            y in prop::collection::vec(-50i32..50, 1..40),
        ) {
            let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            let d = ks_two_sample(&set(&xf), &set(&yf)).unwrap().0;
            prop_assert_eq!(d, ks_two_sample(&set(&yf), &set(&xf)).unwrap().0);
            prop_assert!((d - ks_brute(&xf, &yf)).abs() < 1e-12);
            let tx: Vec<f64> = xf.iter().map(|v| (v / 10.0).exp()).collect();
            let ty: Vec<f64> = yf.iter().map(|v| (v / 10.0).exp()).collect();
            prop_assert!((d - ks_two_sample(&set(&tx), &set(&ty)).unwrap().0).abs() < 1e-12);
            let mut rev = xf.clone();
            rev.reverse();
            prop_assert_eq!(d, ks_two_sample(&set(&rev), &set(&yf)).unwrap().0);
        }

        #[test]
        fn ks_against_own_ecdf_is_small(x in prop::collection::vec(-1e3f64..1e3, 1..60)) {
            let s = set(&x);
            let d = ks_one_sample(&s, |t| s.ecdf(t)).unwrap();
            prop_assert!(d <= 1.0 / x.len() as f64 + 1e-12);
        }
    }
}
