//! Small deterministic statistics helpers. Sums are compensated and always
//! taken in index order so that results do not depend on scheduling.

#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn sum(xs: &[f64]) -> f64 {
    let mut k = KahanSum::default();
    xs.iter().for_each(|&x| k.add(x));
    k.value()
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN, n };
    }
    let mean = sum(xs) / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0, n };
    }
    let mut k = KahanSum::default();
    xs.iter().for_each(|x| k.add((x - mean) * (x - mean)));
    let var = k.value() / (n - 1) as f64;
    MeanSe { mean, se: (var / n as f64).sqrt(), n }
}

/// Mean with a batch-means standard error for correlated series.
pub fn batch_means(xs: &[f64], batches: usize) -> MeanSe {
    let b = batches.max(2).min(xs.len().max(1));
    let len = xs.len() / b;
    if len == 0 {
        return mean_se(xs);
    }
    let means: Vec<f64> = (0..b).map(|i| sum(&xs[i * len..(i + 1) * len]) / len as f64).collect();
    let m = mean_se(&means);
    MeanSe { mean: sum(&xs[..b * len]) / (b * len) as f64, se: m.se, n: xs.len() }
}

/// Bernoulli proportion and its standard error.
pub fn proportion(hits: usize, n: usize) -> MeanSe {
    let p = hits as f64 / n as f64;
    MeanSe { mean: p, se: (p * (1.0 - p) / n as f64).sqrt(), n }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = sum(xs) / n;
    let my = sum(ys) / n;
    let mut sxx = KahanSum::default();
    let mut sxy = KahanSum::default();
    for (x, y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
    }
    let slope = sxy.value() / sxx.value();
    let intercept = my - slope * mx;
    let slope_se = if xs.len() > 2 {
        let mut rss = KahanSum::default();
        for (x, y) in xs.iter().zip(ys) {
            let r = y - intercept - slope * x;
            rss.add(r * r);
        }
        (rss.value() / (n - 2.0) / sxx.value()).sqrt()
    } else {
        0.0
    };
    LinearFit { slope, intercept, slope_se }
}

/// Integrated autocorrelation time (in samples) with a self-consistent window.
pub fn autocorrelation_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = sum(xs) / n as f64;
    let c0 = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = xs[..n - lag].iter().zip(&xs[lag..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>()
            / n as f64
            / c0;
        tau += 2.0 * c;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (sum(&values[1..n - 1]) + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Trapezoid rule accumulated one uniform sample at a time.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningTrapezoid {
    sum: KahanSum,
    first: f64,
    last: f64,
    count: usize,
}

impl RunningTrapezoid {
    pub fn add(&mut self, x: f64) {
        if self.count == 0 {
            self.first = x;
        }
        self.last = x;
        self.count += 1;
        self.sum.add(x);
    }

    /// Integral over the samples seen so far with spacing `dt`.
    pub fn value(&self, dt: f64) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            dt * (self.sum.value() - 0.5 * (self.first + self.last))
        }
    }
}
