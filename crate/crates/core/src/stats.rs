//! Small statistics helpers shared by the estimators and oracles.

/// Running mean/variance (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Sample variance of `xs` together with its standard error, estimated from
/// the spread of the squared deviations.
pub fn variance_with_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sq: Moments = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = sq.mean * n as f64 / (n - 1) as f64;
    (var, sq.std_error())
}

/// Pool-adjacent-violators fit of a nonincreasing sequence, weighted.
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (weighted mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 >= m2 {
                break;
            }
            blocks.pop();
            blocks.pop();
            let w = w1 + w2;
            let m = if w > 0.0 {
                (m1 * w1 + m2 * w2) / w
            } else {
                0.5 * (m1 + m2)
            };
            blocks.push((m, w, l1 + l2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}

/// Ordinary least squares `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: n,
    })
}

/// Pools per-group `(count, sum, sum_sq)` into a variance estimate and a
/// cluster-robust standard error (groups are independent, samples within a
/// group need not be identically weighted).
pub fn pooled_variance_with_se(groups: &[(u64, f64, f64)]) -> (f64, f64) {
    let n: u64 = groups.iter().map(|g| g.0).sum();
    if n < 2 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let s1: f64 = groups.iter().map(|g| g.1).sum();
    let s2: f64 = groups.iter().map(|g| g.2).sum();
    let mean = s1 / nf;
    let pop_var = (s2 / nf - mean * mean).max(0.0);
    let var = pop_var * nf / (nf - 1.0);
    let r = groups.iter().filter(|g| g.0 > 0).count();
    if r < 2 {
        return (var, 0.0);
    }
    // influence of each group on the population variance
    let sum_a2: f64 = groups
        .iter()
        .map(|&(c, s, q)| {
            let a = q - 2.0 * mean * s + c as f64 * mean * mean - c as f64 * pop_var;
            a * a
        })
        .sum();
    let rf = r as f64;
    let se = (rf / (rf - 1.0) * sum_a2).sqrt() / nf;
    (var, se * nf / (nf - 1.0))
}
