//! Monotone piecewise cubic Hermite interpolation (Fritsch–Carlson slopes).

/// PCHIP interpolant through `(x_i, y_i)` with `x` strictly increasing.
///
/// Slopes follow the weighted harmonic mean rule, with one-sided three-point
/// estimates at the ends. The interpolant is monotone on every interval where
/// the data are, so nonnegative data give a nonnegative curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Panics unless `x.len() == y.len() >= 2`; `x` must be strictly increasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len(), "pchip: length mismatch");
        assert!(x.len() >= 2, "pchip: need at least two points");
        let d = slopes(&x, &y);
        Self { x, y, d }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn lo(&self) -> f64 {
        self.x[0]
    }

    pub fn hi(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Index `k` of the interval `[x_k, x_{k+1}]` containing `t` (clamped).
    pub fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Value at `t`; outside the knots the end interval's cubic is used.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.interval(t);
        self.eval_in(k, t)
    }

    pub fn eval_in(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    /// `∫_{x_k}^{t} p` for `t` in interval `k`.
    pub fn integral_in(&self, k: usize, t: f64) -> f64 {
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1, d0, d1) = (self.y[k], self.y[k + 1], self.d[k] * h, self.d[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        h * ((0.5 * s4 - s3 + s) * y0
            + (0.25 * s4 - 2.0 / 3.0 * s3 + 0.5 * s2) * d0
            + (-0.5 * s4 + s3) * y1
            + (0.25 * s4 - s3 / 3.0) * d1)
    }

    /// Exact integral of each interval.
    pub fn segment_integrals(&self) -> Vec<f64> {
        (0..self.x.len() - 1)
            .map(|k| {
                let h = self.x[k + 1] - self.x[k];
                h * (self.y[k] + self.y[k + 1]) / 2.0 + h * h * (self.d[k] - self.d[k + 1]) / 12.0
            })
            .collect()
    }
}

fn slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
