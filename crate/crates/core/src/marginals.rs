//! Univariate posterior marginals stored as density grids, and the toolkit
//! that evaluates, transforms, summarizes and samples them.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::util::fmt_sig;

/// Refinement factor for quadrature on the interpolated density.
const REFINE: usize = 4;

/// A marginal density on an ascending grid, normalized to unit mass under
/// its PCHIP interpolant.
#[derive(Debug, Clone)]
pub struct Marginal {
    pchip: Pchip,
    /// `F` at each knot.
    cdf: Vec<f64>,
}

/// Output of [`Marginal::zmarginal`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub q025: f64,
    pub q975: f64,
}

impl Marginal {
    /// Builds a marginal from `(x, density)` pairs; densities are rescaled to unit mass.
    pub fn new(x: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if x.len() != density.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: density.len(),
            });
        }
        if x.len() < 5 {
            return Err(Error::Domain(format!(
                "a marginal needs at least 5 grid points, got {}",
                x.len()
            )));
        }
        if x.iter().chain(&density).any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "marginal grid contains non-finite values".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "marginal abscissae must be strictly increasing".into(),
            ));
        }
        if density.iter().any(|&d| d < 0.0) {
            return Err(Error::Domain(
                "marginal densities must be nonnegative".into(),
            ));
        }
        let raw = Pchip::new(x.clone(), density.clone());
        let mass: f64 = raw.segment_integrals().iter().sum();
        if !(mass > 0.0) {
            return Err(Error::Domain("marginal has zero mass".into()));
        }
        let density: Vec<f64> = density.iter().map(|d| d / mass).collect();
        let pchip = Pchip::new(x, density);
        let mut cdf = Vec::with_capacity(pchip.x().len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for s in pchip.segment_integrals() {
            acc += s.max(0.0);
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|c| *c /= total);
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { pchip, cdf })
    }

    /// Gaussian density on `n` equispaced points over `mean ± width·sd`.
    pub fn gaussian(mean: f64, sd: f64, n: usize, width: f64) -> Result<Self> {
        if !(sd > 0.0) || !mean.is_finite() {
            return Err(Error::Domain(format!("invalid gaussian ({mean}, {sd})")));
        }
        let x = linspace(mean - width * sd, mean + width * sd, n);
        let d = x
            .iter()
            .map(|&v| (-0.5 * ((v - mean) / sd).powi(2)).exp())
            .collect();
        Self::new(x, d)
    }

    /// Evaluates `f` on `n` equispaced points over `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let x = linspace(lo, hi, n);
        let d = x.iter().map(|&v| f(v)).collect();
        Self::new(x, d)
    }

    pub fn x(&self) -> &[f64] {
        self.pchip.x()
    }

    pub fn density(&self) -> &[f64] {
        self.pchip.y()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.pchip.lo(), self.pchip.hi())
    }

    /// Density at `x`, zero outside the grid.
    pub fn dmarginal(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(lo..=hi).contains(&x) {
            return 0.0;
        }
        self.pchip.eval(x).max(0.0)
    }

    /// `F(x)`.
    pub fn pmarginal(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let k = self.pchip.interval(x);
        let total_seg = self.cdf[k + 1] - self.cdf[k];
        let raw = self.pchip.segment_integrals()[k];
        let part = if raw > 0.0 {
            (self.pchip.integral_in(k, x) / raw).clamp(0.0, 1.0) * total_seg
        } else {
            0.0
        };
        (self.cdf[k] + part).clamp(0.0, 1.0)
    }

    /// `inf { x : F(x) ≥ p }`.
    pub fn qmarginal(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let x = self.x();
        if p <= 0.0 {
            return Ok(x[0]);
        }
        // first knot with F ≥ p
        let k1 = self.cdf.partition_point(|&c| c < p);
        if k1 == 0 {
            return Ok(x[0]);
        }
        let k = k1 - 1;
        let (mut a, mut b) = (x[k], x[k1]);
        if self.cdf[k1] - self.cdf[k] <= 0.0 {
            return Ok(b);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.pmarginal(m) >= p {
                b = m;
            } else {
                a = m;
            }
        }
        Ok(b)
    }

    /// Marginal of `g(X)` for a strictly monotone `g`, with the Jacobian
    /// taken by central differences.
    pub fn tmarginal(&self, g: impl Fn(f64) -> f64) -> Result<Marginal> {
        self.tmarginal_with(&g, |t| {
            let h = 1e-6 * (1.0 + t.abs());
            (g(t + h) - g(t - h)) / (2.0 * h)
        })
    }

    /// [`Marginal::tmarginal`] with an explicit derivative `dg`.
    pub fn tmarginal_with(
        &self,
        g: impl Fn(f64) -> f64,
        dg: impl Fn(f64) -> f64,
    ) -> Result<Marginal> {
        let mut pts: Vec<(f64, f64)> = self
            .x()
            .iter()
            .zip(self.density())
            .map(|(&t, &d)| (g(t), d / dg(t).abs()))
            .collect();
        if pts.iter().any(|(y, d)| !y.is_finite() || !d.is_finite()) {
            return Err(Error::Domain("transform produced non-finite values".into()));
        }
        let increasing = pts[1].0 > pts[0].0;
        if !increasing {
            pts.reverse();
        }
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Domain(
                "transform is not strictly monotone on the support".into(),
            ));
        }
        let (y, d) = pts.into_iter().unzip();
        Marginal::new(y, d)
    }

    /// `E[g(X)]` by the trapezoid rule on a refined grid.
    pub fn emarginal(&self, g: impl Fn(f64) -> f64) -> f64 {
        let xs = self.refined(REFINE);
        let ds: Vec<f64> = xs.iter().map(|&t| self.dmarginal(t)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        let mut prev = (xs[0], g(xs[0]) * ds[0], ds[0]);
        for (&t, &d) in xs.iter().zip(&ds).skip(1) {
            let gd = g(t) * d;
            let h = t - prev.0;
            num += 0.5 * h * (gd + prev.1);
            den += 0.5 * h * (d + prev.2);
            prev = (t, gd, d);
        }
        num / den
    }

    /// Shortest interval with mass `level`, assuming a unimodal density.
    pub fn hpdmarginal(&self, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::Domain(format!("HPD level {level} outside (0, 1]")));
        }
        let (lo, hi) = self.support();
        if level >= 1.0 {
            return Ok((lo, hi));
        }
        let xs = self.refined(16);
        let ds: Vec<f64> = xs.iter().map(|&t| self.dmarginal(t)).collect();
        let dmax = ds.iter().cloned().fold(0.0, f64::max);
        let region = |k: f64| -> Result<(f64, f64)> {
            let mut runs = Vec::new();
            let mut start = None;
            for i in 0..xs.len() {
                let inside = ds[i] >= k;
                match (inside, start) {
                    (true, None) => start = Some(i),
                    (false, Some(s)) => {
                        runs.push((s, i - 1));
                        start = None;
                    }
                    _ => {}
                }
            }
            if let Some(s) = start {
                runs.push((s, xs.len() - 1));
            }
            if runs.len() > 1 {
                return Err(Error::Multimodal);
            }
            let (s, e) = runs[0];
            let cross = |i: usize, j: usize| -> f64 {
                // linear crossing between grid points i (outside) and j (inside)
                let (x0, x1, d0, d1) = (xs[i], xs[j], ds[i], ds[j]);
                if d1 == d0 {
                    x1
                } else {
                    x0 + (k - d0) / (d1 - d0) * (x1 - x0)
                }
            };
            let a = if s == 0 { xs[0] } else { cross(s - 1, s) };
            let b = if e == xs.len() - 1 {
                xs[e]
            } else {
                cross(e + 1, e)
            };
            Ok((a, b))
        };
        let (mut klo, mut khi) = (0.0, dmax);
        let mut best = (lo, hi);
        for _ in 0..200 {
            let k = 0.5 * (klo + khi);
            let (a, b) = region(k)?;
            let mass = self.pmarginal(b) - self.pmarginal(a);
            best = (a, b);
            if (mass - level).abs() < 1e-9 {
                break;
            }
            if mass > level {
                klo = k;
            } else {
                khi = k;
            }
        }
        Ok(best)
    }

    pub fn zmarginal(&self) -> Result<Summary> {
        let mean = self.emarginal(|t| t);
        let var = self.emarginal(|t| (t - mean).powi(2)).max(0.0);
        Ok(Summary {
            mean,
            sd: var.sqrt(),
            median: self.qmarginal(0.5)?,
            q025: self.qmarginal(0.025)?,
            q975: self.qmarginal(0.975)?,
        })
    }

    /// Posterior mode: argmax of the interpolant, refined by golden section.
    pub fn mmarginal(&self) -> f64 {
        let xs = self.refined(8);
        let (imax, _) = xs.iter().map(|&t| self.pchip.eval(t)).enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
        let mut a = xs[imax.saturating_sub(1)];
        let mut b = xs[(imax + 1).min(xs.len() - 1)];
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        for _ in 0..100 {
            if self.pchip.eval(c) > self.pchip.eval(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - gr * (b - a);
            d = a + gr * (b - a);
        }
        0.5 * (a + b)
    }

    /// `n` draws by inverse-transform sampling from a ChaCha8 stream seeded with `seed`.
    pub fn rmarginal(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                self.qmarginal(u).expect("u in [0, 1)")
            })
            .collect()
    }

    /// Knots plus `factor − 1` equispaced points inside every interval.
    fn refined(&self, factor: usize) -> Vec<f64> {
        let x = self.x();
        let mut out = Vec::with_capacity((x.len() - 1) * factor + 1);
        for w in x.windows(2) {
            for j in 0..factor {
                out.push(w[0] + (w[1] - w[0]) * j as f64 / factor as f64);
            }
        }
        out.push(*x.last().unwrap());
        out
    }

    /// Two-column CSV with header `x,density`, 12 significant digits.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["x", "density"])?;
        for (x, d) in self.x().iter().zip(self.density()) {
            wtr.write_record([fmt_sig(*x, 12), fmt_sig(*d, 12)])?;
        }
        wtr.flush().map_err(|e| Error::io("<marginal>", e))?;
        Ok(())
    }

    /// Reads a two-column `(x, density)` CSV; a non-numeric first row is taken as a header.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut x = Vec::new();
        let mut d = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Data(format!(
                    "marginal file row {} has {} fields, expected 2",
                    i + 1,
                    rec.len()
                )));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    x.push(a);
                    d.push(b);
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::Data(format!(
                        "marginal file row {} is not numeric",
                        i + 1
                    )))
                }
            }
        }
        Marginal::new(x, d).map_err(|e| Error::Data(format!("malformed marginal: {e}")))
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

// Free-function spellings of the toolkit.

pub fn dmarginal(x: f64, m: &Marginal) -> f64 {
    m.dmarginal(x)
}

pub fn pmarginal(x: f64, m: &Marginal) -> f64 {
    m.pmarginal(x)
}

pub fn qmarginal(p: f64, m: &Marginal) -> Result<f64> {
    m.qmarginal(p)
}

pub fn tmarginal(g: impl Fn(f64) -> f64, m: &Marginal) -> Result<Marginal> {
    m.tmarginal(g)
}

pub fn emarginal(g: impl Fn(f64) -> f64, m: &Marginal) -> f64 {
    m.emarginal(g)
}

pub fn hpdmarginal(level: f64, m: &Marginal) -> Result<(f64, f64)> {
    m.hpdmarginal(level)
}

pub fn zmarginal(m: &Marginal) -> Result<Summary> {
    m.zmarginal()
}

pub fn mmarginal(m: &Marginal) -> f64 {
    m.mmarginal()
}

pub fn rmarginal(n: usize, m: &Marginal, seed: u64) -> Vec<f64> {
    m.rmarginal(n, seed)
}
