//! Support points for integrating over θ.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Step in standardised coordinates.
    pub dz: f64,
    /// Points whose log-density is this far below the mode are dropped.
    pub diff_logdens: f64,
    /// Longest walk along one direction of an axis.
    pub max_steps: i32,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            dz: 0.75,
            diff_logdens: 3.0,
            max_steps: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridPoint<T> {
    pub theta: Vec<f64>,
    /// Integer offsets along each eigen-direction; `z = dz · index`.
    pub index: Vec<i32>,
    pub z: Vec<f64>,
    pub log_post: f64,
    pub weight: f64,
    pub payload: T,
}

/// Weighted hyperparameter support points around the mode.
#[derive(Debug, Clone)]
pub struct ThetaGrid<T> {
    pub mode: Vec<f64>,
    /// Negative Hessian of `log π̃(θ | y)` at the mode.
    pub hessian: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors of `hessian`.
    pub eigenvectors: DMatrix<f64>,
    pub dz: f64,
    pub points: Vec<GridPoint<T>>,
}

impl<T> ThetaGrid<T> {
    pub fn dim(&self) -> usize {
        self.mode.len()
    }

    /// `θ(z) = θ* + V Λ^{−1/2} z`.
    pub fn theta_at(&self, z: &[f64]) -> Vec<f64> {
        theta_at(&self.mode, &self.scaling(), z)
    }

    /// `V Λ^{−1/2}`; column `l` is the θ-displacement of a unit step in `z_l`.
    pub fn scaling(&self) -> DMatrix<f64> {
        scaling(&self.eigenvectors, &self.eigenvalues)
    }

    /// Log volume of one grid cell in θ space: `p log δz − ½ Σ log λ_l`.
    pub fn log_cell_volume(&self) -> f64 {
        self.dim() as f64 * self.dz.ln()
            - 0.5 * self.eigenvalues.iter().map(|l| l.ln()).sum::<f64>()
    }

    /// Whether the grid is the full tensor product rather than axes only.
    pub fn is_tensor(&self) -> bool {
        self.dim() <= 2
    }

    pub fn mode_point(&self) -> &GridPoint<T> {
        self.points
            .iter()
            .find(|p| p.index.iter().all(|&i| i == 0))
            .expect("the mode is always a grid point")
    }

    pub fn map_payload<U>(self, f: impl Fn(T) -> U) -> ThetaGrid<U> {
        ThetaGrid {
            mode: self.mode,
            hessian: self.hessian,
            eigenvalues: self.eigenvalues,
            eigenvectors: self.eigenvectors,
            dz: self.dz,
            points: self
                .points
                .into_iter()
                .map(|p| GridPoint {
                    theta: p.theta,
                    index: p.index,
                    z: p.z,
                    log_post: p.log_post,
                    weight: p.weight,
                    payload: f(p.payload),
                })
                .collect(),
        }
    }
}

fn scaling(v: &DMatrix<f64>, lambda: &[f64]) -> DMatrix<f64> {
    let mut s = v.clone();
    for (l, &lam) in lambda.iter().enumerate() {
        s.column_mut(l).scale_mut(1.0 / lam.sqrt());
    }
    s
}

fn theta_at(mode: &[f64], s: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    let t = DVector::from_column_slice(mode) + s * DVector::from_column_slice(z);
    t.as_slice().to_vec()
}

/// Explores `eval` around `mode` and returns the retained points with normalised weights.
///
/// `eval(θ)` returns `log π̃(θ | y)` and a payload kept for retained points.
/// The mode itself must evaluate successfully; elsewhere a failure ends the walk.
pub fn build_grid<T, F>(
    mode: &[f64],
    hessian: &DMatrix<f64>,
    opts: &GridOptions,
    eval: F,
) -> Result<ThetaGrid<T>>
where
    T: Send,
    F: Fn(&[f64]) -> Result<(f64, T)> + Sync,
{
    let p = mode.len();
    let (eigenvalues, eigenvectors) = if p == 0 {
        (Vec::new(), DMatrix::zeros(0, 0))
    } else {
        let e = hessian.clone().symmetric_eigen();
        if e.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Domain(
                "the Hessian at the mode is not positive definite".into(),
            ));
        }
        (e.eigenvalues.as_slice().to_vec(), e.eigenvectors)
    };
    let s = scaling(&eigenvectors, &eigenvalues);
    let at_index = |idx: &[i32]| -> Vec<f64> {
        let z: Vec<f64> = idx.iter().map(|&i| i as f64 * opts.dz).collect();
        theta_at(mode, &s, &z)
    };

    let (lp0, payload0) = eval(mode)?;
    let cutoff = lp0 - opts.diff_logdens;
    let mut found: BTreeMap<Vec<i32>, (f64, T)> = BTreeMap::new();

    // walk each half-axis outwards until the drop exceeds the cutoff
    let walks: Vec<(usize, i32, Vec<(i32, f64, T)>)> = (0..p)
        .flat_map(|l| [(l, 1), (l, -1)])
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(l, dir)| {
            let mut kept = Vec::new();
            for k in 1..=opts.max_steps {
                let mut idx = vec![0; p];
                idx[l] = dir * k;
                match eval(&at_index(&idx)) {
                    Ok((lp, t)) if lp.is_finite() && lp > cutoff => kept.push((dir * k, lp, t)),
                    _ => break,
                }
            }
            (l, dir, kept)
        })
        .collect();
    let mut lo = vec![0; p];
    let mut hi = vec![0; p];
    for (l, dir, kept) in walks {
        for (k, lp, t) in kept {
            if dir > 0 {
                hi[l] = hi[l].max(k);
            } else {
                lo[l] = lo[l].min(k);
            }
            let mut idx = vec![0; p];
            idx[l] = k;
            found.insert(idx, (lp, t));
        }
    }
    found.insert(vec![0; p], (lp0, payload0));

    if p == 2 {
        let off_axis: Vec<Vec<i32>> = (lo[0]..=hi[0])
            .flat_map(|a| (lo[1]..=hi[1]).map(move |b| vec![a, b]))
            .filter(|idx| idx[0] != 0 && idx[1] != 0)
            .collect();
        let extra: Vec<(Vec<i32>, Option<(f64, T)>)> = off_axis
            .into_par_iter()
            .map(|idx| {
                let r = match eval(&at_index(&idx)) {
                    Ok((lp, t)) if lp.is_finite() && lp > cutoff => Some((lp, t)),
                    _ => None,
                };
                (idx, r)
            })
            .collect();
        for (idx, r) in extra {
            if let Some(v) = r {
                found.insert(idx, v);
            }
        }
    }

    let max_lp = found
        .values()
        .map(|v| v.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = found.values().map(|v| (v.0 - max_lp).exp()).sum();
    let points = found
        .into_iter()
        .map(|(index, (log_post, payload))| GridPoint {
            theta: at_index(&index),
            z: index.iter().map(|&i| i as f64 * opts.dz).collect(),
            index,
            log_post,
            weight: (log_post - max_lp).exp() / total,
            payload,
        })
        .collect();
    Ok(ThetaGrid {
        mode: mode.to_vec(),
        hessian: hessian.clone(),
        eigenvalues,
        eigenvectors,
        dz: opts.dz,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_axis_stops_inside_the_cutoff() {
        let h = DMatrix::from_element(1, 1, 4.0);
        let g = build_grid(&[1.0], &h, &GridOptions::default(), |t: &[f64]| {
            Ok((-2.0 * (t[0] - 1.0).powi(2), ()))
        })
        .unwrap();
        let z: Vec<f64> = g.points.iter().map(|p| p.z[0]).collect();
        assert_eq!(z, vec![-2.25, -1.5, -0.75, 0.0, 0.75, 1.5, 2.25]);
        let s: f64 = g.points.iter().map(|p| p.weight).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!((g.points[0].weight - g.points[6].weight).abs() < 1e-15);
    }

    #[test]
    fn no_hyperparameters_gives_one_point() {
        let g = build_grid(
            &[],
            &DMatrix::zeros(0, 0),
            &GridOptions::default(),
            |_: &[f64]| Ok((-3.0, ())),
        )
        .unwrap();
        assert_eq!(g.points.len(), 1);
        assert_eq!(g.points[0].weight, 1.0);
    }
}
