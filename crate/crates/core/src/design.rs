//! Latent layout and observation design: turns a [`ModelSpec`] and a
//! [`DataTable`] into `η = A x` plus the component models.

use std::collections::BTreeMap;

use crate::data::DataTable;
use crate::error::{Error, Result};
use crate::families::Aux;
use crate::gmrf::{ComponentModel, ComponentOptions, Graph};
use crate::sparse::{SparseMatrix, SparseSym};
use crate::spec::{AuxSource, GraphSource, MatrixSource, ModelSpec, RandomComponent};

/// A contiguous run of latent entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// `x = (β, u⁽¹⁾, …, u⁽ᴷ⁾)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentLayout {
    pub n: usize,
    pub fixed: Block,
    /// Display names of the fixed effects; the intercept is `(Intercept)`.
    pub fixed_names: Vec<String>,
    pub components: Vec<Block>,
}

impl LatentLayout {
    /// Index of the latent entry called `name`: a fixed-effect name (or `1`
    /// for the intercept) or a component id, optionally with a 1-based index
    /// as in `idarea:3`.
    pub fn lookup(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let (base, idx) = match name.rsplit_once(':') {
            Some((b, i)) => (b, Some(i.parse::<usize>().ok()?)),
            None => (name, None),
        };
        let base = if base == "1" { "(Intercept)" } else { base };
        if let Some(k) = self.fixed_names.iter().position(|n| n == base) {
            return idx
                .is_none()
                .then(|| self.fixed.offset + k..self.fixed.offset + k + 1);
        }
        let b = self.components.iter().find(|b| b.name == base)?;
        match idx {
            None => Some(b.range()),
            Some(i) if i >= 1 && i <= b.len => Some(b.offset + i - 1..b.offset + i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignMatrices {
    /// Fixed-effect covariates by column, each of length `n_obs`.
    pub x: Vec<Vec<f64>>,
    /// Per-component maps, `n_obs × block length`.
    pub components: Vec<SparseMatrix>,
    /// `[X | A₁ | … | A_K]`, `n_obs × N`.
    pub a: SparseMatrix,
}

/// Everything the engine needs that is fixed once the data are known.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub layout: LatentLayout,
    pub design: DesignMatrices,
    pub components: Vec<ComponentModel>,
    /// Responses; NaN marks a prediction row.
    pub y: Vec<f64>,
    pub aux: Vec<Aux>,
    /// Prior precision of each fixed effect.
    pub fixed_prec: Vec<f64>,
}

/// Builds the layout and design of `spec` on `data`.
pub fn build_layout_and_design(
    spec: &ModelSpec,
    data: &DataTable,
) -> Result<(LatentLayout, DesignMatrices)> {
    let a = assemble(spec, data)?;
    Ok((a.layout, a.design))
}

pub fn assemble(spec: &ModelSpec, data: &DataTable) -> Result<Assembly> {
    spec.validate()?;
    let n_obs = data.n_rows();
    let y = data
        .column(&spec.response)
        .ok_or_else(|| Error::spec("response", format!("no column named `{}`", spec.response)))?
        .to_vec();

    let aux_col = |src: &Option<AuxSource>, key: &str| -> Result<Option<Vec<f64>>> {
        let v = match src {
            None => return Ok(None),
            Some(AuxSource::Column(c)) => data
                .complete_column(c)
                .map_err(|e| Error::spec(key, e.to_string()))?
                .to_vec(),
            Some(AuxSource::Values(v)) => v.clone(),
        };
        if v.len() != n_obs {
            return Err(Error::spec(
                key,
                format!("has {} values for {n_obs} observations", v.len()),
            ));
        }
        Ok(Some(v))
    };
    let e = aux_col(&spec.e, "E")?;
    let nt = aux_col(&spec.ntrials, "Ntrials")?;
    if let Some(v) = &e {
        if let Some(i) = v.iter().position(|x| !(*x > 0.0)) {
            return Err(Error::spec(
                "E",
                format!("value {} at row {} is not positive", v[i], i + 1),
            ));
        }
    }
    if let Some(v) = &nt {
        if let Some(i) = v.iter().position(|x| !(*x >= 1.0 && x.fract() == 0.0)) {
            return Err(Error::spec(
                "Ntrials",
                format!("value {} at row {} is not a positive integer", v[i], i + 1),
            ));
        }
    }
    let aux: Vec<Aux> = (0..n_obs)
        .map(|i| Aux {
            e: e.as_ref().map_or(1.0, |v| v[i]),
            ntrials: nt.as_ref().map_or(1.0, |v| v[i]),
        })
        .collect();
    for (i, (&yi, &ai)) in y.iter().zip(&aux).enumerate() {
        if !yi.is_nan() {
            spec.family
                .check(yi, ai)
                .map_err(|e| Error::Data(format!("row {}: {e}", i + 1)))?;
        }
    }

    let mut x = Vec::new();
    let mut fixed_names = Vec::new();
    let mut fixed_prec = Vec::new();
    for (k, t) in spec.fixed.iter().enumerate() {
        if t == "1" {
            x.push(vec![1.0; n_obs]);
            fixed_names.push("(Intercept)".to_string());
            fixed_prec.push(spec.control.fixed.prec_intercept);
        } else {
            let c = data
                .complete_column(t)
                .map_err(|e| Error::spec(format!("fixed[{k}]"), e.to_string()))?;
            x.push(c.to_vec());
            fixed_names.push(t.clone());
            fixed_prec.push(spec.control.fixed.prec);
        }
    }
    let p = x.len();

    let mut components = Vec::new();
    let mut maps = Vec::new();
    let mut blocks = Vec::new();
    let mut offset = p;
    for (k, c) in spec.random.iter().enumerate() {
        let (model, map) = component(spec, data, k, c)?;
        blocks.push(Block {
            name: c.id.clone(),
            offset,
            len: model.block_len(),
        });
        offset += model.block_len();
        components.push(model);
        maps.push(map);
    }
    let n = offset;

    let mut t = Vec::new();
    for (j, col) in x.iter().enumerate() {
        // zeros are kept so every row has the same fixed-effect pattern
        t.extend(col.iter().enumerate().map(|(i, &v)| (i, j, v)));
    }
    for (b, m) in blocks.iter().zip(&maps) {
        t.extend(m.iter().map(|(i, j, v)| (i, j + b.offset, v)));
    }
    let a = SparseMatrix::from_triplets(n_obs, n, &t)?;

    Ok(Assembly {
        layout: LatentLayout {
            n,
            fixed: Block {
                name: "fixed".into(),
                offset: 0,
                len: p,
            },
            fixed_names,
            components: blocks,
        },
        design: DesignMatrices {
            x,
            components: maps,
            a,
        },
        components,
        y,
        aux,
        fixed_prec,
    })
}

fn component(
    spec: &ModelSpec,
    data: &DataTable,
    k: usize,
    c: &RandomComponent,
) -> Result<(ComponentModel, SparseMatrix)> {
    let at = |key: &str| format!("random[{k}].{key}");
    let n_obs = data.n_rows();
    let graph = match &c.graph {
        None => None,
        Some(GraphSource::Path(p)) => Some(Graph::read(&spec.resolve_path(p))?),
        Some(GraphSource::Inline(nb)) => {
            let nb = nb
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|&j| {
                            j.checked_sub(1)
                                .ok_or_else(|| Error::spec(at("graph"), "labels are 1-based"))
                        })
                        .collect()
                })
                .collect::<Result<Vec<Vec<usize>>>>()?;
            Some(Graph::new(nb)?)
        }
    };
    let q = match &c.q {
        None => None,
        Some(src) => {
            Some(read_symmetric(spec, src, c.n).map_err(|e| Error::spec(at("Q"), e.to_string()))?)
        }
    };
    let a_local = match &c.a_local {
        None => None,
        Some(src) => {
            Some(read_triplets(spec, src).map_err(|e| Error::spec(at("A.local"), e.to_string()))?)
        }
    };

    let ids = if a_local.is_some() {
        None
    } else {
        let col = data
            .complete_column(&c.id)
            .map_err(|e| Error::spec(at("id"), e.to_string()))?;
        let mut ids = Vec::with_capacity(n_obs);
        for (i, &v) in col.iter().enumerate() {
            if !(v >= 1.0 && v.fract() == 0.0) {
                return Err(Error::spec(
                    at("id"),
                    format!(
                        "row {}: index {v} is not an integer ≥ 1 (ids are 1-based)",
                        i + 1
                    ),
                ));
            }
            ids.push(v as usize);
        }
        Some(ids)
    };

    let natural = match (&graph, &q) {
        (Some(g), _) => Some(g.n()),
        (_, Some(q)) => Some(q.n()),
        _ => None,
    };
    let m = match (natural, c.n) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::spec(
                at("n"),
                format!(
                    "is {b} but the {} has {a} nodes",
                    if graph.is_some() { "graph" } else { "Q matrix" }
                ),
            ))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => match (&ids, &a_local) {
            (Some(ids), _) => ids.iter().copied().max().unwrap_or(0),
            (None, Some(t)) => t.iter().map(|x| x.1).max().map_or(0, |j| j + 1),
            (None, None) => unreachable!("either ids or A.local is present"),
        },
    };
    if m == 0 {
        return Err(Error::spec(at("id"), "component has no levels"));
    }

    let opts = ComponentOptions {
        constr: c.constr,
        scale_model: c.scale_model,
        cyclic: c.cyclic,
        graph,
        q,
    };
    let model = ComponentModel::new(c.model, m, opts).map_err(|e| match e {
        Error::Domain(msg) => Error::spec(at("model"), msg),
        other => other,
    })?;
    let block_len = model.block_len();

    let map = match (ids, a_local) {
        (Some(ids), _) => {
            let mut t = Vec::with_capacity(n_obs);
            for (i, id) in ids.into_iter().enumerate() {
                if id > m {
                    return Err(Error::spec(
                        at("id"),
                        format!("row {}: index {id} exceeds the component size {m}", i + 1),
                    ));
                }
                t.push((i, id - 1, 1.0));
            }
            SparseMatrix::from_triplets(n_obs, block_len, &t)?
        }
        (None, Some(t)) => {
            if let Some(&(i, j, _)) = t.iter().find(|&&(i, j, _)| i >= n_obs || j >= m) {
                return Err(Error::spec(
                    at("A.local"),
                    format!("entry ({}, {}) is outside {n_obs} × {m}", i + 1, j + 1),
                ));
            }
            SparseMatrix::from_triplets(n_obs, block_len, &t)?
        }
        (None, None) => unreachable!(),
    };
    Ok((model, map))
}

/// 0-based triplets from a 1-based source.
fn read_triplets(spec: &ModelSpec, src: &MatrixSource) -> Result<Vec<(usize, usize, f64)>> {
    let raw: Vec<(f64, f64, f64)> = match src {
        MatrixSource::Triplets(t) => t.iter().map(|&(i, j, v)| (i as f64, j as f64, v)).collect(),
        MatrixSource::Path(p) => {
            let t = DataTable::load(&spec.resolve_path(p))?;
            let i = t.complete_column("i")?;
            let j = t.complete_column("j")?;
            let x = t.complete_column("x")?;
            (0..t.n_rows()).map(|r| (i[r], j[r], x[r])).collect()
        }
    };
    raw.into_iter()
        .map(|(i, j, v)| {
            if i >= 1.0 && j >= 1.0 && i.fract() == 0.0 && j.fract() == 0.0 && v.is_finite() {
                Ok((i as usize - 1, j as usize - 1, v))
            } else {
                Err(Error::Data(format!(
                    "bad triplet ({i}, {j}, {v}); indices are 1-based"
                )))
            }
        })
        .collect()
}

/// A symmetric matrix given by either triangle or both (which must agree).
fn read_symmetric(spec: &ModelSpec, src: &MatrixSource, n: Option<usize>) -> Result<SparseSym> {
    let t = read_triplets(spec, src)?;
    let mut lower: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, j, v) in t {
        let key = (i.max(j), i.min(j));
        match lower.get(&key) {
            Some(&w) if w != v => {
                return Err(Error::Data(format!(
                    "entries ({}, {}) and ({}, {}) disagree",
                    key.0 + 1,
                    key.1 + 1,
                    key.1 + 1,
                    key.0 + 1
                )))
            }
            _ => {
                lower.insert(key, v);
            }
        }
    }
    let size = lower
        .keys()
        .map(|k| k.0 + 1)
        .max()
        .unwrap_or(0)
        .max(n.unwrap_or(0));
    let t: Vec<_> = lower.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    SparseSym::from_triplets(size, &t)
}
