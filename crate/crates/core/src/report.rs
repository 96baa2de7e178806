//! Result artifacts written by the command-line tool.
//!
//! Every file is produced on the calling thread in a fixed order, and numbers
//! are formatted with a fixed number of significant digits, so identical
//! inputs give byte-identical files whatever the parallelism width.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::{FitResult, SummaryRow};
use crate::error::{Error, Result};
use crate::marginals::Marginal;
use crate::sampler::{hyperpar_sample, posterior_sample, HyperSampleOptions};
use crate::util::fmt_sig;

/// Significant digits in summary tables, grids and samples.
pub const SUMMARY_DIGITS: usize = 6;
/// Significant digits in marginal density files.
pub const MARGINAL_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    /// Number of posterior draws to write; none when zero.
    pub samples: usize,
    pub seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        fmt_sig(v, SUMMARY_DIGITS)
    }
}

/// File-name safe version of a row or parameter name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_summary(path: &Path, lead: &[&str], rows: &[(Vec<String>, &SummaryRow)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(
        lead.iter()
            .copied()
            .chain(["name"])
            .chain(SummaryRow::HEADER),
    )?;
    for (keys, row) in rows {
        let rec: Vec<String> = keys
            .iter()
            .cloned()
            .chain([row.name.clone()])
            .chain(row.values().iter().map(|&v| num(v)))
            .collect();
        w.write_record(rec)?;
    }
    finish(w, path)
}

fn write_marginal(dir: &Path, stem: &str, m: &Marginal) -> Result<()> {
    let path = dir.join(format!("{}.csv", file_stem(stem)));
    let mut f = create(&path)?;
    m.write_csv(&mut f)?;
    f.flush().map_err(|e| Error::io(&path, e))
}

/// Writes the summaries, marginals, diagnostics, grid and (optionally)
/// samples of `fit` into `out`, returning the files written.
pub fn write_fit(fit: &FitResult, out: &Path, opts: &ReportOptions) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let mut path = |name: &str| -> PathBuf {
        written.push(out.join(name));
        out.join(name)
    };

    let fixed: Vec<_> = fit.summary_fixed.iter().map(|r| (vec![], r)).collect();
    write_summary(&path("summary_fixed.csv"), &[], &fixed)?;
    let random: Vec<_> = fit
        .summary_random
        .iter()
        .flat_map(|s| s.rows.iter().map(move |r| (vec![s.id.clone()], r)))
        .collect();
    write_summary(&path("summary_random.csv"), &["id"], &random)?;
    let hyper: Vec<_> = fit.summary_hyperpar.iter().map(|r| (vec![], r)).collect();
    write_summary(&path("summary_hyperpar.csv"), &[], &hyper)?;
    let fitted: Vec<_> = fit.summary_fitted.iter().map(|r| (vec![], r)).collect();
    write_summary(&path("summary_fitted.csv"), &[], &fitted)?;

    if fit.model.spec.control.compute.return_marginals {
        let dir = path("marginals");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let m = &fit.marginals;
        for (name, marg) in &m.fixed {
            write_marginal(&dir, &format!("fixed.{name}"), marg)?;
        }
        for (id, margs) in &m.random {
            for (k, marg) in margs.iter().enumerate() {
                write_marginal(&dir, &format!("random.{id}.{}", k + 1), marg)?;
            }
        }
        for (name, marg) in &m.hyperpar {
            write_marginal(&dir, &format!("hyperpar.{name}"), marg)?;
        }
        for (row, marg) in fit.summary_fitted.iter().zip(&m.fitted) {
            write_marginal(&dir, &row.name, marg)?;
        }
    }

    let d = &fit.diagnostics;
    let diag = serde_json::json!({
        "mlik": d.mlik,
        "dic": d.dic,
        "waic": d.waic,
        "cpo_failures": d.cpo.as_ref().map(|c| c.iter().filter(|c| c.failure).count()),
        "used_safe_mode": fit.used_safe_mode,
        "grid_points": fit.grid.points.len(),
        "mode_iterations": fit.mode.iterations,
    });
    let p = path("diagnostics.json");
    let mut f = create(&p)?;
    serde_json::to_writer_pretty(&mut f, &diag)?;
    writeln!(f)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(&p, e))?;

    if let Some(cpo) = &d.cpo {
        let p = path("cpo.csv");
        let mut w = csv_writer(&p)?;
        w.write_record(["index", "cpo", "failure"])?;
        for (i, c) in cpo.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                c.cpo.map_or("NA".into(), num),
                u8::from(c.failure).to_string(),
            ])?;
        }
        finish(w, &p)?;
    }

    let labels: Vec<String> = fit.model.free_hypers().map(|h| h.label.clone()).collect();
    let p = path("grid.csv");
    let mut w = csv_writer(&p)?;
    let zs = (1..=labels.len()).map(|l| format!("z{l}"));
    let header: Vec<String> = labels
        .iter()
        .map(|l| format!("theta:{l}"))
        .chain(zs)
        .chain(["log_post".into(), "weight".into()])
        .collect();
    w.write_record(&header)?;
    for pt in &fit.grid.points {
        let rec: Vec<String> = pt
            .theta
            .iter()
            .chain(&pt.z)
            .chain([&pt.log_post, &pt.weight])
            .map(|&v| num(v))
            .collect();
        w.write_record(rec)?;
    }
    finish(w, &p)?;

    if opts.samples > 0 {
        let draws = hyperpar_sample(opts.samples, fit, opts.seed, HyperSampleOptions::default());
        let p = path("hyperpar_samples.csv");
        let mut w = csv_writer(&p)?;
        w.write_record(&labels)?;
        for d in &draws {
            w.write_record(d.iter().map(|&v| num(v)))?;
        }
        finish(w, &p)?;

        if fit.has_config() {
            let samples = posterior_sample(opts.samples, fit, opts.seed)?;
            let p = path("samples.csv");
            let mut w = csv_writer(&p)?;
            let header: Vec<String> = labels
                .iter()
                .map(|l| format!("theta:{l}"))
                .chain(latent_names(fit))
                .collect();
            w.write_record(&header)?;
            for s in &samples {
                let theta = s.theta.iter().map(|&v| num(v));
                w.write_record(theta.chain(s.x.iter().map(|&v| num(v))))?;
            }
            finish(w, &p)?;
        }
    }
    Ok(written)
}

/// Column names of the latent vector: fixed effects by name, then
/// `id:k` for each random-effect element.
pub fn latent_names(fit: &FitResult) -> Vec<String> {
    let layout = &fit.model.asm.layout;
    let mut names = layout.fixed_names.clone();
    for b in &layout.components {
        names.extend((1..=b.len).map(|k| format!("{}:{k}", b.name)));
    }
    names
}
