//! Plot-ready tables derived from the outputs of earlier runs.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::foliation::csv_err;
use crate::hull::HullFunction;

use super::config::RunConfig;
use super::{write_file, EXIT_PASS};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        if !path.exists() {
            return Err(Error::MissingInput(path.display().to_string()));
        }
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()
            .map_err(csv_err)?;
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str, path: &Path) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("{} has no column `{name}`", path.display())))
    }
}

fn num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("not a number: `{s}`")))
}

fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_file(path, &bytes)
}

/// Writes `plot_ordering_margin.csv`, `plot_gamma_vs_window.csv` and, when a
/// hull file is present, `plot_hull_section.csv`.
pub fn cmd_report(cfg: &RunConfig) -> Result<i32> {
    let out = &cfg.output;
    let fol_path = out.join("foliation.csv");
    let gs_path = out.join("groundstate.csv");
    let fol = Table::read(&fol_path)?;
    let gs = Table::read(&gs_path)?;

    let (cb, cm) = (fol.col("beta", &fol_path)?, fol.col("ordering_margin", &fol_path)?);
    let mut margin_rows = Vec::new();
    for w in fol.rows.windows(2) {
        if w[0][cm].is_empty() {
            continue;
        }
        let (b0, b1) = (num(&w[0][cb])?, num(&w[1][cb])?);
        let m = num(&w[0][cm])?;
        margin_rows.push(vec![
            w[0][cb].clone(),
            w[1][cb].clone(),
            w[0][cm].clone(),
            (m / (b1 - b0)).to_string(),
        ]);
    }
    write_rows(
        &out.join("plot_ordering_margin.csv"),
        &["beta", "beta_next", "ordering_margin", "margin_per_beta"],
        &margin_rows,
    )?;

    let cw = gs.col("window_size", &gs_path)?;
    let cg = gs.col("gamma_star", &gs_path)?;
    let cs = gs.col("stationarity", &gs_path)?;
    let cv = gs.col("verdict", &gs_path)?;
    // window size -> (rows, gamma max, gamma min, stationarity max, failures)
    let mut agg: BTreeMap<u64, (usize, f64, f64, f64, usize)> = BTreeMap::new();
    for r in &gs.rows {
        let w: u64 = r[cw]
            .parse()
            .map_err(|_| Error::Format(format!("bad window size `{}`", r[cw])))?;
        let (g, s) = (num(&r[cg])?, num(&r[cs])?);
        let e = agg
            .entry(w)
            .or_insert((0, f64::NEG_INFINITY, f64::INFINITY, 0.0, 0));
        e.0 += 1;
        e.1 = e.1.max(g);
        e.2 = e.2.min(g);
        e.3 = e.3.max(s);
        e.4 += usize::from(r[cv] != "pass");
    }
    let gamma_rows: Vec<Vec<String>> = agg
        .iter()
        .map(|(w, a)| {
            vec![
                w.to_string(),
                a.0.to_string(),
                a.1.to_string(),
                a.2.to_string(),
                a.3.to_string(),
                a.4.to_string(),
            ]
        })
        .collect();
    write_rows(
        &out.join("plot_gamma_vs_window.csv"),
        &["window_size", "betas", "gamma_max", "gamma_min", "stationarity_max", "failures"],
        &gamma_rows,
    )?;

    let hull_path = cfg.hull_path();
    if hull_path.exists() {
        let h = HullFunction::load(&hull_path)?;
        let n = cfg.report.section_points.max(2);
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let theta: Vec<f64> = h.alpha().iter().map(|a| (x * a).rem_euclid(1.0)).collect();
                vec![
                    x.to_string(),
                    h.eval(&theta).to_string(),
                    (1.0 + h.d_alpha(&theta)).to_string(),
                ]
            })
            .collect();
        write_rows(
            &out.join("plot_hull_section.csv"),
            &["x", "h", "monotonicity_margin"],
            &rows,
        )?;
    }
    println!("report tables written to {}", out.display());
    Ok(EXIT_PASS)
}
