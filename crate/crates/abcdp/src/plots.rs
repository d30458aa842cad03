//! Plot-ready CSV files derived from a results directory.
//!
//! | kind             | needs mode                           | files                                      |
//! |------------------|--------------------------------------|--------------------------------------------|
//! | `fig1`           | `flip_grid`                          | `fig1.csv`: `N,c,epsilon_total,mean_flip_prob` |
//! | `fig2`           | `paired_benchmark`                   | `fig2_c{c}.csv`: `epsilon_abc,epsilon_total,resample,mse_mean,mse_stderr` |
//! | `posterior_hist` | `dp_run`, `paired_benchmark`, `bounds_report` | `posterior_hist.csv`: one row per accepted θ per parameter |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::Mode;
use crate::error::{HarnessError, Result};
use crate::harness::files;
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Fig1,
    Fig2,
    PosteriorHist,
}

impl PlotKind {
    fn accepts(self, mode: Mode) -> bool {
        match self {
            PlotKind::Fig1 => mode == Mode::FlipGrid,
            PlotKind::Fig2 => mode == Mode::PairedBenchmark,
            PlotKind::PosteriorHist => mode != Mode::FlipGrid,
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::Fig1 => "fig1",
            PlotKind::Fig2 => "fig2",
            PlotKind::PosteriorHist => "posterior_hist",
        })
    }
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(PlotKind::Fig1),
            "fig2" => Ok(PlotKind::Fig2),
            "posterior_hist" => Ok(PlotKind::PosteriorHist),
            _ => Err(HarnessError::Usage(format!("unknown plot kind {s:?}; expected fig1, fig2 or posterior_hist"))),
        }
    }
}

/// The mode recorded in `results.json`.
pub fn results_mode(results: &Path) -> Result<Mode> {
    let path = results.join(files::RESULTS);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    #[derive(serde::Deserialize)]
    struct Head {
        mode: Mode,
    }
    let head: Head = serde_json::from_str(&text)
        .map_err(|source| HarnessError::Json { context: path.display().to_string(), source })?;
    Ok(head.mode)
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| HarnessError::validation(path.display().to_string(), format!("missing column {name}")))
}

/// Writes the plot data of `kind` from `results` into `out`.
pub fn emit_plot_data(results: &Path, kind: PlotKind, out: &Path) -> Result<Vec<PathBuf>> {
    let mode = results_mode(results)?;
    if !kind.accepts(mode) {
        return Err(HarnessError::Usage(format!("plot kind {kind} cannot be made from {} results", mode.as_str())));
    }
    match kind {
        PlotKind::Fig1 => {
            let src = results.join(files::FLIP_GRID);
            let (header, rows) = io::read_table(&src)?;
            let cols = ["N", "c", "epsilon_total", "mean_flip_prob"]
                .map(|name| column(&header, name, &src))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<String>> = rows.iter().map(|r| cols.iter().map(|&i| r[i].clone()).collect()).collect();
            let dst = out.join("fig1.csv");
            io::write_table(&dst, &["N", "c", "epsilon_total", "mean_flip_prob"], &rows)?;
            Ok(vec![dst])
        }
        PlotKind::Fig2 => {
            let src = results.join(files::METRICS);
            let (header, rows) = io::read_table(&src)?;
            let c_col = column(&header, "c", &src)?;
            let cols = ["epsilon_abc", "epsilon_total", "resample", "mse_mean", "mse_stderr"]
                .map(|name| column(&header, name, &src))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let mut by_c: BTreeMap<usize, Vec<Vec<String>>> = BTreeMap::new();
            for r in &rows {
                let c = r[c_col].parse::<usize>().map_err(|_| {
                    HarnessError::validation(src.display().to_string(), format!("bad c value {:?}", r[c_col]))
                })?;
                by_c.entry(c).or_default().push(cols.iter().map(|&i| r[i].clone()).collect());
            }
            let mut written = Vec::new();
            for (c, rows) in by_c {
                let dst = out.join(format!("fig2_c{c}.csv"));
                io::write_table(&dst, &["epsilon_abc", "epsilon_total", "resample", "mse_mean", "mse_stderr"], &rows)?;
                written.push(dst);
            }
            Ok(written)
        }
        PlotKind::PosteriorHist => {
            let src = results.join(files::ACCEPTED);
            let (header, rows) = io::read_table(&src)?;
            let t_col = column(&header, "t", &src)?;
            let params: Vec<(usize, &str)> = header
                .iter()
                .enumerate()
                .filter_map(|(i, h)| h.strip_prefix("theta_").map(|j| (i, j)))
                .collect();
            let mut out_rows = Vec::with_capacity(rows.len() * params.len());
            for r in &rows {
                for (i, j) in &params {
                    let mut row: Vec<String> = r[..=t_col].to_vec();
                    row.push((*j).to_owned());
                    row.push(r[*i].clone());
                    out_rows.push(row);
                }
            }
            let mut h: Vec<&str> = header[..=t_col].iter().map(String::as_str).collect();
            h.extend(["parameter", "value"]);
            let dst = out.join("posterior_hist.csv");
            io::write_table(&dst, &h, &out_rows)?;
            Ok(vec![dst])
        }
    }
}
