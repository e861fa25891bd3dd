//! File writers. Numbers in CSV go through [`num`], which always prints 12
//! significant digits, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use synfreq::analysis::BandMap;
use synfreq::protocols::PopulationMap;

use crate::error::CliResult;
use crate::viridis;

pub fn num(x: f64) -> String {
    if x == 0.0 {
        // also folds -0
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// Files written so far, relative to the output directory.
#[derive(Debug, Default, Clone, Serialize, PartialEq)]
pub struct OutputEntry {
    pub kind: String,
    pub path: String,
}

pub struct OutputDir {
    root: PathBuf,
    pub written: Vec<OutputEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn add(&mut self, kind: &str, name: &str) -> PathBuf {
        self.written.push(OutputEntry { kind: kind.to_string(), path: name.to_string() });
        self.root.join(name)
    }

    pub fn populations(&mut self, name: &str, map: &PopulationMap) -> CliResult<()> {
        let path = self.add("population_csv", name);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_us", "mode", "population", "p1_readout"])?;
        for (t, time) in map.times.iter().enumerate() {
            for (i, mode) in map.modes.iter().enumerate() {
                w.write_record([num(*time), mode.to_string(), num(map.p[(i, t)]), num(map.p1_readout[(i, t)])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn band(&mut self, name: &str, band: &BandMap) -> CliResult<()> {
        let path = self.add("band_csv", name);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["k", "omega_MHz", "intensity", "is_ridge"])?;
        for (i, k) in band.k_grid.iter().enumerate() {
            let ridge = ridge_index(band, i);
            for (j, omega) in band.omega_grid.iter().enumerate() {
                let flag = if j == ridge { "1" } else { "0" };
                w.write_record([num(*k), num(*omega), num(band.intensity[(i, j)]), flag.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Generic CSV with a header and pre-formatted rows.
    pub fn table(&mut self, kind: &str, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.add(kind, name);
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, kind: &str, name: &str, value: &T) -> CliResult<()> {
        let path = self.add(kind, name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn svg(&mut self, name: &str, svg: String) -> CliResult<()> {
        let path = self.add("svg", name);
        fs::write(path, svg)?;
        Ok(())
    }
}

/// Grid column of the strongest pixel in k-row `i`.
fn ridge_index(band: &BandMap, i: usize) -> usize {
    band.intensity.row(i).transpose().iamax()
}

/// Heatmap of `value(row, col)` with rows drawn bottom-up, normalised to the
/// largest entry.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    (n_rows, n_cols): (usize, usize),
    value: impl Fn(usize, usize) -> f64,
) -> String {
    let (cell_w, cell_h) =
        ((640.0 / n_cols.max(1) as f64).clamp(0.5, 12.0), (400.0 / n_rows.max(1) as f64).clamp(0.5, 12.0));
    let (left, top) = (60.0, 30.0);
    let width = left + cell_w * n_cols as f64 + 20.0;
    let height = top + cell_h * n_rows as f64 + 50.0;
    let max =
        (0..n_rows).flat_map(|r| (0..n_cols).map(move |c| (r, c))).map(|(r, c)| value(r, c)).fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="18" font-family="sans-serif" font-size="13">{title}</text>"#);
    for r in 0..n_rows {
        let y = top + cell_h * (n_rows - 1 - r) as f64;
        for c in 0..n_cols {
            let [red, green, blue] = viridis::color(value(r, c) * scale);
            let x = left + cell_w * c as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="#{red:02x}{green:02x}{blue:02x}"/>"##
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12" text-anchor="middle">{x_label}</text>"#,
        left + cell_w * n_cols as f64 / 2.0,
        height - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {:.1})" text-anchor="middle">{y_label}</text>"#,
        top + cell_h * n_rows as f64 / 2.0,
        top + cell_h * n_rows as f64 / 2.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.0), "0.00000000000e0");
        assert_eq!(num(0.1 + 0.2), "3.00000000000e-1");
        assert_eq!(num(-123456.789012345), "-1.23456789012e5");
    }

    #[test]
    fn heatmap_uses_the_colour_table() {
        let svg = heatmap("t", "x", "y", (2, 2), |r, c| (r * 2 + c) as f64);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("#440154") && svg.contains("#fde725"));
    }
}
