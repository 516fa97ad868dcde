use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const BUILD_ID: &str = concat!("ofdmlab-", env!("CARGO_PKG_VERSION"));

/// Named columns of reals, one row per sweep point, plus run metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    columns: Vec<(String, Vec<f64>)>,
    pub meta: BTreeMap<String, String>,
}

impl ResultTable {
    pub fn new(names: &[&str]) -> Self {
        ResultTable {
            columns: names.iter().map(|n| (n.to_string(), Vec::new())).collect(),
            meta: BTreeMap::new(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::invalid(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.1.push(v);
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.0.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::invalid("table has no columns"));
        }
        let n = self.rows();
        if self.columns.iter().any(|c| c.1.len() != n) {
            return Err(Error::invalid("columns differ in length"));
        }
        for key in ["config_hash", "seed", "build_id"] {
            if !self.meta.contains_key(key) {
                return Err(Error::invalid(format!("metadata is missing '{key}'")));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.names().join(",");
        s.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| format_real(c.1[r])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn meta_text(&self) -> String {
        self.meta
            .iter()
            .map(|(k, v)| {
                if v.contains('\n') {
                    format!("[{k}]\n{v}\n")
                } else {
                    format!("{k}={v}\n")
                }
            })
            .collect()
    }
}

/// Fifteen significant digits.
pub fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        format!("{v}")
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.with_extension("");
    let mut p = stem.into_os_string();
    p.push(suffix);
    PathBuf::from(p)
}

/// Writes `path` (CSV), `<stem>.meta.txt` and, with `plot`, one SVG per
/// column family. Returns every file written.
pub fn emit_outputs(table: &ResultTable, path: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    table.validate()?;
    write_file(path, &table.to_csv())?;
    let meta = with_suffix(path, ".meta.txt");
    write_file(&meta, &table.meta_text())?;
    let mut written = vec![path.to_path_buf(), meta];
    if plot {
        for (family, svg) in svg_plots(table) {
            let p = with_suffix(path, &format!("_{family}.svg"));
            write_file(&p, &svg)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Columns grouped by the prefix before the first underscore, excluding
/// the x column (the first column).
fn families(table: &ResultTable) -> BTreeMap<String, Vec<usize>> {
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (n, (name, _)) in table.columns.iter().enumerate().skip(1) {
        let fam = name.split('_').next().unwrap_or(name);
        if fam == "mse" || fam == "ber" || fam == "loss" {
            out.entry(fam.to_string()).or_default().push(n);
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line plots, log-scaled on y, with the first column on x.
pub fn svg_plots(table: &ResultTable) -> Vec<(String, String)> {
    let (w, h, m) = (640.0, 420.0, 60.0);
    let x = &table.columns[0].1;
    let mut out = Vec::new();
    for (fam, cols) in families(table) {
        let ys: Vec<f64> = cols
            .iter()
            .flat_map(|&c| table.columns[c].1.iter().copied())
            .filter(|v| *v > 0.0 && v.is_finite())
            .collect();
        let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
        let (ymin, ymax) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v.log10()), a.1.max(v.log10())));
        let (xmin, xmax) = if xmin < xmax { (xmin, xmax) } else { (xmin - 1.0, xmin + 1.0) };
        let (ymin, ymax) = if ymin.is_finite() && ymin < ymax {
            (ymin.floor(), ymax.ceil())
        } else {
            (-1.0, 1.0)
        };
        let px = |v: f64| m + (v - xmin) / (xmax - xmin) * (w - 2.0 * m);
        let py = |v: f64| h - m - (v.log10() - ymin) / (ymax - ymin) * (h - 2.0 * m);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            w - 2.0 * m,
            h - 2.0 * m
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            w / 2.0,
            h - 15.0,
            escape(&table.columns[0].0)
        );
        for d in ymin as i32..=ymax as i32 {
            let y = py(10f64.powi(d));
            let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">1e{d}</text>"#, m - 5.0);
        }
        for (n, &c) in cols.iter().enumerate() {
            let color = COLORS[n % COLORS.len()];
            let pts: Vec<String> = x
                .iter()
                .zip(&table.columns[c].1)
                .filter(|(_, v)| **v > 0.0 && v.is_finite())
                .map(|(&a, &b)| format!("{:.2},{:.2}", px(a), py(b)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                pts.join(" ")
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                m + 10.0,
                m + 18.0 * (n as f64 + 1.0),
                escape(&table.columns[c].0)
            );
        }
        s.push_str("</svg>\n");
        out.push((fam, s));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut t = ResultTable::new(&["snr_db", "mse_first", "mse_refined", "trials"]);
        t.push_row(&[0.0, 0.123456789012345678, 1.0 / 3.0, 500.0]).unwrap();
        t.push_row(&[10.0, 1.5e-7, 2.0e-7, 500.0]).unwrap();
        t.meta.insert("config_hash".into(), "abc".into());
        t.meta.insert("seed".into(), "4".into());
        t.meta.insert("build_id".into(), BUILD_ID.into());
        t
    }

    #[test]
    fn csv_round_trips_through_a_csv_reader() {
        let t = table();
        let csv_text = t.to_csv();
        let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), t.names());
        for (r, rec) in rdr.records().enumerate() {
            for (c, field) in rec.unwrap().iter().enumerate() {
                let v: f64 = field.parse().unwrap();
                let orig = t.columns[c].1[r];
                assert!((v - orig).abs() <= 1e-12 * orig.abs(), "{v} vs {orig}");
            }
        }
    }

    #[test]
    fn emits_csv_meta_and_well_formed_svg() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_outputs(&table(), &dir.path().join("mse.csv"), true).unwrap();
        assert_eq!(files.len(), 3);
        let meta = std::fs::read_to_string(&files[1]).unwrap();
        assert!(meta.contains("config_hash=abc"));
        let svg = std::fs::read_to_string(&files[2]).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    }

    #[test]
    fn invalid_tables_are_rejected() {
        let mut t = table();
        assert!(t.push_row(&[1.0]).is_err());
        t.meta.remove("seed");
        assert!(t.validate().is_err());
        assert!(ResultTable::default().validate().is_err());
    }
}
