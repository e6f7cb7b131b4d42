use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const METRICS_COLUMNS: [&str; 6] = ["domain", "method", "image", "psnr_db", "ssim", "seconds"];

/// Prefix of the `image` cell of a row recording a failed cell.
pub const ERROR_PREFIX: &str = "!error: ";

/// One evaluated image, or one failed `(domain, method)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub domain: String,
    pub method: String,
    pub image: String,
    /// Absent without ground truth or on error rows.
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl MetricsRow {
    pub fn error(domain: &str, method: &str, message: impl Into<String>) -> Self {
        Self {
            domain: domain.into(),
            method: method.into(),
            image: String::new(),
            psnr_db: None,
            ssim: None,
            seconds: 0.0,
            error: Some(message.into()),
        }
    }

    pub fn is_error(&self) -> bool {
        self.error.is_some()
    }
}

/// Mean metrics of one `(domain, method)` cell over its scored rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub domain: String,
    pub method: String,
    pub images: usize,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
    pub failed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsReport {
    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
    }

    /// Distinct `(domain, method)` pairs in order of first appearance.
    pub fn cells(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            if !out.iter().any(|(d, m)| *d == r.domain && *m == r.method) {
                out.push((r.domain.clone(), r.method.clone()));
            }
        }
        out
    }

    pub fn cell_rows<'a>(&'a self, domain: &'a str, method: &'a str) -> impl Iterator<Item = &'a MetricsRow> + 'a {
        self.rows.iter().filter(move |r| r.domain == domain && r.method == method)
    }

    pub fn cell_mean(&self, domain: &str, method: &str) -> CellMean {
        let rows: Vec<&MetricsRow> = self.cell_rows(domain, method).collect();
        let ok = || rows.iter().filter(|r| !r.is_error());
        CellMean {
            domain: domain.into(),
            method: method.into(),
            images: ok().count(),
            psnr_db: mean(ok().filter_map(|r| r.psnr_db)),
            ssim: mean(ok().filter_map(|r| r.ssim)),
            seconds: mean(ok().map(|r| r.seconds)).unwrap_or(0.0),
            failed: rows.iter().any(|r| r.is_error()),
        }
    }

    pub fn domain_means(&self) -> Vec<CellMean> {
        self.cells().into_iter().map(|(d, m)| self.cell_mean(&d, &m)).collect()
    }

    /// Mean of the per-domain means of `method` over `domains`.
    pub fn method_mean(&self, method: &str, domains: &[String]) -> Option<f64> {
        mean(domains.iter().filter_map(|d| self.cell_mean(d, method).psnr_db))
    }

    /// CSV with [`METRICS_COLUMNS`]. Seconds are written as zero unless
    /// `with_seconds`, so the file is reproducible byte for byte.
    pub fn to_csv(&self, with_seconds: bool) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::InvalidArgument(format!("csv: {e}"));
        w.write_record(METRICS_COLUMNS).map_err(csv_err)?;
        for r in &self.rows {
            let image = match &r.error {
                Some(e) => format!("{ERROR_PREFIX}{e}"),
                None => r.image.clone(),
            };
            let seconds = if with_seconds { r.seconds } else { 0.0 };
            w.write_record([
                r.domain.clone(),
                r.method.clone(),
                image,
                fmt_opt(r.psnr_db),
                fmt_opt(r.ssim),
                format!("{seconds:.6}"),
            ])
            .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let bad = |m: String| Error::InvalidArgument(format!("metrics csv: {m}"));
        let header = r.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(METRICS_COLUMNS) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let parse = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(format!("bad number `{s}`")))
            }
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let error = rec[2].strip_prefix(ERROR_PREFIX).map(str::to_string);
            rows.push(MetricsRow {
                domain: rec[0].to_string(),
                method: rec[1].to_string(),
                image: if error.is_some() { String::new() } else { rec[2].to_string() },
                psnr_db: parse(&rec[3])?,
                ssim: parse(&rec[4])?,
                seconds: parse(&rec[5])?.unwrap_or(0.0),
                error,
            });
        }
        Ok(Self { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, with_seconds: bool) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_csv(with_seconds)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(domain: &str, method: &str, image: &str, psnr: f64) -> MetricsRow {
        MetricsRow {
            domain: domain.into(),
            method: method.into(),
            image: image.into(),
            psnr_db: Some(psnr),
            ssim: Some(0.5),
            seconds: 1.25,
            error: None,
        }
    }

    #[test]
    fn means_are_arithmetic() {
        let mut r = MetricsReport::default();
        r.push(row("noise", "srtta", "a", 20.0));
        r.push(row("noise", "srtta", "b", 23.0));
        r.push(row("jpeg", "srtta", "a", 30.0));
        r.push(MetricsRow::error("jpeg", "tta-c", "boom"));
        let m = r.domain_means();
        assert_eq!(m.len(), 3);
        assert_eq!(m[0].psnr_db, Some(21.5));
        assert!(m[2].failed && m[2].psnr_db.is_none());
        assert_eq!(r.method_mean("srtta", &["noise".into(), "jpeg".into()]), Some(25.75));
    }

    #[test]
    fn csv_round_trip() {
        let mut r = MetricsReport::default();
        r.push(row("noise", "srtta", "img, 1", 20.123456));
        r.push(MetricsRow::error("jpeg", "tta-c", "bad, thing"));
        let bytes = r.to_csv(true).unwrap();
        assert!(String::from_utf8(bytes.clone()).unwrap().starts_with("domain,method,image,psnr_db,ssim,seconds\n"));
        let back = MetricsReport::from_csv(&bytes).unwrap();
        assert_eq!(back.rows, r.rows);
        let quiet = MetricsReport::from_csv(&r.to_csv(false).unwrap()).unwrap();
        assert_eq!(quiet.rows[0].seconds, 0.0);
    }
}
