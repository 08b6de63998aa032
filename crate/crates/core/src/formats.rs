//! On-disk formats. Mode labels in every file are 1-based; phases in files
//! are in units of pi.
//!
//! * matrix JSON: `{"rows", "cols", "polar", "scale"?, "entries"}` where each
//!   entry is `[re, im]` or, with `polar`, `[magnitude, phase_over_pi]`; all
//!   entries are multiplied by `scale` (default 1) on load.
//! * delay scan CSV `delay_ps,value` plus a `.meta.json` sidecar.
//! * singles CSV `output,input,counts`.
//! * visibility CSV `i,j,l,m,V,sigma,c0,cinf` (last three may be empty).
//! * tomography JSON: the matrix format plus `amplitude_sigma`,
//!   `phase_sigma_pi_units` and `resamples`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::PhotonConfiguration;
use crate::distinguishability::DelayScan;
use crate::error::{Error, Result};
use crate::matrix::{from_polar_pi, to_polar_pi, TransferMatrix};
use crate::tomography::{
    PairKey, RawCounts, RealGrid, SinglesCounts, TomographyResult, VisibilityRecord,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub polar: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    /// `[re, im]` entries, no prefactor.
    pub fn rectangular(m: &TransferMatrix) -> Self {
        let entries = (0..m.rows())
            .map(|r| {
                (0..m.cols())
                    .map(|c| [m.get(r, c).re, m.get(r, c).im])
                    .collect()
            })
            .collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            polar: false,
            scale: None,
            entries,
        }
    }

    /// `[magnitude / scale, phase / pi]` entries with the given prefactor.
    pub fn polar_scaled(m: &TransferMatrix, scale: f64) -> Self {
        let entries = (0..m.rows())
            .map(|r| {
                (0..m.cols())
                    .map(|c| {
                        let (mag, phase) = to_polar_pi(m.get(r, c));
                        [mag / scale, phase]
                    })
                    .collect()
            })
            .collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            polar: true,
            scale: Some(scale),
            entries,
        }
    }

    pub fn to_matrix(&self) -> Result<TransferMatrix> {
        if self.entries.len() != self.rows || self.entries.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Format(format!(
                "matrix file declares {}x{} but entries have a different shape",
                self.rows, self.cols
            )));
        }
        let scale = self.scale.unwrap_or(1.0);
        if !scale.is_finite() {
            return Err(Error::Format("matrix scale must be finite".into()));
        }
        let entries = self
            .entries
            .iter()
            .flatten()
            .map(|&[a, b]| {
                let z = if self.polar {
                    from_polar_pi(a, b)
                } else {
                    Complex64::new(a, b)
                };
                z * scale
            })
            .collect();
        TransferMatrix::new(self.rows, self.cols, entries)
    }
}

pub fn parse_matrix_json(text: &str) -> Result<TransferMatrix> {
    let file: MatrixFile =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("matrix JSON: {e}")))?;
    file.to_matrix()
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<TransferMatrix> {
    parse_matrix_json(&std::fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Metadata stored next to a scan CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    pub sigma_ps: f64,
    pub integration_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delayed_input: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts_level: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// `scan.csv` -> `scan.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_scan_csv<W: Write>(writer: W, scan: &DelayScan) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "delay_ps,value")?;
    for &(d, v) in scan.samples() {
        writeln!(w, "{d},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_samples<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        delay_ps: f64,
        value: f64,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    check_headers(&mut rdr, &["delay_ps", "value"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|e| Error::Format(format!("scan CSV: {e}")))?;
        out.push((row.delay_ps, row.value));
    }
    if out.is_empty() {
        return Err(Error::Format("scan CSV has no samples".into()));
    }
    Ok(out)
}

/// Writes the CSV and its sidecar.
pub fn write_scan(path: &Path, scan: &DelayScan, meta: &ScanMetadata) -> Result<()> {
    write_scan_csv(File::create(path)?, scan)?;
    write_json(sidecar_path(path), meta)
}

/// Reads a scan CSV; the sidecar, when present, supplies the combination
/// labels and integration time (otherwise inputs and outputs default to 1,2).
pub fn read_scan(path: &Path) -> Result<(DelayScan, Option<ScanMetadata>)> {
    let samples = read_scan_samples(BufReader::new(File::open(path)?))?;
    let sidecar = sidecar_path(path);
    let meta: Option<ScanMetadata> = if sidecar.exists() {
        let text = std::fs::read_to_string(&sidecar)?;
        Some(
            serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("scan metadata: {e}")))?,
        )
    } else {
        None
    };
    let (input, output, time) = match &meta {
        Some(m) => (
            PhotonConfiguration::from_labels(&m.inputs)?,
            PhotonConfiguration::from_labels(&m.outputs)?,
            m.integration_time_s,
        ),
        None => (
            PhotonConfiguration::from_labels(&[1, 2])?,
            PhotonConfiguration::from_labels(&[1, 2])?,
            crate::distinguishability::DEFAULT_INTEGRATION_TIME_S,
        ),
    };
    Ok((
        DelayScan::new(input, output, samples)?.with_integration_time(time),
        meta,
    ))
}

fn check_headers<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format(format!("CSV header: {e}")))?;
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Format(format!(
            "expected CSV header '{}', got '{}'",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub fn write_singles_csv<W: Write>(writer: W, counts: &SinglesCounts) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "output,input,counts")?;
    let g = counts.grid();
    for l in 0..g.rows() {
        for i in 0..g.cols() {
            writeln!(w, "{},{},{}", l + 1, i + 1, g.get(l, i))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_singles_csv<R: Read>(reader: R) -> Result<SinglesCounts> {
    #[derive(Deserialize)]
    struct Row {
        output: usize,
        input: usize,
        counts: f64,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    check_headers(&mut rdr, &["output", "input", "counts"])?;
    let mut rows = Vec::new();
    for row in rdr.deserialize::<Row>() {
        rows.push(row.map_err(|e| Error::Format(format!("singles CSV: {e}")))?);
    }
    if rows.is_empty() {
        return Err(Error::Format("singles CSV has no rows".into()));
    }
    if rows.iter().any(|r| r.output == 0 || r.input == 0) {
        return Err(Error::Format("singles CSV labels are 1-based".into()));
    }
    let m = rows.iter().map(|r| r.output).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.input).max().unwrap_or(0);
    let mut seen = vec![false; m * n];
    let mut grid = RealGrid::zeros(m, n);
    for r in &rows {
        let idx = (r.output - 1) * n + (r.input - 1);
        if seen[idx] {
            return Err(Error::Format(format!(
                "duplicate singles entry ({}, {})",
                r.output, r.input
            )));
        }
        seen[idx] = true;
        grid.set(r.output - 1, r.input - 1, r.counts);
    }
    if let Some(idx) = seen.iter().position(|s| !s) {
        return Err(Error::Format(format!(
            "singles CSV lacks entry ({}, {})",
            idx / n + 1,
            idx % n + 1
        )));
    }
    SinglesCounts::new(grid)
}

#[derive(Debug, Serialize, Deserialize)]
struct VisibilityRow {
    i: usize,
    j: usize,
    l: usize,
    m: usize,
    #[serde(rename = "V")]
    v: f64,
    sigma: Option<f64>,
    c0: Option<f64>,
    cinf: Option<f64>,
}

pub fn write_visibility_csv<W: Write>(writer: W, records: &[VisibilityRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        let (i, j, l, m) = r.key.labels();
        w.serialize(VisibilityRow {
            i,
            j,
            l,
            m,
            v: r.value,
            sigma: r.uncertainty,
            c0: r.raw.map(|x| x.c0),
            cinf: r.raw.map(|x| x.c_inf),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_visibility_csv<R: Read>(reader: R) -> Result<Vec<VisibilityRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_headers(&mut rdr, &["i", "j", "l", "m", "V", "sigma", "c0", "cinf"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<VisibilityRow>() {
        let row = row.map_err(|e| Error::Format(format!("visibility CSV: {e}")))?;
        if [row.i, row.j, row.l, row.m].contains(&0) {
            return Err(Error::Format("visibility CSV labels are 1-based".into()));
        }
        let key = PairKey::new((row.i - 1, row.j - 1), (row.l - 1, row.m - 1))?;
        let mut rec = VisibilityRecord::new(key, row.v)?;
        rec.uncertainty = row.sigma;
        rec.raw = match (row.c0, row.cinf) {
            (Some(c0), Some(c_inf)) => Some(RawCounts { c0, c_inf }),
            (None, None) => None,
            _ => {
                return Err(Error::Format(format!(
                    "record ({},{},{},{}) has only one of c0/cinf",
                    row.i, row.j, row.l, row.m
                )))
            }
        };
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Format("visibility CSV has no records".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographyFile {
    #[serde(flatten)]
    pub matrix: MatrixFile,
    /// In the same units as the entry magnitudes (before `scale`).
    pub amplitude_sigma: Vec<Vec<f64>>,
    pub phase_sigma_pi_units: Vec<Vec<f64>>,
    pub resamples: usize,
    #[serde(default)]
    pub failed_resamples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_vis: Option<f64>,
}

impl TomographyFile {
    /// Polar form with prefactor 1/sqrt(n) for an n-input device.
    pub fn from_result(result: &TomographyResult, q_vis: Option<f64>) -> Self {
        let scale = 1.0 / (result.matrix.cols() as f64).sqrt();
        let rescale = |g: &RealGrid, f: f64| -> Vec<Vec<f64>> {
            g.to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x * f).collect())
                .collect()
        };
        Self {
            matrix: MatrixFile::polar_scaled(&result.matrix, scale),
            amplitude_sigma: rescale(&result.amplitude_sigma, 1.0 / scale),
            phase_sigma_pi_units: rescale(&result.phase_sigma, 1.0 / std::f64::consts::PI),
            resamples: result.resample_count,
            failed_resamples: result.failed_resamples,
            residual: Some(result.residual),
            q_vis,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::measured_tritter;
    use crate::tomography::{synthetic_records, synthetic_singles};

    #[test]
    fn bundled_measured_matrix_matches_constant() {
        let text = include_str!("../data/measured_tritter.json");
        let m = parse_matrix_json(text).unwrap();
        assert!(m.max_abs_diff(&measured_tritter()) < 1e-15);
    }

    #[test]
    fn matrix_round_trip() {
        let m = measured_tritter();
        let rect = MatrixFile::rectangular(&m).to_matrix().unwrap();
        assert!(rect.max_abs_diff(&m) < 1e-15);
        let text =
            serde_json::to_string(&MatrixFile::polar_scaled(&m, 0.5773502691896258)).unwrap();
        assert!(parse_matrix_json(&text).unwrap().max_abs_diff(&m) < 1e-14);
    }

    #[test]
    fn malformed_matrix_files() {
        assert!(matches!(parse_matrix_json("{}"), Err(Error::Format(_))));
        let bad = r#"{"rows":2,"cols":2,"polar":false,"entries":[[[1,0],[0,0]]]}"#;
        assert!(matches!(parse_matrix_json(bad), Err(Error::Format(_))));
    }

    #[test]
    fn csv_round_trips() {
        let m = measured_tritter();
        let singles = synthetic_singles(&m, 5000.0).unwrap();
        let mut buf = Vec::new();
        write_singles_csv(&mut buf, &singles).unwrap();
        assert!(buf.starts_with(b"output,input,counts\n"));
        assert_eq!(read_singles_csv(buf.as_slice()).unwrap(), singles);

        let mut records = synthetic_records(&m, 1000.0).unwrap();
        records[0].uncertainty = Some(0.02);
        records[1].raw = None;
        let mut buf = Vec::new();
        write_visibility_csv(&mut buf, &records).unwrap();
        assert!(buf.starts_with(b"i,j,l,m,V,sigma,c0,cinf\n"));
        assert_eq!(read_visibility_csv(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            read_singles_csv("".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_singles_csv("output,input,counts\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_singles_csv("output,input,counts\n1,1,5\n2,2,5\n".as_bytes()),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            read_visibility_csv("a,b\n1,2\n".as_bytes()),
            Err(Error::Format(_))
        ));
        let half = "i,j,l,m,V,sigma,c0,cinf\n1,2,1,2,0.5,,10,\n";
        assert!(matches!(
            read_visibility_csv(half.as_bytes()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn scan_csv_round_trip() {
        let c = PhotonConfiguration::from_labels(&[1, 2]).unwrap();
        let scan =
            DelayScan::new(c.clone(), c, vec![(-1.5, 10.0), (0.0, 3.25), (1.5, 9.0)]).unwrap();
        let mut buf = Vec::new();
        write_scan_csv(&mut buf, &scan).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "delay_ps,value\n-1.5,10\n0,3.25\n1.5,9\n"
        );
        assert_eq!(read_scan_samples(buf.as_slice()).unwrap(), scan.samples());
    }
}
