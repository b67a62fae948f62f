//! Path export and import.
//!
//! CSV columns are `step,t,x_1..x_d,y_1..y_m` with every real printed to 17
//! significant digits. The JSON dump carries the full bundle under a header
//! recording format, model, grid and stream key.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ObservationPath, PathBundle, TimeGrid};
use crate::error::{Error, Result};

pub const PATH_FORMAT: &str = "filterlab-path/1";

/// Format a real for CSV output: 17 significant digits, round-trip exact.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    model: String,
    grid: TimeGrid,
    stream_key: u64,
}

#[derive(Serialize, Deserialize)]
struct Dump {
    header: Header,
    paths: PathBundle,
}

impl PathBundle {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=self.d).map(|i| format!("x_{i}")));
        header.extend((1..=self.m).map(|j| format!("y_{j}")));
        w.write_record(&header)?;
        for k in 0..=self.grid.n_steps {
            let mut row = vec![k.to_string(), fmt_real(self.grid.t(k))];
            row.extend(self.x_at(k).iter().map(|&v| fmt_real(v)));
            row.extend(self.y_at(k).iter().map(|&v| fmt_real(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Sidecar listing each jump: `step,t,mark_1..mark_r`.
    pub fn write_jump_log_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["step".to_string(), "t".to_string()];
        header.extend((1..=self.r).map(|i| format!("mark_{i}")));
        w.write_record(&header)?;
        for ev in &self.jump_log {
            let mut row = vec![ev.step.to_string(), fmt_real(self.grid.t(ev.step))];
            row.extend(ev.mark.iter().map(|&v| fmt_real(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let dump = Dump {
            header: Header {
                format: PATH_FORMAT.to_string(),
                model: self.model.clone(),
                grid: self.grid,
                stream_key: self.stream_key,
            },
            paths: self.clone(),
        };
        Ok(serde_json::to_string(&dump)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: Dump = serde_json::from_str(text)?;
        if dump.header.format != PATH_FORMAT {
            return Err(Error::invalid(
                "format",
                format!("unsupported path format `{}`", dump.header.format),
            ));
        }
        if dump.header.grid != dump.paths.grid || dump.header.stream_key != dump.paths.stream_key {
            return Err(Error::invalid(
                "header",
                "header disagrees with the path data",
            ));
        }
        Ok(dump.paths)
    }
}

/// States and observations read back from a path CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvPath {
    pub grid: TimeGrid,
    pub d: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl CsvPath {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        let d = headers.iter().filter(|h| h.starts_with("x_")).count();
        let m = headers.iter().filter(|h| h.starts_with("y_")).count();
        if headers.len() != 2 + d + m || m == 0 {
            return Err(Error::invalid(
                "csv",
                "expected columns step,t,x_1..x_d,y_1..y_m",
            ));
        }
        let mut times = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::invalid("csv", format!("short row {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid("csv", format!("row {k}: {e}")))
            };
            times.push(parse(1)?);
            for i in 0..d {
                x.push(parse(2 + i)?);
            }
            for j in 0..m {
                y.push(parse(2 + d + j)?);
            }
        }
        if times.len() < 2 {
            return Err(Error::invalid(
                "csv",
                "need at least two rows to recover the grid",
            ));
        }
        let grid = TimeGrid::new(*times.last().unwrap(), times[1] - times[0])?;
        if grid.len() != times.len() {
            return Err(Error::invalid("csv", "times are not a uniform grid"));
        }
        Ok(CsvPath { grid, d, m, x, y })
    }

    pub fn observation(&self) -> Result<ObservationPath> {
        ObservationPath::new(self.grid, self.m, self.y.clone())
    }
}
