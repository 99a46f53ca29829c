//! File formats: CSV triplets (row, col, value) for tables and JSON
//! envelopes carrying metadata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorModel, PovmMatrix};
use crate::error::{Error, Result};
use crate::moments::{Branch, IntensityMomentSet, ModeScale, MomentTable};
use crate::state::{AxisKind, JointDistribution, JointHistogram};

#[derive(Debug, Serialize, Deserialize)]
struct Cell<T> {
    row: usize,
    col: usize,
    value: T,
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn write_cells<T: Serialize + Copy>(path: &Path, table: &Array2<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for ((row, col), value) in table.indexed_iter() {
        w.serialize(Cell {
            row,
            col,
            value: *value,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn read_cells<T>(path: &Path) -> Result<Array2<T>>
where
    T: DeserializeOwned + Copy + Default,
{
    let mut r = csv::Reader::from_path(path)?;
    let mut cells = Vec::new();
    for rec in r.deserialize::<Cell<T>>() {
        cells.push(rec.map_err(|e| parse_error(path, e.to_string()))?);
    }
    if cells.is_empty() {
        return Err(parse_error(path, "no cells"));
    }
    let rows = cells.iter().map(|c| c.row).max().unwrap_or(0) + 1;
    let cols = cells.iter().map(|c| c.col).max().unwrap_or(0) + 1;
    let mut table = Array2::from_elem((rows, cols), T::default());
    for c in cells {
        table[[c.row, c.col]] = c.value;
    }
    Ok(table)
}

pub fn write_distribution_csv(path: &Path, dist: &JointDistribution) -> Result<()> {
    write_cells(path, dist.table())
}

/// Reads a (row, col, value) table; missing cells are zero and the tail is
/// whatever the entries leave to 1.
pub fn read_distribution_csv(path: &Path, axes: AxisKind) -> Result<JointDistribution> {
    let table = read_cells::<f64>(path)?;
    JointDistribution::from_table(table, axes).map_err(|e| parse_error(path, e.to_string()))
}

pub fn write_histogram_csv(path: &Path, hist: &JointHistogram) -> Result<()> {
    write_cells(path, hist.counts())
}

pub fn read_histogram_csv(path: &Path) -> Result<JointHistogram> {
    let table = read_cells::<u64>(path)?;
    JointHistogram::from_counts(table).map_err(|e| parse_error(path, e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let r = BufReader::new(File::open(path)?);
    serde_json::from_reader(r).map_err(|e| {
        if e.is_io() {
            Error::Json(e)
        } else {
            parse_error(path, e.to_string())
        }
    })
}

/// Where a table came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub seed: Option<u64>,
    pub generator: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionEnvelope {
    pub axes: AxisKind,
    pub dims: (usize, usize),
    pub tail_mass: f64,
    pub provenance: Provenance,
    pub cells: Vec<(usize, usize, f64)>,
}

impl DistributionEnvelope {
    pub fn new(dist: &JointDistribution, provenance: Provenance) -> Self {
        DistributionEnvelope {
            axes: dist.axes(),
            dims: dist.dims(),
            tail_mass: dist.tail_mass(),
            provenance,
            cells: dist.table().indexed_iter().map(|((a, b), v)| (a, b, *v)).collect(),
        }
    }

    pub fn to_distribution(&self) -> Result<JointDistribution> {
        let mut table = Array2::zeros(self.dims);
        for &(a, b, v) in &self.cells {
            if a >= self.dims.0 || b >= self.dims.1 {
                return Err(Error::Dimension(format!("cell ({a}, {b}) outside {:?}", self.dims)));
            }
            table[[a, b]] = v;
        }
        JointDistribution::from_table(table, self.axes)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramEnvelope {
    pub frames: u64,
    pub dims: (usize, usize),
    pub provenance: Provenance,
    pub cells: Vec<(usize, usize, u64)>,
}

impl HistogramEnvelope {
    pub fn new(hist: &JointHistogram, provenance: Provenance) -> Self {
        HistogramEnvelope {
            frames: hist.frames(),
            dims: hist.dims(),
            provenance,
            cells: hist
                .counts()
                .indexed_iter()
                .filter(|(_, v)| **v > 0)
                .map(|((a, b), v)| (a, b, *v))
                .collect(),
        }
    }

    pub fn to_histogram(&self) -> Result<JointHistogram> {
        let mut counts = Array2::zeros(self.dims);
        for &(a, b, v) in &self.cells {
            if a >= self.dims.0 || b >= self.dims.1 {
                return Err(Error::Dimension(format!("cell ({a}, {b}) outside {:?}", self.dims)));
            }
            counts[[a, b]] = v;
        }
        let hist = JointHistogram::from_counts(counts)?;
        if hist.frames() != self.frames {
            return Err(Error::domain(format!(
                "counts sum to {} but envelope says {} frames",
                hist.frames(),
                self.frames
            )));
        }
        Ok(hist)
    }
}

/// Metadata written next to a POVM table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmMetadata {
    pub model: DetectorModel,
    pub c_max: usize,
    pub n_max: usize,
    pub captured_mass: Vec<f64>,
    pub beyond_quarter: bool,
}

/// Writes `<stem>.csv` with the entries and `<stem>.json` with metadata.
pub fn write_povm(dir: &Path, stem: &str, povm: &PovmMatrix) -> Result<()> {
    write_cells(&dir.join(format!("{stem}.csv")), povm.entries())?;
    let meta = PovmMetadata {
        model: *povm.model(),
        c_max: povm.c_max(),
        n_max: povm.n_max(),
        captured_mass: povm.captured_mass().to_vec(),
        beyond_quarter: povm.beyond_quarter(),
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

pub fn read_povm(dir: &Path, stem: &str) -> Result<PovmMatrix> {
    let meta: PovmMetadata = read_json(&dir.join(format!("{stem}.json")))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let entries = read_cells::<f64>(&csv_path)?;
    if entries.dim() != (meta.c_max + 1, meta.n_max + 1) {
        return Err(parse_error(&csv_path, "table shape disagrees with metadata"));
    }
    PovmMatrix::from_entries(meta.model, entries)
}

/// Moment set as an ordered list of (k, l, value) with its tags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSetRecord {
    pub branch: Branch,
    pub scale: ModeScale,
    pub ordering: f64,
    pub max_order: usize,
    pub moments: Vec<(usize, usize, f64)>,
}

impl From<&IntensityMomentSet> for MomentSetRecord {
    fn from(m: &IntensityMomentSet) -> Self {
        MomentSetRecord {
            branch: m.branch,
            scale: m.scale,
            ordering: m.ordering,
            max_order: m.max_order(),
            moments: m.moments.entries().collect(),
        }
    }
}

impl MomentSetRecord {
    pub fn to_moments(&self) -> Result<IntensityMomentSet> {
        let table = MomentTable::from_entries(self.max_order, &self.moments)?;
        Ok(IntensityMomentSet::new(self.branch, self.scale, self.ordering, table))
    }
}
