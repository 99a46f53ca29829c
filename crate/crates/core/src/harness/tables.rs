use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::report_scalars;
use crate::harness::sweep::{BranchRecord, PointRecord, SweepReport};
use crate::io::write_json;
use crate::quantifiers::QuantifierReport;

pub const TABLE_FILES: [&str; 5] = ["fig2a.csv", "fig2b.csv", "fig3.csv", "fig4.csv", "report.json"];

const FIG3_FIGURES: [&str; 6] = ["tau_m", "tau_e2", "tau_e3", "nu_m", "nu_e2", "nu_e3"];
const FIG4_FIGURES: [&str; 5] = ["modes", "e_n", "tau_m_single", "tau_e2_single", "tau_en"];

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn scalar(r: Option<&QuantifierReport>, key: &str) -> Option<f64> {
    r.and_then(|r| report_scalars(r).into_iter().find(|(k, _)| *k == key).map(|(_, v)| v))
}

fn error_of(b: &BranchRecord, key: &str) -> Option<f64> {
    b.errors.as_ref().and_then(|e| e.get(key).copied())
}

/// Measured value, model value and bootstrap error of one figure.
fn triple(b: &BranchRecord, key: &str) -> [String; 3] {
    [
        cell(scalar(b.measured.as_ref(), key)),
        cell(scalar(b.model.as_ref(), key)),
        cell(error_of(b, key)),
    ]
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn lead(p: &PointRecord) -> Vec<String> {
    vec![p.index.to_string(), p.noise_photocount_mean.to_string()]
}

fn fig2a(report: &SweepReport) -> (Vec<String>, Vec<Vec<String>>) {
    let h = header(&[
        "index",
        "noise_mean",
        "noise_counts_s",
        "noise_counts_i",
        "mean_counts_s",
        "mean_counts_i",
        "mean_photons_s",
        "mean_photons_i",
    ]);
    let rows = report
        .points
        .iter()
        .map(|p| {
            let mut row = lead(p);
            row.push(p.noise_photocounts.0.to_string());
            row.push(p.noise_photocounts.1.to_string());
            row.push(cell(p.mean_counts.map(|m| m.0)));
            row.push(cell(p.mean_counts.map(|m| m.1)));
            let photon = p.photon.measured.as_ref();
            row.push(cell(photon.map(|r| r.mean_s)));
            row.push(cell(photon.map(|r| r.mean_i)));
            row
        })
        .collect();
    (h, rows)
}

fn fig2b(report: &SweepReport) -> (Vec<String>, Vec<Vec<String>>) {
    let h = header(&[
        "index",
        "noise_mean",
        "r_c",
        "r_c_model",
        "r_c_err",
        "r_n",
        "r_n_model",
        "r_n_err",
    ]);
    let rows = report
        .points
        .iter()
        .map(|p| {
            let mut row = lead(p);
            row.extend(triple(&p.photocount, "r"));
            row.extend(triple(&p.photon, "r"));
            row
        })
        .collect();
    (h, rows)
}

fn branch_rows(
    report: &SweepReport,
    figures: &[&str],
) -> (Vec<String>, Vec<Vec<String>>) {
    let mut h = header(&["index", "noise_mean", "branch"]);
    for f in figures {
        h.push(f.to_string());
        h.push(format!("{f}_model"));
        h.push(format!("{f}_err"));
    }
    let mut rows = Vec::new();
    for p in &report.points {
        for (name, b) in [("photocount", &p.photocount), ("photon", &p.photon)] {
            let mut row = lead(p);
            row.push(name.to_string());
            for f in figures {
                row.extend(triple(b, f));
            }
            rows.push(row);
        }
    }
    (h, rows)
}

/// Writes the four CSV tables and the JSON master report into `dir`,
/// creating it when missing. Returns the written paths.
pub fn emit_tables(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let tables = [
        fig2a(report),
        fig2b(report),
        branch_rows(report, &FIG3_FIGURES),
        branch_rows(report, &FIG4_FIGURES),
    ];
    let mut written = Vec::new();
    for (name, (h, rows)) in TABLE_FILES.iter().zip(tables.iter()) {
        let path = dir.join(name);
        write_csv(&path, h, rows)?;
        written.push(path);
    }
    let path = dir.join(TABLE_FILES[4]);
    write_json(&path, report)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_sweep, SweepConfig};
    use crate::state::TwinBeamSpec;

    fn report() -> SweepReport {
        let cfg = SweepConfig {
            twin_beam: TwinBeamSpec::new(1.5, 5.0).unwrap(),
            noise_photocount_means: vec![0.0, 0.5, 1.0],
            exact: true,
            ..SweepConfig::default()
        };
        run_sweep(&cfg).unwrap()
    }

    #[test]
    fn tables_have_one_row_per_point_and_share_the_noise_column() {
        let rep = report();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_tables(&rep, dir.path()).unwrap();
        assert_eq!(files.len(), TABLE_FILES.len());
        let column = |name: &str, step: usize| -> Vec<String> {
            let mut r = csv::Reader::from_path(dir.path().join(name)).unwrap();
            r.records()
                .map(|x| x.unwrap()[1].to_string())
                .step_by(step)
                .collect()
        };
        let noise = column("fig2b.csv", 1);
        assert_eq!(noise, vec!["0", "0.5", "1"]);
        assert_eq!(column("fig2a.csv", 1), noise);
        assert_eq!(column("fig3.csv", 2), noise);
        assert_eq!(column("fig4.csv", 2), noise);
        let back: SweepReport = crate::io::read_json(&dir.path().join("report.json")).unwrap();
        assert_eq!(back, rep);
    }
}
