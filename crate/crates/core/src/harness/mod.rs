//! The noise-sweep scenario: a fixed twin beam with growing thermal noise,
//! analyzed through raw photocounts and through EM reconstruction, with
//! model curves, bootstrap errors and CSV/JSON tables.

mod analyze;
mod bootstrap;
mod config;
mod sweep;
mod tables;

pub use analyze::{
    analyze_distribution, analyze_histogram, analyze_histogram_data, analyze_with_start, Analysis,
    EmSummary,
};
pub use bootstrap::{bootstrap_errors, neighbor_pair_scatter, BootstrapResult};
pub use config::{default_noise_grid, AnalysisOptions, BootstrapConfig, SweepConfig};
pub use sweep::{
    point_seed, run_sweep, simulate_point, BranchRecord, PointRecord, Simulation, SweepReport,
    SOFTWARE_VERSION,
};
pub use tables::{emit_tables, TABLE_FILES};

use crate::quantifiers::QuantifierReport;

/// Named scalar figures of a report, in a fixed order. Single-mode entries
/// are missing when the reduction failed, R when it is undefined.
pub fn report_scalars(r: &QuantifierReport) -> Vec<(&'static str, f64)> {
    let w = &r.whole_beam;
    let mut out = Vec::with_capacity(16);
    if let Some(v) = r.r {
        out.push(("r", v));
    }
    out.extend([
        ("m", w.values.m),
        ("e2", w.values.e2),
        ("e3", w.values.e3),
        ("tau_m", w.tau.m),
        ("tau_e2", w.tau.e2),
        ("tau_e3", w.tau.e3),
        ("nu_m", w.nu.m),
        ("nu_e2", w.nu.e2),
        ("nu_e3", w.nu.e3),
    ]);
    if let Some(s) = &r.single_mode {
        out.extend([
            ("modes", s.mode_count),
            ("e_n", s.e_n),
            ("tau_m_single", s.tau_m),
            ("tau_e2_single", s.tau_e2),
            ("tau_en", s.tau_en),
            ("nu_en", s.nu_en),
        ]);
    }
    out
}
