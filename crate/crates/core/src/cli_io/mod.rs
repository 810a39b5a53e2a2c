//! File formats and configuration.
//!
//! * `QFLD` v1: complex field samples, plain text.
//! * `QRES` v1: sweep results CSV with `#` metadata lines.
//! * `QCAL` v1: anchor calibration (angle and window).
//! * Config: flat `key = value` lines with dotted keys.
//!
//! Every format opens with a `# <TAG> <version>` line. Floats are written
//! with 17 significant digits so that they read back bit-identical.

mod config;
mod plot;
mod qfld;
mod results;

pub use config::{config_hash, parse_config, parse_config_str, to_key_values};
pub use plot::{emit_plot_data, emit_scatter, SCATTER_MAX_POINTS};
pub use qfld::{read_field_dir, read_field_file, write_field_file, QFLD_VERSION};
pub use results::{
    format_results_row, read_calibration, read_results_csv, results_header, write_calibration,
    write_results_csv, ResultsFile, ResultsRow,
};

/// Lossless decimal form of a double.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
