//! Evaluation harness: aperture x focus-distance sweeps with L1 / percent
//! error, blur-sensitivity curves, and CSV/SVG output.

mod plot;
mod sensitivity;
mod sweep;

pub use plot::{
    bench_panels, emit_plots, psf_contact_sheet, render_panels, sensitivity_panels, LinePanel,
    PlotInput, Series,
};
pub use sensitivity::{
    sensitivity_curves, SensitivityCurve, SensitivityParams, SensitivityTable, Sweep,
};
pub use sweep::{
    default_object_distances, percent_error, run_sweep, BenchCell, BenchResult, BenchSpec,
    CSV_HEADER,
};
