//! Experiment orchestration: config files, the training loop, multi-seed
//! comparison and output files.

mod config;
mod plot;
mod report;
mod run;

pub use config::{parse_seed_list, LandscapeSpec, RunConfig, ScheduleParams, Variant};
pub use plot::{emit_plot_data, render_svg, Series};
pub use report::{compare, mean_std, ComparisonReport, Metric, VariantReport, SUMMARY_HEADER};
pub use run::{read_record_csv, replay_lrs, train_run, RunRecord, RunRow, RunStop, RunSummary, RECORD_HEADER};
