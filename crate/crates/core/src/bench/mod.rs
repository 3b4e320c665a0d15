//! Benchmark environments, dataset generation, the metrics harness and
//! plot-data export.

mod data;
mod env;
mod metrics;
mod objects;
mod plot;
mod recipe;

pub use data::{generate_dataset, GenerationReport};
pub use env::{sample_box_surface, EnvName, EnvSpec, OBSTACLE_SAMPLING};
pub use metrics::{
    benchmark_queries, read_metrics_csv, run_benchmark, run_benchmark_checkpoint,
    write_metrics_csv, write_trajectories, BenchOptions, BenchQuery, BenchReport, MetricsRecord,
    Summary, METRICS_HEADER,
};
pub use objects::ObjectKind;
pub use plot::{
    emit_plot_data, histogram, sample_slice, write_histograms, write_slice, SliceJob, SlicePoint,
    SliceRequest,
};
pub use recipe::TrainingRecipe;
