//! The full pipeline on the tabletop scene: generate labelled data, train
//! with the environment's recipe, benchmark 100 queries and dump CSVs for
//! plotting.
//!
//! `cargo run --release --example tabletop_benchmark -- [epochs] [out_dir]`
//! With the default 600 epochs this takes about 10 minutes on one core.

use std::path::PathBuf;

use timefield::bench::{
    benchmark_queries, emit_plot_data, generate_dataset, run_benchmark, write_metrics_csv,
    write_trajectories, BenchOptions, EnvSpec,
};
use timefield::net::TimeFieldModel;
use timefield::train::train;

fn main() -> timefield::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: Option<usize> = args.next().and_then(|s| s.parse().ok());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "tabletop_out".into()));
    std::fs::create_dir_all(&out)?;

    let env = EnvSpec::tabletop_center_obstacle();
    let scene = env.scene()?;
    let gen = generate_dataset(&env, &scene, 10_000, 1)?;
    println!("{} tuples in {:.1} s", gen.dataset.len(), gen.wall_seconds);

    let mut recipe = env.training_recipe();
    if let Some(n) = epochs {
        recipe.train.epochs = n;
    }
    let model = TimeFieldModel::new(recipe.model, 1)?;
    let (model, log) = train(model, &gen.dataset, &scene, &recipe.train)?;
    println!(
        "trained, final loss {:.4}",
        log.final_loss().unwrap_or(f64::NAN)
    );

    let queries = benchmark_queries(&env, &scene, 100, 7)?;
    let report = run_benchmark(&model, &env, &scene, &queries, &BenchOptions::default())?;
    println!("{}", report.summary);

    let metrics = out.join("metrics.csv");
    let trajectories = out.join("trajectories.csv");
    write_metrics_csv(&metrics, &report.records)?;
    write_trajectories(&trajectories, &report.plans)?;
    let files = emit_plot_data(&metrics, Some(&trajectories), &[], &out.join("plots"))?;
    println!("wrote {} plot files under {}", files.len(), out.display());
    Ok(())
}
