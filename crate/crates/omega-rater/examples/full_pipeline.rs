//! Generate a synthetic review dataset and run the whole pipeline on it:
//! features, DBSCAN clustering, polarity labels, rating posteriors.
//!
//! ```bash
//! cargo run --example full_pipeline
//! ```

use omega_rater::ingest::{DatasetSpec, Format};
use omega_rater::pipeline::run_pipeline;
use omega_rater::synth::{generate, two_sided_groups, write_csv, SynthOptions};
use omega_rater::RunConfig;

fn main() {
    let dir = std::env::temp_dir().join("omega-rater-pipeline");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let input = dir.join("synthetic_reviews.csv");

    let records = generate(&two_sided_groups(2000), &SynthOptions::default()).expect("synth");
    write_csv(&records, &input).expect("write input");
    println!("wrote {} synthetic reviews to {}", records.len(), input.display());

    let dataset = DatasetSpec {
        path: input,
        format: Format::Csv,
        text_column: None,
        rating_column: Some("rating".into()),
        sentiment_columns: Some(["pos".into(), "neu".into(), "neg".into()]),
        rating_scale: 5,
    };
    let cfg = RunConfig::new(dataset, dir.join("out"));
    let manifest = run_pipeline(&cfg).expect("pipeline");

    for stage in &manifest.stages {
        println!(
            "{:>8}: {} in, {} out, {} skipped, {} ms",
            stage.stage, stage.rows_in, stage.rows_out, stage.skipped, stage.wall_ms
        );
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }

    let eval = std::fs::read_to_string(cfg.output_dir.join("cluster_evaluation.json")).expect("eval");
    let eval: serde_json::Value = serde_json::from_str(&eval).expect("json");
    for cluster in eval["clusters"].as_array().into_iter().flatten() {
        println!(
            "cluster {} ({}): {} members, >3 stars {:.1}%, <3 stars {:.1}%",
            cluster["cluster"],
            cluster["polarity"].as_str().unwrap_or("?"),
            cluster["members"],
            100.0 * cluster["frac_above_3"].as_f64().unwrap_or(0.0),
            100.0 * cluster["frac_below_3"].as_f64().unwrap_or(0.0),
        );
    }
    println!("outputs in {}", cfg.output_dir.display());
}
