//! Cluster synthetic sentiment groups in the [a, c, omega] space and label
//! their polarity without touching the ratings.
//!
//! ```bash
//! cargo run --example cluster_blobs
//! ```

use omega_rater::cluster::{
    dbscan, evaluate_against_ratings, label_polarity, DbscanParams, PolarityConfig,
};
use omega_rater::features::{compute, FeatureConfig, FeatureRecord};
use omega_rater::synth::{generate, two_sided_groups, SynthOptions};

fn main() {
    let records = generate(&two_sided_groups(1000), &SynthOptions::default()).expect("synth");

    let cfg = FeatureConfig::default();
    let features: Vec<FeatureRecord> = records
        .iter()
        .map(|r| compute(r.id.clone(), r.precomputed.unwrap(), &cfg).expect("features"))
        .collect();
    let vectors: Vec<_> = features.iter().map(FeatureRecord::vector).collect();

    let params = DbscanParams::default();
    let assignments = dbscan(&vectors, &params).expect("dbscan");
    let labels = label_polarity(&assignments, &features, &PolarityConfig::default());

    println!("eps={} min_pts={}", params.eps, params.min_pts);
    for stat in &labels.stats {
        println!(
            "cluster {}: {} points, mean lean {:+.3}, mean omega {:.3} -> {}",
            stat.cluster,
            stat.size,
            stat.mean_lean,
            stat.mean_omega,
            labels.per_cluster[stat.cluster]
        );
    }
    let noise = assignments.iter().filter(|a| a.cluster.is_none()).count();
    println!("noise points: {noise}");

    // ratings were held out of everything above; check the split against them
    let ratings: Vec<Option<u32>> = records.iter().map(|r| r.rating).collect();
    let report = evaluate_against_ratings(&assignments, &labels, &ratings, 5);
    for cluster in &report.clusters {
        println!(
            "cluster {} ({}): rating histogram {:?}, >3 stars {:.1}%, <3 stars {:.1}%",
            cluster.cluster,
            cluster.polarity,
            cluster.histogram,
            100.0 * cluster.frac_above_3.unwrap_or(0.0),
            100.0 * cluster.frac_below_3.unwrap_or(0.0),
        );
    }
}
