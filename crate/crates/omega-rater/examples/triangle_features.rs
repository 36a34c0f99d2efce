//! Walk one sentiment triple through the whole feature derivation:
//! embedding vertices, side lengths, alpha/beta/gamma and omega, in both
//! direction schemes.
//!
//! ```bash
//! cargo run --example triangle_features
//! ```

use omega_rater::features::{compute, FeatureConfig};
use omega_rater::geometry::{embed, AngleMode};
use omega_rater::sentiment::SentimentTriple;

fn main() {
    let third = 1.0 / 3.0;
    let triples = [
        ("uniform", SentimentTriple::new(third, third, third).unwrap()),
        ("positive", SentimentTriple::new(0.6, 0.35, 0.05).unwrap()),
        ("negative", SentimentTriple::new(0.05, 0.45, 0.5).unwrap()),
        ("pure pos", SentimentTriple::new(1.0, 0.0, 0.0).unwrap()),
    ];

    for mode in [AngleMode::Paper, AngleMode::Equilateral] {
        println!("--- angle mode: {mode} ---");
        let cfg = FeatureConfig {
            angle_mode: mode,
            ..FeatureConfig::default()
        };
        for (name, triple) in triples {
            let emb = embed(triple, mode);
            let rec = compute(name, triple, &cfg).expect("finite features");
            println!(
                "{name:>8}: vertices pos=({:+.3},{:+.3}) neu=({:+.3},{:+.3}) neg=({:+.3},{:+.3})",
                emb.p_pos.x, emb.p_pos.y, emb.p_neu.x, emb.p_neu.y, emb.p_neg.x, emb.p_neg.y
            );
            println!(
                "          sides a={:.5} b={:.5} c={:.5}  alpha={:.5} beta={:.5} gamma={:.5} omega={:.5}{}",
                rec.sides.a,
                rec.sides.b,
                rec.sides.c,
                rec.alpha,
                rec.beta,
                rec.gamma,
                rec.omega,
                if rec.flags.is_empty() {
                    String::new()
                } else {
                    format!("  flags: {}", rec.flags.encode())
                }
            );
        }
    }
}
