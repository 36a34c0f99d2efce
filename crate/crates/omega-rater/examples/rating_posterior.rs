//! Dirichlet-multinomial posterior of a cluster's ratings: the exact
//! conjugate answer next to the MCMC estimate it validates.
//!
//! ```bash
//! cargo run --example rating_posterior
//! ```

use omega_rater::inference::{
    characterize, conjugate_posterior, posterior_mean, uniform_prior, InferenceOptions,
    RatingCounts,
};

fn main() {
    // a positive-looking cluster: most members rated 4 or 5
    let counts = RatingCounts::new(vec![40, 25, 80, 320, 535]).expect("counts");
    let prior = uniform_prior(5);

    let params = conjugate_posterior(&counts, &prior).expect("conjugate");
    let exact = posterior_mean(&params);
    println!("counts:            {:?}  (n = {})", counts.counts(), counts.n());
    println!("posterior params:  {params:?}");

    let posterior = characterize(&counts, &prior, &InferenceOptions::default()).expect("mcmc");
    println!(
        "chain: acceptance {:.2}, step size {:.3}, min ESS {:.0}",
        posterior.diagnostics.acceptance_rate,
        posterior.diagnostics.step_size,
        posterior
            .diagnostics
            .effective_sample_size
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b)),
    );

    println!("rating   exact mean   mcmc mean   94% HDI");
    for (summary, exact_mean) in posterior.summary.iter().zip(&exact) {
        let mcmc_mean: f64 = posterior.samples.iter().map(|d| d[(summary.rating - 1) as usize]).sum::<f64>()
            / posterior.samples.len() as f64;
        println!(
            "{:>6}   {:>10.4}   {:>9.4}   [{:.4}, {:.4}]",
            summary.rating, exact_mean, mcmc_mean, summary.hdi_low, summary.hdi_high
        );
    }
    println!(
        "P(rating >= {}) = {:.3}   P(rating <= {}) = {:.3}",
        posterior.tail.hi,
        posterior.tail.p_rating_at_least_hi,
        posterior.tail.lo,
        posterior.tail.p_rating_at_most_lo
    );
}
