//! Streaming P^2 quantile estimates against exact quantiles of a
//! Halton-sampled normal distribution.

use rbf_uq::doe::low_discrepancy_samples;
use rbf_uq::random_field::{DistributionSpec, Marginal};
use rbf_uq::stats::QuantileEstimator;
use statrs::distribution::{ContinuousCDF, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let qs = [0.1, 0.5, 0.68, 0.9, 0.99];
    let dist = DistributionSpec::iid(Marginal::StandardNormal, 1);
    let exact = Normal::standard();
    for n in [100, 1000, 10000] {
        let samples = low_discrepancy_samples(n, &dist, 20)?;
        let mut est: Vec<QuantileEstimator> = qs.iter().map(|&q| QuantileEstimator::new(q)).collect();
        for s in &samples {
            for e in &mut est {
                e.update(s.coords()[0]);
            }
        }
        print!("n = {n:>5}:");
        for (e, &q) in est.iter().zip(&qs) {
            print!("  q{q}: {:+.4} ({:+.1e})", e.estimate()?, e.estimate()? - exact.inverse_cdf(q));
        }
        println!();
    }
    Ok(())
}
