//! Expected improvement acquisition for a minimization objective.

/// Standard normal density.
fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via the Abramowitz-Stegun 26.2.17 polynomial
/// (absolute error below 7.5e-8), kept dependency-free and deterministic.
fn norm_cdf(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - norm_cdf(-z);
    }
    let t = 1.0 / (1.0 + 0.2316419 * z);
    let poly = t
        * (0.319381530
            + t * (-0.356563782 + t * (1.781477937 + t * (-1.821255978 + t * 1.330274429))));
    1.0 - norm_pdf(z) * poly
}

/// EI of a Gaussian belief (mean, variance) against the incumbent loss.
///
/// With sigma = sqrt(variance) and z = (best - mean) / sigma this is
/// (best - mean) * cdf(z) + sigma * pdf(z); a degenerate belief (sigma = 0)
/// yields max(best - mean, 0). Never negative.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> f64 {
    let sigma = variance.max(0.0).sqrt();
    let gap = best - mean;
    if sigma == 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sigma;
    (gap * norm_cdf(z) + sigma * norm_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_brackets_known_points() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-7);
        assert!((norm_cdf(1.0) - 0.841344746).abs() < 1e-6);
        assert!((norm_cdf(-1.0) - 0.158655254).abs() < 1e-6);
        assert!(norm_cdf(8.0) > 0.999999);
        assert!(norm_cdf(-8.0) < 1e-6);
    }

    #[test]
    fn pdf_at_zero() {
        assert!((norm_pdf(0.0) - 0.3989422804014327).abs() < 1e-15);
    }
}
