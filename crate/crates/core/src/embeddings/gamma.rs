use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};
use statrs::function::gamma::digamma;

use super::SimilaritySeries;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaFitMethod {
    #[default]
    Moments,
    MaximumLikelihood,
}

/// Shape/rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub shape: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub quantile: f64,
    /// Added to every similarity before fitting so the support is positive.
    pub shift: f64,
    pub method: GammaFitMethod,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            quantile: 0.75,
            shift: 1.0,
            method: GammaFitMethod::Moments,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecisions {
    pub fit: Option<GammaFit>,
    /// In similarity units; `None` when the similarities were degenerate.
    pub threshold: Option<f64>,
    pub decisions: BTreeMap<String, bool>,
    pub degenerate: bool,
}

const MIN_VARIANCE: f64 = 1e-12;

/// Fit a Gamma distribution to positive values. Returns `None` when the
/// values are (numerically) constant.
pub fn fit_gamma(values: &[f64], method: GammaFitMethod) -> Result<Option<GammaFit>> {
    if values.is_empty() {
        return Err(Error::Empty("no values to fit".into()));
    }
    if values.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::Invalid("Gamma fit needs positive finite values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var < MIN_VARIANCE {
        return Ok(None);
    }
    let fit = match method {
        GammaFitMethod::Moments => GammaFit {
            shape: mean * mean / var,
            rate: mean / var,
        },
        GammaFitMethod::MaximumLikelihood => {
            let s = mean.ln() - values.iter().map(|x| x.ln()).sum::<f64>() / n;
            let shape = solve_shape(s);
            GammaFit {
                shape,
                rate: shape / mean,
            }
        }
    };
    Ok(Some(fit))
}

/// Root of `ln a - digamma(a) = s`; the left side decreases from infinity to 0.
fn solve_shape(s: f64) -> f64 {
    let f = |a: f64| a.ln() - digamma(a) - s;
    let (mut lo, mut hi) = (1e-8f64, 1e12f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    (lo * hi).sqrt()
}

/// Flag each lemma whose similarity falls below the configured quantile of a
/// Gamma distribution fitted to all similarities. Constant similarities give
/// no threshold and no changes.
pub fn gamma_threshold_decisions(
    series: &SimilaritySeries,
    config: &ThresholdConfig,
) -> Result<ThresholdDecisions> {
    if series.len() < 3 {
        return Err(Error::Invalid(format!(
            "Gamma thresholding needs at least 3 lemmas, got {}",
            series.len()
        )));
    }
    if !(config.quantile > 0.0 && config.quantile < 1.0) {
        return Err(Error::Config(format!(
            "quantile {} outside (0, 1)",
            config.quantile
        )));
    }
    let shifted: Vec<f64> = series.0.values().map(|s| s + config.shift).collect();
    let fit = fit_gamma(&shifted, config.method)?;
    let Some(fit) = fit else {
        return Ok(ThresholdDecisions {
            fit: None,
            threshold: None,
            decisions: series.0.keys().map(|l| (l.clone(), false)).collect(),
            degenerate: true,
        });
    };
    let dist = Gamma::new(fit.shape, fit.rate)
        .map_err(|e| Error::Degenerate(format!("Gamma fit: {e}")))?;
    let threshold = dist.inverse_cdf(config.quantile) - config.shift;
    if !threshold.is_finite() {
        return Err(Error::Degenerate("Gamma quantile is not finite".into()));
    }
    let decisions = series
        .0
        .iter()
        .map(|(l, &s)| (l.clone(), s < threshold))
        .collect();
    Ok(ThresholdDecisions {
        fit: Some(fit),
        threshold: Some(threshold),
        decisions,
        degenerate: false,
    })
}
