//! Exact posterior over sense assignments for a two-bin, two-sense,
//! two-word instance with one genre.
//!
//! With two words, a sense's word distribution in bin t depends only on
//! d_t = chi[t,k,1] - chi[t,k,0], whose prior is d_0 ~ N(0, 2 sigma0²) and
//! d_1 - d_0 ~ N(0, 2 / kappa_psi). The same holds for the sense distribution
//! with e_t = zeta[t,0,1] - zeta[t,0,0], except that the increment precision
//! kappa_phi is Gamma(a, b); integrating it out leaves a Student-t increment
//! with 2a degrees of freedom and squared scale 2b / a. Each assignment's
//! marginal likelihood is then a two-dimensional integral, done here by
//! trapezoid quadrature.

#![allow(dead_code)]

use semchange_core::corpus::Snippet;
use semchange_core::gibbs::Sampler;
use semchange_core::model::ModelConfig;
use statrs::function::gamma::ln_gamma;

pub struct TinyInstance {
    pub config: ModelConfig,
    pub snippets: Vec<Snippet>,
}

pub fn tiny_instance() -> TinyInstance {
    let config = ModelConfig::new(2, 1, 2, 2);
    let snippet = |id: usize, t: usize, context: &[u32]| Snippet {
        id,
        time_bin: t,
        genre: 0,
        context: context.to_vec(),
        doc_id: format!("d{id}"),
    };
    TinyInstance {
        config,
        snippets: vec![
            snippet(0, 0, &[0, 0, 1]),
            snippet(1, 0, &[1, 1]),
            snippet(2, 1, &[0, 1, 1]),
        ],
    }
}

fn log_sigmoid(x: f64) -> f64 {
    -((-x.abs()).exp().ln_1p() + (-x).max(0.0))
}

/// `ln(sigma(d)^ones * (1 - sigma(d))^zeros)`.
fn log_binary(d: f64, ones: f64, zeros: f64) -> f64 {
    ones * log_sigmoid(d) + zeros * log_sigmoid(-d)
}

fn normal_pdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn student_t_pdf(x: f64, nu: f64, scale: f64) -> f64 {
    let z = x / scale;
    (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)
        - 0.5 * (nu * std::f64::consts::PI).ln()
        - scale.ln()
        - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p())
    .exp()
}

/// Density of a `N(0, 2 / kappa)` increment with `kappa ~ Gamma(a, b)`,
/// integrated over kappa numerically (log-spaced trapezoid).
pub fn gamma_mixed_normal_pdf(x: f64, a: f64, b: f64) -> f64 {
    let n = 200_000;
    let (lo, hi) = ((1e-10f64).ln(), (1e4f64).ln());
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let u = lo + i as f64 * h;
        let kappa = u.exp();
        let log_gamma = a * b.ln() - ln_gamma(a) + (a - 1.0) * kappa.ln() - b * kappa;
        let f = normal_pdf(x, 2.0 / kappa) * log_gamma.exp() * kappa;
        acc += if i == 0 || i == n { 0.5 * f } else { f };
    }
    acc * h
}

/// Trapezoid rule over `[lo, hi]` with `n` intervals.
fn trapezoid(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / n as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        acc += f(lo + i as f64 * h);
    }
    acc * h
}

/// Counts `(ones, zeros)` per bin.
type BinCounts = [(f64, f64); 2];

/// Marginal likelihood of a two-bin binary series with Gaussian increments.
fn gaussian_walk_evidence(counts: BinCounts, init_var: f64, step_var: f64) -> f64 {
    let sd0 = init_var.sqrt();
    let sd1 = step_var.sqrt();
    trapezoid(-12.0 * sd0, 12.0 * sd0, 8000, |d0| {
        let inner = trapezoid(-12.0 * sd1, 12.0 * sd1, 240, |s| {
            normal_pdf(s, step_var) * log_binary(d0 + s, counts[1].0, counts[1].1).exp()
        });
        normal_pdf(d0, init_var) * log_binary(d0, counts[0].0, counts[0].1).exp() * inner
    })
}

/// Same with a Student-t increment, integrated on `s = scale * tan(theta)`.
fn student_walk_evidence(counts: BinCounts, init_var: f64, nu: f64, scale: f64) -> f64 {
    let sd0 = init_var.sqrt();
    let half_pi = std::f64::consts::FRAC_PI_2;
    let m = 4000;
    let h = 2.0 * half_pi / m as f64;
    // Midpoint nodes avoid the endpoints where tan diverges.
    let nodes: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let theta = -half_pi + (i as f64 + 0.5) * h;
            let s = scale * theta.tan();
            let jac = scale / theta.cos().powi(2);
            (s, student_t_pdf(s, nu, scale) * jac * h)
        })
        .collect();
    trapezoid(-12.0 * sd0, 12.0 * sd0, 8000, |d0| {
        let inner: f64 = nodes
            .iter()
            .map(|&(s, w)| w * log_binary(d0 + s, counts[1].0, counts[1].1).exp())
            .sum();
        normal_pdf(d0, init_var) * log_binary(d0, counts[0].0, counts[0].1).exp() * inner
    })
}

/// Exact `p(z | data)` for all `2^D` assignments, indexed by `sum z_d 2^d`.
pub fn enumerate_posterior(inst: &TinyInstance) -> Vec<f64> {
    let c = &inst.config;
    assert_eq!((c.time_bins, c.senses, c.vocab_size, c.genres), (2, 2, 2, 1));
    let n = inst.snippets.len();
    let init_var = 2.0 * c.sigma0 * c.sigma0;
    let mut weights = Vec::with_capacity(1 << n);
    for code in 0..(1usize << n) {
        let z: Vec<usize> = (0..n).map(|d| (code >> d) & 1).collect();
        let mut sense_counts: BinCounts = [(0.0, 0.0); 2];
        let mut word_counts: [BinCounts; 2] = [[(0.0, 0.0); 2]; 2];
        for (s, &k) in inst.snippets.iter().zip(&z) {
            let t = s.time_bin;
            if k == 1 {
                sense_counts[t].0 += 1.0;
            } else {
                sense_counts[t].1 += 1.0;
            }
            for &w in &s.context {
                if w == 1 {
                    word_counts[k][t].0 += 1.0;
                } else {
                    word_counts[k][t].1 += 1.0;
                }
            }
        }
        let phi = student_walk_evidence(sense_counts, init_var, 2.0 * c.a, (2.0 * c.b / c.a).sqrt());
        let psi: f64 = word_counts
            .iter()
            .map(|&wc| gaussian_walk_evidence(wc, init_var, 2.0 / c.kappa_psi))
            .product();
        weights.push(phi * psi);
    }
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Empirical distribution of `z` over `samples` draws, one every `thin`
/// sweeps after `burn_in` sweeps.
pub fn sampled_posterior(
    inst: &TinyInstance,
    samples: usize,
    thin: usize,
    burn_in: usize,
    seed: u64,
) -> Vec<f64> {
    let mut sampler = Sampler::new(&inst.snippets, &inst.config, seed).expect("valid instance");
    let mut counts = vec![0usize; 1 << inst.snippets.len()];
    for _ in 0..burn_in {
        sampler.sweep().expect("sweep");
    }
    for _ in 0..samples {
        for _ in 0..thin {
            sampler.sweep().expect("sweep");
        }
        let code: usize = sampler
            .state()
            .z
            .iter()
            .enumerate()
            .map(|(d, &k)| k << d)
            .sum();
        counts[code] += 1;
    }
    counts.iter().map(|&c| c as f64 / samples as f64).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Lag-`lag` autocorrelation of a scalar series.
pub fn autocorrelation(xs: &[f64], lag: usize) -> f64 {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let cov: f64 = (0..n - lag).map(|i| (xs[i] - mean) * (xs[i + lag] - mean)).sum();
    cov / var
}

/// Series of `z_0` over consecutive sweeps.
pub fn label_series(inst: &TinyInstance, sweeps: usize, seed: u64) -> Vec<f64> {
    let mut sampler = Sampler::new(&inst.snippets, &inst.config, seed).expect("valid instance");
    (0..sweeps)
        .map(|_| {
            sampler.sweep().expect("sweep");
            sampler.state().z[0] as f64
        })
        .collect()
}
