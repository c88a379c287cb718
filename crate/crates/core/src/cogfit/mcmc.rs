//! Adaptive random-walk Metropolis-within-Gibbs on the unbounded scale, and
//! the split-chain potential scale reduction.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_map_with, FitOptions, FitResult};
use super::{CogfitError, Model};
use crate::engine::TrialRecord;
use crate::rng::split;

const ADAPT_BATCH: usize = 50;
const TARGET_LOW: f64 = 0.2;
const TARGET_HIGH: f64 = 0.4;

#[derive(Clone, Debug)]
pub struct McmcOptions {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_draws: usize,
    pub seed: u64,
    /// Starting points are the MAP plus this many Laplace sds of normal noise.
    pub init_jitter: f64,
    /// Give every chain its own random stream. Off makes all chains identical.
    pub stream_per_chain: bool,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions { n_chains: 4, n_warmup: 1000, n_draws: 2000, seed: 0, init_jitter: 1.0, stream_per_chain: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorChains {
    pub model: Model,
    pub param_names: Vec<String>,
    /// `draws[chain][iteration][param]`, on the parameter scale.
    pub draws: Vec<Vec<Vec<f64>>>,
    /// `acceptance[chain][param]` over the sampling phase.
    pub acceptance: Vec<Vec<f64>>,
    pub rhat: Vec<f64>,
    pub map: FitResult,
}

impl PosteriorChains {
    pub fn param_chains(&self, i: usize) -> Vec<Vec<f64>> {
        self.draws.iter().map(|c| c.iter().map(|d| d[i]).collect()).collect()
    }

    pub fn mean(&self, i: usize) -> f64 {
        let all: Vec<f64> = self.param_chains(i).concat();
        all.iter().sum::<f64>() / all.len() as f64
    }

    pub fn sd(&self, i: usize) -> f64 {
        let all: Vec<f64> = self.param_chains(i).concat();
        let m = all.iter().sum::<f64>() / all.len() as f64;
        (all.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (all.len() - 1) as f64).sqrt()
    }
}

struct Chain {
    draws: Vec<Vec<f64>>,
    acceptance: Vec<f64>,
}

pub fn sample_posterior(
    model: Model,
    sessions: &[Vec<TrialRecord>],
    options: &McmcOptions,
) -> Result<PosteriorChains, CogfitError> {
    if options.n_chains < 2 || options.n_draws < 4 {
        return Err(CogfitError::Sampler("need at least two chains of four draws".into()));
    }
    let map = fit_map_with(model, sessions, &FitOptions { n_starts: 4, ..FitOptions::default() })?;
    let chains: Vec<Chain> = (0..options.n_chains)
        .into_par_iter()
        .map(|c| run_chain(model, sessions, &map, options, if options.stream_per_chain { c as u64 } else { 0 }))
        .collect::<Result<_, _>>()?;

    for (c, chain) in chains.iter().enumerate() {
        for (i, a) in chain.acceptance.iter().enumerate() {
            if *a <= 0.0 || *a >= 1.0 {
                return Err(CogfitError::Sampler(format!(
                    "chain {c}: acceptance for {} is {:.0}%",
                    model.params()[i].name,
                    a * 100.0
                )));
            }
        }
    }

    let draws: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.draws.clone()).collect();
    let rhat = (0..model.dim())
        .map(|i| {
            let per_chain: Vec<Vec<f64>> = draws.iter().map(|c| c.iter().map(|d| d[i]).collect()).collect();
            rhat(&per_chain)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(PosteriorChains {
        model,
        param_names: model.param_names().iter().map(|s| s.to_string()).collect(),
        draws,
        acceptance: chains.into_iter().map(|c| c.acceptance).collect(),
        rhat,
        map,
    })
}

fn run_chain(
    model: Model,
    sessions: &[Vec<TrialRecord>],
    map: &FitResult,
    options: &McmcOptions,
    stream: u64,
) -> Result<Chain, CogfitError> {
    let dim = model.dim();
    let mut rng = split(options.seed, stream);
    let scale: Vec<f64> =
        map.sd_unbounded.iter().map(|s| if s.is_finite() { s.clamp(0.05, 3.0) } else { 1.0 }).collect();
    let log_post = |z: &[f64]| model.log_posterior_z(z, sessions);

    let mut z: Vec<f64> = (0..dim)
        .map(|i| map.estimate_unbounded[i] + options.init_jitter * scale[i] * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut lp = log_post(&z)?;
    if !lp.is_finite() {
        z = map.estimate_unbounded.clone();
        lp = log_post(&z)?;
    }
    let mut step: Vec<f64> = scale.iter().map(|s| 2.4 * s).collect();

    let sweep = |z: &mut Vec<f64>,
                 lp: &mut f64,
                 step: &[f64],
                 rng: &mut crate::rng::SessionRng,
                 accepted: &mut [usize]|
     -> Result<(), CogfitError> {
        for i in 0..dim {
            let old = z[i];
            z[i] = old + step[i] * rng.sample::<f64, _>(StandardNormal);
            let proposal = log_post(z)?;
            if proposal.is_finite() && rng.gen::<f64>().ln() < proposal - *lp {
                *lp = proposal;
                accepted[i] += 1;
            } else {
                z[i] = old;
            }
        }
        Ok(())
    };

    let mut batch = vec![0usize; dim];
    for it in 1..=options.n_warmup {
        sweep(&mut z, &mut lp, &step, &mut rng, &mut batch)?;
        if it % ADAPT_BATCH == 0 {
            for i in 0..dim {
                let rate = batch[i] as f64 / ADAPT_BATCH as f64;
                if rate < TARGET_LOW {
                    step[i] *= 0.8;
                } else if rate > TARGET_HIGH {
                    step[i] *= 1.25;
                }
                batch[i] = 0;
            }
        }
    }

    let mut accepted = vec![0usize; dim];
    let mut draws = Vec::with_capacity(options.n_draws);
    for _ in 0..options.n_draws {
        sweep(&mut z, &mut lp, &step, &mut rng, &mut accepted)?;
        draws.push(model.from_unbounded(&z));
    }
    let acceptance = accepted.iter().map(|a| *a as f64 / options.n_draws as f64).collect();
    Ok(Chain { draws, acceptance })
}

/// Split-chain R-hat. Each chain is cut into two halves (a trailing odd draw
/// is dropped) and the halves are compared as separate chains.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64, CogfitError> {
    let len = chains.first().map_or(0, Vec::len);
    if chains.len() < 2 || len < 4 {
        return Err(CogfitError::Degenerate("need at least two chains of four draws".into()));
    }
    if chains.iter().any(|c| c.len() != len) {
        return Err(CogfitError::Degenerate("chains differ in length".into()));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CogfitError::Numerical("non-finite draw".into()));
    }
    let n = len / 2;
    let halves: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..n], &c[n..2 * n]]).collect();
    let nf = n as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Err(CogfitError::Degenerate("within-chain variance is zero".into()));
    }
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_chains_are_degenerate() {
        assert!(matches!(rhat(&[vec![1.0; 10], vec![1.0; 10]]), Err(CogfitError::Degenerate(_))));
    }

    #[test]
    fn offset_chains_inflate_rhat() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).sin()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 5.0).collect();
        assert!(rhat(&[a, b]).unwrap() > 2.0);
    }
}
