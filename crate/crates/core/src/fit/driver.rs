use std::time::Instant;

use rayon::prelude::*;

use super::env::{EnvCache, EnvStorage};
use super::local::{loss, LocalProblem};
use super::onehot::OneHotSamples;
use crate::error::{Error, Result};
use crate::sampling::SampleSet;
use crate::scalar::Real;
use crate::tt::TtDistribution;

#[derive(Clone, Debug)]
pub struct FitConfig<T> {
    pub bond_dim: usize,
    pub max_sweeps: usize,
    /// Sweeps between the two losses compared by the stopping rule.
    pub window: usize,
    pub rel_tol: T,
    pub eps: T,
    pub trials: usize,
    /// Trial `i` initializes from seed `base_seed + i`.
    pub base_seed: u64,
    pub storage: EnvStorage,
    /// Keep the before/after loss of every core update.
    pub record_updates: bool,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            bond_dim: 10,
            max_sweeps: 2000,
            window: 10,
            rel_tol: T::lit(1e-8),
            eps: T::lit(crate::tensor::DEFAULT_EPS),
            trials: 20,
            base_seed: 0,
            storage: EnvStorage::default(),
            record_updates: false,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.bond_dim == 0 || self.trials == 0 || self.window == 0 {
            return Err(Error::Validation(
                "bond dimension, trial count and window must be positive".into(),
            ));
        }
        if !(self.rel_tol >= T::zero()) || !(self.eps > T::zero()) {
            return Err(Error::Validation("tolerance must be >= 0 and eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateRecord<T> {
    pub site: usize,
    pub before: T,
    pub after: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepStat<T> {
    /// 0 is the random start.
    pub sweep: usize,
    pub loss: T,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrialResult<T> {
    pub trial: usize,
    pub seed: u64,
    pub tt: TtDistribution<T>,
    pub trace: Vec<SweepStat<T>>,
    pub updates: Vec<UpdateRecord<T>>,
    pub converged: bool,
}

impl<T: Real> TrialResult<T> {
    pub fn final_loss(&self) -> T {
        self.trace.last().map(|s| s.loss).unwrap_or(T::lit(f64::NAN))
    }

    pub fn sweeps(&self) -> usize {
        self.trace.last().map(|s| s.sweep).unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct FitOutcome<T> {
    pub trials: Vec<TrialResult<T>>,
    pub best: usize,
}

impl<T: Real> FitOutcome<T> {
    pub fn best(&self) -> &TrialResult<T> {
        &self.trials[self.best]
    }

    pub fn final_losses(&self) -> Vec<T> {
        self.trials.iter().map(TrialResult::final_loss).collect()
    }
}

fn update_site<T: Real>(
    tt: &mut TtDistribution<T>,
    cache: &mut EnvCache<T>,
    samples: &OneHotSamples<T>,
    site: usize,
    eps: T,
) -> Result<UpdateRecord<T>> {
    let problem = LocalProblem::assemble(tt, cache, samples, site)?;
    let before = problem.loss(tt.core(site));
    let core = problem.multiplicative_step(tt.core(site), eps)?;
    let after = problem.loss(&core);
    tt.set_core(site, core)?;
    cache.invalidate_site(site);
    Ok(UpdateRecord { site, before, after })
}

/// One left-to-right pass over sites `0..L-1` and one right-to-left pass over
/// `L-1..1`, refreshing the environment behind each updated core.
pub fn sweep<T: Real>(
    tt: &mut TtDistribution<T>,
    cache: &mut EnvCache<T>,
    samples: &OneHotSamples<T>,
    eps: T,
) -> Result<Vec<UpdateRecord<T>>> {
    let l = tt.sites();
    if l == 1 {
        return Ok(vec![update_site(tt, cache, samples, 0, eps)?]);
    }
    let mut records = Vec::with_capacity(2 * (l - 1));
    for k in 0..l - 1 {
        records.push(update_site(tt, cache, samples, k, eps)?);
        cache.refresh_left(tt, samples, k)?;
    }
    for k in (1..l).rev() {
        records.push(update_site(tt, cache, samples, k, eps)?);
        cache.refresh_right(tt, samples, k)?;
    }
    Ok(records)
}

/// True once the loss has improved by less than `rel_tol` (relative) over the
/// last `window` sweeps.
pub fn should_stop<T: Real>(losses: &[T], window: usize, rel_tol: T) -> bool {
    let t = losses.len();
    if t <= window {
        return false;
    }
    let (old, new) = (losses[t - 1 - window], losses[t - 1]);
    old - new < rel_tol * old.abs()
}

#[allow(clippy::type_complexity)]
pub fn fit_from<T: Real>(
    mut tt: TtDistribution<T>,
    samples: &OneHotSamples<T>,
    cfg: &FitConfig<T>,
) -> Result<(TtDistribution<T>, Vec<SweepStat<T>>, Vec<UpdateRecord<T>>, bool)> {
    cfg.validate()?;
    let start = Instant::now();
    let mut cache = EnvCache::new(&tt, samples, cfg.storage)?;
    let mut losses = vec![loss(&tt, samples)];
    let mut trace = vec![SweepStat { sweep: 0, loss: losses[0], elapsed_s: 0.0 }];
    let mut updates = Vec::new();
    let mut converged = false;
    for t in 1..=cfg.max_sweeps {
        let records = sweep(&mut tt, &mut cache, samples, cfg.eps)?;
        let current = records.last().expect("at least one update").after;
        if !current.is_finite() {
            return Err(Error::DegenerateFit(format!("loss became {current} at sweep {t}")));
        }
        losses.push(current);
        trace.push(SweepStat { sweep: t, loss: current, elapsed_s: start.elapsed().as_secs_f64() });
        if cfg.record_updates {
            updates.extend(records);
        }
        if should_stop(&losses, cfg.window, cfg.rel_tol) {
            converged = true;
            break;
        }
    }
    Ok((tt, trace, updates, converged))
}

pub fn fit_trial<T: Real>(
    samples: &OneHotSamples<T>,
    cfg: &FitConfig<T>,
    trial: usize,
) -> Result<TrialResult<T>> {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let init = TtDistribution::random(samples.sites(), cfg.bond_dim, seed)?;
    let (tt, trace, updates, converged) = fit_from(init, samples, cfg)?;
    Ok(TrialResult { trial, seed, tt, trace, updates, converged })
}

/// Index of the lowest final loss; NaN losses never win.
pub fn best_of_trials<T: Real>(trials: &[TrialResult<T>]) -> Option<usize> {
    let key = |r: &TrialResult<T>| {
        let l = r.final_loss().as_f64();
        if l.is_nan() {
            f64::INFINITY
        } else {
            l
        }
    };
    (0..trials.len()).min_by(|&a, &b| key(&trials[a]).total_cmp(&key(&trials[b])))
}

/// Independent trials from different random starts, run in parallel.
pub fn fit<T: Real>(set: &SampleSet, cfg: &FitConfig<T>) -> Result<FitOutcome<T>> {
    cfg.validate()?;
    let samples = OneHotSamples::new(set)?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| fit_trial(&samples, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let best = best_of_trials(&trials).expect("at least one trial");
    Ok(FitOutcome { trials, best })
}
