mod common;

use common::*;
use nntt::fit::{
    fit_from, loss, sweep, update_core, EnvCache, EnvStorage, FitConfig, LocalProblem, OneHotSamples,
};
use nntt::sampling::SampleSet;
use nntt::tensor::DenseTensor;
use nntt::TtDistribution;
use proptest::prelude::*;

const EPS: f64 = 1e-16;

fn onehot(set: &SampleSet) -> OneHotSamples<f64> {
    OneHotSamples::new(set).unwrap()
}

fn check_cache(cache: &EnvCache<f64>, tt: &TtDistribution<f64>, set: &SampleSet) {
    let l = tt.sites();
    for bond in 0..=l {
        if let Some(g) = cache.left_gram(bond) {
            let want = brute_left_gram(tt, bond);
            assert!(rel_err(g.as_slice(), want.as_slice()) < 1e-10, "left gram {bond}");
            assert!((g - g.transpose()).norm() <= 1e-10 * g.norm().max(1.0));
            assert!(g.symmetric_eigenvalues().min() >= -1e-10 * g.norm().max(1.0));
        }
        if let Some(g) = cache.right_gram(bond) {
            let want = brute_right_gram(tt, bond);
            assert!(rel_err(g.as_slice(), want.as_slice()) < 1e-10, "right gram {bond}");
            assert!(g.symmetric_eigenvalues().min() >= -1e-10 * g.norm().max(1.0));
        }
        if let Some(o) = cache.left_overlap(bond) {
            assert!(rel_err(o, &brute_left_overlap(tt, set, bond)) < 1e-10, "left overlap {bond}");
        }
        if let Some(o) = cache.right_overlap(bond) {
            assert!(rel_err(o, &brute_right_overlap(tt, set, bond)) < 1e-10, "right overlap {bond}");
        }
    }
    assert_eq!(cache.left_gram(0).unwrap()[(0, 0)], 1.0);
    assert_eq!(cache.right_gram(l).unwrap()[(0, 0)], 1.0);
    assert!(cache.left_overlap(0).unwrap().iter().all(|&x| x == 1.0));
    assert!(cache.right_overlap(l).unwrap().iter().all(|&x| x == 1.0));
}

#[test]
fn onehot_alignment_overlaps() {
    let core = DenseTensor::new(vec![4, 1, 1], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let tt = TtDistribution::new(vec![core; 3]).unwrap();
    let zeros = SampleSet::from_counts(3, 0, 0, [(vec![0, 0, 0], 1)]).unwrap();
    let cache = EnvCache::new(&tt, &onehot(&zeros), EnvStorage::Full).unwrap();
    for bond in 0..3 {
        assert_eq!(cache.left_overlap(bond).unwrap(), &[1.0]);
    }
    let ones = SampleSet::from_counts(3, 0, 0, [(vec![1, 1, 1], 1)]).unwrap();
    let cache = EnvCache::new(&tt, &onehot(&ones), EnvStorage::Full).unwrap();
    assert_eq!(cache.left_overlap(1).unwrap(), &[0.0]);
}

#[test]
fn refresh_rejects_bad_site() {
    let set = random_samples(3, 50, 1);
    let s = onehot(&set);
    let tt = TtDistribution::random(3, 2, 0).unwrap();
    let mut cache = EnvCache::new(&tt, &s, EnvStorage::Full).unwrap();
    assert!(matches!(cache.refresh_left(&tt, &s, 3), Err(nntt::Error::Range { .. })));
    assert!(matches!(cache.refresh_right(&tt, &s, 7), Err(nntt::Error::Range { .. })));
}

#[test]
fn scalar_update_hits_frequencies() {
    let set = SampleSet::from_counts(1, 0, 0, [(vec![0], 1), (vec![1], 3), (vec![3], 6)]).unwrap();
    let s = onehot(&set);
    let tt = TtDistribution::random(1, 1, 5).unwrap();
    let mut cache = EnvCache::new(&tt, &s, EnvStorage::Full).unwrap();
    let core = update_core(&tt, &mut cache, &s, 0, EPS).unwrap();
    let want = [0.1, 0.3, 0.0, 0.6];
    for (g, w) in core.data().iter().zip(want) {
        assert!((g - w).abs() < 1e-12, "{g} vs {w}");
    }
    // Fixed point: another update leaves the core unchanged.
    let mut tt2 = tt.clone();
    tt2.set_core(0, core.clone()).unwrap();
    cache.invalidate_site(0);
    let again = update_core(&tt2, &mut cache, &s, 0, EPS).unwrap();
    for (a, b) in again.data().iter().zip(core.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    // At P = P_s the shifted loss equals −Σ f².
    let f2: f64 = want.iter().map(|f| f * f).sum();
    assert!((loss(&tt2, &s) + f2).abs() < 1e-12);
}

#[test]
fn zero_train_has_zero_loss() {
    let tt = TtDistribution::new(vec![DenseTensor::zeros(vec![4, 1, 2]), DenseTensor::zeros(vec![4, 2, 1])])
        .unwrap();
    assert_eq!(loss(&tt, &onehot(&random_samples(2, 30, 2))), 0.0);
}

#[test]
fn loss_matches_sixteen_entry_enumeration() {
    let set = SampleSet::from_counts(2, 0, 0, [(vec![0, 1], 2), (vec![3, 3], 1), (vec![2, 0], 4)]).unwrap();
    let tt = TtDistribution::random(2, 3, 17).unwrap();
    let got = loss(&tt, &onehot(&set));
    let want = brute_loss(&tt, &set);
    assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
}

#[test]
fn update_decreases_enumerated_loss() {
    let set = random_samples(3, 400, 8);
    let s = onehot(&set);
    let mut tt = TtDistribution::random(3, 2, 8).unwrap();
    let mut cache = EnvCache::new(&tt, &s, EnvStorage::Full).unwrap();
    for k in [0, 1, 2, 1] {
        let before = brute_loss(&tt, &set);
        let core = update_core(&tt, &mut cache, &s, k, EPS).unwrap();
        tt.set_core(k, core).unwrap();
        cache.invalidate_site(k);
        assert!(brute_loss(&tt, &set) <= before + 1e-9);
    }
}

#[test]
fn cache_stays_coherent_mid_sweep() {
    for (l, d, storage) in [(3, 2, EnvStorage::Full), (4, 3, EnvStorage::Anchored), (4, 2, EnvStorage::Full)] {
        let set = random_samples(l, 300, l as u64);
        let s = onehot(&set);
        let mut tt = TtDistribution::random(l, d, 3).unwrap();
        let mut cache = EnvCache::new(&tt, &s, storage).unwrap();
        check_cache(&cache, &tt, &set);
        for _ in 0..2 {
            for k in 0..l - 1 {
                let core = update_core(&tt, &mut cache, &s, k, EPS).unwrap();
                tt.set_core(k, core).unwrap();
                cache.invalidate_site(k);
                check_cache(&cache, &tt, &set);
                cache.refresh_left(&tt, &s, k).unwrap();
                check_cache(&cache, &tt, &set);
            }
            for k in (1..l).rev() {
                let core = update_core(&tt, &mut cache, &s, k, EPS).unwrap();
                tt.set_core(k, core).unwrap();
                cache.invalidate_site(k);
                check_cache(&cache, &tt, &set);
                cache.refresh_right(&tt, &s, k).unwrap();
                check_cache(&cache, &tt, &set);
            }
        }
    }
}

#[test]
fn local_terms_match_enumeration() {
    for seed in 0..6 {
        let l = 2 + (seed as usize % 3);
        let set = random_samples(l, 200, seed);
        let s = onehot(&set);
        let tt = TtDistribution::random(l, 1 + seed as usize % 3, seed).unwrap();
        let mut cache = EnvCache::new(&tt, &s, EnvStorage::Anchored).unwrap();
        for k in 0..l {
            let p = LocalProblem::assemble(&tt, &mut cache, &s, k).unwrap();
            assert!(rel_err(p.numerator().data(), &brute_numerator(&tt, &set, k)) < 1e-10);
            let den = p.denominator(tt.core(k));
            assert!(rel_err(den.data(), &brute_denominator(&tt, k)) < 1e-10);
            let want = brute_loss(&tt, &set);
            assert!((p.loss(tt.core(k)) - want).abs() < 1e-10 * want.abs().max(1e-3));
        }
    }
}

fn run(tt: TtDistribution<f64>, s: &OneHotSamples<f64>, storage: EnvStorage, sweeps: usize) -> (TtDistribution<f64>, Vec<f64>) {
    let cfg = FitConfig { max_sweeps: sweeps, storage, window: sweeps + 1, ..FitConfig::default() };
    let (tt, trace, _, _) = fit_from(tt, s, &cfg).unwrap();
    (tt, trace.iter().map(|t| t.loss).collect())
}

#[test]
fn anchored_storage_is_bit_identical() {
    for l in [6, 8] {
        let set = random_samples(l, 3000, 40 + l as u64);
        let s = onehot(&set);
        let init = TtDistribution::random(l, 3, 1).unwrap();
        let (a, ta) = run(init.clone(), &s, EnvStorage::Anchored, 15);
        let (b, tb) = run(init.clone(), &s, EnvStorage::Full, 15);
        assert_eq!(a, b);
        assert_eq!(ta, tb);

        let mut full = EnvCache::new(&init, &s, EnvStorage::Full).unwrap();
        let mut anch = EnvCache::new(&init, &s, EnvStorage::Anchored).unwrap();
        let (mut t1, mut t2) = (init.clone(), init);
        sweep(&mut t1, &mut full, &s, EPS).unwrap();
        sweep(&mut t2, &mut anch, &s, EPS).unwrap();
        assert!(anch.stored_overlap_blocks() < full.stored_overlap_blocks());
    }
}

#[test]
fn point_mass_fit_is_onehot() {
    let set = SampleSet::from_counts(4, 0, 0, [(vec![1, 3, 0, 2], 11)]).unwrap();
    let cfg = FitConfig { bond_dim: 1, trials: 1, ..FitConfig::default() };
    let out = nntt::fit::<f64>(&set, &cfg).unwrap();
    let best = &out.best().tt;
    assert!((out.best().final_loss() + 1.0).abs() < 1e-9);
    let z = best.total_mass();
    assert!((best.probability(&[1, 3, 0, 2]) / z - 1.0).abs() < 1e-9);
}

#[test]
fn converged_train_is_idempotent() {
    let set = random_samples(2, 500, 3);
    let s = onehot(&set);
    let cfg: FitConfig<f64> = FitConfig { bond_dim: 1, max_sweeps: 20000, rel_tol: 0.0, ..FitConfig::default() };
    let (mut tt, _, _, _) = fit_from(TtDistribution::random(2, 1, 0).unwrap(), &s, &cfg).unwrap();
    let before = tt.clone();
    let mut cache = EnvCache::new(&tt, &s, EnvStorage::Full).unwrap();
    sweep(&mut tt, &mut cache, &s, EPS).unwrap();
    for (a, b) in tt.cores().iter().zip(before.cores()) {
        let diff = a.data().iter().zip(b.data()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-10, "{diff}");
    }
}

#[test]
fn trials_are_reproducible_and_best_is_argmin() {
    let set = random_samples(4, 2000, 12);
    let cfg = FitConfig { bond_dim: 3, max_sweeps: 40, trials: 10, base_seed: 5, ..FitConfig::default() };
    let a = nntt::fit::<f64>(&set, &cfg).unwrap();
    let b = nntt::fit::<f64>(&set, &cfg).unwrap();
    assert_eq!(a.final_losses(), b.final_losses());
    let losses = a.final_losses();
    let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    assert_eq!(losses[a.best], min);
    assert_eq!(a.trials[3].seed, 8);
    for (x, y) in a.trials.iter().zip(&b.trials) {
        assert_eq!(x.trace.iter().map(|t| t.loss).collect::<Vec<_>>(), y.trace.iter().map(|t| t.loss).collect::<Vec<_>>());
    }
}

#[test]
fn empty_samples_are_rejected() {
    let set = SampleSet::from_counts(2, 0, 0, Vec::<(Vec<u8>, u64)>::new()).unwrap();
    assert!(matches!(nntt::fit::<f64>(&set, &FitConfig::default()), Err(nntt::Error::Validation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn updates_are_monotone_and_nonnegative(l in 1usize..5, d in 1usize..5, seed in 0u64..1000, n in 5u64..3000) {
        let set = random_samples(l, n, seed);
        let s = onehot(&set);
        let mut tt = TtDistribution::random(l, d, seed).unwrap();
        let mut cache = EnvCache::new(&tt, &s, EnvStorage::Anchored).unwrap();
        let mut prev = loss(&tt, &s);
        for _ in 0..5 {
            for r in sweep(&mut tt, &mut cache, &s, EPS).unwrap() {
                prop_assert!(r.after <= r.before + 1e-9);
                prop_assert!((r.before - prev).abs() <= 1e-10 * prev.abs().max(1e-3));
                prev = r.after;
            }
            prop_assert!(tt.min_entry() >= 0.0);
        }
        prop_assert!((prev - brute_loss(&tt, &set)).abs() <= 1e-10 * prev.abs().max(1e-3));
    }

    #[test]
    fn count_scaling_leaves_trajectory_unchanged(seed in 0u64..1000, c in 2u64..50) {
        let set = random_samples(3, 300, seed);
        let scaled = SampleSet::from_counts(
            3, 0, 0, set.entries().iter().map(|e| (e.outcome.clone(), e.count * c)),
        ).unwrap();
        let init = TtDistribution::random(3, 2, seed).unwrap();
        let (a, ta) = run(init.clone(), &onehot(&set), EnvStorage::Anchored, 8);
        let (b, tb) = run(init, &onehot(&scaled), EnvStorage::Anchored, 8);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ta, tb);
    }
}
