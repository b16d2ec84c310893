//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line. Tolerances are pinned in the assertions.
//!
//! Run with `cargo test --test acceptance -- --show-output` to see every
//! line; any failure fails the build.

use ndarray::{Array1, Array2};
use rand::Rng;

use genboost::cascade::{
    bound_terms, bound_terms_with, convergence_gap, greedy_train, incorporate_next, CascadeModel,
    ModelSpec, StageSpec,
};
use genboost::data::{make_synthetic, Dataset, LabeledDataset, SynthKind};
use genboost::models::gmm::{gmm_fit_em, gmm_fit_em_source, GmmInit};
use genboost::models::rbm::{RbmModel, RbmParams};
use genboost::models::TabularModel;
use genboost::multiplicative::{
    estimate_log_partition, mcmc_sample, ChainConfig, ComponentModel, DensityComponent,
    MultiplicativeEnsemble,
};
use genboost::oracle;
use genboost::rng::{seeded, substream, Prng};
use genboost::semisup::{
    accuracy_eval, semisup_bound_terms, semisup_train, SemiSupConfig, TopSpec,
};
use genboost::train::{FixedSource, Optimizer, TrainConfig};
use genboost::{MetaModel, Space};

fn pass(n: usize, name: &str) {
    println!("ACCEPTANCE {n:02} {name}: PASS");
}

fn vae_stage(epochs: usize, lr: f64, hidden: usize, optimizer: Optimizer) -> StageSpec {
    StageSpec {
        model: ModelSpec::Vae {
            latent: 2,
            hidden_layers: vec![hidden],
        },
        train: TrainConfig {
            epochs,
            learning_rate: lr,
            batch_size: 32,
            optimizer,
            ..TrainConfig::default()
        },
    }
}

fn cover_gmm_stage(components: usize) -> StageSpec {
    StageSpec {
        model: ModelSpec::Gmm {
            components,
            init: GmmInit::CoverStandardNormal,
        },
        train: TrainConfig::default(),
    }
}

/// 1. On fuzzed tiny discrete chains, the exact data log-likelihood never
///    falls below the exact sum of per-layer terms (slack >= -1e-9).
#[test]
fn criterion_01_exact_bound_never_exceeds_data_loglik() {
    let mut rng = seeded(0xACC1);
    let mut min_slack = f64::INFINITY;
    for trial in 0..100 {
        let levels = 1 + (trial % 3);
        let chain = oracle::random_discrete_cascade(&mut rng, levels, 1 << 14).unwrap();
        let data = oracle::random_discrete_dataset(chain.visible_space(), 6, &mut rng).unwrap();
        let ll = oracle::exact_data_loglik(&chain, &data).unwrap();
        let total: f64 = oracle::exact_bound_terms(&chain, &data).unwrap().iter().sum();
        let slack = ll - total;
        min_slack = min_slack.min(slack);
        assert!(
            slack >= -1e-9,
            "trial {trial}: data loglik {ll} below layer-term sum {total}"
        );
    }
    pass(1, &format!("exact bound inequality on 100 fuzzed chains (min slack {min_slack:.2e})"));
}

/// 2. With a single exact-density model the Monte Carlo bound equals the
///    exact marginal to 1e-9 at any sample budget.
#[test]
fn criterion_02_single_layer_bound_is_tight() {
    // Mixture bottom.
    let (data, _) = make_synthetic(&SynthKind::two_cluster_default(), 120, 2).unwrap();
    let gmm = gmm_fit_em(&data, 2, GmmInit::KmeansPp, &TrainConfig::default(), &mut seeded(3)).unwrap();
    let exact: f64 = {
        let w = data.probability_weights();
        (0..data.n())
            .map(|i| w[i] * gmm.log_density(data.point(i)).unwrap())
            .sum()
    };
    let chain = CascadeModel::single(MetaModel::Gmm(gmm));
    let mut totals = Vec::new();
    for (n_mc, seed) in [(1usize, 10u64), (7, 11), (64, 12)] {
        let rep = bound_terms(&chain, &data, n_mc, &mut seeded(seed)).unwrap();
        assert!(
            (rep.total - exact).abs() < 1e-9,
            "mixture bottom at n_mc={n_mc}: {} vs {exact}",
            rep.total
        );
        assert_eq!(rep.total_std_err, 0.0);
        totals.push(rep.total);
    }
    assert!(totals.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()));

    // Small Boltzmann-machine bottom.
    let mut rng = seeded(4);
    let params = RbmParams {
        w: Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() - 0.5),
        b_visible: Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5),
        c_hidden: Array1::from_shape_fn(3, |_| rng.random::<f64>() - 0.5),
    };
    let rbm = RbmModel::new(params).unwrap();
    let bdata = oracle::random_discrete_dataset(Space::binary(4), 40, &mut rng).unwrap();
    let exact_rbm: f64 = {
        let w = bdata.probability_weights();
        (0..bdata.n())
            .map(|i| w[i] * rbm.log_marginal_visible(bdata.point(i)).unwrap().value)
            .sum()
    };
    let chain = CascadeModel::single(MetaModel::Rbm(rbm));
    for (n_mc, seed) in [(1usize, 13u64), (64, 14)] {
        let rep = bound_terms(&chain, &bdata, n_mc, &mut seeded(seed)).unwrap();
        assert!(
            (rep.total - exact_rbm).abs() < 1e-9,
            "machine bottom at n_mc={n_mc}: {} vs {exact_rbm}",
            rep.total
        );
    }
    pass(2, "single-layer bound equals the exact marginal at every budget");
}

/// 3. After an optimal tabular layer, appended layers cannot raise the
///    bound: every partial sum of later terms stays <= 1e-9 over 100 fuzzed
///    extensions, and a deliberately bad layer shows the check can fire.
#[test]
fn criterion_03_optimal_layer_stalls_appended_partial_sums() {
    let mut rng = seeded(0xACC3);
    let mut max_partial = f64::NEG_INFINITY;
    for trial in 0..100 {
        let base = oracle::random_discrete_cascade(&mut rng, 1 + (trial % 2), 1 << 11).unwrap();
        let data = oracle::random_discrete_dataset(base.visible_space(), 6, &mut rng).unwrap();
        let hidden = Space::categorical(2 + (trial % 3));
        let opt = oracle::optimal_top_model(Some(&base), &data, hidden, None).unwrap();
        let mut chain = base.clone();
        let k = chain.len() + 1;
        chain.push(opt.into()).unwrap();
        for _ in 0..1 + (trial % 3) {
            let vis = chain.top_hidden_space();
            let next = TabularModel::random(vis, Space::categorical(2), &mut rng).unwrap();
            chain.push(next.into()).unwrap();
        }
        let partial = oracle::max_appended_partial_sum(&chain, &data, k).unwrap();
        max_partial = max_partial.max(partial);
        assert!(partial <= 1e-9, "trial {trial}: appended layers gained {partial}");
    }

    // Non-vacuousness: after a deliberately bad top, the optimal next layer
    // strictly improves.
    let base = oracle::random_discrete_cascade(&mut rng, 1, 1 << 8).unwrap();
    let data = oracle::random_discrete_dataset(base.visible_space(), 6, &mut rng).unwrap();
    let vis = base.top_hidden_space();
    let n_vis = vis.state_count().unwrap() as usize;
    let mut joint = Array2::from_elem((n_vis, 2), 1e-3);
    joint[[0, 0]] = 1.0;
    let total = joint.sum();
    joint.mapv_inplace(|p| p / total);
    let bad = TabularModel::new(vis, Space::categorical(2), joint).unwrap();
    let mut chain = base.clone();
    let k = chain.len() + 1;
    chain.push(bad.into()).unwrap();
    let opt = oracle::optimal_top_model(Some(&chain), &data, Space::categorical(2), None).unwrap();
    chain.push(opt.into()).unwrap();
    let recoverable = oracle::max_appended_partial_sum(&chain, &data, k).unwrap();
    assert!(
        recoverable > 1e-6,
        "expected a strictly positive partial sum after a bad layer, got {recoverable}"
    );
    pass(
        3,
        &format!("optimal-layer stall over 100 fuzzed extensions (max partial {max_partial:.2e}, counter-case +{recoverable:.3})"),
    );
}

/// 4. Prior-entropy gap: exactly zero for the oracle-optimal top; for a
///    trained 2-d amortized top the closed-form prior term is
///    -2.837877 and the estimated gap is >= -3 sigma.
#[test]
fn criterion_04_prior_entropy_gap() {
    // Exact route.
    let mut rng = seeded(0xACC4);
    for trial in 0..20 {
        let base = oracle::random_discrete_cascade(&mut rng, 1, 1 << 8).unwrap();
        let data = oracle::random_discrete_dataset(base.visible_space(), 5, &mut rng).unwrap();
        let n_vis = base.top_hidden_space().state_count().unwrap() as usize;
        let mut cond = Array2::zeros((n_vis, 3));
        for v in 0..n_vis {
            let mut row: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
            let t: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= t);
            for h in 0..3 {
                cond[[v, h]] = row[h];
            }
        }
        let opt =
            oracle::optimal_top_model(Some(&base), &data, Space::categorical(3), Some(&cond))
                .unwrap();
        let mut chain = base.clone();
        chain.push(opt.into()).unwrap();
        let gap = oracle::exact_convergence_gap(&chain, &data).unwrap();
        assert!(gap.abs() <= 1e-9, "trial {trial}: exact gap {gap}");
    }

    // Monte Carlo route on trained amortized tops in the regime the
    // diagnostic targets: models near their optimum (standard-normal data,
    // which the family can match exactly).
    let kind = SynthKind::GaussianMixture {
        weights: vec![1.0],
        means: vec![vec![0.0, 0.0]],
        variances: vec![vec![1.0, 1.0]],
    };
    let mut last_gap = 0.0;
    for seed in 0..5u64 {
        let (data, _) = make_synthetic(&kind, 250, 5 + seed).unwrap();
        let (chain, _) = greedy_train(
            &data,
            &[vae_stage(30, 0.01, 16, Optimizer::Sgd)],
            8,
            &mut seeded(6 + seed),
        )
        .unwrap();
        let gap = convergence_gap(&chain, &data, 64, &mut seeded(7 + seed)).unwrap();
        assert!(
            (gap.prior_expected_log - (-2.837877)).abs() < 5e-7,
            "prior term {} != -2.837877",
            gap.prior_expected_log
        );
        assert!(
            gap.value >= -3.0 * gap.std_err,
            "seed {seed}: reported gap {} below -3 x {}",
            gap.value,
            gap.std_err
        );
        last_gap = gap.value;
    }
    pass(4, &format!("prior-entropy gap (exact 0; trained-top gaps >= -3se, last {last_gap:.4})"));
}

/// 5. A covering-initialized mixture on top of an amortized model never
///    loses: over 20 seeded runs the top term stays >= -3 sigma and its
///    mean is positive.
#[test]
fn criterion_05_covering_mixture_top_never_hurts() {
    let mut values = Vec::new();
    for seed in 0..20u64 {
        let (data, _) = make_synthetic(&SynthKind::two_cluster_default(), 300, 200 + seed).unwrap();
        let recipe = [vae_stage(25, 0.01, 16, Optimizer::Sgd), cover_gmm_stage(4)];
        let mut rng = seeded(seed);
        let (_, reports) = greedy_train(&data, &recipe, 32, &mut rng).unwrap();
        let l2 = reports[1].terms[1];
        assert!(
            l2.value >= -3.0 * l2.std_err,
            "seed {seed}: top term {} below -3 x {}",
            l2.value,
            l2.std_err
        );
        values.push(l2.value);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!(mean > 0.0, "mean top term {mean} not positive");
    pass(5, &format!("covering mixture top term >= -3se in 20/20 runs (mean +{mean:.3})"));
}

/// 6. Stacking amortized models: the two-layer bound never falls below the
///    one-layer bound (3 sigma slack), and a third identical-capacity layer
///    plateaus (|L3| <= 3 se) in at least 15 of 20 seeds.
#[test]
fn criterion_06_stacked_bound_improves_then_plateaus() {
    let stage = |epochs: usize| vae_stage(epochs, 0.005, 24, Optimizer::Adam);
    let mut plateau_count = 0;
    for seed in 0..20u64 {
        let (data, _) = make_synthetic(&SynthKind::two_cluster_default(), 300, 100 + seed).unwrap();
        let mut rng = seeded(seed);
        let (chain1, _) = greedy_train(&data, &[stage(40)], 1, &mut rng).unwrap();
        let (chain2, _) = incorporate_next(&chain1, &stage(120), &data, 1, &mut rng).unwrap();
        let (chain3, _) = incorporate_next(&chain2, &stage(120), &data, 1, &mut rng).unwrap();
        let b1 = bound_terms_with(&chain1, &data, 16, 128, &mut rng).unwrap();
        let b2 = bound_terms_with(&chain2, &data, 16, 128, &mut rng).unwrap();
        let b3 = bound_terms_with(&chain3, &data, 16, 128, &mut rng).unwrap();
        let sigma = (b1.total_std_err.powi(2) + b2.total_std_err.powi(2)).sqrt();
        assert!(
            b2.total >= b1.total - 3.0 * sigma,
            "seed {seed}: bound fell from {} to {}",
            b1.total,
            b2.total
        );
        let l3 = b3.terms[2];
        if l3.value.abs() <= 3.0 * l3.std_err {
            plateau_count += 1;
        }
    }
    assert!(
        plateau_count >= 15,
        "third layer plateaued in only {plateau_count}/20 seeds"
    );
    pass(6, &format!("stacked bound improves then plateaus ({plateau_count}/20 seeds)"));
}

/// 7. Backpropagation gradients match central finite differences for every
///    parameter (relative error <= 1e-4) on a fixed-noise 4-d instance.
#[test]
fn criterion_07_backprop_matches_finite_differences() {
    use genboost::models::VaeModel;
    let mut rng = seeded(0xACC7);
    let mut model = VaeModel::new(Space::real(4), 2, &[5], &mut rng).unwrap();
    let mut theta = model.flat_params();
    for (i, v) in theta.iter_mut().enumerate() {
        *v += 0.01 * ((i % 11) as f64 - 5.0);
    }
    model.set_flat_params(&theta);
    let xs = ndarray::array![
        [0.5, -1.0, 0.25, 2.0],
        [-0.5, 0.75, 1.5, -0.25],
        [0.0, 0.1, -0.2, 0.3]
    ];
    let ws = vec![1.0, 1.0, 1.0];
    let eps = ndarray::array![[0.3, -0.6], [1.1, 0.2], [-0.8, 0.5]];
    let (_, grads) = model.batch_loss_grad(xs.view(), &ws, eps.view()).unwrap();
    let flat_g = grads.flat();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let h = 1e-5 * theta[i].abs().max(1.0);
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let mut mp = model.clone();
        mp.set_flat_params(&plus);
        let mut mm = model.clone();
        mm.set_flat_params(&minus);
        let fd = (mp.batch_loss(xs.view(), &ws, eps.view()).unwrap()
            - mm.batch_loss(xs.view(), &ws, eps.view()).unwrap())
            / (2.0 * h);
        let rel = (flat_g[i] - fd).abs() / (flat_g[i].abs() + fd.abs()).max(1e-3);
        worst = worst.max(rel);
        assert!(rel <= 1e-4, "parameter {i}: backprop {} vs fd {fd}", flat_g[i]);
    }
    pass(7, &format!("backprop matches finite differences (worst rel err {worst:.2e})"));
}

/// 8. Weighted and unweighted EM never decrease the objective (within
///    1e-9 per iteration) over 50 fuzzed fits.
#[test]
fn criterion_08_em_objective_is_monotone() {
    let mut rng = seeded(0xACC8);
    let mut checked = 0;
    let mut trial = 0;
    while checked < 50 {
        trial += 1;
        let k_true = 1 + (trial % 3);
        let d = 1 + (trial % 2);
        let n = 80 + (trial % 40);
        let mut means = Vec::new();
        let mut variances = Vec::new();
        for _ in 0..k_true {
            means.push((0..d).map(|_| (rng.random::<f64>() - 0.5) * 8.0).collect());
            variances.push((0..d).map(|_| 0.2 + rng.random::<f64>()).collect());
        }
        let kind = SynthKind::GaussianMixture {
            weights: (0..k_true).map(|_| 1.0 + rng.random::<f64>()).collect(),
            means,
            variances,
        };
        let (base, _) = make_synthetic(&kind, n, rng.random::<u64>() >> 1).unwrap();
        let data = if trial % 2 == 0 {
            let w = Array1::from_shape_fn(base.n(), |_| 0.25 + rng.random::<f64>());
            base.replace_weights(w).unwrap()
        } else {
            base
        };
        let cfg = TrainConfig {
            em_max_iters: 30,
            em_tol: 1e-12,
            ..TrainConfig::default()
        };
        let source = FixedSource::new(&data);
        let fit_k = 1 + (trial % 4);
        let (_, diag) = gmm_fit_em_source(&source, fit_k, GmmInit::KmeansPp, &cfg, &mut rng).unwrap();
        if diag.reseeded {
            // A re-seeded component restarts the monotone segment; skip the
            // rare trial rather than weaken the check.
            continue;
        }
        for w in diag.trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9,
                "trial {trial}: objective dropped {} -> {}",
                w[0],
                w[1]
            );
        }
        checked += 1;
    }
    pass(8, "EM objective monotone over 50 fuzzed weighted/unweighted fits");
}

fn random_small_ensemble(rng: &mut Prng) -> (MultiplicativeEnsemble, ComponentModel) {
    loop {
        let space = Space::binary(8);
        let a = TabularModel::random(space, Space::categorical(3), rng).unwrap();
        let b = RbmModel::new(RbmParams {
            w: Array2::from_shape_fn((8, 4), |_| (rng.random::<f64>() - 0.5) * 1.6),
            b_visible: Array1::from_shape_fn(8, |_| rng.random::<f64>() - 0.5),
            c_hidden: Array1::from_shape_fn(4, |_| rng.random::<f64>() - 0.5),
        })
        .unwrap();
        let alpha_a = 0.3 + rng.random::<f64>() * 0.7;
        let alpha_b = 0.3 + rng.random::<f64>() * 0.7;
        let proposal = ComponentModel::Meta(MetaModel::Tabular(a.clone()));
        let ens = MultiplicativeEnsemble::new(
            vec![
                DensityComponent {
                    model: ComponentModel::Meta(a.into()),
                    alpha: alpha_a,
                },
                DensityComponent {
                    model: ComponentModel::Meta(b.into()),
                    alpha: alpha_b,
                },
            ],
            None,
        )
        .unwrap();
        // Keep the relative-error target meaningful.
        let exact = oracle::exact_log_partition(&ens).unwrap();
        if exact.abs() >= 0.3 {
            return (ens, proposal);
        }
    }
}

/// 9. Importance-sampled ln Z: within 2% relative error of the exact value
///    at N = 1e5 in >= 95% of 50 trials, with >= 90% coverage of the
///    +-2 sigma interval.
#[test]
fn criterion_09_partition_estimates_are_calibrated() {
    let mut rng = seeded(0xACC9);
    let mut within_rel = 0;
    let mut covered = 0;
    let trials = 50;
    for trial in 0..trials {
        let (ens, proposal) = random_small_ensemble(&mut rng);
        let exact = oracle::exact_log_partition(&ens).unwrap();
        let mut sub = substream(0xACC90, trial as u64);
        let est = estimate_log_partition(&ens, &proposal, 100_000, 1, &mut sub).unwrap();
        if ((est.value - exact) / exact).abs() <= 0.02 {
            within_rel += 1;
        }
        if (est.value - exact).abs() <= 2.0 * est.std_err {
            covered += 1;
        }
    }
    assert!(
        within_rel * 100 >= trials * 95,
        "only {within_rel}/{trials} within 2% relative error"
    );
    assert!(
        covered * 100 >= trials * 90,
        "only {covered}/{trials} inside +-2 sigma"
    );
    pass(9, &format!("partition estimates calibrated ({within_rel}/{trials} within 2%, {covered}/{trials} covered)"));
}

/// 10. Independence-chain sampling: a million thinned draws land within
///     total-variation 0.05 of the exact target, and a chain whose target
///     is its own proposal accepts every move.
#[test]
fn criterion_10_mcmc_matches_exact_target() {
    let mut rng = seeded(0xACCA);
    let space = Space::binary(3);
    let a = TabularModel::random(space, Space::categorical(3), &mut rng).unwrap();
    let b = RbmModel::new(RbmParams {
        w: Array2::from_shape_fn((3, 2), |_| (rng.random::<f64>() - 0.5) * 2.0),
        b_visible: Array1::from_shape_fn(3, |_| rng.random::<f64>() - 0.5),
        c_hidden: Array1::from_shape_fn(2, |_| rng.random::<f64>() - 0.5),
    })
    .unwrap();
    let proposal = ComponentModel::Meta(MetaModel::Tabular(a.clone()));
    let ens = MultiplicativeEnsemble::new(
        vec![
            DensityComponent {
                model: ComponentModel::Meta(a.into()),
                alpha: 0.7,
            },
            DensityComponent {
                model: ComponentModel::Meta(b.into()),
                alpha: 0.8,
            },
        ],
        None,
    )
    .unwrap();
    let exact = oracle::exact_ensemble_distribution(&ens).unwrap();
    let cfg = ChainConfig {
        burn_in: 1_000,
        thinning: 2,
        n_mc: 1,
    };
    let result = mcmc_sample(&ens, 1_000_000, &proposal, &cfg, &mut rng).unwrap();
    let mut counts = vec![0usize; 8];
    for row in result.samples.rows() {
        counts[space.state_index(row).unwrap()] += 1;
    }
    let tv: f64 = counts
        .iter()
        .enumerate()
        .map(|(s, &c)| (c as f64 / 1e6 - exact[s]).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.05, "total variation {tv} above 0.05");

    // Target equal to the proposal: everything is accepted.
    let single = MultiplicativeEnsemble::new(
        vec![DensityComponent {
            model: proposal.clone(),
            alpha: 1.0,
        }],
        None,
    )
    .unwrap();
    let result = mcmc_sample(
        &single,
        2_000,
        &proposal,
        &ChainConfig {
            burn_in: 200,
            thinning: 1,
            n_mc: 1,
        },
        &mut rng,
    )
    .unwrap();
    assert_eq!(result.acceptance_rate, 1.0);
    pass(10, &format!("independence chain within TV {tv:.4} of the exact target; self-target accepts all"));
}

fn four_cluster_task(n_unlabeled: usize, labels_per_class: usize, seed: u64) -> LabeledDataset {
    let centers = [
        ([3.0f64, 3.0f64], 0usize),
        ([-3.0, -3.0], 0),
        ([3.0, -3.0], 1),
        ([-3.0, 3.0], 1),
    ];
    let mut rng = seeded(seed);
    let mut draw = |center: [f64; 2], rng: &mut Prng| {
        let dx: f64 = rng.sample(rand_distr::StandardNormal);
        let dy: f64 = rng.sample(rand_distr::StandardNormal);
        [center[0] + 0.45 * dx, center[1] + 0.45 * dy]
    };
    let mut upts = Array2::zeros((n_unlabeled, 2));
    for i in 0..n_unlabeled {
        let (c, _) = centers[rng.random_range(0..4)];
        let p = draw(c, &mut rng);
        upts[[i, 0]] = p[0];
        upts[[i, 1]] = p[1];
    }
    let n_l = labels_per_class * 2;
    let mut lpts = Array2::zeros((n_l, 2));
    let mut labels = Vec::with_capacity(n_l);
    for i in 0..n_l {
        let (c, y) = centers[i % 4];
        let p = draw(c, &mut rng);
        lpts[[i, 0]] = p[0];
        lpts[[i, 1]] = p[1];
        labels.push(y);
    }
    LabeledDataset::new(
        Dataset::new(upts, Space::real(2)).unwrap(),
        Dataset::new(lpts, Space::real(2)).unwrap(),
        labels,
        2,
    )
    .unwrap()
}

/// 11. Semi-supervised: 10 labels per class on a 2-class 4-cluster task
///     reach >= 0.90 accuracy in >= 18 of 20 seeds with no classification
///     loss anywhere; with beta = 0 the bound terms reduce to the pure
///     chained ones.
#[test]
fn criterion_11_semisupervised_classification() {
    let lower = || vae_stage(30, 0.01, 16, Optimizer::Sgd);
    let top_spec = TopSpec {
        comps_per_class: 2,
        train: TrainConfig::default(),
    };
    let mut ok = 0;
    for seed in 0..20u64 {
        let data = four_cluster_task(2000, 10, 3000 + seed);
        let cfg = SemiSupConfig::proportional(&data);
        let mut rng = seeded(seed);
        let model = semisup_train(&data, &[lower()], &top_spec, &cfg, 16, &mut rng).unwrap();
        let test = four_cluster_task(2, 100, 9000 + seed);
        let acc = accuracy_eval(&model, &test.labeled, &test.labels, 16, &mut rng).unwrap();
        if acc >= 0.90 {
            ok += 1;
        }
    }
    assert!(ok >= 18, "accuracy >= 0.90 in only {ok}/20 seeds");

    // beta = 0 reduction: every term matches the pure chain on the
    // unlabeled data within 3 combined standard errors.
    let data = four_cluster_task(400, 10, 777);
    let cfg = SemiSupConfig {
        alpha: 1.0,
        beta: 0.0,
        lower_on_unlabeled_only: false,
    };
    let mut rng = seeded(41);
    let model = semisup_train(&data, &[lower()], &top_spec, &cfg, 16, &mut rng).unwrap();
    let j = semisup_bound_terms(&model, &data, &cfg, 32, &mut seeded(42)).unwrap();
    let mut flat = model.lower.clone();
    flat.push(MetaModel::Gmm(model.top.gmm.clone())).unwrap();
    let l = bound_terms(&flat, &data.unlabeled, 32, &mut seeded(43)).unwrap();
    assert_eq!(j.terms.len(), l.terms.len());
    for (i, (jt, lt)) in j.terms.iter().zip(&l.terms).enumerate() {
        let sigma = (jt.std_err.powi(2) + lt.std_err.powi(2)).sqrt().max(1e-9);
        assert!(
            (jt.value - lt.value).abs() <= 3.0 * sigma,
            "term {}: {} vs {} (3 sigma = {})",
            i + 1,
            jt.value,
            lt.value,
            3.0 * sigma
        );
    }
    pass(11, &format!("semi-supervised accuracy >= 0.90 in {ok}/20 seeds; beta=0 reduces to the chain"));
}

/// 12. The benchmark emits all four measurement columns for every mode, and
///     chained ancestral sampling is at least 10x faster than
///     Metropolis-Hastings sampling of the parallel ensemble at equal
///     sample counts.
#[test]
fn criterion_12_bench_columns_and_sampling_speed() {
    let (train, _) = make_synthetic(&SynthKind::two_cluster_default(), 400, 60).unwrap();
    let (eval, _) = make_synthetic(&SynthKind::two_cluster_default(), 200, 61).unwrap();
    let rows = genboost::experiment::run_bench(&train, &eval, 2000, 8, 62).unwrap();
    assert_eq!(rows.len(), 3);
    let mut by_mode = std::collections::BTreeMap::new();
    for row in &rows {
        assert!(row.log_density.is_finite(), "{}: no density column", row.mode);
        assert!(row.train_seconds > 0.0, "{}: no training time", row.mode);
        assert!(row.density_seconds > 0.0, "{}: no density time", row.mode);
        assert!(row.sampling_seconds > 0.0, "{}: no sampling time", row.mode);
        by_mode.insert(row.mode, row.clone());
    }
    let cascade_s = by_mode["cascade"].sampling_seconds;
    let parallel_s = by_mode["parallel"].sampling_seconds;
    assert!(
        parallel_s >= 10.0 * cascade_s,
        "parallel sampling {parallel_s}s not 10x slower than chained {cascade_s}s"
    );
    pass(12, &format!(
        "benchmark columns populated; sampling speedup x{:.0}",
        parallel_s / cascade_s
    ));
}

/// 13. Reruns with the same config and seed reproduce checkpoints and
///     metric values bit for bit (timings excluded).
#[test]
fn criterion_13_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["cascade", "multiplicative"] {
        let out1 = dir.path().join(format!("{mode}_1"));
        let out2 = dir.path().join(format!("{mode}_2"));
        let config_text = |out: &std::path::Path| match mode {
            "cascade" => format!(
                "[experiment] mode=cascade seed=9 n_mc=8 n_sample=50 out={}\n\
                 [data] synth=two-cluster n=100\n\
                 [stage.1] family=vae latent=2 hidden=8 epochs=5 lr=0.01\n\
                 [stage.2] family=gmm components=3 init=cover\n",
                out.display()
            ),
            _ => format!(
                "[experiment] mode=multiplicative seed=9 n_mc=8 n_sample=50 n_z=5000 out={}\n\
                 [data] synth=two-cluster n=100\n\
                 [stage.1] family=gmm components=3\n\
                 [stage.2] family=gmm components=3 beta=1.0\n",
                out.display()
            ),
        };
        let cfg1 = genboost::config::parse_config(&config_text(&out1)).unwrap();
        let cfg2 = genboost::config::parse_config(&config_text(&out2)).unwrap();
        let a1 = genboost::experiment::run_experiment(&cfg1).unwrap();
        let a2 = genboost::experiment::run_experiment(&cfg2).unwrap();
        assert_eq!(a1.metrics.len(), a2.metrics.len());
        for (m1, m2) in a1.metrics.iter().zip(&a2.metrics) {
            assert!(m1.values_equal(m2), "{mode}: metric values differ");
        }
        let strip = |dir: &std::path::Path| {
            let mut names: Vec<_> = std::fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            names
        };
        for (p1, p2) in strip(&out1).iter().zip(strip(&out2).iter()) {
            if p1.is_dir() {
                continue;
            }
            let name = p1.file_name().unwrap().to_string_lossy();
            if name == "metrics.txt" {
                continue; // holds timings; value equality checked above
            }
            let b1 = std::fs::read(p1).unwrap();
            let b2 = std::fs::read(p2).unwrap();
            assert_eq!(b1, b2, "{mode}: artifact {name} differs");
        }
        // Ensemble directories, when present.
        let ens1 = out1.join("ensemble");
        if ens1.is_dir() {
            for entry in std::fs::read_dir(&ens1).unwrap() {
                let p1 = entry.unwrap().path();
                let name = p1.file_name().unwrap().to_string_lossy().to_string();
                let b1 = std::fs::read(&p1).unwrap();
                let b2 = std::fs::read(out2.join("ensemble").join(&name)).unwrap();
                assert_eq!(b1, b2, "{mode}: ensemble file {name} differs");
            }
        }
    }
    pass(13, "reruns reproduce checkpoints and metric values bit for bit");
}

#[test]
#[ignore]
fn check_criterion_11_margins() {
    let lower = || vae_stage(60, 0.005, 24, Optimizer::Adam);
    let top_spec = TopSpec { comps_per_class: 2, train: TrainConfig::default() };
    for seed in 0..20u64 {
        let data = four_cluster_task(2000, 10, 3000 + seed);
        let cfg = SemiSupConfig::proportional(&data);
        let mut rng = seeded(seed);
        let model = semisup_train(&data, &[lower()], &top_spec, &cfg, 16, &mut rng).unwrap();
        let test = four_cluster_task(2, 100, 9000 + seed);
        let acc = accuracy_eval(&model, &test.labeled, &test.labels, 16, &mut rng).unwrap();
        eprintln!("seed {seed}: acc {acc}");
    }
}
