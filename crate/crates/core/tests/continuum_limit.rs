use rand::Rng;

use scclab::continuum::{
    locate_excursion, point_at_length, run_continuum, run_continuum_refined, sample_continuum_candidates,
    sample_continuum_heads, simulate_bhat, simulate_bhat_with, thin_cells, ExcursionTree, PathGrid,
};
use scclab::degree_law::{compute_params, CriticalParams, JointDegreeLaw};
use scclab::numerics::mean_and_se;
use scclab::rng::{derive_rng, derive_seed, tag};
use scclab::stats::ks_statistic;

fn poisson_params() -> CriticalParams {
    compute_params(&JointDegreeLaw::product_poisson(1.0, 1.0).unwrap()).unwrap()
}

/// One-sample KS distance against a continuous CDF.
fn ks_one_sample(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the one-sample KS distance.
fn ks_bound(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Path rising linearly to `height` over `rise` steps, then flat.
fn plateau(height: f64, rise: usize, steps: usize, dt: f64) -> PathGrid {
    let step = height / rise as f64 / dt.sqrt();
    let mut i = 0;
    simulate_bhat_with(0.0, steps as f64 * dt, dt, || {
        i += 1;
        if i <= rise {
            step
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn marked_length_matches_the_steiner_tour() {
    let params = poisson_params();
    let mut rng = derive_rng(1, &[tag::RUN]);
    let mut trees = 0;
    for seed in 0..100u64 {
        let path = simulate_bhat(&params, 10.0, 1e-3, seed).unwrap();
        for _ in 0..5 {
            let x = rng.random_range(1..path.len());
            if path.r_hat[x] <= 0.0 {
                continue;
            }
            let exc = locate_excursion(&path, x).unwrap();
            let tree = ExcursionTree::new(&path, exc, params.height_scale);
            let k = rng.random_range(1..=6);
            let mut marks: Vec<usize> = (0..k).map(|_| rng.random_range(exc.l..=exc.end())).collect();
            marks.sort_unstable();
            let mut tour = 0.0;
            let mut prev = exc.l;
            for &t in marks.iter().chain(std::iter::once(&exc.l)) {
                tour += tree.tree_distance(prev, t).unwrap();
                prev = t;
            }
            let got = tree.marked_tree_length(&marks).unwrap();
            assert!((got - tour / 2.0).abs() <= 1e-9, "{got} vs {}", tour / 2.0);
            let segs = tree.segments(&marks).unwrap();
            let sum: f64 = segs.iter().map(|s| s.top - s.bottom).sum();
            assert!((sum - got).abs() <= 1e-12);
            assert!(segs.iter().all(|s| s.top >= s.bottom));
            trees += 1;
        }
    }
    assert!(trees > 100);
}

#[test]
fn heads_are_uniform_on_the_spanned_tree() {
    let params = poisson_params();
    let path = simulate_bhat(&params, 10.0, 1e-3, 7).unwrap();
    let x = (1..path.len()).max_by(|&a, &b| path.r_hat[a].total_cmp(&path.r_hat[b])).unwrap();
    let exc = locate_excursion(&path, x).unwrap();
    let tree = ExcursionTree::new(&path, exc, params.height_scale);
    let span = exc.sigma / 4;
    let tails = vec![exc.l + span, exc.l + 2 * span, exc.l + 3 * span];
    let segs = tree.segments(&tails).unwrap();
    let total: f64 = segs.iter().map(|s| s.top - s.bottom).sum();
    let mut us = Vec::new();
    for r in 0..4000u64 {
        let mut rng = derive_rng(r, &[tag::HEADS]);
        let heads = sample_continuum_heads(&tree, &tails, &mut rng).unwrap();
        let h = heads[2];
        let before: f64 = segs[..h.segment].iter().map(|s| s.top - s.bottom).sum();
        let u = before + h.height - segs[h.segment].bottom;
        let back = point_at_length(&segs, u).unwrap();
        assert_eq!(back.segment, h.segment);
        us.push(u / total);
    }
    let d = ks_one_sample(&mut us, |u| u.clamp(0.0, 1.0));
    assert!(d <= ks_bound(us.len()), "KS {d}");
}

#[test]
fn candidates_on_a_flat_tree_arrive_exponentially() {
    let dt = 1e-4;
    let (h, rise, steps) = (1.0, 1000, 201_000);
    let path = plateau(h, rise, steps, dt);
    let exc = locate_excursion(&path, rise + 1).unwrap();
    assert!(exc.truncated);
    let tree = ExcursionTree::new(&path, exc, 1.0);
    let coeff = 2.0;
    let mut gaps = Vec::new();
    for r in 0..40u64 {
        let mut rng = derive_rng(r, &[tag::CANDIDATES]);
        let tails = sample_continuum_candidates(&tree, rise, coeff, dt, &mut rng).unwrap();
        gaps.extend(tails.windows(2).map(|w| (w[1] - w[0]) as f64 * dt));
    }
    assert!(gaps.len() > 1000);
    let rate = coeff * h;
    let (mean, se) = mean_and_se(&gaps);
    assert!((mean - 1.0 / rate).abs() <= 3.0 * se, "mean gap {mean}");
    let d = ks_one_sample(&mut gaps, |x| 1.0 - (-rate * x).exp());
    assert!(d <= ks_bound(gaps.len()), "KS {d}");
}

#[test]
fn constant_intensity_cox_counts_are_poisson() {
    let (rate, cells, dt) = (3.0, 10_000, 1e-4);
    let counts: Vec<f64> = (0..2000u64)
        .map(|r| {
            let mut rng = derive_rng(r, &[tag::COX]);
            thin_cells((1..=cells).map(|i| (i, rate)), dt, &mut rng).unwrap().len() as f64
        })
        .collect();
    let expected = rate * cells as f64 * dt;
    let (mean, se) = mean_and_se(&counts);
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected}");
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
    // binomial thinning: variance n p (1 - p), within sampling error of the mean
    assert!((var / mean - 1.0).abs() < 0.1, "dispersion {}", var / mean);
}

#[test]
fn limit_lengths_have_no_ties() {
    let params = poisson_params();
    let mut pairs = 0;
    for seed in 0..200u64 {
        let run = run_continuum(&params, 10.0, 1e-3, seed).unwrap();
        let lengths: Vec<f64> = run.sccs(true).iter().map(|s| s.length).collect();
        assert!(lengths.iter().all(|&l| l > 0.0));
        for w in lengths.windows(2) {
            assert!(w[0] > w[1], "tie at seed {seed}: {lengths:?}");
            pairs += 1;
        }
    }
    assert!(pairs > 0);
}

#[test]
fn largest_length_is_stable_under_dt_halving() {
    let params = poisson_params();
    let (horizon, dt) = (10.0, 1e-3);
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for r in 0..1000u64 {
        let seed = derive_seed(0, &[tag::PATH, r]);
        coarse.push(run_continuum_refined(&params, horizon, dt, seed, 0).unwrap().largest_length(false));
        fine.push(run_continuum_refined(&params, horizon, dt, seed, 1).unwrap().largest_length(false));
    }
    let d = ks_statistic(&coarse, &fine).unwrap();
    assert!(d <= 0.05, "KS {d}");
}
