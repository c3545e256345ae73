//! Statistical verification of the simulator against the exact engine:
//! every closed-form law is reproduced by seeded Monte Carlo within
//! pre-registered gates (4σ for means, 0.001 for chi-square levels, so
//! the pinned seeds stay comfortably inside legitimate noise).

use biproc::distributions::{
    family_size_pmf, population_size_pmf, LogSeriesLaw, ModelParams,
};
use biproc::esf::{
    self, esf_pmf, partitions, poisson_conditioning_check, CrpState, PoissonConditioning,
};
use biproc::interval::{
    mean_observable, mean_unobservable, mean_unobservable_two_windows, Interval, TimeGrid,
};
use biproc::simulator::{sample_gap_time, simulate, yule_family_size, BiRealization, Family};
use biproc::stats::{chi_square_gof, chi_square_two_sample, ks_critical_value, ks_statistic};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(theta: f64) -> ModelParams {
    ModelParams::new(theta).unwrap()
}

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

/// z-test of a sample mean against an exact value, using the sample's own
/// standard error.
fn assert_mean_close(samples: &[f64], exact: f64, gate: f64, what: &str) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let z = (mean - exact) / (var / n).sqrt();
    assert!(
        z.abs() < gate,
        "{what}: mean {mean} vs exact {exact}, z = {z}"
    );
}

#[test]
fn population_law_matches_negative_binomial() {
    let p = params(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let reps = 20_000;
    let max_bin = 40usize;
    let mut observed = vec![0u64; max_bin + 2];
    for _ in 0..reps {
        let z = simulate(&p, 1.0, &mut rng).unwrap().total_events() as usize;
        observed[z.min(max_bin + 1)] += 1;
    }
    let mut expected: Vec<f64> = (0..=max_bin)
        .map(|n| population_size_pmf(&p, 1.0, n as u64).unwrap())
        .collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let test = chi_square_gof(&observed, &expected).unwrap();
    assert!(test.p_value >= 0.001, "chi-square p = {}", test.p_value);
}

#[test]
fn single_family_growth_follows_geometric_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let t = 1.0;
    let reps = 20_000;
    let max_bin = 30usize;
    let mut observed = vec![0u64; max_bin + 1];
    for _ in 0..reps {
        let size = yule_family_size(t, &mut rng).unwrap() as usize;
        observed[(size - 1).min(max_bin)] += 1;
    }
    let mut expected: Vec<f64> = (1..=max_bin)
        .map(|j| family_size_pmf(t, j as u64).unwrap())
        .collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let test = chi_square_gof(&observed, &expected).unwrap();
    assert!(test.p_value >= 0.001, "chi-square p = {}", test.p_value);
}

#[test]
fn founder_counters_match_their_poisson_means() {
    let p = params(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let reps = 20_000;
    let mut v_single = Vec::with_capacity(reps);
    let mut v_double = Vec::with_capacity(reps);
    let mut u_from = Vec::with_capacity(reps);
    let mut s_count = Vec::with_capacity(reps);
    for _ in 0..reps {
        let r = simulate(&p, 2.0, &mut rng).unwrap();
        v_single.push(r.count_founded_unobservable(iv(0.0, 1.0), &[iv(1.0, 2.0)]) as f64);
        v_double
            .push(r.count_founded_unobservable(iv(0.0, 0.5), &[iv(0.5, 1.0), iv(1.5, 2.0)]) as f64);
        u_from.push(r.count_founded_observable(iv(0.0, 1.0), iv(1.0, 2.0)) as f64);
        let counts = r.interval_counts(&TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        s_count.push(counts.observable()[1] as f64);
    }
    // frozen exact means: 2 − ln(e²−e+1), the two-window variant, the
    // complement of the first, and E S(1,2)
    assert_mean_close(&v_single, 0.264674335944481, 4.0, "founders unseen in one window");
    let exact_double = mean_unobservable_two_windows(&p, 0.5, 1.0, 1.5, 2.0).unwrap();
    assert!((exact_double - 0.122523543690203).abs() < 1e-12);
    assert_mean_close(&v_double, exact_double, 4.0, "founders unseen in two windows");
    let exact_u = mean_observable(&p, iv(0.0, 1.0)).unwrap()
        - mean_unobservable(&p, iv(0.0, 1.0), iv(1.0, 2.0)).unwrap()
        - 0.0;
    // U + V = X(J), so E U = θ(b−a) − E V = 1 − 0.264674…
    assert!((exact_u - (1.0 - 0.264674335944481)).abs() < 1e-10);
    assert_mean_close(&u_from, 1.0 - 0.264674335944481, 4.0, "founders seen later");
    assert_mean_close(&s_count, 1.73532566405552, 4.0, "window count mean");
}

#[test]
fn shared_component_mean_and_split_independence() {
    let p = params(1.0);
    let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let reps = 20_000;
    let mut k = Vec::with_capacity(reps);
    let mut t1 = Vec::with_capacity(reps);
    let mut t2 = Vec::with_capacity(reps);
    for _ in 0..reps {
        let r = simulate(&p, 2.0, &mut rng).unwrap();
        let c = r.interval_counts(&grid).unwrap();
        k.push(c.both(0, 1) as f64);
        t1.push(c.only(0, 1) as f64);
        t2.push(c.only(1, 0) as f64);
    }
    assert_mean_close(&k, 0.735325664055519, 4.0, "families seen in both windows");

    // the three split counters are independent Poisson variables, so the
    // pairwise sample covariances sit within noise of zero
    let cov_gate = |a: &[f64], b: &[f64], what: &str| {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let mean = prods.iter().sum::<f64>() / n;
        let var = prods.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let z = mean / (var / n).sqrt();
        assert!(z.abs() < 4.0, "{what}: cov z = {z}");
    };
    cov_gate(&k, &t1, "both vs first-only");
    cov_gate(&k, &t2, "both vs second-only");
    cov_gate(&t1, &t2, "first-only vs second-only");
}

#[test]
fn window_counts_have_unit_dispersion_on_log_equal_grid() {
    // the counts are Poisson, so the index of dispersion tends to 1
    let p = params(2.0);
    let grid = biproc::interval::log_equal_grid(1.0, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let reps = 20_000usize;
    let mut columns: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(reps)).collect();
    for _ in 0..reps {
        let r = simulate(&p, grid.horizon(), &mut rng).unwrap();
        let c = r.interval_counts(&grid).unwrap();
        for (col, &s) in columns.iter_mut().zip(c.observable()) {
            col.push(s as f64);
        }
    }
    for (i, col) in columns.iter().enumerate() {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let dispersion = var / mean;
        let gate = 4.0 * (2.0 / n).sqrt();
        assert!(
            (dispersion - 1.0).abs() < gate,
            "window {i}: dispersion {dispersion}"
        );
    }
}

/// Simulate trajectories until one has at least `min_events` individuals;
/// conditioning on a population event leaves the jump chain's law intact
/// because the two are independent (checked separately below).
fn simulate_with_at_least(
    p: &ModelParams,
    horizon: f64,
    min_events: u64,
    rng: &mut impl Rng,
) -> BiRealization {
    loop {
        let r = simulate(p, horizon, rng).unwrap();
        if r.total_events() >= min_events {
            return r;
        }
    }
}

#[test]
fn jump_chain_matches_sampling_formula() {
    let p = params(1.0);
    let n = 4u64;
    let horizon = 13.0f64.ln(); // E Z ≈ 12, so < 4 events is uncommon
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let parts = partitions(n);
    let index: std::collections::HashMap<_, usize> = parts
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let reps = 20_000;
    let mut observed = vec![0u64; parts.len()];
    for _ in 0..reps {
        let r = simulate_with_at_least(&p, horizon, n, &mut rng);
        let state = r.jump_chain(n).unwrap().after(n).clone();
        observed[index[&state]] += 1;
    }
    let expected: Vec<f64> = parts.iter().map(|c| esf_pmf(&p, n, c).unwrap()).collect();
    let test = chi_square_gof(&observed, &expected).unwrap();
    assert!(test.p_value >= 0.001, "chi-square p = {}", test.p_value);
}

#[test]
fn jump_chain_is_uncorrelated_with_population_size() {
    let p = params(1.0);
    let n = 4u64;
    let horizon = 13.0f64.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let reps = 5_000;
    let mut families = Vec::with_capacity(reps);
    let mut population = Vec::with_capacity(reps);
    for _ in 0..reps {
        let r = simulate_with_at_least(&p, horizon, n, &mut rng);
        families.push(r.jump_chain(n).unwrap().after(n).families() as f64);
        population.push(r.total_events() as f64);
    }
    let corr = |a: &[f64], b: &[f64]| {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut num, mut va, mut vb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        num / (va * vb).sqrt()
    };
    let observed = corr(&families, &population).abs();
    // permutation test: shuffle one side and compare
    let mut shuffled = population.clone();
    let mut at_least = 0u32;
    let permutations = 500;
    for _ in 0..permutations {
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        if corr(&families, &shuffled).abs() >= observed {
            at_least += 1;
        }
    }
    let p_value = (at_least + 1) as f64 / (permutations + 1) as f64;
    assert!(p_value > 0.01, "permutation p = {p_value}, corr = {observed}");
}

/// Independent construction of the same process: draw the population jump
/// times from the competing-exponentials clock and assign each jump to a
/// family with a sequential-arrival step. Used as an oracle for `simulate`.
fn simulate_by_sequential_construction(
    p: &ModelParams,
    horizon: f64,
    rng: &mut impl Rng,
) -> BiRealization {
    use rand_distr::{Distribution, Exp};
    let mut state = CrpState::new();
    let mut families: Vec<Family> = Vec::new();
    let mut t = 0.0f64;
    loop {
        let rate = p.theta() + state.arrivals() as f64;
        t += Exp::new(rate).unwrap().sample(rng);
        if t > horizon {
            break;
        }
        let idx = state.step(p, rng);
        if idx == families.len() {
            families.push(Family {
                founding_time: t,
                birth_times: vec![t],
            });
        } else {
            families[idx].birth_times.push(t);
        }
    }
    BiRealization { families, horizon }
}

#[test]
fn simulate_agrees_with_sequential_construction() {
    let p = params(1.0);
    let grid = TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let reps = 20_000;
    let mut s_main: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(reps)).collect();
    let mut s_alt: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(reps)).collect();
    let mut z_main = vec![0u64; 12];
    let mut z_alt = vec![0u64; 12];
    for _ in 0..reps {
        let a = simulate(&p, 2.0, &mut rng).unwrap();
        let b = simulate_by_sequential_construction(&p, 2.0, &mut rng);
        let ca = a.interval_counts(&grid).unwrap();
        let cb = b.interval_counts(&grid).unwrap();
        for i in 0..2 {
            s_main[i].push(ca.observable()[i] as f64);
            s_alt[i].push(cb.observable()[i] as f64);
        }
        z_main[(a.population_at(1.0) as usize).min(11)] += 1;
        z_alt[(b.population_at(1.0) as usize).min(11)] += 1;
    }
    // two-sample z-tests on the window-count means
    for i in 0..2 {
        let n = reps as f64;
        let (ma, mb) = (
            s_main[i].iter().sum::<f64>() / n,
            s_alt[i].iter().sum::<f64>() / n,
        );
        let va = s_main[i].iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (n - 1.0);
        let vb = s_alt[i].iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (n - 1.0);
        let z = (ma - mb) / ((va + vb) / n).sqrt();
        assert!(z.abs() < 4.0, "window {i}: {ma} vs {mb}, z = {z}");
        // and both agree with the exact engine
        let exact = mean_observable(&p, grid.window(i)).unwrap();
        let z_exact = (ma - exact) / (va / n).sqrt();
        assert!(z_exact.abs() < 4.0, "window {i} vs exact: z = {z_exact}");
    }
    // and the population law at an interior time matches across the routes
    let test = chi_square_two_sample(&z_main, &z_alt).unwrap();
    assert!(test.p_value >= 0.001, "population two-sample p = {}", test.p_value);
}

#[test]
fn gap_samples_follow_log_series_and_mixture_density() {
    let p = params(1.0);
    let t = 1.0;
    let law = LogSeriesLaw::from_time(t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let target = 30_000;
    let mut sizes = vec![0u64; 12];
    let mut waits = Vec::with_capacity(target);
    while waits.len() < target {
        if let Some(g) = sample_gap_time(&p, t, &mut rng).unwrap() {
            sizes[(g.family_size as usize - 1).min(11)] += 1;
            waits.push(g.waiting_time);
        }
    }
    let mut expected: Vec<f64> = (1..=11).map(|j| law.pmf(j).unwrap()).collect();
    expected.push(1.0 - expected.iter().sum::<f64>());
    let test = chi_square_gof(&sizes, &expected).unwrap();
    assert!(test.p_value >= 0.001, "size-law chi-square p = {}", test.p_value);

    // the waiting time has CDF ln((1 − q e^{−s})/(1 − q)) / t
    let q = law.q();
    let d = ks_statistic(&mut waits, |s| {
        ((1.0 - q * (-s).exp()) / (1.0 - q)).ln() / t
    })
    .unwrap();
    assert!(
        d < ks_critical_value(target, 0.001),
        "KS statistic {d} beyond critical value"
    );
}

#[test]
fn conditioned_law_does_not_depend_on_x() {
    let p = params(1.0);
    let n = 3u64;
    let accepted = 30_000;
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let low = poisson_conditioning_check(&p, 0.3, n, accepted, PoissonConditioning::FiniteSum, &mut rng)
        .unwrap();
    let high = poisson_conditioning_check(&p, 0.7, n, accepted, PoissonConditioning::FiniteSum, &mut rng)
        .unwrap();
    let a: Vec<u64> = low.law.iter().map(|s| s.count).collect();
    let b: Vec<u64> = high.law.iter().map(|s| s.count).collect();
    let test = chi_square_two_sample(&a, &b).unwrap();
    assert!(test.p_value >= 0.001, "two-sample p = {}", test.p_value);
}

#[test]
fn acceptance_rate_peaks_at_the_matched_parameter() {
    // the conditioning event {weighted sum = n} is most likely at
    // x = n/(n+θ): the same matching that defines the count-matched grid
    let p = params(1.0);
    let n = 2u64;
    let optimal = n as f64 / (n as f64 + 1.0);
    let grid = [0.3, 0.5, optimal, 0.8, 0.95];
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut rates = Vec::new();
    for &x in &grid {
        let report = poisson_conditioning_check(
            &p,
            x,
            n,
            5_000,
            PoissonConditioning::InfiniteSum,
            &mut rng,
        )
        .unwrap();
        rates.push(report.acceptance_rate);
    }
    let best = rates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(
        grid[best], optimal,
        "acceptance rates {rates:?} should peak at x = {optimal}"
    );
}

#[test]
fn sequential_counts_match_conditioned_trajectories_marginally() {
    // number of distinct families among the first n arrivals vs the
    // trajectory count S under the matched single window, conditioned on
    // the window containing exactly n individuals
    let p = params(1.0);
    let n = 3u64;
    let horizon = (1.0f64 + n as f64).ln(); // matched cut for l_1 = 3
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let reps = 20_000;
    let sizes = biproc::interval::SampleSizes::new(vec![n]).unwrap();
    let mut crp_counts = vec![0u64; n as usize];
    for _ in 0..reps {
        let s = esf::crp_sequential_counts(&p, &sizes, &mut rng)[0];
        crp_counts[(s - 1) as usize] += 1;
    }
    let mut bi_counts = vec![0u64; n as usize];
    let mut got = 0;
    while got < reps {
        let r = simulate(&p, horizon, &mut rng).unwrap();
        if r.total_events() == n {
            let grid = TimeGrid::new(vec![0.0, horizon]).unwrap();
            let s = r.interval_counts(&grid).unwrap().observable()[0];
            bi_counts[(s - 1) as usize] += 1;
            got += 1;
        }
    }
    let test = chi_square_two_sample(&crp_counts, &bi_counts).unwrap();
    assert!(test.p_value >= 0.001, "two-sample p = {}", test.p_value);
}

#[test]
fn early_marginal_of_a_longer_sequential_run_keeps_the_law() {
    // counts-of-counts after arrival 4 of an 8-arrival run still follow
    // the 4-sample law
    let p = params(1.0);
    let n = 4u64;
    let parts = partitions(n);
    let index: std::collections::HashMap<_, usize> = parts
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let reps = 20_000;
    let mut observed = vec![0u64; parts.len()];
    for _ in 0..reps {
        let snaps = esf::crp_counts_at(&p, &[n, 8], &mut rng);
        observed[index[&snaps[0]]] += 1;
    }
    let expected: Vec<f64> = parts.iter().map(|c| esf_pmf(&p, n, c).unwrap()).collect();
    let test = chi_square_gof(&observed, &expected).unwrap();
    assert!(test.p_value >= 0.001, "chi-square p = {}", test.p_value);
}

#[test]
fn matched_grid_maximizes_embedding_acceptance() {
    use biproc::interval::{fisher_grid, SampleSizes};
    use biproc::simulator::embedding_check;
    // conditioning on Z(t_i) = l_i is most likely when the cuts match the
    // expected population to the targets
    let p = params(1.0);
    let targets = [2u64, 4];
    let matched = fisher_grid(&p, &SampleSizes::new(vec![2, 2]).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(113);
    let mut rates = Vec::new();
    for scale in [0.6, 1.0, 1.5] {
        let cuts: Vec<f64> = matched.cuts().iter().map(|c| c * scale).collect();
        let grid = TimeGrid::new(cuts).unwrap();
        let report = embedding_check(&p, &grid, &targets, 2_000, &mut rng).unwrap();
        rates.push(report.acceptance_rate);
    }
    assert!(
        rates[1] > rates[0] && rates[1] > rates[2],
        "acceptance rates {rates:?} should peak at the matched grid"
    );
}
