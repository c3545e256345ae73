//! Event-driven simulation of the birth process with immigration, exact
//! per-trajectory window counters, jump-chain extraction, gap-time
//! sampling, and the conditioned embedding experiment.
//!
//! One trajectory is simulated with a single competing-exponentials clock:
//! at population size z the next event arrives after Exp(θ+z) time and is
//! an immigration with probability θ/(θ+z), otherwise a birth to a
//! uniformly chosen individual. That is distributionally identical to
//! per-individual clocks at O(1) memory per event.

use crate::distributions::ModelParams;
use crate::error::{Error, Result};
use crate::esf::{self, CountsOfCounts};
use crate::interval::{Interval, TimeGrid};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use std::collections::HashMap;

/// Default cap on the expected number of events of one trajectory.
/// E Z(t) = θ(e^t − 1) grows exponentially in the horizon, so runs beyond
/// this are rejected up front rather than ground through.
pub const DEFAULT_EVENT_BUDGET: f64 = 1e7;

/// Estimated acceptance rates below this floor abort rejection sampling.
pub const ACCEPTANCE_FLOOR: f64 = 1e-6;

/// Reference sequential-arrival sample size, as a multiple of the accepted
/// trajectory count, used by the embedding check.
const EMBED_REFERENCE_MULTIPLIER: u64 = 10;

/// One family: its founding time and every birth time up to the horizon,
/// the founding arrival included as the first entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub founding_time: f64,
    pub birth_times: Vec<f64>,
}

impl Family {
    pub fn size(&self) -> u64 {
        self.birth_times.len() as u64
    }

    /// Number of members at time t (births in [0, t]).
    pub fn size_at(&self, t: f64) -> u64 {
        self.birth_times.partition_point(|&b| b <= t) as u64
    }

    /// Whether any birth (founding included) falls in the half-open window.
    pub fn has_birth_in(&self, window: Interval) -> bool {
        let i = self.birth_times.partition_point(|&b| b <= window.lo());
        i < self.birth_times.len() && self.birth_times[i] <= window.hi()
    }
}

/// One simulated trajectory up to a horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct BiRealization {
    pub families: Vec<Family>,
    pub horizon: f64,
}

/// Exact per-trajectory window statistics: the observable-family count
/// S_i per window, the pairwise both/only split, and the population size
/// at every cut point.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCounts {
    observable: Vec<u64>,
    both: Vec<Vec<u64>>,
    only: Vec<Vec<u64>>,
    population_at_cuts: Vec<u64>,
}

impl IntervalCounts {
    /// S_i: families observable in window i.
    pub fn observable(&self) -> &[u64] {
        &self.observable
    }

    /// K(i, j): families observable in both windows i and j.
    pub fn both(&self, i: usize, j: usize) -> u64 {
        self.both[i][j]
    }

    /// T(i \ j): families observable in window i but not in window j.
    pub fn only(&self, i: usize, j: usize) -> u64 {
        self.only[i][j]
    }

    /// Z(t_i) for every cut point, the leading Z(0) = 0 included.
    pub fn population_at_cuts(&self) -> &[u64] {
        &self.population_at_cuts
    }

    /// The sample-variance statistic (1/(p(p−1))) Σ_{i<j} (S_i − S_j)² of
    /// this trajectory's window counts.
    pub fn sample_variance_statistic(&self) -> Option<f64> {
        let p = self.observable.len();
        if p < 2 {
            return None;
        }
        let mut acc = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                let d = self.observable[i] as f64 - self.observable[j] as f64;
                acc += d * d;
            }
        }
        Some(acc / (p * (p - 1)) as f64)
    }
}

/// Counts-of-counts snapshots after each of the first n arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChainRecord {
    states: Vec<CountsOfCounts>,
}

impl JumpChainRecord {
    /// State after arrival k (1-indexed).
    pub fn after(&self, k: u64) -> &CountsOfCounts {
        &self.states[k as usize - 1]
    }

    pub fn states(&self) -> &[CountsOfCounts] {
        &self.states
    }
}

impl BiRealization {
    /// Population size at time t: every birth event up to t adds one
    /// individual and nobody dies.
    pub fn population_at(&self, t: f64) -> u64 {
        self.families.iter().map(|f| f.size_at(t)).sum()
    }

    pub fn total_events(&self) -> u64 {
        self.families.iter().map(|f| f.size()).sum()
    }

    /// Family sizes at time t, families founded later excluded.
    pub fn counts_of_counts_at(&self, t: f64) -> CountsOfCounts {
        let sizes: Vec<u64> = self.families.iter().map(|f| f.size_at(t)).collect();
        CountsOfCounts::from_family_sizes(&sizes)
    }

    /// Exact window counters for a grid that ends within the horizon.
    pub fn interval_counts(&self, grid: &TimeGrid) -> Result<IntervalCounts> {
        if grid.horizon() > self.horizon {
            return Err(Error::domain(format!(
                "grid horizon {} exceeds the simulated horizon {}",
                grid.horizon(),
                self.horizon
            )));
        }
        let p = grid.windows();
        let cuts = grid.cuts();
        let mut observable = vec![0u64; p];
        let mut both = vec![vec![0u64; p]; p];
        let mut only = vec![vec![0u64; p]; p];
        let mut population = vec![0u64; p + 1];

        let mut seen = vec![false; p];
        for family in &self.families {
            seen.fill(false);
            for &bt in &family.birth_times {
                // half-open windows (t_{i-1}, t_i]: the first cut ≥ bt ends
                // the window that contains bt
                let k = cuts.partition_point(|&c| c < bt);
                if (1..=p).contains(&k) {
                    seen[k - 1] = true;
                }
            }
            for (i, cut) in cuts.iter().enumerate() {
                population[i] += family.birth_times.partition_point(|&b| b <= *cut) as u64;
            }
            for i in 0..p {
                if seen[i] {
                    observable[i] += 1;
                }
                for j in 0..p {
                    if i != j {
                        if seen[i] && seen[j] {
                            both[i][j] += 1;
                        }
                        if seen[i] && !seen[j] {
                            only[i][j] += 1;
                        }
                    }
                }
            }
        }
        Ok(IntervalCounts {
            observable,
            both,
            only,
            population_at_cuts: population,
        })
    }

    /// Counts-of-counts after each of the first n individuals, in arrival
    /// order, all families of equal size merged.
    pub fn jump_chain(&self, n: u64) -> Result<JumpChainRecord> {
        let mut events: Vec<(f64, usize)> = Vec::with_capacity(self.total_events() as usize);
        for (idx, family) in self.families.iter().enumerate() {
            for &bt in &family.birth_times {
                events.push((bt, idx));
            }
        }
        if (events.len() as u64) < n {
            return Err(Error::domain(format!(
                "the trajectory has {} individuals, fewer than the requested {n}",
                events.len()
            )));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sizes = vec![0u64; self.families.len()];
        let mut states = Vec::with_capacity(n as usize);
        for &(_, idx) in events.iter().take(n as usize) {
            sizes[idx] += 1;
            states.push(CountsOfCounts::from_family_sizes(&sizes));
        }
        Ok(JumpChainRecord { states })
    }

    /// Families founded in `founded` with no birth in any of the windows.
    pub fn count_founded_unobservable(&self, founded: Interval, windows: &[Interval]) -> u64 {
        self.families
            .iter()
            .filter(|f| {
                founded.contains(f.founding_time) && windows.iter().all(|w| !f.has_birth_in(*w))
            })
            .count() as u64
    }

    /// Families founded in `founded` with at least one birth in the window.
    pub fn count_founded_observable(&self, founded: Interval, window: Interval) -> u64 {
        self.families
            .iter()
            .filter(|f| founded.contains(f.founding_time) && f.has_birth_in(window))
            .count() as u64
    }
}

/// Simulate one trajectory up to the horizon with the default event budget.
pub fn simulate(params: &ModelParams, horizon: f64, rng: &mut impl Rng) -> Result<BiRealization> {
    simulate_with_budget(params, horizon, DEFAULT_EVENT_BUDGET, rng)
}

/// Simulate one trajectory, rejecting horizons whose expected event count
/// θ(e^horizon − 1) exceeds the budget.
pub fn simulate_with_budget(
    params: &ModelParams,
    horizon: f64,
    budget: f64,
    rng: &mut impl Rng,
) -> Result<BiRealization> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let expected = params.theta() * horizon.exp_m1();
    if !(expected <= budget) {
        return Err(Error::EventBudget { expected, budget });
    }
    let theta = params.theta();
    let mut families: Vec<Family> = Vec::new();
    let mut owner: Vec<u32> = Vec::new();
    let mut t = 0.0f64;
    loop {
        let z = owner.len() as f64;
        let rate = theta + z;
        t += Exp::new(rate).unwrap().sample(rng);
        if t > horizon {
            break;
        }
        if rng.random::<f64>() * rate < theta {
            owner.push(families.len() as u32);
            families.push(Family {
                founding_time: t,
                birth_times: vec![t],
            });
        } else {
            let idx = owner[rng.random_range(0..owner.len())] as usize;
            families[idx].birth_times.push(t);
            owner.push(idx as u32);
        }
    }
    Ok(BiRealization { families, horizon })
}

/// Size at time t of a single family grown from one founder (the pure
/// birth submodel: at size z the next birth arrives after Exp(z) time).
pub fn yule_family_size(t: f64, rng: &mut impl Rng) -> Result<u64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time t must be positive, got {t}")));
    }
    if t.exp() > DEFAULT_EVENT_BUDGET {
        return Err(Error::EventBudget {
            expected: t.exp(),
            budget: DEFAULT_EVENT_BUDGET,
        });
    }
    let mut size = 1u64;
    let mut clock = 0.0f64;
    loop {
        clock += Exp::new(size as f64).unwrap().sample(rng);
        if clock > t {
            return Ok(size);
        }
        size += 1;
    }
}

/// A sampled gap: the size N of a uniformly chosen family at time t and
/// the waiting time W until that family's next birth, realized as the
/// minimum of N independent unit-exponential lifetimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    pub family_size: u64,
    pub waiting_time: f64,
}

/// Simulate to time t and sample a gap; `None` when no family arrived.
pub fn sample_gap_time(
    params: &ModelParams,
    t: f64,
    rng: &mut impl Rng,
) -> Result<Option<GapSample>> {
    let realization = simulate(params, t, rng)?;
    Ok(gap_from_realization(&realization, t, rng))
}

/// Draw the gap sample from an existing trajectory: pick one of the
/// families founded by time t uniformly and race its members' next births.
pub fn gap_from_realization(
    realization: &BiRealization,
    t: f64,
    rng: &mut impl Rng,
) -> Option<GapSample> {
    let founded: Vec<&Family> = realization
        .families
        .iter()
        .filter(|f| f.founding_time <= t)
        .collect();
    if founded.is_empty() {
        return None;
    }
    let family = founded[rng.random_range(0..founded.len())];
    let n = family.size_at(t);
    let unit = Exp::new(1.0).unwrap();
    let waiting_time = (0..n)
        .map(|_| unit.sample(rng))
        .fold(f64::INFINITY, f64::min);
    Some(GapSample {
        family_size: n,
        waiting_time,
    })
}

/// Outcome of the conditioned embedding experiment: the joint law of the
/// counts-of-counts at the cut points, conditioned on the population
/// hitting the target sizes there, next to the law generated by a
/// sequential-arrival run observed at the same cumulative counts.
#[derive(Debug, Clone)]
pub struct EmbeddingReport {
    pub tv_distance: f64,
    pub accepted: u64,
    pub attempts: u64,
    pub acceptance_rate: f64,
    /// (joint state, conditioned-trajectory probability, sequential-run
    /// probability), sorted for deterministic output.
    pub law: Vec<(Vec<CountsOfCounts>, f64, f64)>,
}

/// Rejection-sample trajectories on the event {Z(t_i) = l_i for all i} and
/// compare the joint counts-of-counts law at the cut points against a
/// sequential-arrival run observed after l_1, …, l_p arrivals.
///
/// The targets must be non-decreasing (the population never shrinks) and
/// small (l_p ≤ 8) so the joint state space stays enumerable.
pub fn embedding_check(
    params: &ModelParams,
    grid: &TimeGrid,
    target_populations: &[u64],
    accepted_target: u64,
    rng: &mut impl Rng,
) -> Result<EmbeddingReport> {
    let p = grid.windows();
    if target_populations.len() != p {
        return Err(Error::domain(format!(
            "got {} population targets for {p} windows",
            target_populations.len()
        )));
    }
    if target_populations.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain(
            "population targets must be non-decreasing: the population never shrinks",
        ));
    }
    let l_max = *target_populations.last().unwrap();
    if l_max > 8 {
        return Err(Error::domain(format!(
            "final population target {l_max} exceeds the enumeration cap of 8; use smaller targets"
        )));
    }
    if accepted_target == 0 {
        return Err(Error::domain("need at least one accepted trajectory"));
    }

    let cuts = &grid.cuts()[1..];
    let mut conditioned: HashMap<Vec<CountsOfCounts>, u64> = HashMap::new();
    let mut accepted = 0u64;
    let mut attempts = 0u64;
    while accepted < accepted_target {
        attempts += 1;
        let realization = simulate(params, grid.horizon(), rng)?;
        let hit = cuts
            .iter()
            .zip(target_populations)
            .all(|(&t, &l)| realization.population_at(t) == l);
        if hit {
            accepted += 1;
            let key: Vec<CountsOfCounts> = cuts
                .iter()
                .map(|&t| realization.counts_of_counts_at(t))
                .collect();
            *conditioned.entry(key).or_insert(0) += 1;
        }
        if attempts.is_multiple_of(1_000_000) {
            let rate = accepted as f64 / attempts as f64;
            if rate < ACCEPTANCE_FLOOR {
                return Err(Error::AcceptanceFloor {
                    rate,
                    attempts,
                    floor: ACCEPTANCE_FLOOR,
                });
            }
        }
    }

    let reference_runs = accepted_target * EMBED_REFERENCE_MULTIPLIER;
    let mut reference: HashMap<Vec<CountsOfCounts>, u64> = HashMap::new();
    for _ in 0..reference_runs {
        let key = esf::crp_counts_at(params, target_populations, rng);
        *reference.entry(key).or_insert(0) += 1;
    }

    let mut keys: Vec<Vec<CountsOfCounts>> = conditioned
        .keys()
        .chain(reference.keys())
        .cloned()
        .collect();
    keys.sort();
    keys.dedup();
    let mut law = Vec::with_capacity(keys.len());
    let mut tv = 0.0;
    for key in keys {
        let emp = conditioned.get(&key).copied().unwrap_or(0) as f64 / accepted as f64;
        let refp = reference.get(&key).copied().unwrap_or(0) as f64 / reference_runs as f64;
        tv += (emp - refp).abs();
        law.push((key, emp, refp));
    }
    Ok(EmbeddingReport {
        tv_distance: tv / 2.0,
        accepted,
        attempts,
        acceptance_rate: accepted as f64 / attempts as f64,
        law,
    })
}
