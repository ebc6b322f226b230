//! Exact simulation of the beta n-coalescent.
//!
//! Every chain uses the same two-stage jump: a holding time
//! `Exp(Σ_l C(m,l) λ_{m,l})` followed by a merger size drawn from the
//! merger-size distribution of the current row. The spectrum and labelled
//! chains then pick which blocks merge uniformly among all subsets of that
//! size, which reproduces the per-set rates by exchangeability.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bell::SetPartition;
use crate::error::{domain, Error, Result};
use crate::rates::RateTable;

/// Largest ground set for the labelled chain.
pub const MAX_LABELLED: usize = 12;

/// Derivation of independent random streams from one master seed.
///
/// Replicate `r` draws from ChaCha8 seeded with `master_seed` on stream `r`,
/// so its numbers do not depend on which thread runs it or in what order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub master_seed: u64,
}

impl SeedPolicy {
    pub fn new(master_seed: u64) -> Self {
        SeedPolicy { master_seed }
    }

    pub fn rng(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replicate);
        rng
    }

    /// An independent policy for a sub-experiment labelled `tag`.
    pub fn derive(&self, tag: u64) -> SeedPolicy {
        SeedPolicy {
            master_seed: splitmix64(self.master_seed ^ splitmix64(tag.wrapping_add(0x9E37_79B9))),
        }
    }

    /// Human-readable description stored in output metadata.
    pub fn describe(&self) -> String {
        format!(
            "ChaCha8Rng::seed_from_u64({}) with stream = replicate index",
            self.master_seed
        )
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn holding_time<R: Rng + ?Sized>(table: &RateTable, m: usize, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / table.row_total(m).expect("row within table")
}

/// Index of the last event at or before `t` (events start at time 0).
fn event_index(times: impl Fn(usize) -> f64, len: usize, t: f64) -> usize {
    let (mut lo, mut hi) = (0usize, len);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if times(mid) <= t {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo.saturating_sub(1)
}

/// Path of the block-counting process as `(time, blocks)` jump points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCountTrajectory {
    pub n_start: usize,
    pub events: Vec<(f64, usize)>,
}

impl BlockCountTrajectory {
    /// Right-continuous value at time `t >= 0`.
    pub fn value_at(&self, t: f64) -> usize {
        self.events[event_index(|j| self.events[j].0, self.events.len(), t)].1
    }

    pub fn final_count(&self) -> usize {
        self.events.last().map_or(self.n_start, |e| e.1)
    }

    /// Time of reaching a single block, if the run got there.
    pub fn absorption_time(&self) -> Option<f64> {
        self.events.last().filter(|e| e.1 == 1).map(|e| e.0)
    }
}

fn check_start(table: &RateTable, n_start: usize) -> Result<()> {
    if n_start < 1 || n_start > table.n_max() {
        return domain(format!(
            "start with 1..={} blocks, got {n_start}",
            table.n_max()
        ));
    }
    Ok(())
}

/// Simulates the number of blocks from `n_start` until one block remains or
/// the next jump would fall after `t_max`.
pub fn simulate_block_count<R: Rng + ?Sized>(
    table: &RateTable,
    n_start: usize,
    t_max: Option<f64>,
    rng: &mut R,
) -> Result<BlockCountTrajectory> {
    check_start(table, n_start)?;
    let horizon = t_max.unwrap_or(f64::INFINITY);
    let mut events = vec![(0.0, n_start)];
    let (mut t, mut m) = (0.0, n_start);
    while m > 1 {
        t += holding_time(table, m, rng);
        if t > horizon {
            break;
        }
        let l = table.sample_merger_size(m, rng.random());
        m -= l - 1;
        events.push((t, m));
    }
    Ok(BlockCountTrajectory { n_start, events })
}

/// Block-size spectrum at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSnapshot {
    /// `counts[i-1]` blocks of size `i` for `i <= d`.
    pub counts: Vec<u32>,
    /// Blocks larger than `d`.
    pub tail_count: u32,
    /// Total size of the blocks larger than `d`.
    pub tail_mass: u64,
    /// `Σ_blocks x^{size}` at the run's generating-function argument.
    pub gen_fun: f64,
}

impl SpectrumSnapshot {
    pub fn block_count(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum::<u64>() + u64::from(self.tail_count)
    }

    /// `Σ_i i n_i` plus the tail mass.
    pub fn mass(&self) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64 + 1) * u64::from(c))
            .sum::<u64>()
            + self.tail_mass
    }
}

/// Path of the truncated block-size spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTrajectory {
    pub n_start: u64,
    pub d: usize,
    pub gen_fun_x: f64,
    pub events: Vec<(f64, SpectrumSnapshot)>,
    /// Block sizes when the run stopped.
    pub final_sizes: Vec<u32>,
}

impl SpectrumTrajectory {
    pub fn value_at(&self, t: f64) -> &SpectrumSnapshot {
        &self.events[event_index(|j| self.events[j].0, self.events.len(), t)].1
    }

    /// The embedded block-counting path.
    pub fn block_counts(&self) -> BlockCountTrajectory {
        BlockCountTrajectory {
            n_start: self.events[0].1.block_count() as usize,
            events: self
                .events
                .iter()
                .map(|(t, s)| (*t, s.block_count() as usize))
                .collect(),
        }
    }

    pub fn absorption_time(&self) -> Option<f64> {
        self.events
            .last()
            .filter(|e| e.1.block_count() == 1)
            .map(|e| e.0)
    }
}

/// Settings of a spectrum run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub d: usize,
    pub t_max: Option<f64>,
    pub gen_fun_x: f64,
}

impl SpectrumOptions {
    pub fn new(d: usize) -> Self {
        SpectrumOptions {
            d,
            t_max: None,
            gen_fun_x: 0.5,
        }
    }

    pub fn with_t_max(mut self, t_max: Option<f64>) -> Self {
        self.t_max = t_max;
        self
    }
}

struct SpectrumState {
    sizes: Vec<u32>,
    d: usize,
    counts: Vec<u32>,
    tail_count: u32,
    tail_mass: u64,
    x: f64,
    gen_fun: f64,
}

impl SpectrumState {
    fn new(sizes: Vec<u32>, d: usize, x: f64) -> Self {
        let mut s = SpectrumState {
            sizes: Vec::new(),
            d,
            counts: vec![0; d],
            tail_count: 0,
            tail_mass: 0,
            x,
            gen_fun: 0.0,
        };
        for &z in &sizes {
            s.add(z);
        }
        s.sizes = sizes;
        s
    }

    fn add(&mut self, z: u32) {
        if (z as usize) <= self.d {
            self.counts[z as usize - 1] += 1;
        } else {
            self.tail_count += 1;
            self.tail_mass += u64::from(z);
        }
        self.gen_fun += self.x.powi(z as i32);
    }

    fn remove(&mut self, z: u32) {
        if (z as usize) <= self.d {
            self.counts[z as usize - 1] -= 1;
        } else {
            self.tail_count -= 1;
            self.tail_mass -= u64::from(z);
        }
        self.gen_fun -= self.x.powi(z as i32);
    }

    /// Merges `l` blocks chosen uniformly without replacement.
    fn merge<R: Rng + ?Sized>(&mut self, l: usize, rng: &mut R) {
        let m = self.sizes.len();
        let mut merged = 0u32;
        for j in 0..l {
            let last = m - 1 - j;
            let r = rng.random_range(0..=last);
            self.sizes.swap(r, last);
            merged += self.sizes[last];
        }
        for j in 0..l {
            let z = self.sizes[m - 1 - j];
            self.remove(z);
        }
        self.sizes.truncate(m - l);
        self.sizes.push(merged);
        self.add(merged);
    }

    fn snapshot(&self) -> SpectrumSnapshot {
        SpectrumSnapshot {
            counts: self.counts.clone(),
            tail_count: self.tail_count,
            tail_mass: self.tail_mass,
            gen_fun: self.gen_fun,
        }
    }
}

/// Spectrum chain started from `n_start` singletons.
pub fn simulate_spectrum<R: Rng + ?Sized>(
    table: &RateTable,
    n_start: usize,
    options: SpectrumOptions,
    rng: &mut R,
) -> Result<SpectrumTrajectory> {
    simulate_spectrum_from(table, vec![1; n_start], options, rng)
}

/// Spectrum chain started from an arbitrary multiset of block sizes.
pub fn simulate_spectrum_from<R: Rng + ?Sized>(
    table: &RateTable,
    initial_sizes: Vec<u32>,
    options: SpectrumOptions,
    rng: &mut R,
) -> Result<SpectrumTrajectory> {
    check_start(table, initial_sizes.len())?;
    if options.d == 0 {
        return domain("spectrum truncation d must be at least 1");
    }
    if initial_sizes.contains(&0) {
        return domain("block sizes must be positive");
    }
    let n_start: u64 = initial_sizes.iter().map(|&z| u64::from(z)).sum();
    let horizon = options.t_max.unwrap_or(f64::INFINITY);
    let mut state = SpectrumState::new(initial_sizes, options.d, options.gen_fun_x);
    let mut events = vec![(0.0, state.snapshot())];
    let mut t = 0.0;
    while state.sizes.len() > 1 {
        let m = state.sizes.len();
        t += holding_time(table, m, rng);
        if t > horizon {
            break;
        }
        let l = table.sample_merger_size(m, rng.random());
        state.merge(l, rng);
        events.push((t, state.snapshot()));
    }
    Ok(SpectrumTrajectory {
        n_start,
        d: options.d,
        gen_fun_x: options.gen_fun_x,
        events,
        final_sizes: state.sizes,
    })
}

/// Path of the partition-valued coalescent on `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledPartitionTrajectory {
    pub n: usize,
    pub events: Vec<(f64, SetPartition)>,
}

impl LabelledPartitionTrajectory {
    pub fn value_at(&self, t: f64) -> &SetPartition {
        &self.events[event_index(|j| self.events[j].0, self.events.len(), t)].1
    }
}

/// Partition-valued chain on `[n]`, `n <= 12`, until a single block remains.
pub fn simulate_labelled<R: Rng + ?Sized>(
    table: &RateTable,
    n: usize,
    rng: &mut R,
) -> Result<LabelledPartitionTrajectory> {
    simulate_labelled_from(table, SetPartition::singletons(n), rng)
}

/// Partition-valued chain from an arbitrary initial partition.
pub fn simulate_labelled_from<R: Rng + ?Sized>(
    table: &RateTable,
    start: SetPartition,
    rng: &mut R,
) -> Result<LabelledPartitionTrajectory> {
    let n = start.ground_size;
    if n > MAX_LABELLED {
        return Err(Error::Size(format!(
            "labelled chain supports n <= {MAX_LABELLED}, got {n}"
        )));
    }
    check_start(table, start.num_blocks().max(1))?;
    let mut blocks = start.blocks.clone();
    let mut events = vec![(0.0, start)];
    let mut t = 0.0;
    while blocks.len() > 1 {
        let m = blocks.len();
        t += holding_time(table, m, rng);
        let l = table.sample_merger_size(m, rng.random());
        for j in 0..l {
            let last = m - 1 - j;
            let r = rng.random_range(0..=last);
            blocks.swap(r, last);
        }
        let mut merged: Vec<usize> = blocks.drain(m - l..).flatten().collect();
        merged.sort_unstable();
        blocks.push(merged);
        blocks.sort_by_key(|b| b[0]);
        events.push((
            t,
            SetPartition {
                ground_size: n,
                blocks: blocks.clone(),
            },
        ));
    }
    Ok(LabelledPartitionTrajectory { n, events })
}

/// Restriction of every state to `[n]`, dropping jumps that become invisible.
pub fn restrict(traj: &LabelledPartitionTrajectory, n: usize) -> Result<LabelledPartitionTrajectory> {
    if n > traj.n {
        return domain(format!("cannot restrict a trajectory on [{}] to [{n}]", traj.n));
    }
    let mut events: Vec<(f64, SetPartition)> = Vec::new();
    for (t, p) in &traj.events {
        let r = p.restrict(n);
        if events.last().is_none_or(|(_, q)| *q != r) {
            events.push((*t, r));
        }
    }
    Ok(LabelledPartitionTrajectory { n, events })
}

/// What an ensemble records on its time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "observable", rename_all = "snake_case")]
pub enum Observable {
    /// Number of blocks.
    BlockCount,
    /// Number of blocks, `type_1..type_d`, tail count and `Σ x^{size}`.
    Spectrum { d: usize, gen_fun_x: f64 },
}

impl Observable {
    pub fn columns(&self) -> Vec<String> {
        match self {
            Observable::BlockCount => vec!["count".into()],
            Observable::Spectrum { d, .. } => {
                let mut c = vec!["count".to_string()];
                c.extend((1..=*d).map(|i| format!("type_{i}")));
                c.push("tail".into());
                c.push("gen_fun".into());
                c
            }
        }
    }
}

/// One ensemble experiment: `n` singletons observed at clock times `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub observable: Observable,
    pub grid: Vec<f64>,
}

/// Replicate statistics per grid time, indexed `[column][grid point]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub replicates: usize,
    pub grid: Vec<f64>,
    pub columns: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    /// Unbiased sample variance; zero for a single replicate.
    pub var: Vec<Vec<f64>>,
    pub q05: Vec<Vec<f64>>,
    pub q50: Vec<Vec<f64>>,
    pub q95: Vec<Vec<f64>>,
    /// Absorption time per replicate, if it happened before the last grid time.
    pub absorption_times: Vec<Option<f64>>,
}

/// Samples of one replicate, `[column][grid point]`.
fn run_replicate(
    table: &RateTable,
    spec: &EnsembleSpec,
    t_max: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<f64>>, Option<f64>)> {
    match spec.observable {
        Observable::BlockCount => {
            let tr = simulate_block_count(table, spec.n, Some(t_max), rng)?;
            let row = spec.grid.iter().map(|&t| tr.value_at(t) as f64).collect();
            Ok((vec![row], tr.absorption_time()))
        }
        Observable::Spectrum { d, gen_fun_x } => {
            let options = SpectrumOptions {
                d,
                t_max: Some(t_max),
                gen_fun_x,
            };
            let tr = simulate_spectrum(table, spec.n, options, rng)?;
            let mut cols = vec![Vec::with_capacity(spec.grid.len()); d + 3];
            for &t in &spec.grid {
                let s = tr.value_at(t);
                cols[0].push(s.block_count() as f64);
                for i in 0..d {
                    cols[i + 1].push(f64::from(s.counts[i]));
                }
                cols[d + 1].push(f64::from(s.tail_count));
                cols[d + 2].push(s.gen_fun);
            }
            Ok((cols, tr.absorption_time()))
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs `replicates` independent chains and summarises them on `spec.grid`.
///
/// Replicates are simulated on a pool of `threads` workers, collected in
/// replicate order and reduced sequentially, so the result does not depend
/// on the thread count.
pub fn run_ensemble(
    table: &RateTable,
    spec: &EnsembleSpec,
    replicates: usize,
    seeds: SeedPolicy,
    threads: usize,
) -> Result<EnsembleStats> {
    if replicates == 0 {
        return Err(Error::Config("ensemble needs at least one replicate".into()));
    }
    if spec.grid.is_empty() {
        return Err(Error::Config("ensemble needs a non-empty time grid".into()));
    }
    if spec.grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::Config("grid times must be finite and non-negative".into()));
    }
    check_start(table, spec.n)?;
    let t_max = spec.grid.iter().copied().fold(0.0, f64::max);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let samples: Vec<(Vec<Vec<f64>>, Option<f64>)> = pool.install(|| {
        (0..replicates)
            .into_par_iter()
            .map(|r| run_replicate(table, spec, t_max, &mut seeds.rng(r as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(aggregate(spec, samples))
}

fn aggregate(spec: &EnsembleSpec, samples: Vec<(Vec<Vec<f64>>, Option<f64>)>) -> EnsembleStats {
    let columns = spec.observable.columns();
    let (nc, ng, r) = (columns.len(), spec.grid.len(), samples.len());
    let mut mean = vec![vec![0.0; ng]; nc];
    let mut var = vec![vec![0.0; ng]; nc];
    let mut q05 = vec![vec![0.0; ng]; nc];
    let mut q50 = vec![vec![0.0; ng]; nc];
    let mut q95 = vec![vec![0.0; ng]; nc];
    let mut buf = vec![0.0; r];
    for c in 0..nc {
        for g in 0..ng {
            for (j, s) in samples.iter().enumerate() {
                buf[j] = s.0[c][g];
            }
            let mu = buf.iter().sum::<f64>() / r as f64;
            let ss: f64 = buf.iter().map(|v| (v - mu) * (v - mu)).sum();
            mean[c][g] = mu;
            var[c][g] = if r > 1 { ss / (r - 1) as f64 } else { 0.0 };
            buf.sort_by(f64::total_cmp);
            q05[c][g] = quantile_sorted(&buf, 0.05);
            q50[c][g] = quantile_sorted(&buf, 0.5);
            q95[c][g] = quantile_sorted(&buf, 0.95);
        }
    }
    EnsembleStats {
        replicates: r,
        grid: spec.grid.clone(),
        columns,
        mean,
        var,
        q05,
        q50,
        q95,
        absorption_times: samples.into_iter().map(|s| s.1).collect(),
    }
}

/// Two-sample tests used by the statistical checks.
pub mod stats {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    /// Kolmogorov–Smirnov statistic and asymptotic p-value.
    pub fn ks_two_sample(x: &[f64], y: &[f64]) -> (f64, f64) {
        let mut a = x.to_vec();
        let mut b = y.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (n, m) = (a.len(), b.len());
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < m {
            let v = a[i].min(b[j]);
            while i < n && a[i] <= v {
                i += 1;
            }
            while j < m && b[j] <= v {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
        }
        let ne = (n * m) as f64 / (n + m) as f64;
        let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        (d, kolmogorov_q(lambda))
    }

    /// `Q(λ) = 2 Σ_{k>=1} (-1)^{k-1} exp(-2 k² λ²)`.
    pub fn kolmogorov_q(lambda: f64) -> f64 {
        if lambda < 0.2 {
            return 1.0;
        }
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=200 {
            let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += term;
            if term.abs() < 1e-16 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }

    /// Chi-square homogeneity test of two count vectors over the same
    /// categories; categories empty in both samples are dropped.
    /// Returns `(statistic, degrees of freedom, p-value)`.
    pub fn chi_square_homogeneity(x: &[u64], y: &[u64]) -> (f64, usize, f64) {
        let nx: u64 = x.iter().sum();
        let ny: u64 = y.iter().sum();
        let total = (nx + ny) as f64;
        let mut stat = 0.0;
        let mut cats = 0usize;
        for (&a, &b) in x.iter().zip(y) {
            let col = (a + b) as f64;
            if col == 0.0 {
                continue;
            }
            cats += 1;
            let ea = col * nx as f64 / total;
            let eb = col * ny as f64 / total;
            stat += (a as f64 - ea).powi(2) / ea + (b as f64 - eb).powi(2) / eb;
        }
        let df = cats.saturating_sub(1).max(1);
        let p = 1.0 - ChiSquared::new(df as f64).expect("positive dof").cdf(stat);
        (stat, df, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::{build_rate_table, Model};

    fn arcsine_table(n: usize) -> RateTable {
        build_rate_table(&Model::beta(0.5, 0.5).unwrap(), n).unwrap()
    }

    #[test]
    fn two_blocks_merge_once() {
        let t = arcsine_table(10);
        let mut rng = SeedPolicy::new(1).rng(0);
        let tr = simulate_block_count(&t, 2, None, &mut rng).unwrap();
        assert_eq!(tr.events.len(), 2);
        assert_eq!(tr.final_count(), 1);
        let sp = simulate_spectrum(&t, 2, SpectrumOptions::new(2), &mut rng).unwrap();
        assert_eq!(sp.events[0].1.counts, vec![2, 0]);
        assert_eq!(sp.events[1].1.counts, vec![0, 1]);
        let lab = simulate_labelled(&t, 2, &mut rng).unwrap();
        assert_eq!(lab.events.len(), 2);
        assert_eq!(lab.events[1].1.blocks, vec![vec![1, 2]]);
    }

    #[test]
    fn block_counts_decrease_and_hit_one() {
        let t = arcsine_table(500);
        let mut rng = SeedPolicy::new(7).rng(3);
        let tr = simulate_block_count(&t, 500, None, &mut rng).unwrap();
        assert_eq!(tr.events[0], (0.0, 500));
        assert!(tr.events.windows(2).all(|w| w[1].1 < w[0].1 && w[1].0 > w[0].0));
        assert_eq!(tr.final_count(), 1);
        assert!(tr.absorption_time().is_some());
    }

    #[test]
    fn t_max_truncates() {
        let t = arcsine_table(300);
        let mut rng = SeedPolicy::new(7).rng(3);
        let tr = simulate_block_count(&t, 300, Some(0.01), &mut rng).unwrap();
        assert!(tr.events.iter().all(|e| e.0 <= 0.01));
        assert!(tr.final_count() > 1);
    }

    #[test]
    fn grid_evaluation_is_right_continuous() {
        let tr = BlockCountTrajectory {
            n_start: 5,
            events: vec![(0.0, 5), (1.0, 3), (2.5, 1)],
        };
        assert_eq!(tr.value_at(0.0), 5);
        assert_eq!(tr.value_at(0.999), 5);
        assert_eq!(tr.value_at(1.0), 3);
        assert_eq!(tr.value_at(2.5), 1);
        assert_eq!(tr.value_at(100.0), 1);
    }

    #[test]
    fn kingman_first_jump_is_a_pair() {
        let t = build_rate_table(&Model::Kingman, 4).unwrap();
        for r in 0..50 {
            let mut rng = SeedPolicy::new(5).rng(r);
            let sp = simulate_spectrum(&t, 4, SpectrumOptions::new(4), &mut rng).unwrap();
            assert_eq!(sp.events[1].1.counts, vec![2, 1, 0, 0]);
        }
    }

    #[test]
    fn spectrum_conserves_mass_and_matches_counts() {
        let t = arcsine_table(400);
        let mut rng = SeedPolicy::new(11).rng(0);
        let sp = simulate_spectrum(&t, 400, SpectrumOptions::new(5), &mut rng).unwrap();
        for (_, s) in &sp.events {
            assert_eq!(s.mass(), 400);
        }
        let bc = sp.block_counts();
        assert!(bc.events.windows(2).all(|w| w[1].1 < w[0].1));
        assert_eq!(sp.final_sizes, vec![400]);
        let last = &sp.events.last().unwrap().1;
        assert!((last.gen_fun - 0.5f64.powi(400)).abs() < 1e-9);
    }

    #[test]
    fn spectrum_from_arbitrary_start() {
        let t = arcsine_table(10);
        let mut rng = SeedPolicy::new(2).rng(0);
        let sp = simulate_spectrum_from(&t, vec![3, 1, 2], SpectrumOptions::new(2), &mut rng).unwrap();
        assert_eq!(sp.events[0].1.counts, vec![1, 1]);
        assert_eq!(sp.events[0].1.tail_count, 1);
        assert!(sp.events.iter().all(|(_, s)| s.mass() == 6));
    }

    #[test]
    fn labelled_chain_coarsens() {
        let t = arcsine_table(12);
        let mut rng = SeedPolicy::new(3).rng(9);
        let tr = simulate_labelled(&t, 12, &mut rng).unwrap();
        for w in tr.events.windows(2) {
            assert!(w[1].1.is_valid());
            assert!(w[0].1.refines(&w[1].1));
            assert!(w[1].1.num_blocks() < w[0].1.num_blocks());
        }
        assert!(simulate_labelled(&arcsine_table(13), 13, &mut rng).is_err());
    }

    #[test]
    fn restriction_examples() {
        let p = SetPartition {
            ground_size: 3,
            blocks: vec![vec![1, 3], vec![2]],
        };
        assert_eq!(p.restrict(2).blocks, vec![vec![1], vec![2]]);
        let t = arcsine_table(6);
        let mut rng = SeedPolicy::new(4).rng(1);
        let tr = simulate_labelled(&t, 5, &mut rng).unwrap();
        assert_eq!(restrict(&tr, 5).unwrap(), tr);
        let hidden = LabelledPartitionTrajectory {
            n: 6,
            events: vec![
                (0.0, SetPartition::singletons(6)),
                (
                    0.4,
                    SetPartition {
                        ground_size: 6,
                        blocks: vec![vec![1], vec![2], vec![3], vec![4], vec![5, 6]],
                    },
                ),
            ],
        };
        assert_eq!(restrict(&hidden, 4).unwrap().events.len(), 1);
    }

    #[test]
    fn ensemble_single_replicate_equals_trajectory() {
        let t = arcsine_table(100);
        let grid = vec![0.0, 0.05, 0.1, 0.2];
        let spec = EnsembleSpec {
            n: 100,
            observable: Observable::BlockCount,
            grid: grid.clone(),
        };
        let seeds = SeedPolicy::new(99);
        let st = run_ensemble(&t, &spec, 1, seeds, 2).unwrap();
        let tr = simulate_block_count(&t, 100, Some(0.2), &mut seeds.rng(0)).unwrap();
        for (g, &tt) in grid.iter().enumerate() {
            assert_eq!(st.mean[0][g], tr.value_at(tt) as f64);
            assert_eq!(st.var[0][g], 0.0);
        }
    }

    #[test]
    fn ensemble_is_thread_independent() {
        let t = arcsine_table(200);
        let spec = EnsembleSpec {
            n: 200,
            observable: Observable::Spectrum { d: 3, gen_fun_x: 0.5 },
            grid: vec![0.0, 0.01, 0.05],
        };
        let a = run_ensemble(&t, &spec, 64, SeedPolicy::new(5), 1).unwrap();
        let b = run_ensemble(&t, &spec, 64, SeedPolicy::new(5), 8).unwrap();
        assert_eq!(a, b);
        assert!(run_ensemble(&t, &spec, 0, SeedPolicy::new(5), 1).is_err());
        let empty = EnsembleSpec { grid: vec![], ..spec };
        assert!(run_ensemble(&t, &empty, 3, SeedPolicy::new(5), 1).is_err());
    }

    #[test]
    fn ks_and_chi_square_sanity() {
        let x: Vec<f64> = (0..500).map(|j| j as f64 / 500.0).collect();
        let y: Vec<f64> = (0..400).map(|j| (j as f64 + 0.5) / 400.0).collect();
        let (d, p) = stats::ks_two_sample(&x, &y);
        assert!(d < 0.01 && p > 0.99);
        let z: Vec<f64> = y.iter().map(|v| v + 0.3).collect();
        assert!(stats::ks_two_sample(&x, &z).1 < 1e-6);
        let (_, df, p) = stats::chi_square_homogeneity(&[100, 200, 300, 0], &[102, 198, 299, 0]);
        assert_eq!(df, 2);
        assert!(p > 0.9);
    }
}
