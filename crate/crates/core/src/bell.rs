//! Set partitions, Bell polynomials and related combinatorics.
//!
//! Sequences of polynomial arguments are 1-based in the mathematics and
//! 0-based here: `w[0]` is `w_1`.

use crate::error::{domain, Error, Result};

/// Largest ground set for explicit set-partition enumeration.
pub const MAX_ENUMERATION: usize = 12;
/// Largest order for which [`partial_bell`] enumerates partitions.
pub const ENUMERATION_CUTOFF: usize = 10;
/// Largest order accepted by the Faà di Bruno oracle.
pub const MAX_FAA_DI_BRUNO: usize = 10;
/// Largest total accepted by the composition enumerator.
pub const MAX_COMPOSITION: usize = 64;

/// A partition of `{1, ..., ground_size}` into nonempty blocks.
///
/// Blocks are sorted by their least element and each block is sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    pub ground_size: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// The partition into singletons.
    pub fn singletons(n: usize) -> Self {
        SetPartition {
            ground_size: n,
            blocks: (1..=n).map(|j| vec![j]).collect(),
        }
    }

    /// Builds a partition from a restricted growth string (0-based labels).
    pub fn from_rgs(rgs: &[usize]) -> Self {
        let k = rgs.iter().max().map_or(0, |&m| m + 1);
        let mut blocks = vec![Vec::new(); k];
        for (e, &b) in rgs.iter().enumerate() {
            blocks[b].push(e + 1);
        }
        SetPartition {
            ground_size: rgs.len(),
            blocks,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Checks disjointness, coverage and non-emptiness.
    pub fn is_valid(&self) -> bool {
        let mut seen = vec![false; self.ground_size + 1];
        for b in &self.blocks {
            if b.is_empty() {
                return false;
            }
            for &e in b {
                if e == 0 || e > self.ground_size || seen[e] {
                    return false;
                }
                seen[e] = true;
            }
        }
        seen[1..].iter().all(|&s| s)
    }

    /// Restriction to `{1, ..., n}`; empty blocks are dropped.
    pub fn restrict(&self, n: usize) -> SetPartition {
        let mut blocks: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&e| e <= n).collect::<Vec<_>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        blocks.sort_by_key(|b| b[0]);
        SetPartition {
            ground_size: n.min(self.ground_size),
            blocks,
        }
    }

    /// True if every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &SetPartition) -> bool {
        let mut owner = vec![usize::MAX; coarser.ground_size + 1];
        for (j, b) in coarser.blocks.iter().enumerate() {
            for &e in b {
                owner[e] = j;
            }
        }
        self.blocks
            .iter()
            .all(|b| b.iter().all(|&e| owner[e] == owner[b[0]]))
    }
}

/// Iterator over restricted growth strings of a fixed length.
pub struct PartitionIter {
    rgs: Vec<usize>,
    maxes: Vec<usize>,
    num_blocks: Option<usize>,
    done: bool,
}

impl PartitionIter {
    fn advance(&mut self) -> bool {
        let n = self.rgs.len();
        let mut j = n;
        while j > 1 {
            j -= 1;
            if self.rgs[j] <= self.maxes[j - 1] {
                self.rgs[j] += 1;
                let m = self.maxes[j - 1].max(self.rgs[j]);
                self.maxes[j] = m;
                for r in j + 1..n {
                    self.rgs[r] = 0;
                    self.maxes[r] = m;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for PartitionIter {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        loop {
            if self.done {
                return None;
            }
            let current = SetPartition::from_rgs(&self.rgs);
            if !self.advance() {
                self.done = true;
            }
            match self.num_blocks {
                Some(l) if current.num_blocks() != l => continue,
                _ => return Some(current),
            }
        }
    }
}

/// All set partitions of `{1, ..., i}`, optionally only those with
/// `num_blocks` blocks.
pub fn enumerate_partitions(i: usize, num_blocks: Option<usize>) -> Result<PartitionIter> {
    if i == 0 || i > MAX_ENUMERATION {
        return Err(Error::Size(format!(
            "set-partition enumeration supports 1 <= i <= {MAX_ENUMERATION}, got {i}"
        )));
    }
    Ok(PartitionIter {
        rgs: vec![0; i],
        maxes: vec![0; i],
        num_blocks,
        done: false,
    })
}

fn check_bell_args(i: usize, l: usize, w: &[f64]) -> Result<()> {
    if l < 1 || l > i {
        return domain(format!("partial Bell polynomial needs 1 <= l <= i, got i={i}, l={l}"));
    }
    if w.len() < i - l + 1 {
        return domain(format!(
            "partial Bell polynomial B_{{{i},{l}}} needs {} weights, got {}",
            i - l + 1,
            w.len()
        ));
    }
    Ok(())
}

/// `B_{i,l}(w)`: enumeration for `i <= 10`, recurrence above.
pub fn partial_bell(i: usize, l: usize, w: &[f64]) -> Result<f64> {
    if i <= ENUMERATION_CUTOFF {
        partial_bell_enumerated(i, l, w)
    } else {
        partial_bell_recurrence(i, l, w)
    }
}

/// `B_{i,l}(w)` as a sum over the set partitions of `[i]` with `l` blocks.
pub fn partial_bell_enumerated(i: usize, l: usize, w: &[f64]) -> Result<f64> {
    check_bell_args(i, l, w)?;
    Ok(enumerate_partitions(i, Some(l))?
        .map(|p| p.blocks.iter().map(|b| w[b.len() - 1]).product::<f64>())
        .sum())
}

/// `B_{i,l}(w)` from `B_{i,l} = Σ_j C(i-1, j-1) w_j B_{i-j,l-1}`.
pub fn partial_bell_recurrence(i: usize, l: usize, w: &[f64]) -> Result<f64> {
    check_bell_args(i, l, w)?;
    Ok(BellTable::new(i, w).get(i, l))
}

/// All `B_{i,l}(w)` for `0 <= l <= i <= order`.
#[derive(Debug, Clone)]
pub struct BellTable {
    order: usize,
    values: Vec<Vec<f64>>,
}

impl BellTable {
    /// Missing weights beyond `w.len()` are treated as zero.
    pub fn new(order: usize, w: &[f64]) -> Self {
        let wk = |j: usize| w.get(j - 1).copied().unwrap_or(0.0);
        let binom = binomial_rows(order);
        let mut values = vec![vec![0.0; order + 1]; order + 1];
        values[0][0] = 1.0;
        for i in 1..=order {
            for l in 1..=i {
                let mut s = 0.0;
                for j in 1..=i - l + 1 {
                    s += binom[i - 1][j - 1] * wk(j) * values[i - j][l - 1];
                }
                values[i][l] = s;
            }
        }
        BellTable { order, values }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.values[i][l]
    }

    /// `B_i(v, w) = Σ_l v_l B_{i,l}(w)`.
    pub fn complete(&self, i: usize, v: &[f64]) -> f64 {
        (1..=i)
            .map(|l| v.get(l - 1).copied().unwrap_or(0.0) * self.values[i][l])
            .sum()
    }
}

fn binomial_rows(n: usize) -> Vec<Vec<f64>> {
    let mut rows = vec![vec![1.0]];
    for i in 1..=n {
        let prev = &rows[i - 1];
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = prev[j - 1] + prev[j];
        }
        rows.push(row);
    }
    rows
}

/// Complete Bell polynomial `B_i(v, w) = Σ_{l=1}^{i} v_l B_{i,l}(w)`.
pub fn complete_bell(i: usize, v: &[f64], w: &[f64]) -> Result<f64> {
    if i == 0 {
        return domain("complete Bell polynomial needs i >= 1");
    }
    if v.len() < i || w.len() < i {
        return domain(format!("complete Bell polynomial B_{i} needs {i} entries of v and w"));
    }
    let mut s = 0.0;
    for l in 1..=i {
        s += v[l - 1] * partial_bell(i, l, w)?;
    }
    Ok(s)
}

/// `(f ∘ g)^{(i)}` by summing over all set partitions of `[i]`.
///
/// `f_deriv(j, y)` must return `f^{(j)}(y)`; `g_derivs[j-1]` is `g^{(j)}`
/// at the expansion point and `g0` the value of `g` there.
pub fn faa_di_bruno_oracle(
    i: usize,
    f_deriv: &dyn Fn(usize, f64) -> f64,
    g_derivs: &[f64],
    g0: f64,
) -> Result<f64> {
    if i == 0 || i > MAX_FAA_DI_BRUNO {
        return Err(Error::Size(format!(
            "Faà di Bruno oracle supports 1 <= i <= {MAX_FAA_DI_BRUNO}, got {i}"
        )));
    }
    if g_derivs.len() < i {
        return domain(format!("need {i} derivatives of g, got {}", g_derivs.len()));
    }
    let fd: Vec<f64> = (1..=i).map(|j| f_deriv(j, g0)).collect();
    Ok(enumerate_partitions(i, None)?
        .map(|p| fd[p.num_blocks() - 1] * p.blocks.iter().map(|b| g_derivs[b.len() - 1]).product::<f64>())
        .sum())
}

/// Block-count vector `l = (l_1, ..., l_d)`: `l_k` parts of size `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightedComposition {
    pub counts: Vec<usize>,
}

impl WeightedComposition {
    /// `|l| = Σ l_k`.
    pub fn size(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `⟨l⟩ = Σ k l_k`.
    pub fn weight(&self) -> usize {
        self.counts.iter().enumerate().map(|(k, c)| (k + 1) * c).sum()
    }
}

/// All `l ∈ ℕ_0^d` with `|l| = m` and `⟨l⟩ = i`, i.e. the partitions of
/// `i` into `m` parts of size at most `d`. Parts are generated in
/// non-increasing order, so the output is in reverse lexicographic order of
/// the part lists.
pub fn enumerate_weighted_compositions(
    i: usize,
    m: usize,
    d: usize,
) -> Result<std::vec::IntoIter<WeightedComposition>> {
    if i > MAX_COMPOSITION {
        return Err(Error::Size(format!(
            "composition enumeration supports i <= {MAX_COMPOSITION}, got {i}"
        )));
    }
    if m < 1 || m > i || d < 1 {
        return domain(format!(
            "compositions need 1 <= m <= i and d >= 1, got i={i}, m={m}, d={d}"
        ));
    }
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(m);
    integer_partitions(i, m, d.min(i), &mut parts, &mut |ps| {
        let mut counts = vec![0; d];
        for &p in ps {
            counts[p - 1] += 1;
        }
        out.push(WeightedComposition { counts });
    });
    Ok(out.into_iter())
}

fn integer_partitions(
    rest: usize,
    parts_left: usize,
    max_part: usize,
    parts: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    if parts_left == 0 {
        if rest == 0 {
            emit(parts);
        }
        return;
    }
    // Each remaining part is at least 1 and at most max_part.
    if rest < parts_left || rest > parts_left * max_part {
        return;
    }
    let hi = max_part.min(rest - (parts_left - 1));
    for p in (1..=hi).rev() {
        parts.push(p);
        integer_partitions(rest - p, parts_left - 1, p, parts, emit);
        parts.pop();
    }
}

/// Bell number `B_i`.
pub fn bell_number(i: usize) -> u128 {
    (0..=i).map(|l| stirling2(i, l)).sum()
}

/// Stirling number of the second kind `S(i, l)`.
pub fn stirling2(i: usize, l: usize) -> u128 {
    let mut row = vec![0u128; i + 1];
    row[0] = 1;
    for n in 1..=i {
        for k in (1..=n).rev() {
            row[k] = k as u128 * row[k] + row[k - 1];
        }
        row[0] = 0;
    }
    if l <= i {
        row[l]
    } else {
        0
    }
}

/// Unsigned Lah number `C(i-1, k-1) i! / k!`.
pub fn lah(i: usize, k: usize) -> u128 {
    if k == 0 || k > i {
        return u128::from(i == 0 && k == 0);
    }
    let binom = (1..k).fold(1u128, |acc, j| acc * (i - j) as u128 / j as u128);
    let ratio: u128 = (k + 1..=i).map(|j| j as u128).product();
    binom * ratio
}

/// Product of two truncated power series (ordinary coefficients).
pub fn series_mul(x: &[f64], y: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &xi) in x.iter().enumerate().take(order + 1) {
        if xi == 0.0 {
            continue;
        }
        for (j, &yj) in y.iter().enumerate().take(order + 1 - i) {
            out[i + j] += xi * yj;
        }
    }
    out
}

/// `i!`-scaled coefficients of `v(w(x))` for exponential generating
/// functions `v(x) = Σ v_l x^l / l!`, `w(x) = Σ w_k x^k / k!` without
/// constant terms. Entry `i` of the result is the `i`th EGF coefficient.
pub fn compose_egf(v: &[f64], w: &[f64], order: usize) -> Vec<f64> {
    let mut fact = vec![1.0; order + 1];
    for j in 1..=order {
        fact[j] = fact[j - 1] * j as f64;
    }
    let mut wo = vec![0.0; order + 1];
    for k in 1..=order.min(w.len()) {
        wo[k] = w[k - 1] / fact[k];
    }
    let mut acc = vec![0.0; order + 1];
    let mut power = vec![0.0; order + 1];
    power[0] = 1.0;
    for l in 1..=order.min(v.len()) {
        power = series_mul(&power, &wo, order);
        for i in 0..=order {
            acc[i] += v[l - 1] / fact[l] * power[i];
        }
    }
    (0..=order).map(|i| acc[i] * fact[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    fn factorials(n: usize) -> Vec<f64> {
        (1..=n).map(|k| (1..=k).map(|j| j as f64).product()).collect()
    }

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(3, None).unwrap().count(), 5);
        assert_eq!(enumerate_partitions(4, Some(2)).unwrap().count(), 7);
        let one: Vec<_> = enumerate_partitions(1, None).unwrap().collect();
        assert_eq!(one, vec![SetPartition::singletons(1)]);
        for i in 1..=MAX_ENUMERATION {
            let parts: Vec<_> = enumerate_partitions(i, None).unwrap().collect();
            assert_eq!(parts.len() as u128, bell_number(i));
            if i <= 7 {
                let set: std::collections::HashSet<_> = parts.iter().cloned().collect();
                assert_eq!(set.len(), parts.len());
                assert!(parts.iter().all(SetPartition::is_valid));
            }
        }
        assert!(enumerate_partitions(13, None).is_err());
        assert!(enumerate_partitions(0, None).is_err());
    }

    #[test]
    fn known_numbers() {
        let bells = [1u128, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115_975];
        for (i, &b) in bells.iter().enumerate() {
            assert_eq!(bell_number(i), b);
        }
        assert_eq!(stirling2(4, 2), 7);
        assert_eq!(stirling2(10, 3), 9330);
        assert_eq!(lah(4, 2), 36);
        assert_eq!(lah(3, 1), 6);
        assert_eq!(lah(5, 5), 1);
    }

    #[test]
    fn partial_bell_examples() {
        let fact = factorials(10);
        assert_eq!(partial_bell(4, 2, &fact).unwrap(), 36.0);
        let ones = vec![1.0; 12];
        for i in 1..=12 {
            for l in 1..=i {
                assert_eq!(partial_bell(i, l, &ones).unwrap(), stirling2(i, l) as f64);
            }
        }
        let a = 0.5;
        let w = [1.0 - a, (1.0 - a) * (2.0 - a)];
        assert!(rel(partial_bell(3, 2, &w).unwrap(), 1.125) < 1e-15);
        assert!(partial_bell(3, 4, &ones).is_err());
        assert!(partial_bell(3, 0, &ones).is_err());
    }

    #[test]
    fn lah_identity() {
        let fact = factorials(10);
        for i in 1..=10 {
            for k in 1..=i {
                assert_eq!(partial_bell(i, k, &fact).unwrap(), lah(i, k) as f64);
            }
        }
    }

    #[test]
    fn complete_bell_examples() {
        let ones = vec![1.0; 9];
        for i in 1..=9 {
            assert_eq!(complete_bell(i, &ones, &ones).unwrap(), bell_number(i) as f64);
        }
        assert_eq!(complete_bell(1, &[3.0], &[5.0]).unwrap(), 15.0);
        // v_l = l! (-c)^{l-1}, w_k = k!  gives  i! (1-c)^{i-1}.
        let c = 0.3f64;
        let fact = factorials(8);
        for i in 1..=8 {
            let v: Vec<f64> = (1..=i).map(|l| fact[l - 1] * (-c).powi(l as i32 - 1)).collect();
            let want = fact[i - 1] * (1.0 - c).powi(i as i32 - 1);
            assert!(rel(complete_bell(i, &v, &fact).unwrap(), want) < 1e-12);
        }
    }

    #[test]
    fn faa_di_bruno_examples() {
        let g = [0.3, -1.2, 2.5, 0.7, -0.1];
        for i in 1..=5 {
            let id = faa_di_bruno_oracle(i, &|j, _| if j == 1 { 1.0 } else { 0.0 }, &g, 0.4).unwrap();
            assert_eq!(id, g[i - 1]);
        }
        let x = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for i in 1..=6 {
            let e = faa_di_bruno_oracle(i, &|_, y: f64| y.exp(), &x, 0.7).unwrap();
            assert!(rel(e, 0.7f64.exp()) < 1e-15);
        }
        assert!(faa_di_bruno_oracle(11, &|_, _| 1.0, &[1.0; 11], 0.0).is_err());
    }

    #[test]
    fn faa_di_bruno_against_known_composition() {
        // exp(sin x) at 0: derivatives 1, 1, 0, -3, -8, -3
        let sin_derivs = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        let want = [1.0, 1.0, 0.0, -3.0, -8.0, -3.0];
        for i in 1..=6 {
            let got = faa_di_bruno_oracle(i, &|_, y: f64| y.exp(), &sin_derivs, 0.0).unwrap();
            assert!((got - want[i - 1]).abs() < 1e-12, "i={i}: {got}");
        }
    }

    #[test]
    fn compositions() {
        let c: Vec<_> = enumerate_weighted_compositions(4, 2, 4).unwrap().collect();
        assert_eq!(
            c,
            vec![
                WeightedComposition { counts: vec![1, 0, 1, 0] },
                WeightedComposition { counts: vec![0, 2, 0, 0] },
            ]
        );
        let c: Vec<_> = enumerate_weighted_compositions(5, 5, 3).unwrap().collect();
        assert_eq!(c, vec![WeightedComposition { counts: vec![5, 0, 0] }]);
        let c: Vec<_> = enumerate_weighted_compositions(3, 1, 3).unwrap().collect();
        assert_eq!(c, vec![WeightedComposition { counts: vec![0, 0, 1] }]);
        assert_eq!(enumerate_weighted_compositions(4, 1, 3).unwrap().count(), 0);
        for comp in enumerate_weighted_compositions(20, 6, 5).unwrap() {
            assert_eq!(comp.size(), 6);
            assert_eq!(comp.weight(), 20);
        }
        assert!(enumerate_weighted_compositions(65, 2, 3).is_err());
    }

    #[test]
    fn recurrence_matches_enumeration() {
        let w: Vec<f64> = (1..=10).map(|k| 0.37 * k as f64 - 0.9 + 1.0 / k as f64).collect();
        for i in 1..=10 {
            for l in 1..=i {
                let e = partial_bell_enumerated(i, l, &w).unwrap();
                let r = partial_bell_recurrence(i, l, &w).unwrap();
                assert!((e - r).abs() <= 1e-10 * e.abs().max(1.0), "i={i} l={l}");
            }
        }
    }

    proptest! {
        #[test]
        fn egf_composition_matches_complete_bell(
            v in proptest::collection::vec(-2.0f64..2.0, 10),
            w in proptest::collection::vec(-2.0f64..2.0, 10),
        ) {
            let comp = compose_egf(&v, &w, 10);
            let table = BellTable::new(10, &w);
            for i in 1..=10 {
                let want = table.complete(i, &v);
                let scale: f64 = (1..=i).map(|l| (v[l - 1] * table.get(i, l)).abs()).sum::<f64>().max(1.0);
                prop_assert!((comp[i] - want).abs() <= 1e-9 * scale);
            }
        }
    }
}
