//! Exact single-period vertex p-center.
//!
//! The optimal radius is one of the matrix entries, so we binary search the
//! sorted distinct entries and answer each "can `p` facilities cover every
//! customer within `r`?" question with a branch-and-bound set-cover search.
//! The returned facility set is the lexicographically smallest optimal one.

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use itertools::Itertools;
use thiserror::Error;

/// Largest number of subsets the exhaustive oracles agree to enumerate.
pub const BRUTE_FORCE_BUDGET: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PCenterError {
    #[error("p = {p} must lie in 1..={facilities}")]
    BadP { p: usize, facilities: usize },
    #[error("distance matrix needs {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("distance entry {index} is negative or not finite")]
    BadEntry { index: usize },
    #[error("exhaustive enumeration of {count} subsets exceeds the budget")]
    BudgetExceeded { count: u128 },
    #[error("empty facility set")]
    EmptyDecision,
}

/// Service times `d[i][j]`, facility-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    num_facilities: usize,
    num_customers: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(num_facilities: usize, num_customers: usize, data: Vec<f64>) -> Result<Self, PCenterError> {
        let expected = num_facilities * num_customers;
        if data.len() != expected || expected == 0 {
            return Err(PCenterError::Shape {
                expected,
                got: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|d| !d.is_finite() || *d < 0.0) {
            return Err(PCenterError::BadEntry { index });
        }
        Ok(Self {
            num_facilities,
            num_customers,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PCenterError> {
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(PCenterError::Shape {
                expected: rows.len() * nc,
                got: rows.iter().map(Vec::len).sum(),
            });
        }
        Self::new(rows.len(), nc, rows.concat())
    }

    pub fn num_facilities(&self) -> usize {
        self.num_facilities
    }

    pub fn num_customers(&self) -> usize {
        self.num_customers
    }

    #[inline]
    pub fn get(&self, facility: usize, customer: usize) -> f64 {
        self.data[facility * self.num_customers + customer]
    }

    pub fn row(&self, facility: usize) -> &[f64] {
        &self.data[facility * self.num_customers..(facility + 1) * self.num_customers]
    }

    /// `max_j min_{i in open} d[i][j]`: the radius of the closest assignment.
    pub fn bottleneck(&self, open: &[usize]) -> f64 {
        (0..self.num_customers)
            .map(|j| open.iter().map(|&i| self.get(i, j)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// Set of open facilities, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocationDecision {
    open: Vec<usize>,
}

impl LocationDecision {
    pub fn new(mut open: Vec<usize>) -> Result<Self, PCenterError> {
        open.sort_unstable();
        open.dedup();
        if open.is_empty() {
            return Err(PCenterError::EmptyDecision);
        }
        Ok(Self { open })
    }

    pub fn open(&self) -> &[usize] {
        &self.open
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn contains(&self, facility: usize) -> bool {
        self.open.binary_search(&facility).is_ok()
    }
}

/// Customer-to-facility assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub assign: Vec<usize>,
}

/// Assigns every customer to its closest open facility, ties to the lowest
/// facility index.
pub fn allocate(open: &LocationDecision, d: &DistanceMatrix) -> Allocation {
    let assign = (0..d.num_customers())
        .map(|j| {
            let mut best = open.open[0];
            for &i in &open.open[1..] {
                if d.get(i, j) < d.get(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Allocation { assign }
}

/// Largest service time of an allocation.
pub fn radius(alloc: &Allocation, d: &DistanceMatrix) -> f64 {
    alloc
        .assign
        .iter()
        .enumerate()
        .map(|(j, &i)| d.get(i, j))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PCenterSolution {
    pub open: LocationDecision,
    pub radius: f64,
}

fn check_p(d: &DistanceMatrix, p: usize) -> Result<(), PCenterError> {
    if p == 0 || p > d.num_facilities() {
        return Err(PCenterError::BadP {
            p,
            facilities: d.num_facilities(),
        });
    }
    Ok(())
}

/// Optimal vertex p-center.
pub fn solve_pcenter(d: &DistanceMatrix, p: usize) -> Result<PCenterSolution, PCenterError> {
    check_p(d, p)?;
    let (nf, nc) = (d.num_facilities(), d.num_customers());

    // every customer needs some facility: radius >= max_j min_i d
    let lower = (0..nc)
        .map(|j| (0..nf).map(|i| d.get(i, j)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let upper = d.bottleneck(&greedy_open(d, p));
    let mut candidates: Vec<f64> = d.data.iter().copied().filter(|&x| x >= lower && x <= upper).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // candidates[hi] is always feasible; candidates[..lo] are infeasible
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if CoverSearch::new(d, candidates[mid], &FixedBitSet::with_capacity(0)).feasible(p) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let r = candidates[hi];
    let open = lexicographic_cover(d, r, p);
    Ok(PCenterSolution {
        open: LocationDecision { open },
        radius: r,
    })
}

// Greedy upper bound: farthest-first style, always adding the facility that
// most reduces the current bottleneck.
fn greedy_open(d: &DistanceMatrix, p: usize) -> Vec<usize> {
    let (nf, nc) = (d.num_facilities(), d.num_customers());
    let mut best_to = vec![f64::INFINITY; nc];
    let mut open = Vec::with_capacity(p);
    for _ in 0..p {
        let mut pick = None;
        let mut pick_val = f64::INFINITY;
        for i in (0..nf).filter(|i| !open.contains(i)) {
            let val = (0..nc).map(|j| best_to[j].min(d.get(i, j))).fold(0.0, f64::max);
            if val < pick_val {
                pick_val = val;
                pick = Some(i);
            }
        }
        let i = pick.expect("p <= |F|");
        for (j, b) in best_to.iter_mut().enumerate() {
            *b = b.min(d.get(i, j));
        }
        open.push(i);
    }
    open
}

// Lexicographically smallest p-set covering every customer within r.
// Scans facilities in index order and keeps a witness cover for the
// current prefix; a facility outside the witness is tried with one
// restricted feasibility search.
fn lexicographic_cover(d: &DistanceMatrix, r: f64, p: usize) -> Vec<usize> {
    let nf = d.num_facilities();
    let full = CoverSearch::new(d, r, &FixedBitSet::with_capacity(0));
    let mut uncovered = full.all_customers();
    let mut witness = CoverSearch::new(d, r, &FixedBitSet::with_capacity(0))
        .search_all(p)
        .expect("radius was proven feasible");
    let mut prefix = Vec::with_capacity(p);
    for x in 0..nf {
        let slots = p - prefix.len();
        if slots == 0 {
            break;
        }
        let include = if witness.contains(&x) {
            true
        } else if nf - x - 1 < slots - 1 {
            unreachable!("state feasibility guarantees enough facilities remain")
        } else if nf - x - 1 < slots {
            // excluding x would leave too few facilities to fill p slots
            true
        } else {
            let mut rest = uncovered.clone();
            rest.difference_with(&full.covers[x]);
            let mut allowed = FixedBitSet::with_capacity(nf);
            allowed.insert_range(x + 1..nf);
            match CoverSearch::new(d, r, &allowed).search(rest, slots - 1) {
                Some(w) => {
                    witness = w;
                    true
                }
                None => false,
            }
        };
        if include {
            prefix.push(x);
            uncovered.difference_with(&full.covers[x]);
            witness.retain(|&f| f != x);
        }
    }
    debug_assert_eq!(prefix.len(), p);
    prefix
}

// Branch-and-bound search for a cover of size <= k.
struct CoverSearch {
    num_customers: usize,
    // customers within r of each facility (empty for disallowed facilities)
    covers: Vec<FixedBitSet>,
    // allowed facilities within r of each customer
    covered_by: Vec<Vec<usize>>,
    covered_by_set: Vec<FixedBitSet>,
    // largest budget for which a customer set is known to be uncoverable
    failed: HashMap<FixedBitSet, usize>,
}

impl CoverSearch {
    // An empty `allowed` set means every facility is allowed.
    fn new(d: &DistanceMatrix, r: f64, allowed: &FixedBitSet) -> Self {
        let (nf, nc) = (d.num_facilities(), d.num_customers());
        let is_allowed = |i: usize| allowed.is_empty() || allowed.contains(i);
        let mut covers = vec![FixedBitSet::with_capacity(nc); nf];
        let mut covered_by = vec![Vec::new(); nc];
        let mut covered_by_set = vec![FixedBitSet::with_capacity(nf); nc];
        for i in (0..nf).filter(|&i| is_allowed(i)) {
            for j in 0..nc {
                if d.get(i, j) <= r {
                    covers[i].insert(j);
                    covered_by[j].push(i);
                    covered_by_set[j].insert(i);
                }
            }
        }
        Self {
            num_customers: nc,
            covers,
            covered_by,
            covered_by_set,
            failed: HashMap::new(),
        }
    }

    fn all_customers(&self) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(self.num_customers);
        s.insert_range(..);
        s
    }

    fn feasible(mut self, k: usize) -> bool {
        self.search(self.all_customers(), k).is_some()
    }

    fn search_all(mut self, k: usize) -> Option<Vec<usize>> {
        let all = self.all_customers();
        self.search(all, k).map(|mut w| {
            w.sort_unstable();
            w
        })
    }

    fn search(&mut self, uncovered: FixedBitSet, k: usize) -> Option<Vec<usize>> {
        if uncovered.is_clear() {
            return Some(Vec::new());
        }
        if k == 0 {
            return None;
        }
        if self.failed.get(&uncovered).is_some_and(|&b| b >= k) {
            return None;
        }
        let result = self.branch(&uncovered, k);
        if result.is_none() {
            let e = self.failed.entry(uncovered).or_insert(0);
            *e = (*e).max(k);
        }
        result
    }

    fn branch(&mut self, uncovered: &FixedBitSet, k: usize) -> Option<Vec<usize>> {
        // most constrained customer
        let mut pivot = usize::MAX;
        let mut pivot_deg = usize::MAX;
        for j in uncovered.ones() {
            let deg = self.covered_by[j].len();
            if deg < pivot_deg {
                pivot_deg = deg;
                pivot = j;
                if deg <= 1 {
                    break;
                }
            }
        }
        if pivot_deg == 0 {
            return None;
        }
        if let Some(w) = self.greedy(uncovered, k) {
            return Some(w);
        }
        if self.packing_bound(uncovered, k) > k {
            return None;
        }

        // candidates covering the pivot, minus dominated ones
        let gains: Vec<(usize, FixedBitSet)> = self.covered_by[pivot]
            .iter()
            .map(|&i| {
                let mut g = self.covers[i].clone();
                g.intersect_with(uncovered);
                (i, g)
            })
            .collect();
        let mut order: Vec<(usize, usize)> = (0..gains.len())
            .filter(|&a| {
                !gains
                    .iter()
                    .enumerate()
                    .any(|(b, (_, gb))| b != a && gains[a].1.is_subset(gb) && (gains[a].1 != *gb || b < a))
            })
            .map(|a| (a, gains[a].1.count_ones(..)))
            .collect();
        order.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
        for (a, _) in order {
            let (i, gain) = &gains[a];
            let mut next = uncovered.clone();
            next.difference_with(gain);
            if let Some(mut w) = self.search(next, k - 1) {
                w.push(*i);
                return Some(w);
            }
        }
        None
    }

    fn greedy(&self, uncovered: &FixedBitSet, k: usize) -> Option<Vec<usize>> {
        let mut left = uncovered.clone();
        let mut picked = Vec::with_capacity(k);
        while !left.is_clear() {
            if picked.len() == k {
                return None;
            }
            let (best, gain) = self
                .covers
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.intersection_count(&left)))
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))?;
            if gain == 0 {
                return None;
            }
            left.difference_with(&self.covers[best]);
            picked.push(best);
        }
        Some(picked)
    }

    // Customers with pairwise-disjoint facility sets each need their own
    // facility.
    fn packing_bound(&self, uncovered: &FixedBitSet, k: usize) -> usize {
        let mut order: Vec<usize> = uncovered.ones().collect();
        order.sort_by_key(|&j| self.covered_by[j].len());
        let mut used = FixedBitSet::with_capacity(self.covers.len());
        let mut count = 0;
        for j in order {
            if self.covered_by_set[j].is_disjoint(&used) {
                used.union_with(&self.covered_by_set[j]);
                count += 1;
                if count > k {
                    break;
                }
            }
        }
        count
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    // saturates; callers only compare against budgets
    (0..k)
        .try_fold(1u128, |acc, i| {
            Some(acc.checked_mul((n - i) as u128)? / (i + 1) as u128)
        })
        .unwrap_or(u128::MAX)
}

/// Number of `k`-subsets of an `n`-set.
pub fn subsets(n: usize, k: usize) -> u128 {
    binomial(n, k)
}

/// Exhaustive p-center over all `C(|F|, p)` subsets in lexicographic order.
pub fn brute_force_pcenter(d: &DistanceMatrix, p: usize) -> Result<PCenterSolution, PCenterError> {
    check_p(d, p)?;
    let count = binomial(d.num_facilities(), p);
    if count > BRUTE_FORCE_BUDGET {
        return Err(PCenterError::BudgetExceeded { count });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for combo in (0..d.num_facilities()).combinations(p) {
        let r = d.bottleneck(&combo);
        if best.as_ref().is_none_or(|(_, b)| r < *b) {
            best = Some((combo, r));
        }
    }
    let (open, radius) = best.expect("at least one subset");
    Ok(PCenterSolution {
        open: LocationDecision { open },
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dm(rows: &[&[f64]]) -> DistanceMatrix {
        DistanceMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, nf: usize, nc: usize, levels: u32) -> DistanceMatrix {
        let data = (0..nf * nc).map(|_| rng.gen_range(0..levels) as f64).collect();
        DistanceMatrix::new(nf, nc, data).unwrap()
    }

    #[test]
    fn allocate_examples() {
        let d = dm(&[&[0.0, 5.0, 7.0], &[4.0, 0.0, 2.0], &[6.0, 3.0, 0.0]]);
        let all = LocationDecision::new(vec![0, 1, 2]).unwrap();
        assert_eq!(allocate(&all, &d).assign, vec![0, 1, 2]);
        let single = LocationDecision::new(vec![1]).unwrap();
        assert_eq!(allocate(&single, &d).assign, vec![1, 1, 1]);

        let d = dm(&[&[3.0, 9.0], &[5.0, 4.0]]);
        let ab = LocationDecision::new(vec![0, 1]).unwrap();
        let s = allocate(&ab, &d);
        assert_eq!(s.assign, vec![0, 1]);
        assert_eq!(radius(&s, &d), 4.0);
    }

    #[test]
    fn allocate_ties_to_lowest_index() {
        let d = dm(&[&[2.0], &[1.0], &[1.0]]);
        let o = LocationDecision::new(vec![2, 1, 0]).unwrap();
        assert_eq!(allocate(&o, &d).assign, vec![1]);
    }

    #[test]
    fn radius_examples() {
        let d = dm(&[&[6.0]]);
        assert_eq!(radius(&Allocation { assign: vec![0] }, &d), 6.0);
        let z = dm(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(radius(&Allocation { assign: vec![0, 1] }, &z), 0.0);
    }

    #[test]
    fn solve_trivial_cases() {
        let d = dm(&[&[4.0]]);
        let s = solve_pcenter(&d, 1).unwrap();
        assert_eq!(s.open.open(), &[0]);
        assert_eq!(s.radius, 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = random_matrix(&mut rng, 5, 6, 50);
        let s = solve_pcenter(&d, 5).unwrap();
        let expect = (0..6)
            .map(|j| (0..5).map(|i| d.get(i, j)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        assert_eq!(s.radius, expect);
        assert_eq!(s.open.open(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn solve_rejects_bad_p() {
        let d = dm(&[&[1.0, 2.0]]);
        assert!(matches!(solve_pcenter(&d, 0), Err(PCenterError::BadP { .. })));
        assert!(matches!(solve_pcenter(&d, 2), Err(PCenterError::BadP { .. })));
    }

    #[test]
    fn brute_force_budget() {
        let d = DistanceMatrix::new(40, 1, vec![1.0; 40]).unwrap();
        assert!(matches!(
            brute_force_pcenter(&d, 10),
            Err(PCenterError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn brute_force_single_facility() {
        let d = dm(&[&[1.0, 9.0], &[5.0, 5.0], &[2.0, 6.0]]);
        let s = brute_force_pcenter(&d, 1).unwrap();
        assert_eq!(s.open.open(), &[1]);
        assert_eq!(s.radius, 5.0);
    }

    #[test]
    fn four_by_four_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = random_matrix(&mut rng, 4, 4, 100);
            // hand enumeration of the 6 pairs
            let mut best = (vec![], f64::INFINITY);
            for a in 0..4 {
                for b in a + 1..4 {
                    let r = d.bottleneck(&[a, b]);
                    if r < best.1 {
                        best = (vec![a, b], r);
                    }
                }
            }
            let s = solve_pcenter(&d, 2).unwrap();
            assert_eq!(s.radius, best.1);
            assert_eq!(s.open.open(), best.0.as_slice());
        }
    }

    #[test]
    fn matches_brute_force_with_many_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let nf = rng.gen_range(1..=9);
            let nc = rng.gen_range(1..=9);
            let p = rng.gen_range(1..=nf.min(4));
            let d = random_matrix(&mut rng, nf, nc, 4);
            assert_eq!(solve_pcenter(&d, p).unwrap(), brute_force_pcenter(&d, p).unwrap());
        }
    }

    #[test]
    fn rectangular_and_monotone_in_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_matrix(&mut rng, 12, 20, 1000);
        let mut prev = f64::INFINITY;
        for p in 1..=12 {
            let s = solve_pcenter(&d, p).unwrap();
            assert!(s.radius <= prev);
            assert_eq!(s.open.len(), p);
            assert_eq!(radius(&allocate(&s.open, &d), &d), s.radius);
            prev = s.radius;
        }
    }
}
