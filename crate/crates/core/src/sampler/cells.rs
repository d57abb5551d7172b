use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A multiset of grid cells: distinct cell indices with multiplicities.
///
/// Entries are kept in ascending cell-index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSampleSet {
    entries: Vec<(usize, usize)>,
}

impl CellSampleSet {
    pub fn new(mut entries: Vec<(usize, usize)>) -> Result<Self> {
        entries.sort_unstable();
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("cell {} listed twice", w[0].0)));
            }
        }
        if entries.iter().any(|&(_, m)| m == 0) {
            return Err(Error::invalid("cell multiplicity must be at least 1"));
        }
        Ok(Self { entries })
    }

    /// Aggregates a sequence of cell draws into multiplicities.
    pub fn from_draws(draws: impl IntoIterator<Item = usize>) -> Self {
        let mut counts = BTreeMap::new();
        for c in draws {
            *counts.entry(c).or_insert(0usize) += 1;
        }
        Self {
            entries: counts.into_iter().collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn multiplicity(&self, cell: usize) -> usize {
        self.entries
            .binary_search_by_key(&cell, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Number of distinct cells.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of multiplicities.
    pub fn total(&self) -> usize {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// Cell of every generated point, in entry order.
    pub fn expanded(&self) -> Vec<usize> {
        self.entries
            .iter()
            .flat_map(|&(c, m)| std::iter::repeat_n(c, m))
            .collect()
    }
}

/// Distributes exactly `total` points over `selected` cells in proportion to
/// `weights[cell]` by the largest-remainder method. Every selected cell
/// receives at least one point; remainder ties go to the lower cell index.
pub fn allocate_points(selected: &[usize], weights: &[f64], total: usize) -> Result<CellSampleSet> {
    let mut cells = selected.to_vec();
    cells.sort_unstable();
    cells.dedup();
    if cells.is_empty() {
        return Err(Error::invalid("no cells selected"));
    }
    if total < cells.len() {
        return Err(Error::invalid(format!(
            "cannot give {} cells at least one of {total} points",
            cells.len()
        )));
    }
    let mut w: Vec<f64> = cells
        .iter()
        .map(|&c| weights.get(c).copied().unwrap_or(0.0).max(0.0))
        .collect();
    let mut sum: f64 = w.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        w.iter_mut().for_each(|x| *x = 1.0);
        sum = w.len() as f64;
    }
    let quotas: Vec<f64> = w.iter().map(|x| x / sum * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    if assigned > total {
        // Only reachable through rounding in the quotas; trim the largest.
        let mut excess = assigned - total;
        while excess > 0 {
            let i = (0..counts.len()).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
            counts[i] -= 1;
            excess -= 1;
        }
    } else {
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = quotas[a] - quotas[a].floor();
            let fb = quotas[b] - quotas[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &i in order.iter().take(total - assigned) {
            counts[i] += 1;
        }
    }
    for i in 0..counts.len() {
        if counts[i] == 0 {
            let donor = (0..counts.len())
                .filter(|&j| counts[j] >= 2)
                .max_by(|&a, &b| {
                    let sa = counts[a] as f64 - quotas[a];
                    let sb = counts[b] as f64 - quotas[b];
                    sa.total_cmp(&sb).then(b.cmp(&a))
                })
                .expect("total >= cells guarantees a donor");
            counts[donor] -= 1;
            counts[i] = 1;
        }
    }
    Ok(CellSampleSet {
        entries: cells.into_iter().zip(counts).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mults(set: &CellSampleSet) -> Vec<usize> {
        set.entries().iter().map(|e| e.1).collect()
    }

    #[test]
    fn single_cell() {
        let s = allocate_points(&[4], &[0.0, 0.0, 0.0, 0.0, 0.3], 7).unwrap();
        assert_eq!(s.entries(), &[(4, 7)]);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let s = allocate_points(&[0, 1], &[0.5, 0.5], 3).unwrap();
        assert_eq!(mults(&s), vec![2, 1]);
    }

    #[test]
    fn largest_remainder_by_hand() {
        let s = allocate_points(&[0, 1, 2], &[0.7, 0.2, 0.1], 10).unwrap();
        assert_eq!(mults(&s), vec![7, 2, 1]);
    }

    #[test]
    fn zero_weight_cell_still_gets_one() {
        let s = allocate_points(&[0, 1, 2], &[1.0, 0.0, 0.0], 5).unwrap();
        assert_eq!(mults(&s), vec![3, 1, 1]);
    }

    #[test]
    fn too_few_points() {
        assert!(allocate_points(&[0, 1, 2], &[1.0; 3], 2).is_err());
        assert!(allocate_points(&[], &[1.0; 3], 2).is_err());
    }

    #[test]
    fn set_validation() {
        assert!(CellSampleSet::new(vec![(1, 2), (1, 3)]).is_err());
        assert!(CellSampleSet::new(vec![(1, 0)]).is_err());
        let s = CellSampleSet::new(vec![(5, 2), (1, 1)]).unwrap();
        assert_eq!(s.expanded(), vec![1, 5, 5]);
        assert_eq!(s.multiplicity(5), 2);
        assert_eq!(s.multiplicity(2), 0);
    }

    proptest! {
        #[test]
        fn allocation_is_exact_and_covering(
            weights in prop::collection::vec(0.0f64..1.0, 1..60),
            extra in 0usize..500,
        ) {
            let cells: Vec<usize> = (0..weights.len()).collect();
            let total = cells.len() + extra;
            let s = allocate_points(&cells, &weights, total).unwrap();
            prop_assert_eq!(s.total(), total);
            prop_assert_eq!(s.len(), cells.len());
            prop_assert!(s.entries().iter().all(|e| e.1 >= 1));
        }
    }
}
