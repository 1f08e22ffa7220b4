//! Stratified train/val/test assignment.
//!
//! Strata are `(emotion, source)` pairs. Per-class split sizes are fixed first
//! by largest-remainder rounding, so each class lands within one record of the
//! requested ratios; those sizes are then distributed over the class's strata
//! proportionally, keeping at least one record of every stratum in every split
//! that has a positive ratio.

use std::collections::BTreeMap;

use crate::corpus::manifest::{LabeledRecord, Split};
use crate::corpus::taxonomy::{EmotionClass, SourceDataset};
use crate::error::{Error, Result};
use crate::numeric::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.70,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }

    fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "split ratios must be non-negative and sum to 1, got {r:?}"
            )));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` items by `ratios` (ties → earlier index).
fn apportion(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let ideal: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut out = [0usize; 3];
    for (o, v) in out.iter_mut().zip(&ideal) {
        *o = v.floor() as usize;
    }
    let mut left = n - out.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = ideal[a] - ideal[a].floor();
        let fb = ideal[b] - ideal[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[k] > 0.0 {
            out[k] += 1;
            left -= 1;
        }
    }
    out
}

/// Distributes one class's split sizes over its strata.
fn allocate_class(stratum_sizes: &[usize], ratios: &[f64; 3]) -> Vec<[usize; 3]> {
    let n: usize = stratum_sizes.iter().sum();
    let targets = apportion(n, ratios);
    let positive: Vec<usize> = (0..3).filter(|&k| ratios[k] > 0.0).collect();

    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(stratum_sizes.len());
    let mut frac: Vec<(f64, usize, usize)> = Vec::new();
    for (s, &ns) in stratum_sizes.iter().enumerate() {
        let mut a = [0usize; 3];
        for k in 0..3 {
            let ideal = ns as f64 * ratios[k];
            a[k] = ideal.floor() as usize;
            frac.push((ideal - ideal.floor(), s, k));
        }
        // Representation floor: one record per positive-ratio split.
        for &k in &positive {
            if a[k] == 0 {
                a[k] = 1;
            }
        }
        // Undo any overshoot from the floor, taking from the largest share.
        while a.iter().sum::<usize>() > ns {
            let k = (0..3).max_by_key(|&k| (a[k], 3 - k)).unwrap();
            a[k] -= 1;
        }
        alloc.push(a);
    }

    let mut leftover: Vec<usize> = stratum_sizes
        .iter()
        .zip(&alloc)
        .map(|(&ns, a)| ns - a.iter().sum::<usize>())
        .collect();
    let mut assigned = [0usize; 3];
    for a in &alloc {
        for k in 0..3 {
            assigned[k] += a[k];
        }
    }

    frac.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    for &(_, s, k) in &frac {
        if leftover[s] > 0 && assigned[k] < targets[k] {
            alloc[s][k] += 1;
            leftover[s] -= 1;
            assigned[k] += 1;
        }
    }
    // Anything still unplaced goes to the split furthest below target.
    for s in 0..alloc.len() {
        while leftover[s] > 0 {
            let k = *positive
                .iter()
                .max_by_key(|&&k| (targets[k] as i64 - assigned[k] as i64, 3 - k as i64))
                .unwrap();
            alloc[s][k] += 1;
            leftover[s] -= 1;
            assigned[k] += 1;
        }
    }
    // Repair: move records from over-target splits to under-target ones,
    // never emptying a stratum's share of a split.
    loop {
        let over = (0..3).find(|&k| assigned[k] > targets[k]);
        let under = (0..3).find(|&k| assigned[k] < targets[k]);
        let (Some(from), Some(to)) = (over, under) else { break };
        let donor = (0..alloc.len())
            .filter(|&s| alloc[s][from] > 1)
            .max_by_key(|&s| (alloc[s][from], usize::MAX - s));
        let Some(s) = donor else { break };
        alloc[s][from] -= 1;
        alloc[s][to] += 1;
        assigned[from] -= 1;
        assigned[to] += 1;
    }
    alloc
}

/// Assigns `split` on every record. Deterministic for a given seed.
pub fn stratified_split(
    records: &mut [LabeledRecord],
    ratios: SplitRatios,
    seed: u64,
) -> Result<()> {
    ratios.validate()?;
    let r = ratios.as_array();
    let needed = r.iter().filter(|&&v| v > 0.0).count();

    let mut by_class: BTreeMap<EmotionClass, BTreeMap<SourceDataset, Vec<usize>>> = BTreeMap::new();
    for (i, rec) in records.iter().enumerate() {
        by_class
            .entry(rec.emotion)
            .or_default()
            .entry(rec.record.source)
            .or_default()
            .push(i);
    }

    let mut rng = RngStream::new(seed);
    for (class, strata) in &by_class {
        for (source, idx) in strata {
            if idx.len() < needed {
                return Err(Error::Stratification(format!(
                    "stratum ({class}, {source}) has {} record(s), fewer than the {needed} splits it must appear in",
                    idx.len()
                )));
            }
        }
        let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
        let alloc = allocate_class(&sizes, &r);
        for (idx, a) in strata.values().zip(alloc) {
            // Sort by id so the outcome does not depend on manifest row order.
            let mut members = idx.clone();
            members.sort_by(|&x, &y| records[x].record.id.cmp(&records[y].record.id).then(x.cmp(&y)));
            rng.shuffle(&mut members);
            let mut it = members.into_iter();
            for (k, split) in Split::ASSIGNED.into_iter().enumerate() {
                for i in it.by_ref().take(a[k]) {
                    records[i].record.split = split;
                }
            }
        }
    }
    Ok(())
}
