//! Fluency statistics over walk traces: IRTs, cluster switches, switch
//! profiles, patch-leaving (MVT) statistics and deviation points.
//!
//! Positions in the unique sequence are stored 0-based; `irt(p)` is the
//! number of raw steps between the first occurrences of unique items `p − 1`
//! and `p`, so it is defined for `p ≥ 1`.

use std::collections::BTreeMap;
use std::fs::File;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocabulary::{CategoryScheme, ItemId};

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FluencyTrace {
    raw: Vec<ItemId>,
    unique: Vec<ItemId>,
    /// 1-based raw index of each unique item's first occurrence.
    tau: Vec<usize>,
}

impl FluencyTrace {
    pub fn new(raw: &[ItemId]) -> Self {
        let mut seen = std::collections::HashSet::new();
        let mut unique = Vec::new();
        let mut tau = Vec::new();
        for (k, &item) in raw.iter().enumerate() {
            if seen.insert(item) {
                unique.push(item);
                tau.push(k + 1);
            }
        }
        FluencyTrace {
            raw: raw.to_vec(),
            unique,
            tau,
        }
    }

    pub fn raw(&self) -> &[ItemId] {
        &self.raw
    }

    pub fn unique(&self) -> &[ItemId] {
        &self.unique
    }

    pub fn tau(&self) -> &[usize] {
        &self.tau
    }

    pub fn len(&self) -> usize {
        self.unique.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unique.is_empty()
    }

    /// IRT entering unique position `p` (0-based, `p ≥ 1`).
    pub fn irt(&self, p: usize) -> usize {
        self.tau[p] - self.tau[p - 1]
    }

    /// `IRT(k) = τ(k) − τ(k−1)` for `k = 2..K`.
    pub fn irts(&self) -> Vec<usize> {
        self.tau.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_irt(&self) -> Option<f64> {
        if self.unique.len() < 2 {
            return None;
        }
        let span = self.tau[self.tau.len() - 1] - self.tau[0];
        Some(span as f64 / (self.unique.len() - 1) as f64)
    }
}

pub fn fluency_trace(steps: &[ItemId]) -> FluencyTrace {
    FluencyTrace::new(steps)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchAnnotation {
    /// `switches[p]` is true when unique items `p − 1` and `p` share no category.
    switches: Vec<bool>,
    /// Maximal switch-free runs of unique positions.
    patches: Vec<Range<usize>>,
}

impl SwitchAnnotation {
    pub fn switches(&self) -> &[bool] {
        &self.switches
    }

    pub fn patches(&self) -> &[Range<usize>] {
        &self.patches
    }

    pub fn switch_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.switches
            .iter()
            .enumerate()
            .filter_map(|(p, &s)| s.then_some(p))
    }

    /// Final unique positions of patches that have an entering IRT.
    fn qualifying_patch_ends(&self) -> impl Iterator<Item = usize> + '_ {
        self.patches.iter().map(|r| r.end - 1).filter(|&e| e >= 1)
    }
}

/// Switch wherever consecutive unique items share no category; uncategorized
/// items therefore switch on both sides.
pub fn detect_switches(ft: &FluencyTrace, scheme: &CategoryScheme) -> SwitchAnnotation {
    let k = ft.unique.len();
    let mut switches = vec![false; k];
    let mut patches = Vec::new();
    let mut start = 0;
    for (p, pair) in ft.unique.windows(2).enumerate().map(|(i, w)| (i + 1, w)) {
        if !scheme.shares_category(pair[0], pair[1]) {
            switches[p] = true;
            patches.push(start..p);
            start = p;
        }
    }
    if k > 0 {
        patches.push(start..k);
    }
    SwitchAnnotation { switches, patches }
}

/// A walk ready for corpus-level statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedTrace {
    pub walk: usize,
    pub fluency: FluencyTrace,
    pub switches: SwitchAnnotation,
}

impl AnnotatedTrace {
    pub fn new(walk: usize, steps: &[ItemId], scheme: &CategoryScheme) -> Self {
        let fluency = FluencyTrace::new(steps);
        let switches = detect_switches(&fluency, scheme);
        AnnotatedTrace {
            walk,
            fluency,
            switches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub relative_position: i64,
    pub mean_irt_ratio: Option<f64>,
    pub n: usize,
}

/// IRT-to-walk-mean ratio by position relative to the nearest switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchProfile {
    pub radius: usize,
    pub rows: Vec<ProfileRow>,
}

impl SwitchProfile {
    pub fn ratio_at(&self, r: i64) -> Option<f64> {
        self.rows
            .iter()
            .find(|row| row.relative_position == r)
            .and_then(|row| row.mean_irt_ratio)
    }

    pub fn count_at(&self, r: i64) -> usize {
        self.rows
            .iter()
            .find(|row| row.relative_position == r)
            .map_or(0, |row| row.n)
    }

    /// Relative position with the largest populated ratio (earliest on ties).
    pub fn argmax(&self) -> Option<i64> {
        self.rows
            .iter()
            .filter_map(|row| row.mean_irt_ratio.map(|v| (row.relative_position, v)))
            .fold(None, |best: Option<(i64, f64)>, (r, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((r, v)),
            })
            .map(|(r, _)| r)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(["relative_position", "mean_irt_ratio", "n"]).map_err(io)?;
        for row in &self.rows {
            w.write_record([
                row.relative_position.to_string(),
                row.mean_irt_ratio.map(|v| format!("{v:?}")).unwrap_or_default(),
                row.n.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Relative position of the IRT entering `p` with respect to a switch at `s`:
/// `+1` for the switch IRT itself, `+2` the next, `−1` the one before.
fn relative_position(p: usize, s: usize) -> i64 {
    if p >= s {
        (p - s + 1) as i64
    } else {
        -((s - p) as i64)
    }
}

/// Per-walk assignment of IRTs to their nearest switch within `radius`.
/// Returns `(relative position, IRT)` pairs. Ties go to the earlier switch,
/// so the IRT entering a switch is always its `+1`.
fn assign_to_switches(t: &AnnotatedTrace, radius: usize) -> Vec<(i64, usize)> {
    let switches: Vec<usize> = t.switches.switch_positions().collect();
    let mut out = Vec::new();
    for p in 1..t.fluency.len() {
        let mut best: Option<i64> = None;
        for &s in &switches {
            let r = relative_position(p, s);
            if r.unsigned_abs() as usize > radius {
                continue;
            }
            // switches ascend, so strict `<` keeps the earlier one on ties
            if best.is_none_or(|b| r.abs() < b.abs()) {
                best = Some(r);
            }
        }
        if let Some(r) = best {
            out.push((r, t.fluency.irt(p)));
        }
    }
    out
}

/// Pools `IRT / walk mean IRT` over every walk at each relative position.
pub fn switch_profile(traces: &[AnnotatedTrace], radius: usize) -> Result<SwitchProfile> {
    if radius == 0 {
        return Err(Error::validation("window radius must be at least 1"));
    }
    if !traces.iter().any(|t| t.switches.switch_positions().next().is_some()) {
        return Err(Error::EmptyProfile);
    }
    let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    // sort keys so the floating-point sum order is independent of walk order
    let mut ordered: Vec<&AnnotatedTrace> = traces.iter().collect();
    ordered.sort_by(|a, b| (a.walk, &a.fluency.raw).cmp(&(b.walk, &b.fluency.raw)));
    for t in ordered {
        let Some(mean) = t.fluency.mean_irt() else { continue };
        for (r, irt) in assign_to_switches(t, radius) {
            let e = acc.entry(r).or_insert((0.0, 0));
            e.0 += irt as f64 / mean;
            e.1 += 1;
        }
    }
    let r = radius as i64;
    let rows = (-r..=r)
        .filter(|&k| k != 0)
        .map(|k| {
            let (sum, n) = acc.get(&k).copied().unwrap_or((0.0, 0));
            ProfileRow {
                relative_position: k,
                mean_irt_ratio: (n > 0).then(|| sum / n as f64),
                n,
            }
        })
        .collect();
    Ok(SwitchProfile { radius, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchLeaving {
    pub mean_last_irt: f64,
    pub mean_global_irt: f64,
    pub ratio: f64,
    /// Mean over patches of (last IRT − that walk's mean IRT).
    pub paired_mean_difference: f64,
}

/// Compares the IRT entering each patch's final item to the mean IRT.
pub fn patch_leaving_stat(traces: &[AnnotatedTrace]) -> Result<PatchLeaving> {
    let mut ordered: Vec<&AnnotatedTrace> = traces.iter().collect();
    ordered.sort_by(|a, b| (a.walk, &a.fluency.raw).cmp(&(b.walk, &b.fluency.raw)));
    let (mut last_sum, mut last_n) = (0.0, 0usize);
    let (mut all_sum, mut all_n) = (0.0, 0usize);
    let mut diff_sum = 0.0;
    for t in ordered {
        let Some(mean) = t.fluency.mean_irt() else { continue };
        let irts = t.fluency.irts();
        all_sum += irts.iter().sum::<usize>() as f64;
        all_n += irts.len();
        for e in t.switches.qualifying_patch_ends() {
            let last = t.fluency.irt(e) as f64;
            last_sum += last;
            diff_sum += last - mean;
            last_n += 1;
        }
    }
    if last_n == 0 {
        return Err(Error::NoQualifyingPatches);
    }
    let mean_last_irt = last_sum / last_n as f64;
    let mean_global_irt = all_sum / all_n as f64;
    Ok(PatchLeaving {
        mean_last_irt,
        mean_global_irt,
        ratio: mean_last_irt / mean_global_irt,
        paired_mean_difference: diff_sum / last_n as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub walk: usize,
    /// Unique items produced.
    pub x: usize,
    /// Mean over patches of |last IRT in patch − walk mean IRT|.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSet {
    pub points: Vec<DeviationPoint>,
    /// Walks without a qualifying patch.
    pub skipped: usize,
}

impl DeviationSet {
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x as f64, p.y)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        w.write_record(["walk", "x_unique", "y_abs_dev"]).map_err(io)?;
        for p in &self.points {
            w.write_record([p.walk.to_string(), p.x.to_string(), format!("{:?}", p.y)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn deviation_points(traces: &[AnnotatedTrace]) -> DeviationSet {
    let mut points = Vec::new();
    let mut skipped = 0;
    for t in traces {
        let Some(mean) = t.fluency.mean_irt() else {
            skipped += 1;
            continue;
        };
        let devs: Vec<f64> = t
            .switches
            .qualifying_patch_ends()
            .map(|e| (t.fluency.irt(e) as f64 - mean).abs())
            .collect();
        if devs.is_empty() {
            skipped += 1;
            continue;
        }
        points.push(DeviationPoint {
            walk: t.walk,
            x: t.fluency.len(),
            y: devs.iter().sum::<f64>() / devs.len() as f64,
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} walk(s) had no qualifying patch and were left out of the deviation set");
    }
    points.sort_by_key(|p| p.walk);
    DeviationSet { points, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(membership: Vec<Vec<usize>>) -> CategoryScheme {
        let max = membership.iter().flatten().max().map_or(0, |m| m + 1);
        CategoryScheme::new((0..max).map(|c| format!("c{c}")).collect(), membership).unwrap()
    }

    #[test]
    fn worked_example_from_response_list() {
        // caterpillar=0, salamander=1, mammoth=2, rhino=3
        let ft = fluency_trace(&[0, 1, 1, 2, 2, 3, 2]);
        assert_eq!(ft.unique(), &[0, 1, 2, 3]);
        assert_eq!(ft.tau(), &[1, 2, 4, 6]);
        assert_eq!(ft.irts(), vec![1, 2, 2]);
        assert_eq!(ft.irt(2), 2); // IRT(3) in 1-based terms
    }

    #[test]
    fn distinct_and_degenerate_traces() {
        let ft = fluency_trace(&[4, 3, 2, 1, 0]);
        assert_eq!(ft.irts(), vec![1; 4]);
        let single = fluency_trace(&[7]);
        assert_eq!(single.len(), 1);
        assert!(single.irts().is_empty());
        assert_eq!(single.mean_irt(), None);
    }

    #[test]
    fn switch_definition() {
        let sc = scheme(vec![vec![0], vec![0], vec![1]]);
        let a = detect_switches(&fluency_trace(&[0, 1, 2]), &sc);
        assert_eq!(a.switches(), &[false, false, true]);
        assert_eq!(a.patches(), &[0..2, 2..3]);
    }

    #[test]
    fn overlapping_categories_chain_without_switch() {
        let sc = scheme(vec![vec![0], vec![0, 1], vec![1]]);
        let a = detect_switches(&fluency_trace(&[0, 1, 2]), &sc);
        assert_eq!(a.switches(), &[false, false, false]);
        assert_eq!(a.patches().to_vec(), vec![0..3]);
    }

    #[test]
    fn uncategorized_switches_on_both_sides() {
        let sc = scheme(vec![vec![0], vec![], vec![0]]);
        let a = detect_switches(&fluency_trace(&[0, 1, 2]), &sc);
        assert_eq!(a.switches(), &[false, true, true]);
        assert_eq!(a.patches().len(), 3);
    }

    /// Builds an annotated trace with the given IRTs and switch positions
    /// (0-based unique positions) without going through a vocabulary.
    fn synthetic(walk: usize, irts: &[usize], switch_at: &[usize]) -> AnnotatedTrace {
        let mut raw = vec![0usize];
        for (next, &gap) in (1..).zip(irts) {
            for _ in 1..gap {
                let last = *raw.last().unwrap();
                raw.push(last);
            }
            raw.push(next);
        }
        let fluency = FluencyTrace::new(&raw);
        assert_eq!(fluency.irts(), irts);
        let k = fluency.len();
        let mut switches = vec![false; k];
        let mut patches = Vec::new();
        let mut start = 0;
        for &s in switch_at {
            switches[s] = true;
            patches.push(start..s);
            start = s;
        }
        patches.push(start..k);
        AnnotatedTrace {
            walk,
            fluency,
            switches: SwitchAnnotation { switches, patches },
        }
    }

    #[test]
    fn profile_single_walk() {
        // IRTs [1,1,5,1,1] enter positions 1..=5; the 5 enters position 3
        let t = synthetic(0, &[1, 1, 5, 1, 1], &[3]);
        let p = switch_profile(&[t], 5).unwrap();
        let mean = 9.0 / 5.0;
        assert!((p.ratio_at(1).unwrap() - 5.0 / mean).abs() < 1e-12);
        assert!((p.ratio_at(1).unwrap() - 2.778).abs() < 1e-3);
        assert!((p.ratio_at(-1).unwrap() - 1.0 / mean).abs() < 1e-12);
        assert!((p.ratio_at(2).unwrap() - 0.556).abs() < 1e-3);
        assert_eq!(p.count_at(-2), 1);
        assert_eq!(p.count_at(3), 1);
        assert_eq!(p.count_at(4), 0);
        assert_eq!(p.ratio_at(4), None);
        assert_eq!(p.argmax(), Some(1));
    }

    #[test]
    fn constant_irts_give_unit_ratios() {
        let t = synthetic(0, &[2; 12], &[4, 9]);
        let p = switch_profile(&[t], 3).unwrap();
        for row in &p.rows {
            if let Some(v) = row.mean_irt_ratio {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    /// Literal enumeration of every (switch, IRT) pair for the aggregation oracle.
    fn brute_force_profile(traces: &[AnnotatedTrace], radius: i64) -> BTreeMap<i64, (f64, usize)> {
        let mut out = BTreeMap::new();
        for t in traces {
            let irts = t.fluency.irts();
            let mean = irts.iter().sum::<usize>() as f64 / irts.len() as f64;
            let sw: Vec<i64> = t.switches.switch_positions().map(|s| s as i64).collect();
            for p in 1..=irts.len() as i64 {
                let mut cands: Vec<(i64, i64, i64)> = sw
                    .iter()
                    .map(|&s| {
                        let r = if p >= s { p - s + 1 } else { p - s };
                        (r.abs(), s, r)
                    })
                    .filter(|c| c.0 <= radius)
                    .collect();
                cands.sort();
                if let Some(&(_, _, r)) = cands.first() {
                    let e = out.entry(r).or_insert((0.0, 0));
                    e.0 += irts[p as usize - 1] as f64 / mean;
                    e.1 += 1;
                }
            }
        }
        out
    }

    #[test]
    fn two_walks_with_disjoint_coverage() {
        // walk a: switch early, coverage only on the + side
        let a = synthetic(0, &[3, 1, 1, 1], &[1]);
        // walk b: switch at the end, coverage only on the - side of r ≤ -2
        let b = synthetic(1, &[1, 1, 1, 6], &[4]);
        let p = switch_profile(&[a.clone(), b.clone()], 3).unwrap();
        let oracle = brute_force_profile(&[a, b], 3);
        for row in &p.rows {
            match oracle.get(&row.relative_position) {
                Some(&(sum, n)) => {
                    assert_eq!(row.n, n);
                    assert!((row.mean_irt_ratio.unwrap() - sum / n as f64).abs() < 1e-12);
                }
                None => assert_eq!((row.n, row.mean_irt_ratio), (0, None)),
            }
        }
        assert_eq!(p.count_at(1), 2);
        assert_eq!(p.count_at(-3), 1);
        assert_eq!(p.count_at(3), 1);
    }

    #[test]
    fn ties_go_to_the_earlier_switch() {
        // switches at 2 and 5; IRT entering 3 is r=+2 (from 2) or r=-2 (from 5)
        let t = synthetic(0, &[1, 1, 1, 1, 1, 1], &[2, 5]);
        let pairs = assign_to_switches(&t, 5);
        assert_eq!(pairs.len(), 6);
        assert_eq!(pairs.iter().map(|&(r, _)| r).collect::<Vec<_>>(), vec![-1, 1, 2, -1, 1, 2]);
    }

    #[test]
    fn profile_without_switches_is_an_error() {
        let t = synthetic(0, &[1, 2, 3], &[]);
        assert!(matches!(switch_profile(&[t], 5), Err(Error::EmptyProfile)));
    }

    #[test]
    fn patch_leaving_cases() {
        let flat = synthetic(0, &[2, 2, 2, 2], &[2]);
        assert!((patch_leaving_stat(&[flat]).unwrap().ratio - 1.0).abs() < 1e-12);

        let t = synthetic(0, &[1, 1, 4], &[]);
        let s = patch_leaving_stat(&[t]).unwrap();
        assert_eq!(s.mean_last_irt, 4.0);
        assert_eq!(s.mean_global_irt, 2.0);
        assert_eq!(s.ratio, 2.0);
        assert_eq!(s.paired_mean_difference, 2.0);

        let lonely = synthetic(0, &[], &[]);
        assert!(matches!(patch_leaving_stat(&[lonely]), Err(Error::NoQualifyingPatches)));
        assert!(patch_leaving_stat(&[]).is_err());
    }

    #[test]
    fn deviation_cases() {
        let flat = synthetic(0, &[3, 3, 3], &[2]);
        let d = deviation_points(&[flat]);
        assert_eq!(d.points[0].y, 0.0);

        let t = synthetic(4, &[1, 1, 4], &[]);
        let d = deviation_points(&[t.clone(), AnnotatedTrace { walk: 5, ..t }]);
        assert_eq!(d.points[0], DeviationPoint { walk: 4, x: 4, y: 2.0 });
        assert_eq!(d.points[0].x, d.points[1].x);
        assert_eq!(d.points[0].y, d.points[1].y);

        let lonely = synthetic(0, &[], &[]);
        let d = deviation_points(&[lonely]);
        assert!(d.points.is_empty());
        assert_eq!(d.skipped, 1);
    }

    #[test]
    fn csv_formats() {
        let t = synthetic(3, &[1, 1, 5, 1, 1], &[3]);
        let dir = tempfile::tempdir().unwrap();
        let p = switch_profile(std::slice::from_ref(&t), 2).unwrap();
        let path = dir.path().join("profile.csv");
        p.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("relative_position,mean_irt_ratio,n\n-2,"));
        assert_eq!(text.lines().count(), 5);
        let d = deviation_points(&[t]);
        let path = dir.path().join("deviation.csv");
        d.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("walk,x_unique,y_abs_dev\n3,6,"));
    }

    fn trace_strategy() -> impl Strategy<Value = (Vec<usize>, Vec<Vec<usize>>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0..n, 1..60),
                prop::collection::vec(prop::collection::vec(0usize..3, 0..3), n),
            )
        })
    }

    proptest! {
        #[test]
        fn structural_invariants((raw, membership) in trace_strategy()) {
            let sc = CategoryScheme::new(vec!["a".into(), "b".into(), "c".into()], membership).unwrap();
            let t = AnnotatedTrace::new(0, &raw, &sc);
            let ft = &t.fluency;
            prop_assert!(ft.len() <= raw.len());
            prop_assert_eq!(ft.tau()[0], 1);
            prop_assert!(ft.tau().windows(2).all(|w| w[0] < w[1]));
            let irts = ft.irts();
            prop_assert!(irts.iter().all(|&i| i >= 1));
            prop_assert_eq!(irts.iter().sum::<usize>(), ft.tau()[ft.len() - 1] - ft.tau()[0]);
            let lens: usize = t.switches.patches().iter().map(|r| r.len()).sum();
            prop_assert_eq!(lens, ft.len());
            for r in t.switches.patches() {
                prop_assert!(r.start == 0 || t.switches.switches()[r.start]);
                for p in r.start + 1..r.end {
                    prop_assert!(!t.switches.switches()[p]);
                }
            }
        }

        #[test]
        fn walk_order_does_not_matter(
            walks in prop::collection::vec(prop::collection::vec(0usize..8, 2..40), 1..6),
            rotate in 0usize..6,
        ) {
            let sc = CategoryScheme::new(
                vec!["a".into(), "b".into()],
                (0..8).map(|i| vec![i % 2]).collect(),
            ).unwrap();
            let traces: Vec<AnnotatedTrace> = walks
                .iter()
                .enumerate()
                .map(|(w, raw)| AnnotatedTrace::new(w, raw, &sc))
                .collect();
            let mut permuted = traces.clone();
            permuted.rotate_left(rotate % traces.len());
            permuted.reverse();
            match (switch_profile(&traces, 3), switch_profile(&permuted, 3)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "profile disagreed"),
            }
            match (patch_leaving_stat(&traces), patch_leaving_stat(&permuted)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "patch stat disagreed"),
            }
            prop_assert_eq!(deviation_points(&traces), deviation_points(&permuted));
        }

        #[test]
        fn profile_matches_enumeration(
            walks in prop::collection::vec(prop::collection::vec(0usize..10, 2..50), 1..5),
            radius in 1usize..6,
        ) {
            let sc = CategoryScheme::new(
                vec!["a".into(), "b".into(), "c".into()],
                (0..10).map(|i| vec![i % 3]).collect(),
            ).unwrap();
            let traces: Vec<AnnotatedTrace> = walks
                .iter()
                .enumerate()
                .map(|(w, raw)| AnnotatedTrace::new(w, raw, &sc))
                .collect();
            if let Ok(p) = switch_profile(&traces, radius) {
                let oracle = brute_force_profile(&traces, radius as i64);
                for row in &p.rows {
                    let (sum, n) = oracle.get(&row.relative_position).copied().unwrap_or((0.0, 0));
                    prop_assert_eq!(row.n, n);
                    if n > 0 {
                        prop_assert!((row.mean_irt_ratio.unwrap() - sum / n as f64).abs() < 1e-9);
                    }
                }
            }
        }
    }
}
