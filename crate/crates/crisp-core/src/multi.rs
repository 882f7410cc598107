//! Multiple change-region estimation: random outer scan discs, constrained
//! local scans, dual CUSUM/RSS thresholding, and greedy disjoint selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{CrispError, Result};
use crate::rng::{mix_seed, stream_rng};
use crate::scalar::Scalar;
use crate::single::{prefix_scan, refine_perturb, InnerConstraints, RegionEstimate, SearchBudget};
use crate::sphere::{discs_intersect, empirical_loss, sample_outer_discs, Disc, LabeledDataset};
use crate::stats::{local_cusum, num_outer_discs, rss, Sided, ThresholdConfig};

const SALT_OUTER: u64 = 0x77;
const SALT_PER_DISC: u64 = 0x78;

/// How many outer scan discs to draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OuterCount {
    Explicit(usize),
    /// Resolve from the coverage rule so that a drawn center lands within
    /// angle `alpha` of any fixed direction with constant probability.
    Auto,
}

/// How candidate regions are tested for overlap during deduplication.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DedupMode {
    /// Geometric disc intersection (center distance vs radius sum).
    Geometric,
    /// Shared sample points.
    EmpiricalOverlap,
}

/// Full configuration of the multi-region detector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectorConfig<T> {
    pub num_outer: OuterCount,
    /// Minimal geodesic separation enforced between an inner candidate and
    /// the outer-disc boundary (half of it) during scans.
    pub omega: T,
    /// Coverage level for the auto outer-disc count.
    pub alpha: f64,
    pub thresholds: ThresholdConfig<T>,
    /// Inner discs are capped at this fraction of the outer radius.
    pub inner_radius_frac_cap: T,
    /// Outer discs holding fewer sample points are skipped.
    pub min_outer_points: usize,
    pub budget: SearchBudget,
    pub sided: Sided,
    pub dedup: DedupMode,
}

impl<T: Scalar> DetectorConfig<T> {
    /// Practical defaults; the contrast is one-sided on the circle where a
    /// region and its complement are both arcs. The refinement budget is
    /// larger than the single-region default because outer discs land
    /// off-center and the inner scan must walk onto the region.
    pub fn for_dim(d: usize) -> Self {
        Self {
            num_outer: OuterCount::Auto,
            omega: T::from_f64_lossy(0.1),
            alpha: 0.05,
            thresholds: ThresholdConfig::practical(),
            inner_radius_frac_cap: T::from_f64_lossy(2.0 / 3.0),
            min_outer_points: 10,
            budget: SearchBudget {
                n_perturb: 400,
                ..SearchBudget::default()
            },
            sided: if d == 2 { Sided::Positive } else { Sided::TwoSided },
            dedup: DedupMode::Geometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let two_pi = T::pi() * T::two();
        if !(self.omega > T::zero() && self.omega < two_pi) {
            return Err(CrispError::invalid("omega must lie in (0, 2*pi)"));
        }
        if !(self.inner_radius_frac_cap > T::zero() && self.inner_radius_frac_cap <= T::one()) {
            return Err(CrispError::invalid(
                "inner radius fraction must lie in (0, 1]",
            ));
        }
        if !(0.0 < self.alpha && self.alpha < std::f64::consts::FRAC_PI_2) {
            return Err(CrispError::invalid("alpha must lie in (0, pi/2)"));
        }
        Ok(())
    }

    pub fn resolve_num_outer(&self, d: usize) -> Result<usize> {
        match self.num_outer {
            OuterCount::Explicit(j) => {
                if j == 0 {
                    Err(CrispError::invalid("need at least one outer disc"))
                } else {
                    Ok(j)
                }
            }
            OuterCount::Auto => num_outer_discs(d, self.alpha),
        }
    }
}

/// Why an outer disc produced no accepted candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RejectReason<T> {
    TooFewPoints { count: usize },
    NoFeasibleRadius,
    BelowLambdaT { statistic: T, lambda_t: T },
    AboveGamma { rss: T, gamma: T },
}

/// Result of scanning one outer disc.
#[derive(Clone, Debug)]
pub enum ScanResult<T> {
    Accepted {
        estimate: RegionEstimate<T>,
        /// Residual bound the candidate stayed below.
        gamma: T,
    },
    Rejected(RejectReason<T>),
}

/// Per-outer-disc diagnostic record.
#[derive(Clone, Debug)]
pub struct OuterScanLog<T> {
    pub outer: Disc<T>,
    pub outcome: ScanOutcome<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScanOutcome<T> {
    Accepted { statistic: T, rss: T, gamma: T },
    Rejected(RejectReason<T>),
}

/// Output of the multi-region detector.
#[derive(Clone, Debug)]
pub struct MultiRegionResult<T> {
    /// Final pairwise-disjoint regions, each past both thresholds, ordered
    /// by decreasing statistic.
    pub regions: Vec<RegionEstimate<T>>,
    /// All accepted candidates before deduplication.
    pub initial_candidates: Vec<RegionEstimate<T>>,
    pub outer_log: Vec<OuterScanLog<T>>,
    pub lambda_t: T,
    pub num_outer: usize,
}

/// Scans one outer disc: restricts to the points it contains, maximizes the
/// local CUSUM over concentric inner discs within the radius constraints,
/// refines by constrained perturbation (centers may move off the common
/// center), then applies both acceptance thresholds.
pub fn scan_outer<T: Scalar>(
    outer: &Disc<T>,
    ds: &LabeledDataset<T>,
    cfg: &DetectorConfig<T>,
) -> Result<ScanResult<T>> {
    cfg.validate()?;
    let j = cfg.resolve_num_outer(ds.dim())?;
    let lambda_t = cfg.thresholds.resolve_lambda_t(ds.n(), j, ds.dim())?;
    scan_outer_with(outer, ds, cfg, lambda_t, &cfg.budget)
}

fn scan_outer_with<T: Scalar>(
    outer: &Disc<T>,
    ds: &LabeledDataset<T>,
    cfg: &DetectorConfig<T>,
    lambda_t: T,
    budget: &SearchBudget,
) -> Result<ScanResult<T>> {
    let outer_members = ds.membership(outer);
    let count = outer_members.count_ones();
    if count < cfg.min_outer_points.max(3) {
        return Ok(ScanResult::Rejected(RejectReason::TooFewPoints { count }));
    }

    let half_gap = cfg.omega * T::half();
    let max_radius = (cfg.inner_radius_frac_cap * outer.radius())
        .min(outer.radius() - half_gap)
        .min(T::pi() * T::half());
    if max_radius <= T::zero() {
        return Ok(ScanResult::Rejected(RejectReason::NoFeasibleRadius));
    }

    let scope: Vec<usize> = outer_members.ones().collect();
    let Some(best) = prefix_scan(
        outer.center(),
        &scope,
        ds,
        cfg.sided,
        T::zero(),
        max_radius,
    ) else {
        return Ok(ScanResult::Rejected(RejectReason::NoFeasibleRadius));
    };

    let inner_disc = Disc::new(outer.center().clone(), best.cos_threshold)?;
    let mut member_indices: Vec<usize> = best.order[..best.count].to_vec();
    member_indices.sort_unstable();
    let inner_bits = Bitset::from_indices(ds.n(), member_indices.iter().copied());
    let statistic = cfg
        .sided
        .score(crate::stats::local_cusum_signed(
            &inner_bits,
            &outer_members,
            ds,
        ))
        .max(T::zero());
    let seed_est = RegionEstimate {
        disc: inner_disc,
        statistic,
        rss: None,
        member_indices,
        outer_disc: Some(outer.clone()),
    };

    let constraints = InnerConstraints {
        outer: outer.clone(),
        outer_members: outer_members.clone(),
        min_gap: half_gap,
        max_radius,
    };
    let mut refined = refine_perturb(&seed_est, ds, budget, Some(&constraints), cfg.sided);
    refined.outer_disc = Some(outer.clone());

    let inner_bits = refined.members_bitset(ds.n());
    let residual = rss(&inner_bits, &outer_members, ds);
    refined.rss = Some(residual);
    // Thresholds compare the absolute local contrast, whatever the scan
    // direction convention was. Negated comparisons so that a NaN
    // statistic rejects.
    let contrast = local_cusum(&inner_bits, &outer_members, ds);
    let m = count - 2;
    let gamma = cfg.thresholds.resolve_gamma(m, ds.n(), ds.dim())?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(contrast > lambda_t) {
        return Ok(ScanResult::Rejected(RejectReason::BelowLambdaT {
            statistic: contrast,
            lambda_t,
        }));
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(residual < gamma) {
        return Ok(ScanResult::Rejected(RejectReason::AboveGamma {
            rss: residual,
            gamma,
        }));
    }
    refined.statistic = contrast;
    Ok(ScanResult::Accepted {
        estimate: refined,
        gamma,
    })
}

fn candidate_order<T: Scalar>(a: &RegionEstimate<T>, b: &RegionEstimate<T>) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    b.statistic
        .partial_cmp(&a.statistic)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            a.disc
                .radius()
                .partial_cmp(&b.disc.radius())
                .unwrap_or(Ordering::Equal)
        })
        .then_with(|| {
            a.disc
                .center()
                .coords()
                .partial_cmp(b.disc.center().coords())
                .unwrap_or(Ordering::Equal)
        })
}

fn overlaps<T: Scalar>(
    a: &RegionEstimate<T>,
    b: &RegionEstimate<T>,
    mode: DedupMode,
    n: usize,
) -> bool {
    match mode {
        DedupMode::Geometric => discs_intersect(&a.disc, &b.disc),
        DedupMode::EmpiricalOverlap => {
            a.members_bitset(n).intersect_count(&b.members_bitset(n)) > 0
        }
    }
}

/// Runs the full multi-region detection: draws the outer discs, scans each
/// (in parallel; all randomness is derived from the master seed by disc
/// index, so results do not depend on scheduling), then keeps candidates
/// greedily by decreasing local CUSUM, dropping any that overlap an already
/// kept region.
pub fn detect_multi<T: Scalar>(
    ds: &LabeledDataset<T>,
    cfg: &DetectorConfig<T>,
) -> Result<MultiRegionResult<T>> {
    cfg.validate()?;
    if ds.n() < 3 {
        return Err(CrispError::InvalidDataset(
            "multi-region detection needs n >= 3".into(),
        ));
    }
    let d = ds.dim();
    let num_outer = cfg.resolve_num_outer(d)?;
    let lambda_t = cfg
        .thresholds
        .resolve_lambda_t(ds.n(), num_outer, d)?;

    let mut rng = stream_rng(cfg.budget.seed, SALT_OUTER);
    let outers: Vec<Disc<T>> = sample_outer_discs(&mut rng, num_outer, d);

    let scans: Vec<(Disc<T>, ScanResult<T>)> = outers
        .into_par_iter()
        .enumerate()
        .map(|(j, outer)| {
            let budget = SearchBudget {
                seed: mix_seed(cfg.budget.seed, SALT_PER_DISC ^ (j as u64)),
                ..cfg.budget
            };
            let res = scan_outer_with(&outer, ds, cfg, lambda_t, &budget)
                .expect("validated configuration");
            (outer, res)
        })
        .collect();

    let mut initial: Vec<RegionEstimate<T>> = Vec::new();
    let mut outer_log = Vec::with_capacity(scans.len());
    for (outer, result) in scans {
        let outcome = match result {
            ScanResult::Accepted { estimate, gamma } => {
                let outcome = ScanOutcome::Accepted {
                    statistic: estimate.statistic,
                    rss: estimate.rss.unwrap_or(T::zero()),
                    gamma,
                };
                initial.push(estimate);
                outcome
            }
            ScanResult::Rejected(reason) => ScanOutcome::Rejected(reason),
        };
        outer_log.push(OuterScanLog { outer, outcome });
    }

    let regions = select_disjoint(&initial, cfg.dedup, ds.n());
    Ok(MultiRegionResult {
        regions,
        initial_candidates: initial,
        outer_log,
        lambda_t,
        num_outer,
    })
}

/// Greedy selection by decreasing statistic; depends only on the candidate
/// contents, not on their input order.
pub fn select_disjoint<T: Scalar>(
    candidates: &[RegionEstimate<T>],
    mode: DedupMode,
    n: usize,
) -> Vec<RegionEstimate<T>> {
    let mut sorted: Vec<&RegionEstimate<T>> = candidates.iter().collect();
    sorted.sort_by(|a, b| candidate_order(a, b));
    let mut kept: Vec<RegionEstimate<T>> = Vec::new();
    for cand in sorted {
        if kept.iter().all(|k| !overlaps(k, cand, mode, n)) {
            kept.push(cand.clone());
        }
    }
    kept
}

/// Permutation matching of estimated regions to true regions.
#[derive(Clone, Debug)]
pub struct MatchReport<T> {
    /// Minimal-over-permutations maximum loss; infinite when the counts
    /// differ (no permutation exists).
    pub permuted_max_loss: T,
    /// Loss of each true region under the optimal permutation, or under
    /// greedy matching when the counts differ.
    pub per_region_losses: Vec<T>,
}

fn loss_matrix<T: Scalar>(
    truth: &[Disc<T>],
    estimates: &[Disc<T>],
    ds: &LabeledDataset<T>,
) -> Vec<Vec<T>> {
    let truth_bits: Vec<Bitset> = truth.iter().map(|r| ds.membership(r)).collect();
    let est_bits: Vec<Bitset> = estimates.iter().map(|r| ds.membership(r)).collect();
    truth_bits
        .iter()
        .map(|t| est_bits.iter().map(|e| empirical_loss(t, e)).collect())
        .collect()
}

/// Exact min-over-assignments of the maximal row loss, by pruned recursion.
fn min_max_assignment<T: Scalar>(loss: &[Vec<T>]) -> (T, Vec<usize>) {
    let k = loss.len();
    let mut best_value = T::infinity();
    let mut best_assignment = vec![0usize; k];
    let mut current = vec![usize::MAX; k];
    let mut used = vec![false; k];

    fn recurse<T: Scalar>(
        loss: &[Vec<T>],
        row: usize,
        running_max: T,
        used: &mut [bool],
        current: &mut [usize],
        best_value: &mut T,
        best_assignment: &mut [usize],
    ) {
        let k = loss.len();
        if running_max >= *best_value {
            return;
        }
        if row == k {
            *best_value = running_max;
            best_assignment.copy_from_slice(current);
            return;
        }
        for col in 0..k {
            if used[col] {
                continue;
            }
            used[col] = true;
            current[row] = col;
            recurse(
                loss,
                row + 1,
                running_max.max(loss[row][col]),
                used,
                current,
                best_value,
                best_assignment,
            );
            used[col] = false;
        }
        current[row] = usize::MAX;
    }

    recurse(
        loss,
        0,
        T::zero(),
        &mut used,
        &mut current,
        &mut best_value,
        &mut best_assignment,
    );
    (best_value, best_assignment)
}

/// Matches estimated regions to true regions. With equal counts (at most 8)
/// the permutation minimizing the maximal per-region loss is found exactly;
/// otherwise the max loss is reported as infinite alongside greedy
/// per-region diagnostics.
pub fn match_regions<T: Scalar>(
    truth: &[Disc<T>],
    estimates: &[Disc<T>],
    ds: &LabeledDataset<T>,
) -> Result<MatchReport<T>> {
    if truth.is_empty() {
        return Err(CrispError::invalid("need at least one true region"));
    }
    if truth.len() > 8 {
        return Err(CrispError::Unsupported(
            "exact permutation matching is limited to 8 regions; use the greedy diagnostics"
                .into(),
        ));
    }
    if truth.len() == estimates.len() {
        let loss = loss_matrix(truth, estimates, ds);
        let (value, assignment) = min_max_assignment(&loss);
        let per_region = assignment
            .iter()
            .enumerate()
            .map(|(row, &col)| loss[row][col])
            .collect();
        return Ok(MatchReport {
            permuted_max_loss: value,
            per_region_losses: per_region,
        });
    }
    // Count mismatch: greedy diagnostics, unmatched regions scored against
    // the empty set.
    let loss = loss_matrix(truth, estimates, ds);
    let truth_bits: Vec<Bitset> = truth.iter().map(|r| ds.membership(r)).collect();
    let empty = Bitset::new(ds.n());
    let mut used = vec![false; estimates.len()];
    let mut per_region = Vec::with_capacity(truth.len());
    for (row, row_losses) in loss.iter().enumerate() {
        let chosen = (0..estimates.len())
            .filter(|&c| !used[c])
            .min_by(|&a, &b| {
                row_losses[a]
                    .partial_cmp(&row_losses[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        match chosen {
            Some(c) => {
                used[c] = true;
                per_region.push(row_losses[c]);
            }
            None => per_region.push(empirical_loss(&truth_bits[row], &empty)),
        }
    }
    Ok(MatchReport {
        permuted_max_loss: T::infinity(),
        per_region_losses: per_region,
    })
}

/// Matching metric tolerant to a count mismatch: the shorter side is padded
/// with empty regions, then the exact (or, past 8 regions, greedy)
/// assignment minimizing the maximal loss is computed over bitsets.
pub fn padded_matched_max_loss<T: Scalar>(
    truth_bits: &[Bitset],
    est_bits: &[Bitset],
    n: usize,
) -> T {
    let m = truth_bits.len().max(est_bits.len());
    if m == 0 {
        return T::zero();
    }
    let empty = Bitset::new(n);
    let row = |i: usize| -> &Bitset { truth_bits.get(i).unwrap_or(&empty) };
    let col = |j: usize| -> &Bitset { est_bits.get(j).unwrap_or(&empty) };
    let loss: Vec<Vec<T>> = (0..m)
        .map(|i| (0..m).map(|j| empirical_loss(row(i), col(j))).collect())
        .collect();
    if m <= 8 {
        min_max_assignment(&loss).0
    } else {
        let mut used = vec![false; m];
        let mut worst = T::zero();
        for row_losses in &loss {
            let c = (0..m)
                .filter(|&c| !used[c])
                .min_by(|&a, &b| {
                    row_losses[a]
                        .partial_cmp(&row_losses[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("columns remain");
            used[c] = true;
            worst = worst.max(row_losses[c]);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{draw_standard_normal, stream_rng};
    use crate::sphere::{sample_uniform_sphere, UnitVector};
    use approx::assert_relative_eq;

    fn planted_multi_d3(
        n: usize,
        theta: f64,
        sigma: f64,
        seed: u64,
    ) -> (LabeledDataset<f64>, Vec<Disc<f64>>) {
        let centers = [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ];
        let regions: Vec<Disc<f64>> = centers
            .iter()
            .map(|c| {
                Disc::from_center_radius(UnitVector::new_normalized(c.to_vec()).unwrap(), 0.5)
                    .unwrap()
            })
            .collect();
        let mut rng = stream_rng(seed, 700);
        let points: Vec<UnitVector<f64>> =
            (0..n).map(|_| sample_uniform_sphere(&mut rng, 3)).collect();
        let values: Vec<f64> = points
            .iter()
            .map(|p| {
                let inside = regions.iter().any(|r| r.contains(p).unwrap());
                let signal = if inside { theta } else { 0.0 };
                signal + sigma * draw_standard_normal::<f64, _>(&mut rng)
            })
            .collect();
        (LabeledDataset::new(points, values).unwrap(), regions)
    }

    #[test]
    fn scan_outer_accepts_isolated_region() {
        let mut reject = 0;
        for seed in 0..10u64 {
            let (ds, regions) = planted_multi_d3(1000, 3.0, 1.0, seed);
            let outer =
                Disc::from_center_radius(regions[0].center().clone(), 1.0).unwrap();
            let cfg = DetectorConfig::<f64>::for_dim(3);
            match scan_outer(&outer, &ds, &cfg).unwrap() {
                ScanResult::Accepted { estimate: est, .. } => {
                    let est_bits = est.members_bitset(ds.n());
                    // Compare against the part of the region visible in the
                    // outer disc.
                    let truth = ds.membership(&regions[0]);
                    let loss: f64 = empirical_loss(&est_bits, &truth);
                    assert!(loss < 0.05, "seed {seed}: loss {loss}");
                }
                ScanResult::Rejected(r) => {
                    reject += 1;
                    eprintln!("seed {seed}: rejected {r:?}");
                }
            }
        }
        assert!(reject <= 1, "isolated planted region rejected {reject}/10 times");
    }

    #[test]
    fn scan_outer_rarely_accepts_pure_noise() {
        let mut rng = stream_rng(88, 0);
        let points: Vec<UnitVector<f64>> =
            (0..1000).map(|_| sample_uniform_sphere(&mut rng, 3)).collect();
        let values: Vec<f64> = (0..1000).map(|_| draw_standard_normal(&mut rng)).collect();
        let ds = LabeledDataset::new(points, values).unwrap();
        let cfg = DetectorConfig::<f64>::for_dim(3);
        let mut accepted = 0usize;
        let mut outer_rng = stream_rng(88, 1);
        let outers = sample_outer_discs::<f64, _>(&mut outer_rng, 200, 3);
        for (j, outer) in outers.iter().enumerate() {
            let cfg_j = DetectorConfig {
                budget: SearchBudget {
                    seed: j as u64,
                    ..cfg.budget
                },
                ..cfg.clone()
            };
            if let ScanResult::Accepted { .. } = scan_outer(outer, &ds, &cfg_j).unwrap() {
                accepted += 1;
            }
        }
        assert!(accepted <= 20, "null acceptance rate too high: {accepted}/200");
    }

    #[test]
    fn scan_outer_rejects_sparse_outer_discs() {
        let (ds, _) = planted_multi_d3(200, 3.0, 1.0, 3);
        let outer = Disc::from_center_radius(ds.point(0).clone(), 0.05).unwrap();
        let cfg = DetectorConfig::<f64>::for_dim(3);
        match scan_outer(&outer, &ds, &cfg).unwrap() {
            ScanResult::Rejected(RejectReason::TooFewPoints { .. }) => {}
            other => panic!("expected sparse rejection, got {other:?}"),
        }
    }

    #[test]
    fn detect_multi_recovers_four_regions_with_valid_output() {
        let (ds, regions) = planted_multi_d3(1000, 3.0, 1.0, 42);
        let mut cfg = DetectorConfig::<f64>::for_dim(3);
        cfg.budget.seed = 42;
        let out = detect_multi(&ds, &cfg).unwrap();
        assert!(
            (3..=5).contains(&out.regions.len()),
            "found {} regions",
            out.regions.len()
        );
        // Final regions pairwise disjoint and above threshold.
        for (i, a) in out.regions.iter().enumerate() {
            assert!(a.statistic > out.lambda_t);
            for b in out.regions.iter().skip(i + 1) {
                assert!(!discs_intersect(&a.disc, &b.disc));
            }
        }
        // Every accepted scan cleared both thresholds per its own log entry.
        let mut accepted_logs = 0;
        for log in &out.outer_log {
            if let ScanOutcome::Accepted { statistic, rss, gamma } = &log.outcome {
                assert!(*statistic > out.lambda_t);
                assert!(rss < gamma);
                accepted_logs += 1;
            }
        }
        assert_eq!(accepted_logs, out.initial_candidates.len());
        // Matching to the planted truth is tight for the recovered count.
        if out.regions.len() == regions.len() {
            let est_discs: Vec<Disc<f64>> =
                out.regions.iter().map(|r| r.disc.clone()).collect();
            let report = match_regions(&regions, &est_discs, &ds).unwrap();
            assert!(report.permuted_max_loss < 0.05);
        }
    }

    #[test]
    fn detect_multi_is_deterministic_across_thread_counts() {
        let (ds, _) = planted_multi_d3(400, 3.0, 1.0, 9);
        let mut cfg = DetectorConfig::<f64>::for_dim(3);
        cfg.num_outer = OuterCount::Explicit(200);
        cfg.budget.seed = 17;
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| detect_multi(&ds, &cfg).unwrap());
        let several = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| detect_multi(&ds, &cfg).unwrap());
        assert_eq!(single.regions.len(), several.regions.len());
        for (a, b) in single.regions.iter().zip(&several.regions) {
            assert_eq!(a.disc, b.disc);
            assert_eq!(a.statistic, b.statistic);
            assert_eq!(a.member_indices, b.member_indices);
        }
    }

    #[test]
    fn greedy_selection_ignores_candidate_order() {
        let mut rng = stream_rng(55, 0);
        let mut candidates: Vec<RegionEstimate<f64>> = (0..12)
            .map(|i| {
                let disc = Disc::from_center_radius(
                    sample_uniform_sphere(&mut rng, 3),
                    0.3 + 0.05 * (i as f64 % 4.0),
                )
                .unwrap();
                RegionEstimate {
                    disc,
                    statistic: 1.0 + i as f64,
                    rss: None,
                    member_indices: vec![],
                    outer_disc: None,
                }
            })
            .collect();
        let baseline = select_disjoint(&candidates, DedupMode::Geometric, 0);
        for swap in [(0usize, 11usize), (3, 7), (2, 9)] {
            candidates.swap(swap.0, swap.1);
            let shuffled = select_disjoint(&candidates, DedupMode::Geometric, 0);
            assert_eq!(baseline.len(), shuffled.len());
            for (a, b) in baseline.iter().zip(&shuffled) {
                assert_eq!(a.disc, b.disc);
            }
        }
    }

    #[test]
    fn recovery_is_monotone_in_outer_disc_count_noiseless() {
        let (ds, regions) = planted_multi_d3(800, 3.0, 0.0, 21);
        let mut found_prev = 0usize;
        for j in [50usize, 200, 800] {
            let mut cfg = DetectorConfig::<f64>::for_dim(3);
            cfg.num_outer = OuterCount::Explicit(j);
            cfg.budget.seed = 5;
            let out = detect_multi(&ds, &cfg).unwrap();
            // Count how many planted regions are hit by some final region.
            let found = regions
                .iter()
                .filter(|r| {
                    out.regions.iter().any(|e| {
                        empirical_loss::<f64>(
                            &e.members_bitset(ds.n()),
                            &ds.membership(r),
                        ) < 0.02
                    })
                })
                .count();
            assert!(
                found >= found_prev,
                "recovered {found} regions with J = {j}, fewer than {found_prev}"
            );
            found_prev = found;
        }
        assert_eq!(found_prev, 4);
    }

    #[test]
    fn match_regions_examples() {
        let (ds, regions) = planted_multi_d3(500, 1.0, 0.0, 33);
        // Shuffled truth matches itself exactly.
        let shuffled = vec![
            regions[2].clone(),
            regions[0].clone(),
            regions[3].clone(),
            regions[1].clone(),
        ];
        let report = match_regions(&regions, &shuffled, &ds).unwrap();
        assert_relative_eq!(report.permuted_max_loss, 0.0);
        assert!(report.per_region_losses.iter().all(|&l| l == 0.0));

        // Single-region case reduces to the plain loss.
        let single_report =
            match_regions(&regions[..1], &[regions[1].clone()], &ds).unwrap();
        let direct: f64 = empirical_loss(
            &ds.membership(&regions[0]),
            &ds.membership(&regions[1]),
        );
        assert_relative_eq!(single_report.permuted_max_loss, direct);

        // Count mismatch: infinite matched loss plus greedy diagnostics.
        let mismatch = match_regions(&regions, &shuffled[..2], &ds).unwrap();
        assert!(mismatch.permuted_max_loss.is_infinite());
        assert_eq!(mismatch.per_region_losses.len(), 4);
    }

    #[test]
    fn match_regions_prefers_min_max_assignment() {
        // Two-by-two case where the identity pairing has losses
        // {0.1, 0.05} and the crossed pairing {0.3, 0.2}: the optimal
        // max is 0.1.
        let losses = vec![vec![0.1, 0.3], vec![0.2, 0.05]];
        let (value, assignment) = min_max_assignment(&losses);
        assert_relative_eq!(value, 0.1);
        assert_eq!(assignment, vec![0, 1]);
    }

    #[test]
    fn single_planted_region_matches_single_detector() {
        use crate::single::detect_single;
        let center = UnitVector::new_normalized(vec![1.0, 1.0, 1.0]).unwrap();
        let region = Disc::new(center, 0.75).unwrap();
        let mut agreement = 0usize;
        for seed in 0..5u64 {
            let mut rng = stream_rng(seed, 950);
            let points: Vec<UnitVector<f64>> =
                (0..800).map(|_| sample_uniform_sphere(&mut rng, 3)).collect();
            let values: Vec<f64> = points
                .iter()
                .map(|p| {
                    let s = if region.contains(p).unwrap() { 3.0 } else { 0.0 };
                    s + draw_standard_normal::<f64, _>(&mut rng)
                })
                .collect();
            let ds = LabeledDataset::new(points, values).unwrap();
            let truth = ds.membership(&region);

            let mut cfg = DetectorConfig::<f64>::for_dim(3);
            cfg.budget.seed = seed;
            let multi = detect_multi(&ds, &cfg).unwrap();
            if multi.regions.len() != 1 {
                continue;
            }
            let multi_loss: f64 =
                empirical_loss(&multi.regions[0].members_bitset(ds.n()), &truth);
            let single = detect_single(&ds, &cfg.budget, Sided::TwoSided).unwrap();
            let single_loss: f64 = empirical_loss(&single.members_bitset(ds.n()), &truth);
            if multi_loss <= (2.0 * single_loss).max(0.01) {
                agreement += 1;
            }
        }
        assert!(agreement >= 4, "only {agreement}/5 runs agreed");
    }

    #[test]
    fn match_regions_rejects_more_than_eight_regions() {
        let (ds, regions) = planted_multi_d3(100, 1.0, 0.0, 1);
        let many: Vec<Disc<f64>> = (0..9).map(|i| regions[i % 4].clone()).collect();
        assert!(matches!(
            match_regions(&many, &many, &ds),
            Err(CrispError::Unsupported(_))
        ));
    }

    #[test]
    fn padded_matching_handles_count_mismatch() {
        let n = 10;
        let a = Bitset::from_indices(n, [0, 1, 2]);
        let b = Bitset::from_indices(n, [5, 6]);
        // Perfect match on the first region, second unmatched: its loss is
        // |B|/n = 0.2.
        let v: f64 = padded_matched_max_loss(&[a.clone(), b.clone()], &[a.clone()], n);
        assert_relative_eq!(v, 0.2);
        let zero: f64 = padded_matched_max_loss(&[a.clone()], &[a], n);
        assert_relative_eq!(zero, 0.0);
    }
}
