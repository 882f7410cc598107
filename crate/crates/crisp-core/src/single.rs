//! Single change-region estimation: maximize the CUSUM contrast over discs
//! using directional projection scans plus random perturbation refinement.

use rayon::prelude::*;

use crate::bitset::Bitset;
use crate::error::{CrispError, Result};
use crate::rng::{draw_standard_normal, stream_rng};
use crate::scalar::{CompensatedSum, Scalar};
use crate::sphere::{sample_uniform_sphere, Disc, LabeledDataset, UnitVector};
use crate::stats::{cusum, local_cusum_signed, rss, Sided};

const SALT_CENTERS: u64 = 0x51;
const SALT_PERTURB: u64 = 0x52;

/// Point count up to which, on the circle, the candidate pool also carries
/// the bisector direction of every point pair. Every arc subset is a
/// projection prefix around the bisector of its endpoints, so with these
/// candidates the search matches the exhaustive arc oracle exactly.
const EXHAUSTIVE_PAIR_LIMIT_D2: usize = 64;

/// One detected region.
#[derive(Clone, Debug)]
pub struct RegionEstimate<T> {
    pub disc: Disc<T>,
    /// Scan statistic of the region (global or local CUSUM score).
    pub statistic: T,
    /// Residual sum of squares of the two-group fit, when computed.
    pub rss: Option<T>,
    /// Indices of the sample points inside the disc, ascending.
    pub member_indices: Vec<usize>,
    /// Outer scan disc that produced this estimate, when any.
    pub outer_disc: Option<Disc<T>>,
}

impl<T: Scalar> RegionEstimate<T> {
    pub fn members_bitset(&self, n: usize) -> Bitset {
        Bitset::from_indices(n, self.member_indices.iter().copied())
    }
}

/// Randomized-search budget. Identical budgets (and dataset) give identical
/// results regardless of thread count.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchBudget {
    /// Uniformly drawn candidate scan directions, in addition to the data
    /// points themselves.
    pub n_directions: usize,
    /// Random perturbation proposals during refinement.
    pub n_perturb: usize,
    /// Relative scale of the perturbations (fraction of the current radius).
    pub perturb_scale: f64,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            n_directions: 128,
            n_perturb: 200,
            perturb_scale: 0.2,
            seed: 0,
        }
    }
}

impl SearchBudget {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Constraints a refined inner disc must keep satisfying inside an outer
/// scan disc.
#[derive(Clone, Debug)]
pub struct InnerConstraints<T> {
    pub outer: Disc<T>,
    /// Membership of the outer disc over the full dataset.
    pub outer_members: Bitset,
    /// Minimal geodesic gap from the inner disc to the outer complement.
    pub min_gap: T,
    /// Radius cap for the inner disc.
    pub max_radius: T,
}

impl<T: Scalar> InnerConstraints<T> {
    fn admits(&self, disc: &Disc<T>) -> bool {
        let radius = disc.radius();
        if radius > self.max_radius {
            return false;
        }
        let sep = disc.center().dot(self.outer.center()).clamped_acos();
        sep + radius + self.min_gap <= self.outer.radius()
    }
}

pub(crate) struct ScanBest<T> {
    pub cos_threshold: T,
    /// Scope indices ordered by descending projection; the prefix of length
    /// `count` is the member set.
    pub order: Vec<usize>,
    pub count: usize,
}

/// Core projection scan: sorts `scope` by projection onto `center`
/// (descending) and evaluates the contrast of every prefix whose induced
/// cap radius lies inside the bounds. The contrast is the CUSUM of the
/// prefix against the remainder of `scope`, which is the global CUSUM when
/// `scope` is the whole sample. Returns the best strictly positive score.
pub(crate) fn prefix_scan<T: Scalar>(
    center: &UnitVector<T>,
    scope: &[usize],
    ds: &LabeledDataset<T>,
    sided: Sided,
    radius_lo: T,
    radius_hi: T,
) -> Option<ScanBest<T>> {
    let m = scope.len();
    if m < 2 {
        return None;
    }
    let mut keyed: Vec<(usize, T)> = scope
        .iter()
        .map(|&i| (i, ds.point(i).dot(center)))
        .collect();
    keyed.sort_unstable_by(|a, b| b.1.partial_cmp(&a.1).expect("finite projections"));

    let mut total = CompensatedSum::new();
    for &(i, _) in &keyed {
        total.add(ds.value(i));
    }
    let total = total.value();

    let mut prefix = CompensatedSum::new();
    let m_t = T::from_usize_lossy(m);
    let mut best: Option<(T, usize, T)> = None; // (score, count, beta)
    for k in 1..m {
        prefix.add(ds.value(keyed[k - 1].0));
        let s_in = keyed[k - 1].1;
        let s_out = keyed[k].1;
        if s_in <= s_out {
            continue; // tied projections cannot be separated by a cap
        }
        let beta = (s_in + s_out) * T::half();
        if !(beta > s_out && beta <= s_in) {
            continue; // midpoint rounded onto a projection; not separable
        }
        let radius = beta.clamped_acos();
        if radius < radius_lo || radius > radius_hi {
            continue;
        }
        let a = T::from_usize_lossy(k);
        let b = T::from_usize_lossy(m - k);
        let mean_in = prefix.value() / a;
        let mean_out = (total - prefix.value()) / b;
        let score = sided.score((a * b / m_t).sqrt() * (mean_in - mean_out));
        if score > T::zero() && best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, k, beta));
        }
    }
    best.map(|(_, count, cos_threshold)| ScanBest {
        cos_threshold,
        order: keyed.into_iter().map(|(i, _)| i).collect(),
        count,
    })
}

fn zero_estimate<T: Scalar>(
    center: &UnitVector<T>,
    ds: &LabeledDataset<T>,
    radius_lo: T,
) -> RegionEstimate<T> {
    let disc = Disc::from_center_radius(center.clone(), radius_lo).expect("radius in bounds");
    let members = ds.membership(&disc);
    RegionEstimate {
        disc,
        statistic: T::zero(),
        rss: None,
        member_indices: members.ones().collect(),
        outer_disc: None,
    }
}

/// Scans one direction over the whole sample: evaluates the CUSUM of every
/// projection prefix with induced radius inside `radius_bounds`, placing the
/// cap boundary at the midpoint between the last included and first excluded
/// projection. Falls back to a zero-statistic estimate when no prefix is
/// feasible.
pub fn scan_direction<T: Scalar>(
    center: &UnitVector<T>,
    ds: &LabeledDataset<T>,
    sided: Sided,
    radius_bounds: (T, T),
) -> Result<RegionEstimate<T>> {
    let (lo, hi) = radius_bounds;
    if lo < T::zero() || hi > T::pi() || lo > hi {
        return Err(CrispError::invalid("radius bounds must satisfy 0 <= lo <= hi <= pi"));
    }
    let scope: Vec<usize> = (0..ds.n()).collect();
    match prefix_scan(center, &scope, ds, sided, lo, hi) {
        Some(best) => {
            let disc = Disc::new(center.clone(), best.cos_threshold)?;
            let mut member_indices: Vec<usize> = best.order[..best.count].to_vec();
            member_indices.sort_unstable();
            let bits = Bitset::from_indices(ds.n(), member_indices.iter().copied());
            debug_assert_eq!(bits, ds.membership(&disc));
            // Canonical statistic from the member set itself.
            let statistic = sided.score(cusum(&bits, ds)).max(T::zero());
            Ok(RegionEstimate {
                disc,
                statistic,
                rss: None,
                member_indices,
                outer_disc: None,
            })
        }
        None => Ok(zero_estimate(center, ds, lo)),
    }
}

/// Total preference order making search reductions independent of
/// evaluation order: larger statistic, then smaller radius, then
/// lexicographically smaller center.
pub(crate) fn prefer<T: Scalar>(a: RegionEstimate<T>, b: RegionEstimate<T>) -> RegionEstimate<T> {
    if a.statistic != b.statistic {
        return if a.statistic > b.statistic { a } else { b };
    }
    let (ra, rb) = (a.disc.radius(), b.disc.radius());
    if ra != rb {
        return if ra < rb { a } else { b };
    }
    match a
        .disc
        .center()
        .coords()
        .partial_cmp(b.disc.center().coords())
    {
        Some(std::cmp::Ordering::Greater) => b,
        _ => a,
    }
}

/// Estimates a single change region as the disc maximizing the CUSUM score.
///
/// Candidate scan directions are every data point plus `budget.n_directions`
/// uniform draws; on the circle with at most 64 points the pool also carries
/// all pairwise bisector directions, making the scan equivalent to
/// exhaustive arc enumeration. The winning prefix is then refined by random
/// perturbation.
pub fn detect_single<T: Scalar>(
    ds: &LabeledDataset<T>,
    budget: &SearchBudget,
    sided: Sided,
) -> Result<RegionEstimate<T>> {
    if ds.n() < 2 {
        return Err(CrispError::InvalidDataset(
            "single-region detection needs n >= 2".into(),
        ));
    }
    let d = ds.dim();
    let mut centers: Vec<UnitVector<T>> = ds.points().to_vec();
    let mut rng = stream_rng(budget.seed, SALT_CENTERS);
    for _ in 0..budget.n_directions {
        centers.push(sample_uniform_sphere(&mut rng, d));
    }
    if d == 2 && ds.n() <= EXHAUSTIVE_PAIR_LIMIT_D2 {
        for i in 0..ds.n() {
            for j in i + 1..ds.n() {
                let sum: Vec<T> = ds.point(i)
                    .coords()
                    .iter()
                    .zip(ds.point(j).coords())
                    .map(|(a, b)| *a + *b)
                    .collect();
                if let Ok(mid) = UnitVector::new_normalized(sum) {
                    centers.push(mid.antipode());
                    centers.push(mid);
                }
            }
        }
    }

    let full_range = (T::zero(), T::pi());
    let best = centers
        .par_iter()
        .map(|c| scan_direction(c, ds, sided, full_range).expect("valid bounds"))
        .reduce_with(prefer)
        .expect("nonempty candidate pool");

    let mut refined = refine_perturb(&best, ds, budget, None, sided);
    let bits = refined.members_bitset(ds.n());
    refined.rss = Some(rss(&bits, &Bitset::full(ds.n()), ds));
    Ok(refined)
}

/// After this many proposals the perturbation anchor moves to the running
/// best, so later proposals explore around improved regions. The block
/// length is fixed, which keeps the draw stream a prefix of itself under a
/// larger budget.
const REANCHOR_BLOCK: usize = 50;

/// Proposes `budget.n_perturb` random perturbations (tangent half-normal
/// center moves scaled by the anchor radius, log-normal radius jitter),
/// rejects proposals violating the constraints, and returns the best-scoring
/// candidate; never worse than the seed. The anchor re-centers on the
/// running best every [`REANCHOR_BLOCK`] proposals, so an off-center seed
/// can walk onto a region farther away than a single step.
pub fn refine_perturb<T: Scalar>(
    seed_estimate: &RegionEstimate<T>,
    ds: &LabeledDataset<T>,
    budget: &SearchBudget,
    constraints: Option<&InnerConstraints<T>>,
    sided: Sided,
) -> RegionEstimate<T> {
    let n = ds.n();
    let d = ds.dim();
    let mut rng = stream_rng(budget.seed, SALT_PERTURB);
    let scale = T::from_f64_lossy(budget.perturb_scale);

    let evaluate = |disc: &Disc<T>| -> (T, Bitset) {
        match constraints {
            None => {
                let bits = ds.membership(disc);
                (sided.score(cusum(&bits, ds)), bits)
            }
            Some(c) => {
                let bits = Bitset::from_fn(n, |i| {
                    c.outer_members.contains(i)
                        && disc.center().dot(ds.point(i)) >= disc.cos_threshold()
                });
                (
                    sided.score(local_cusum_signed(&bits, &c.outer_members, ds)),
                    bits,
                )
            }
        }
    };

    let mut anchor_center = seed_estimate.disc.center().clone();
    let mut anchor_radius = seed_estimate.disc.radius();
    let mut best: Option<(T, Disc<T>, Bitset)> = None;
    for proposal in 0..budget.n_perturb {
        if proposal > 0 && proposal % REANCHOR_BLOCK == 0 {
            if let Some((_, disc, _)) = &best {
                anchor_center = disc.center().clone();
                anchor_radius = disc.radius();
            }
        }
        // All draws happen unconditionally so the stream stays aligned
        // whether or not a proposal survives the checks.
        let gauss: Vec<T> = (0..d).map(|_| draw_standard_normal(&mut rng)).collect();
        let step_draw: T = draw_standard_normal::<T, _>(&mut rng).abs();
        let radius_draw: T = draw_standard_normal(&mut rng);

        let proj: T = gauss
            .iter()
            .zip(anchor_center.coords())
            .map(|(g, c)| *g * *c)
            .sum();
        let tangent: Vec<T> = gauss
            .iter()
            .zip(anchor_center.coords())
            .map(|(g, c)| *g - proj * *c)
            .collect();
        let Ok(tangent) = UnitVector::new_normalized(tangent) else {
            continue;
        };
        let step = step_draw * scale * anchor_radius;
        let center = UnitVector::new_normalized(
            anchor_center
                .coords()
                .iter()
                .zip(tangent.coords())
                .map(|(c, t)| step.cos() * *c + step.sin() * *t)
                .collect(),
        )
        .expect("non-degenerate rotation");
        let radius = (anchor_radius * (scale * radius_draw).exp()).min(T::pi());
        let Ok(disc) = Disc::from_center_radius(center, radius) else {
            continue;
        };
        if let Some(c) = constraints {
            if !c.admits(&disc) {
                continue;
            }
        }
        let (score, bits) = evaluate(&disc);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, disc, bits));
        }
    }

    match best {
        Some((score, disc, bits)) if score > seed_estimate.statistic => RegionEstimate {
            disc,
            statistic: score,
            rss: None,
            member_indices: bits.ones().collect(),
            outer_disc: constraints.map(|c| c.outer.clone()),
        },
        _ => seed_estimate.clone(),
    }
}

/// Diagnostic parameter distance `||center_est - center_true|| +
/// |cos_threshold_est - cos_threshold_true|`, minimized over replacing the
/// true disc by its complementary cap.
pub fn parameter_error<T: Scalar>(est: &Disc<T>, truth: &Disc<T>) -> Result<T> {
    if est.dim() != truth.dim() {
        return Err(CrispError::DimensionMismatch {
            left: est.dim(),
            right: truth.dim(),
        });
    }
    let err = |a: &Disc<T>, b: &Disc<T>| -> T {
        let chord: T = a
            .center()
            .coords()
            .iter()
            .zip(b.center().coords())
            .map(|(x, y)| (*x - *y) * (*x - *y))
            .sum::<T>()
            .sqrt();
        chord + (a.cos_threshold() - b.cos_threshold()).abs()
    };
    Ok(err(est, truth).min(err(est, &truth.complement())))
}
