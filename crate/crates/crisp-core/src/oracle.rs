//! Brute-force ground truth at small n: exhaustive enumeration of the
//! subsets of a point set realizable by discs, the exact CUSUM argmax over
//! that family, and shattering checks.
//!
//! On the circle a disc cuts a circularly contiguous run of the angular
//! order. On the 2-sphere every realizable dichotomy is witnessed by a cap
//! whose boundary plane can be rotated onto three data points, so
//! enumerating all planes through point triples together with the eight
//! boundary-side assignments of the triple covers the whole family.

use std::collections::HashMap;

use crate::bitset::Bitset;
use crate::error::{CrispError, Result};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::sphere::{sample_uniform_sphere, Disc, LabeledDataset, UnitVector};
use crate::stats::cusum;

/// All subsets of a point set realizable as `disc ∩ points`, each with a
/// realizing disc as witness.
#[derive(Clone, Debug)]
pub struct SubsetFamily<T> {
    n: usize,
    entries: Vec<(Bitset, Disc<T>)>,
    /// Triples skipped because a verified witness could not be built
    /// (degenerate position).
    pub degenerate_skips: usize,
}

impl<T: Scalar> SubsetFamily<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bitsets(&self) -> impl Iterator<Item = &Bitset> {
        self.entries.iter().map(|(b, _)| b)
    }

    pub fn entries(&self) -> &[(Bitset, Disc<T>)] {
        &self.entries
    }

    pub fn contains(&self, bitset: &Bitset) -> bool {
        self.entries.iter().any(|(b, _)| b == bitset)
    }
}

fn membership_of_points<T: Scalar>(disc: &Disc<T>, points: &[UnitVector<T>]) -> Bitset {
    Bitset::from_fn(points.len(), |i| {
        disc.center().dot(&points[i]) >= disc.cos_threshold()
    })
}

fn check_distinct<T: Scalar>(points: &[UnitVector<T>]) -> Result<()> {
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].coords() == points[j].coords() {
                return Err(CrispError::invalid("points must be distinct"));
            }
        }
    }
    Ok(())
}

/// Deterministic witness for the empty subset: a disc holding no points.
fn empty_witness<T: Scalar>(points: &[UnitVector<T>]) -> Disc<T> {
    let d = points[0].dim();
    let min_dist = |c: &UnitVector<T>| {
        points
            .iter()
            .map(|p| c.dot(p).clamped_acos())
            .fold(T::pi(), |a, b| a.min(b))
    };
    let mut best: Option<(UnitVector<T>, T)> = None;
    let mut consider = |c: UnitVector<T>| {
        let m = min_dist(&c);
        if best.as_ref().is_none_or(|(_, bm)| m > *bm) {
            best = Some((c, m));
        }
    };
    for p in points {
        consider(p.antipode());
    }
    let mut rng = stream_rng(0x0e5e_77ab, points.len() as u64);
    for _ in 0..32 {
        consider(sample_uniform_sphere(&mut rng, d));
    }
    let (center, dist) = best.expect("nonempty candidate list");
    debug_assert!(dist > T::zero());
    Disc::from_center_radius(center, dist * T::half()).expect("radius in range")
}

fn full_witness<T: Scalar>(points: &[UnitVector<T>]) -> Disc<T> {
    Disc::new(points[0].clone(), -T::one()).expect("valid threshold")
}

/// All subsets of points on the circle cut by an arc: the circularly
/// contiguous runs of the angular order, plus the empty and full sets.
/// At most `n(n-1) + 2` distinct subsets.
pub fn enumerate_disc_subsets_d2<T: Scalar>(points: &[UnitVector<T>]) -> Result<SubsetFamily<T>> {
    if points.is_empty() || points[0].dim() != 2 {
        return Err(CrispError::Unsupported(
            "circle enumeration needs d = 2 and at least one point".into(),
        ));
    }
    check_distinct(points)?;
    let n = points.len();
    let two_pi = T::pi() * T::two();
    let angle = |p: &UnitVector<T>| -> T {
        let a = p.coords()[1].atan2(p.coords()[0]);
        if a < T::zero() {
            a + two_pi
        } else {
            a
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| {
        angle(&points[i])
            .partial_cmp(&angle(&points[j]))
            .expect("finite angles")
    });
    let angles: Vec<T> = order.iter().map(|&i| angle(&points[i])).collect();
    let forward_gap = |from: T, to: T| -> T {
        let mut g = to - from;
        while g < T::zero() {
            g += two_pi;
        }
        g
    };

    let mut seen: HashMap<Bitset, Disc<T>> = HashMap::new();
    seen.insert(Bitset::new(n), empty_witness(points));
    seen.insert(Bitset::full(n), full_witness(points));

    for start in 0..n {
        for len in 1..n {
            let members = (0..len).map(|t| order[(start + t) % n]);
            let bitset = Bitset::from_indices(n, members);
            if seen.contains_key(&bitset) {
                continue;
            }
            let first = angles[start];
            let last = angles[(start + len - 1) % n];
            let span = forward_gap(first, last);
            let prev = angles[(start + n - 1) % n];
            let next = angles[(start + len) % n];
            let gap_before = forward_gap(prev, first);
            let gap_after = forward_gap(last, next);
            let margin = gap_before.min(gap_after) * T::half();
            let mid = first + span * T::half();
            let center =
                UnitVector::new_normalized(vec![mid.cos(), mid.sin()]).expect("unit direction");
            let radius = (span * T::half() + margin * T::half()).min(T::pi());
            let disc = Disc::from_center_radius(center, radius)?;
            debug_assert_eq!(membership_of_points(&disc, points), bitset);
            seen.insert(bitset, disc);
        }
    }
    Ok(SubsetFamily {
        n,
        entries: seen.into_iter().collect(),
        degenerate_skips: 0,
    })
}

fn cross3<T: Scalar>(a: &[T], b: &[T]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Plane through three points of the 2-sphere: unit normal plus offset.
fn plane_through<T: Scalar>(
    p: &UnitVector<T>,
    q: &UnitVector<T>,
    r: &UnitVector<T>,
) -> Option<(UnitVector<T>, T)> {
    let u: Vec<T> = q
        .coords()
        .iter()
        .zip(p.coords())
        .map(|(a, b)| *a - *b)
        .collect();
    let v: Vec<T> = r
        .coords()
        .iter()
        .zip(p.coords())
        .map(|(a, b)| *a - *b)
        .collect();
    let w = cross3(&u, &v);
    let normal = UnitVector::new_normalized(w.to_vec()).ok()?;
    let b = (normal.dot(p) + normal.dot(q) + normal.dot(r)) / (T::two() + T::one());
    Some((normal, b))
}

/// All subsets of points on the 2-sphere cut by a cap, enumerated from
/// planes through point triples with all boundary-side assignments of the
/// triple. Requires general position; near-degenerate triples are retried
/// with shrinking perturbations and counted in `degenerate_skips` when no
/// verified witness emerges.
pub fn enumerate_disc_subsets_d3<T: Scalar>(points: &[UnitVector<T>]) -> Result<SubsetFamily<T>> {
    if points.is_empty() || points[0].dim() != 3 {
        return Err(CrispError::Unsupported(
            "sphere enumeration needs d = 3 and at least one point".into(),
        ));
    }
    if points.len() > 60 {
        return Err(CrispError::Unsupported(
            "sphere enumeration is limited to n <= 60".into(),
        ));
    }
    check_distinct(points)?;
    let n = points.len();
    let mut seen: HashMap<Bitset, Disc<T>> = HashMap::new();
    let mut degenerate = 0usize;
    seen.insert(Bitset::new(n), empty_witness(points));
    seen.insert(Bitset::full(n), full_witness(points));

    // Small n: every subset of one or two points is cut by a cap around the
    // subset (or excluded by the empty witness); cover them directly so the
    // triple machinery below only has to handle n >= 3.
    if n <= 2 {
        for i in 0..n {
            let other = points[(i + 1) % n].clone();
            let sep = points[i].dot(&other).clamped_acos();
            let single = Disc::from_center_radius(points[i].clone(), sep * T::half())?;
            seen.entry(Bitset::from_indices(n, [i]))
                .or_insert(single);
        }
        return Ok(SubsetFamily {
            n,
            entries: seen.into_iter().collect(),
            degenerate_skips: degenerate,
        });
    }

    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let Some((normal, offset)) = plane_through(&points[i], &points[j], &points[k])
                else {
                    degenerate += 1;
                    continue;
                };
                let mut margin = T::from_f64_lossy(0.05);
                for (m, p) in points.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    margin = margin.min((normal.dot(p) - offset).abs());
                }
                if margin <= T::zero() {
                    degenerate += 1;
                    continue;
                }
                for flip in [false, true] {
                    let (normal, offset) = if flip {
                        (normal.antipode(), -offset)
                    } else {
                        (normal.clone(), offset)
                    };
                    let strict_in = Bitset::from_fn(n, |m| {
                        m != i && m != j && m != k && normal.dot(&points[m]) > offset
                    });
                    for pattern in 0..8u8 {
                        let toggles = [pattern & 1 != 0, pattern & 2 != 0, pattern & 4 != 0];
                        let mut target = strict_in.clone();
                        for (t, &idx) in toggles.iter().zip([i, j, k].iter()) {
                            if *t {
                                target.set(idx);
                            }
                        }
                        if seen.contains_key(&target) {
                            continue;
                        }
                        if pattern == 7 {
                            // Boundary-inclusive cap through the unmoved triple.
                            let disc = Disc::new(normal.clone(), offset.min(T::one()).max(-T::one()))?;
                            if membership_of_points(&disc, points) == target {
                                seen.insert(target, disc);
                                continue;
                            }
                        }
                        match tilted_witness(points, [i, j, k], &normal, margin, toggles, &target) {
                            Some(disc) => {
                                seen.insert(target, disc);
                            }
                            None => degenerate += 1,
                        }
                    }
                }
            }
        }
    }
    Ok(SubsetFamily {
        n,
        entries: seen.into_iter().collect(),
        degenerate_skips: degenerate,
    })
}

/// Rebuilds the plane through copies of the triple nudged along the normal
/// (inward to include, outward to exclude) until the induced membership
/// matches the target; the shrinking step makes this robust near ties.
fn tilted_witness<T: Scalar>(
    points: &[UnitVector<T>],
    triple: [usize; 3],
    normal: &UnitVector<T>,
    margin: T,
    toggles: [bool; 3],
    target: &Bitset,
) -> Option<Disc<T>> {
    let mut eps = margin * T::from_f64_lossy(0.2);
    for _ in 0..48 {
        let moved: Vec<UnitVector<T>> = triple
            .iter()
            .zip(toggles.iter())
            .map(|(&idx, &keep)| {
                let sign = if keep { -T::one() } else { T::one() };
                let coords: Vec<T> = points[idx]
                    .coords()
                    .iter()
                    .zip(normal.coords())
                    .map(|(x, w)| *x + sign * eps * *w)
                    .collect();
                UnitVector::new_normalized(coords)
            })
            .collect::<Result<_>>()
            .ok()?;
        if let Some((mut w, mut b)) = plane_through(&moved[0], &moved[1], &moved[2]) {
            if w.dot(normal) < T::zero() {
                w = w.antipode();
                b = -b;
            }
            if b.abs() <= T::one() {
                if let Ok(disc) = Disc::new(w, b) {
                    if &membership_of_points(&disc, points) == target {
                        return Some(disc);
                    }
                }
            }
        }
        eps *= T::half();
    }
    None
}

/// Dispatches on the ambient dimension (2 or 3).
pub fn enumerate_disc_subsets<T: Scalar>(points: &[UnitVector<T>]) -> Result<SubsetFamily<T>> {
    match points.first().map(|p| p.dim()) {
        Some(2) => enumerate_disc_subsets_d2(points),
        Some(3) => enumerate_disc_subsets_d3(points),
        Some(d) => Err(CrispError::Unsupported(format!(
            "exact enumeration supports d in {{2, 3}}, got {d}"
        ))),
        None => Err(CrispError::invalid("no points given")),
    }
}

/// Exact maximizer of the absolute CUSUM contrast over all disc-realizable
/// subsets.
#[derive(Clone, Debug)]
pub struct OracleArgmax<T> {
    pub members: Bitset,
    pub value: T,
    pub witness: Disc<T>,
}

fn lex_less(a: &Bitset, b: &Bitset) -> bool {
    let mut ia = a.ones();
    let mut ib = b.ones();
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return false,
            (None, Some(_)) => return true,
            (Some(_), None) => return false,
            (Some(x), Some(y)) => {
                if x != y {
                    return x < y;
                }
            }
        }
    }
}

/// Exhaustive argmax of |CUSUM| over the disc-induced subset family.
/// Ties resolve to the smaller cardinality, then the lexicographically
/// smaller member list.
pub fn oracle_argmax_cusum<T: Scalar>(ds: &LabeledDataset<T>) -> Result<OracleArgmax<T>> {
    let family = enumerate_disc_subsets(ds.points())?;
    let mut best: Option<OracleArgmax<T>> = None;
    for (bitset, witness) in family.entries() {
        let value = cusum(bitset, ds).abs();
        let replace = match &best {
            None => true,
            Some(cur) => {
                value > cur.value
                    || (value == cur.value
                        && (bitset.count_ones() < cur.members.count_ones()
                            || (bitset.count_ones() == cur.members.count_ones()
                                && lex_less(bitset, &cur.members))))
            }
        };
        if replace {
            best = Some(OracleArgmax {
                members: bitset.clone(),
                value,
                witness: witness.clone(),
            });
        }
    }
    best.ok_or_else(|| CrispError::invalid("empty family"))
}

/// Whether the disc class shatters the given points (every subset is
/// realizable). Restricted to k <= 6 points in dimension 2 or 3.
pub fn shatters<T: Scalar>(points: &[UnitVector<T>]) -> Result<bool> {
    if points.is_empty() || points.len() > 6 {
        return Err(CrispError::Unsupported(
            "shattering check is limited to 1..=6 points".into(),
        ));
    }
    let family = enumerate_disc_subsets(points)?;
    Ok(family.len() == 1usize << points.len())
}
