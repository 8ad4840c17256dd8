//! Batch plate solving: positive events are binned into short frames,
//! centroided, and matched against the triangle index.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use nalgebra::{Matrix3, Matrix4, SymmetricEigen};
use rayon::prelude::*;

use crate::attitude::{AttitudeEstimate, Source};
use crate::catalog::{canonical_triangle, Catalog, TriangleIndex};
use crate::geometry::{arcsec_to_rad, UnitQuaternion, Vec3};
use crate::simulator::{CameraModel, Event, SimError};
use crate::timesync::{PpsAnchor, TimeMap, TimeSyncError};

/// One sixth of a second.
pub const DEFAULT_WINDOW_US: f64 = 1e6 / 6.0;

/// Positive-event counts over `[t_start, t_end)`, stored sparsely.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchFrame {
    pub t_start: i64,
    pub t_end: i64,
    pub width: u32,
    pub height: u32,
    /// `((x, y), count)` for nonzero pixels, ordered by `(y, x)`.
    pub counts: Vec<((u16, u16), u32)>,
}

impl BatchFrame {
    pub fn count(&self, x: u16, y: u16) -> u32 {
        self.counts
            .binary_search_by_key(&(y, x), |&((px, py), _)| (py, px))
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c.1 as u64).sum()
    }

    /// Midpoint on the device clock.
    pub fn t_mid(&self) -> f64 {
        0.5 * (self.t_start + self.t_end) as f64
    }

    /// Builds a frame from a dense row-major count image.
    pub fn from_dense(t_start: i64, t_end: i64, width: u32, height: u32, dense: &[u32]) -> Self {
        let counts = dense
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (((i % width as usize) as u16, (i / width as usize) as u16), c))
            .collect();
        Self {
            t_start,
            t_end,
            width,
            height,
            counts,
        }
    }
}

/// Splits a sorted stream into consecutive windows starting at the first
/// event. Window edges fall on `first + round(k·window_us)`; a window is kept
/// only if the stream reaches its end.
pub fn accumulate_frames(events: &[Event], width: u32, height: u32, window_us: f64) -> Vec<BatchFrame> {
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return Vec::new();
    };
    assert!(window_us >= 1.0, "window must be at least 1 µs");
    let edge = |k: i64| first.t_us + (k as f64 * window_us).round() as i64;
    let mut frames = Vec::new();
    let mut idx = 0;
    let mut k = 0;
    while edge(k + 1) <= last.t_us + 1 {
        let (t_start, t_end) = (edge(k), edge(k + 1));
        let mut acc: HashMap<(u16, u16), u32> = HashMap::new();
        while idx < events.len() && events[idx].t_us < t_end {
            let e = &events[idx];
            if e.p > 0 {
                *acc.entry((e.x, e.y)).or_default() += 1;
            }
            idx += 1;
        }
        let mut counts: Vec<_> = acc.into_iter().collect();
        counts.sort_unstable_by_key(|&((x, y), _)| (y, x));
        frames.push(BatchFrame {
            t_start,
            t_end,
            width,
            height,
            counts,
        });
        k += 1;
    }
    frames
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Centroid {
    pub u: f64,
    pub v: f64,
    /// Total event count.
    pub weight: f64,
}

/// Count-weighted centroids of 8-connected pixel groups. Groups whose
/// centroids lie within `radius` pixels are merged; results lighter than
/// `min_weight` are dropped. Sorted by descending weight.
pub fn extract_centroids(frame: &BatchFrame, min_weight: f64, radius: f64) -> Vec<Centroid> {
    let index: HashMap<(u16, u16), usize> = frame
        .counts
        .iter()
        .enumerate()
        .map(|(i, &(p, _))| (p, i))
        .collect();
    let mut seen = vec![false; frame.counts.len()];
    let mut blobs: Vec<Centroid> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..frame.counts.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
        while let Some(i) = stack.pop() {
            let ((x, y), c) = frame.counts[i];
            let w = c as f64;
            su += x as f64 * w;
            sv += y as f64 * w;
            sw += w;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 {
                        continue;
                    }
                    if let Some(&j) = index.get(&(nx as u16, ny as u16)) {
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        blobs.push(Centroid {
            u: su / sw,
            v: sv / sw,
            weight: sw,
        });
    }
    // Merge nearby groups, heaviest first, until no pair is within radius.
    loop {
        blobs.sort_by(|a, b| {
            b.weight
                .total_cmp(&a.weight)
                .then(a.v.total_cmp(&b.v))
                .then(a.u.total_cmp(&b.u))
        });
        let pair = (0..blobs.len()).find_map(|i| {
            (i + 1..blobs.len())
                .find(|&j| (blobs[i].u - blobs[j].u).hypot(blobs[i].v - blobs[j].v) <= radius)
                .map(|j| (i, j))
        });
        let Some((i, j)) = pair else {
            break;
        };
        let (a, b) = (blobs[i], blobs[j]);
        let w = a.weight + b.weight;
        blobs[i] = Centroid {
            u: (a.u * a.weight + b.u * b.weight) / w,
            v: (a.v * a.weight + b.v * b.weight) / w,
            weight: w,
        };
        blobs.swap_remove(j);
    }
    blobs.retain(|c| c.weight >= min_weight);
    blobs
}

/// Optimal rotation `R` maximizing `Σ wᵢ rᵢ·(R bᵢ)`, by Davenport's q-method.
/// `pairs` are (body vector, reference vector, weight).
pub fn wahba_q_method(pairs: &[(Vec3, Vec3, f64)]) -> UnitQuaternion {
    let mut b = Matrix3::zeros();
    let mut z = Vec3::zeros();
    for (body, reference, w) in pairs {
        b += body * reference.transpose() * *w;
        z += body.cross(reference) * *w;
    }
    let sigma = b.trace();
    let s = b + b.transpose() - Matrix3::identity() * sigma;
    let mut k = Matrix4::zeros();
    k[(0, 0)] = sigma;
    for i in 0..3 {
        k[(0, i + 1)] = z[i];
        k[(i + 1, 0)] = z[i];
        for j in 0..3 {
            k[(i + 1, j + 1)] = s[(i, j)];
        }
    }
    let eig = SymmetricEigen::new(k);
    let best = eig.eigenvalues.imax();
    let q = eig.eigenvectors.column(best);
    UnitQuaternion::from_wxyz(q[0], q[1], q[2], q[3])
        .expect("eigenvectors are unit length")
        .canonical()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Only the brightest centroids are used.
    pub max_centroids: usize,
    /// Centroid-to-star distance accepted during verification, pixels.
    pub match_tolerance_px: f64,
    /// Fraction of used centroids that must match catalog stars.
    pub min_match_fraction: f64,
    /// Absolute minimum number of matched stars.
    pub min_matches: usize,
    /// Interstar-angle agreement required of a candidate triangle, arcsec.
    pub angle_tolerance_arcsec: f64,
    /// Triangles with a side shorter than this are skipped, pixels.
    pub min_side_px: f64,
    pub min_weight: f64,
    pub merge_radius_px: f64,
    pub window_us: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            max_centroids: 12,
            match_tolerance_px: 3.0,
            min_match_fraction: 0.6,
            min_matches: 4,
            angle_tolerance_arcsec: 10.0,
            min_side_px: 20.0,
            min_weight: 3.0,
            merge_radius_px: 3.0,
            window_us: DEFAULT_WINDOW_US,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolveFailure {
    /// Fewer than three centroids.
    InsufficientStars,
    /// No index triangle matched the observed ones.
    NoMatch,
    /// Candidates matched but none passed reprojection checks.
    VerificationFailed,
}

impl SolveFailure {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveFailure::InsufficientStars => "insufficient-stars",
            SolveFailure::NoMatch => "no-match",
            SolveFailure::VerificationFailed => "verification-failed",
        }
    }
}

impl fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Camera attitude in ICRF.
    pub q: UnitQuaternion,
    /// (centroid index, catalog index) pairs.
    pub matches: Vec<(usize, usize)>,
    pub centroids_used: usize,
    /// Mean reprojection residual of matched stars, pixels.
    pub residual_px: f64,
}

/// Pairs each centroid with the nearest projected catalog star within
/// `tol` pixels, one star per centroid and vice versa.
fn match_centroids(
    centroids: &[Centroid],
    cat: &Catalog,
    cam: &CameraModel,
    q: &UnitQuaternion,
    tol: f64,
) -> Vec<(usize, usize, f64)> {
    let visible = cat.stars_in_fov(q, cam);
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in centroids.iter().enumerate() {
        for s in &visible {
            let d = (c.u - s.u).hypot(c.v - s.v);
            if d <= tol {
                cands.push((d, ci, s.index));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_c = vec![false; centroids.len()];
    let mut used_s = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (d, ci, si) in cands {
        if !used_c[ci] && used_s.insert(si) {
            used_c[ci] = true;
            out.push((ci, si, d));
        }
    }
    out.sort_by_key(|m| m.0);
    out
}

fn refine(
    centroids: &[Centroid],
    rays: &[Vec3],
    cat: &Catalog,
    cam: &CameraModel,
    q: UnitQuaternion,
    cfg: &SolveConfig,
) -> Option<Solution> {
    let mut q = q;
    let mut matches = match_centroids(centroids, cat, cam, &q, cfg.match_tolerance_px);
    for _ in 0..2 {
        if matches.len() < 3 {
            return None;
        }
        let pairs: Vec<(Vec3, Vec3, f64)> = matches
            .iter()
            .map(|&(ci, si, _)| (rays[ci], cat.stars()[si].dir, 1.0))
            .collect();
        q = wahba_q_method(&pairs);
        matches = match_centroids(centroids, cat, cam, &q, cfg.match_tolerance_px);
    }
    let needed = cfg
        .min_matches
        .max((cfg.min_match_fraction * centroids.len() as f64).ceil() as usize);
    if matches.len() < needed {
        return None;
    }
    let residual_px = matches.iter().map(|m| m.2).sum::<f64>() / matches.len() as f64;
    Some(Solution {
        q,
        matches: matches.iter().map(|m| (m.0, m.1)).collect(),
        centroids_used: centroids.len(),
        residual_px,
    })
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Lost-in-space attitude from centroids (brightest first).
pub fn plate_solve(
    centroids: &[Centroid],
    index: &TriangleIndex,
    cat: &Catalog,
    cam: &CameraModel,
    cfg: &SolveConfig,
) -> Result<Solution, SolveFailure> {
    if centroids.len() < 3 {
        return Err(SolveFailure::InsufficientStars);
    }
    let used = &centroids[..centroids.len().min(cfg.max_centroids)];
    let rays: Vec<Vec3> = used.iter().map(|c| cam.unproject_camera(c.u, c.v)).collect();
    let tol = arcsec_to_rad(cfg.angle_tolerance_arcsec);
    let min_side = cfg.min_side_px / cam.focal_px();
    let n = used.len();
    let mut any_candidate = false;
    let mut best: Option<Solution> = None;

    // Triangles over the brightest centroids first.
    let mut triples = Vec::new();
    for k in 2..n {
        for j in 1..k {
            for i in 0..j {
                triples.push([i, j, k]);
            }
        }
    }
    for [i, j, k] in triples {
        let verts = [i, j, k];
        let (order, sides) = canonical_triangle([&rays[i], &rays[j], &rays[k]]);
        if sides[2] < min_side || sides[0] > index.max_separation_rad() {
            continue;
        }
        let obs = [verts[order[0]], verts[order[1]], verts[order[2]]];
        for entry in index.lookup(&sides) {
            for perm in PERMUTATIONS {
                // perm maps observed vertex slot -> catalog vertex slot
                if (0..3).any(|s| (sides[s] - entry.sides[perm[s]]).abs() > tol) {
                    continue;
                }
                any_candidate = true;
                let pairs: Vec<(Vec3, Vec3, f64)> = (0..3)
                    .map(|s| (rays[obs[s]], cat.stars()[entry.stars[perm[s]] as usize].dir, 1.0))
                    .collect();
                let q = wahba_q_method(&pairs);
                // Mirror-image or mismatched triangles fail this check.
                if pairs
                    .iter()
                    .any(|(b, r, _)| (q.rotate(b) - r).norm() > 2.0 * tol)
                {
                    continue;
                }
                let Some(sol) = refine(used, &rays, cat, cam, q, cfg) else {
                    continue;
                };
                let better = best.as_ref().is_none_or(|b| {
                    sol.matches.len() > b.matches.len()
                        || (sol.matches.len() == b.matches.len() && sol.residual_px < b.residual_px)
                });
                if better {
                    best = Some(sol);
                }
                if best.as_ref().is_some_and(|b| b.matches.len() == n) {
                    return Ok(best.expect("checked"));
                }
            }
        }
        if best.is_some() {
            break;
        }
    }
    best.ok_or(if any_candidate {
        SolveFailure::VerificationFailed
    } else {
        SolveFailure::NoMatch
    })
}

/// Outcome of solving every frame of a stream.
#[derive(Clone, Debug, Default)]
pub struct SolveOutput {
    pub estimates: Vec<AttitudeEstimate>,
    /// (frame start, reason) for frames without a solution.
    pub failures: Vec<(i64, SolveFailure)>,
    pub frames: usize,
}

impl SolveOutput {
    pub fn success_rate(&self) -> f64 {
        if self.frames == 0 {
            return 0.0;
        }
        self.estimates.len() as f64 / self.frames as f64
    }
}

/// Frames, centroids and solves a whole stream; frames are solved in
/// parallel and each solution is stamped at its frame midpoint.
pub fn solve_stream(
    events: &[Event],
    pps: &[PpsAnchor],
    index: &TriangleIndex,
    cat: &Catalog,
    cam: &CameraModel,
    cfg: &SolveConfig,
) -> Result<SolveOutput, TimeSyncError> {
    let map = TimeMap::new(pps.to_vec())?;
    let frames = accumulate_frames(events, cam.width, cam.height, cfg.window_us);
    let results: Vec<(i64, f64, Result<Solution, SolveFailure>)> = frames
        .par_iter()
        .map(|f| {
            let cents = extract_centroids(f, cfg.min_weight, cfg.merge_radius_px);
            (f.t_start, f.t_mid(), plate_solve(&cents, index, cat, cam, cfg))
        })
        .collect();
    let mut out = SolveOutput {
        frames: frames.len(),
        ..Default::default()
    };
    for (t_start, t_mid, r) in results {
        match r {
            Ok(sol) => out.estimates.push(AttitudeEstimate::new(
                map.to_utc_f64(t_mid),
                sol.q,
                Source::Astrometry,
            )),
            Err(reason) => out.failures.push((t_start, reason)),
        }
    }
    Ok(out)
}

pub fn write_failures_csv<W: Write>(failures: &[(i64, SolveFailure)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_start_us,reason")?;
    for (t, r) in failures {
        writeln!(out, "{t},{r}")?;
    }
    Ok(())
}

/// Reads a sidecar written by [`write_failures_csv`].
pub fn read_failures_csv<R: std::io::Read>(reader: R) -> Result<Vec<(i64, SolveFailure)>, SimError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| SimError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ["t_start_us", "reason"] {
        return Err(SimError::Parse {
            line: 1,
            message: "expected header t_start_us,reason".into(),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let perr = |message: String| SimError::Parse { line: i + 2, message };
        let row = row.map_err(|e| perr(e.to_string()))?;
        let t = row[0].parse().map_err(|_| perr(format!("bad t_start_us {:?}", &row[0])))?;
        let reason = match &row[1] {
            "insufficient-stars" => SolveFailure::InsufficientStars,
            "no-match" => SolveFailure::NoMatch,
            "verification-failed" => SolveFailure::VerificationFailed,
            other => return Err(perr(format!("unknown reason {other:?}"))),
        };
        out.push((t, reason));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{synthetic_field, FieldSpec};
    use crate::geometry::{rad_to_arcsec, swing_twist_decompose};
    use proptest::prelude::*;

    fn ev(t_us: i64, x: u16, y: u16, p: i8) -> Event {
        Event { t_us, x, y, p }
    }

    #[test]
    fn one_second_is_six_frames() {
        let events: Vec<Event> = (0..1_000_000).step_by(1000).map(|t| ev(t, 5, 5, 1)).collect();
        let events: Vec<Event> = events.into_iter().chain([ev(999_999, 6, 6, 1)]).collect();
        let frames = accumulate_frames(&events, 10, 10, DEFAULT_WINDOW_US);
        assert_eq!(frames.len(), 6);
        for f in &frames {
            assert!(((f.t_end - f.t_start) as f64 - 166_667.0).abs() <= 1.0);
        }
        assert_eq!(frames.iter().map(|f| f.total()).sum::<u64>(), 1001);
    }

    #[test]
    fn empty_and_negative_streams() {
        assert!(accumulate_frames(&[], 10, 10, DEFAULT_WINDOW_US).is_empty());
        let events: Vec<Event> = (0..400_000).step_by(500).map(|t| ev(t, 1, 2, -1)).collect();
        let frames = accumulate_frames(&events, 10, 10, DEFAULT_WINDOW_US);
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.total() == 0));
    }

    #[test]
    fn failure_sidecar_round_trip() {
        let f = vec![(5, SolveFailure::NoMatch), (166_672, SolveFailure::InsufficientStars)];
        let mut buf = Vec::new();
        write_failures_csv(&f, &mut buf).unwrap();
        assert_eq!(read_failures_csv(buf.as_slice()).unwrap(), f);
        assert!(read_failures_csv("t_start_us,reason\n5,tired\n".as_bytes()).is_err());
    }

    #[test]
    fn symmetric_blob_centroid() {
        let mut dense = vec![0u32; 32 * 32];
        for (dx, dy, c) in [(-1, -1, 1), (0, -1, 2), (1, -1, 1), (-1, 0, 2), (0, 0, 4), (1, 0, 2), (-1, 1, 1), (0, 1, 2), (1, 1, 1)] {
            dense[((10 + dy) * 32 + 10 + dx) as usize] = c;
        }
        let f = BatchFrame::from_dense(0, 1, 32, 32, &dense);
        let c = extract_centroids(&f, 1.0, 2.0);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].u, c[0].v, c[0].weight), (10.0, 10.0, 16.0));
    }

    #[test]
    fn separate_and_merged_blobs() {
        let mut dense = vec![0u32; 64 * 64];
        dense[10 * 64 + 10] = 5;
        dense[10 * 64 + 20] = 3;
        let f = BatchFrame::from_dense(0, 1, 64, 64, &dense);
        let c = extract_centroids(&f, 1.0, 4.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].weight, 5.0);
        let merged = extract_centroids(&f, 1.0, 12.0);
        assert_eq!(merged.len(), 1);
        assert!((merged[0].u - (10.0 * 5.0 + 20.0 * 3.0) / 8.0).abs() < 1e-12);
        assert!(extract_centroids(&f, 4.0, 4.0).len() == 1);
    }

    fn svd_oracle(pairs: &[(Vec3, Vec3, f64)]) -> UnitQuaternion {
        let mut m = Matrix3::zeros();
        for (b, r, w) in pairs {
            m += r * b.transpose() * *w;
        }
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let d = (u * vt).determinant().signum();
        let r = u * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * vt;
        UnitQuaternion::from_matrix(&r)
    }

    proptest! {
        #[test]
        fn q_method_matches_svd(rv in prop::array::uniform3(-3.0..3.0f64),
                                dirs in prop::collection::vec(prop::array::uniform3(-1.0..1.0f64), 3..8),
                                noise in prop::collection::vec(prop::array::uniform3(-1e-3..1e-3f64), 8)) {
            let truth = UnitQuaternion::from_rotation_vector(&Vec3::from(rv));
            let pairs: Vec<(Vec3, Vec3, f64)> = dirs
                .iter()
                .filter(|d| Vec3::from(**d).norm() > 0.1)
                .zip(&noise)
                .map(|(d, n)| {
                    let b = Vec3::from(*d).normalize();
                    ((b + Vec3::from(*n)).normalize(), truth.rotate(&b), 1.0)
                })
                .collect();
            prop_assume!(pairs.len() >= 2);
            let q = wahba_q_method(&pairs);
            let oracle = svd_oracle(&pairs);
            prop_assert!(q.angle_to(&oracle) < 1e-7, "{}", q.angle_to(&oracle));
        }
    }

    #[test]
    fn q_method_exact_pairs() {
        let truth = UnitQuaternion::from_pointing(123.0, -40.0, 33.0).unwrap();
        let body = [Vec3::x(), Vec3::y(), Vec3::new(0.3, -0.2, 0.93).normalize()];
        let pairs: Vec<_> = body.iter().map(|b| (*b, truth.rotate(b), 1.0)).collect();
        assert!(wahba_q_method(&pairs).angle_to(&truth) < 1e-12);
    }

    fn scene() -> (Catalog, TriangleIndex, CameraModel) {
        let spec = FieldSpec {
            ra_min_deg: 55.0,
            ra_max_deg: 65.0,
            dec_min_deg: 27.0,
            dec_max_deg: 33.0,
            density_per_deg2: 15.0,
            mag_min: 6.0,
            mag_max: 9.0,
            mag_slope: 0.3,
            first_id: 1,
        };
        let cat = Catalog::new(synthetic_field(&spec, 3), 9.0).unwrap();
        let cam = CameraModel::desk_telescope();
        let index = TriangleIndex::build(&cat, cam.diagonal_fov_deg(), 10.0).unwrap();
        (cat, index, cam)
    }

    fn exact_centroids(cat: &Catalog, cam: &CameraModel, q: &UnitQuaternion) -> Vec<Centroid> {
        cat.stars_in_fov(q, cam)
            .iter()
            .map(|s| Centroid {
                u: s.u,
                v: s.v,
                weight: 100.0 - s.star.mag,
            })
            .collect()
    }

    #[test]
    fn solves_known_attitude() {
        let (cat, index, cam) = scene();
        let q = UnitQuaternion::from_pointing(60.0, 30.0, 20.0).unwrap();
        let cents = exact_centroids(&cat, &cam, &q);
        assert!(cents.len() >= 4);
        let sol = plate_solve(&cents, &index, &cat, &cam, &SolveConfig::default()).unwrap();
        let err = swing_twist_decompose(&(q.inverse() * sol.q), &Vec3::z()).unwrap();
        assert!(rad_to_arcsec(err.across) < 10.0);
        assert!(sol.residual_px < 1.0);
    }

    #[test]
    fn in_plane_rotation_changes_roll_only() {
        let (cat, index, cam) = scene();
        let q = UnitQuaternion::from_pointing(59.0, 29.5, 0.0).unwrap();
        let cents = exact_centroids(&cat, &cam, &q);
        let base = plate_solve(&cents, &index, &cat, &cam, &SolveConfig::default()).unwrap();
        let a = 5f64.to_radians();
        let rotated: Vec<Centroid> = cents
            .iter()
            .map(|c| {
                let (du, dv) = (c.u - cam.cx, c.v - cam.cy);
                Centroid {
                    u: cam.cx + du * a.cos() - dv * a.sin(),
                    v: cam.cy + du * a.sin() + dv * a.cos(),
                    weight: c.weight,
                }
            })
            .filter(|c| cam.contains(c.u, c.v))
            .collect();
        let sol = plate_solve(&rotated, &index, &cat, &cam, &SolveConfig::default()).unwrap();
        let st = swing_twist_decompose(&(base.q.inverse() * sol.q), &Vec3::z()).unwrap();
        assert!((rad_to_arcsec(st.about.abs()) - 5.0 * 3600.0).abs() < 30.0, "about {}", rad_to_arcsec(st.about));
        assert!(rad_to_arcsec(st.across) < 10.0);
    }

    #[test]
    fn too_few_centroids() {
        let (cat, index, cam) = scene();
        let two = [
            Centroid { u: 1.0, v: 2.0, weight: 9.0 },
            Centroid { u: 100.0, v: 200.0, weight: 8.0 },
        ];
        assert_eq!(
            plate_solve(&two, &index, &cat, &cam, &SolveConfig::default()),
            Err(SolveFailure::InsufficientStars)
        );
    }

    #[test]
    fn random_centroids_do_not_solve() {
        let (cat, index, cam) = scene();
        let junk: Vec<Centroid> = (0..8)
            .map(|i| Centroid {
                u: 100.0 + 131.0 * i as f64,
                v: 50.0 + 77.0 * ((i * 5) % 8) as f64,
                weight: 10.0,
            })
            .collect();
        assert!(plate_solve(&junk, &index, &cat, &cam, &SolveConfig::default()).is_err());
    }
}
