//! Planar geometry: homographies, robust estimation and coverage tests.
//!
//! Homographies are stored as 3x3 matrices scaled so the bottom-right entry
//! is 1 whenever it is usefully far from zero. Fractional powers are the
//! principal powers of the determinant-normalized matrix, so interpolation
//! between the identity and `H` is continuous and endpoint-exact.

use nalgebra::{DMatrix, Matrix3, Point2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Pt = Point2<f64>;

const DET_EPS: f64 = 1e-12;

/// An invertible plane projective transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    /// Wraps a matrix, checking finiteness and invertibility and rescaling so
    /// `h[2][2] == 1` when that entry is nonzero.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "homography entries must be finite".into(),
            ));
        }
        if m.determinant().abs() <= DET_EPS {
            return Err(Error::Degenerate("homography is not invertible".into()));
        }
        Ok(Homography(normalize_scale(m)))
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Row-major flattening, the `plan.json` wire layout.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Self::from_rows([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    /// Applies the transform. Points mapped to the line at infinity come back
    /// with non-finite coordinates; callers that care must check.
    pub fn apply(&self, p: Pt) -> Pt {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        Point2::new(v.x / v.z, v.y / v.z)
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is a construction invariant.
        Homography(normalize_scale(self.0.try_inverse().expect("invertible")))
    }

    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &Homography) -> Homography {
        Homography(normalize_scale(self.0 * other.0))
    }

    pub fn frobenius_distance(&self, other: &Homography) -> f64 {
        (self.0 - other.0).norm()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        (self.0 - Matrix3::identity()).norm() <= tol
    }

    /// Principal fractional power of the det-normalized matrix, with the
    /// global scale interpolated geometrically. `w = 0` and `w = 1` are exact.
    ///
    /// Fails with [`Error::NonPrincipalPower`] when an eigenvalue lies on the
    /// negative real axis (including any orientation-flipping homography).
    pub fn fractional_power(&self, w: f64) -> Result<Homography> {
        if !w.is_finite() {
            return Err(Error::InvalidArgument("power must be finite".into()));
        }
        if w == 0.0 {
            return Ok(Homography::identity());
        }
        if w == 1.0 {
            return Ok(self.clone());
        }
        let det = self.0.determinant();
        if det <= DET_EPS {
            // det < 0 implies a negative real eigenvalue.
            return Err(Error::NonPrincipalPower);
        }
        let scale = det.cbrt();
        let unit = self.0 / scale;
        for ev in unit.complex_eigenvalues().iter() {
            if ev.re < 0.0 && ev.im.abs() <= 1e-9 * ev.norm().max(1e-300) {
                return Err(Error::NonPrincipalPower);
            }
        }
        let log = matrix_log(&unit)?;
        let powered = matrix_exp(&(log * w)) * scale.powf(w);
        Homography::from_matrix(powered)
    }

    /// Entry-wise interpolation between the identity and `self`; the fallback
    /// used when the principal power does not exist.
    pub fn lerp_identity(&self, w: f64) -> Homography {
        let m = Matrix3::identity() * (1.0 - w) + self.0 * w;
        Homography::from_matrix(m).unwrap_or_else(|_| self.clone())
    }
}

impl Serialize for Homography {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Homography {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 9]>::deserialize(d)?;
        Homography::from_row_major(v).map_err(serde::de::Error::custom)
    }
}

fn normalize_scale(m: Matrix3<f64>) -> Matrix3<f64> {
    let w = m[(2, 2)];
    if w.abs() > 1e-9 * m.norm() {
        m / w
    } else {
        m
    }
}

// --- matrix log / exp on 3x3 -----------------------------------------------

/// Square root by the Denman-Beavers iteration. Requires no eigenvalues on
/// the closed negative real axis, which callers have already checked.
fn matrix_sqrt(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let mut y = *m;
    let mut z = Matrix3::identity();
    for _ in 0..64 {
        let yi = y
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular iterate in matrix sqrt".into()))?;
        let zi = z
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular iterate in matrix sqrt".into()))?;
        let y_next = (y + zi) * 0.5;
        let z_next = (z + yi) * 0.5;
        let delta = (y_next - y).norm();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.norm().max(1.0) {
            break;
        }
    }
    Ok(y)
}

/// Principal logarithm by inverse scaling-and-squaring with a Gregory series.
fn matrix_log(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let ident = Matrix3::identity();
    let mut a = *m;
    let mut squarings = 0u32;
    while (a - ident).norm() > 0.25 {
        if squarings >= 60 {
            return Err(Error::Degenerate(
                "matrix log did not contract; input is too ill-conditioned".into(),
            ));
        }
        a = matrix_sqrt(&a)?;
        squarings += 1;
    }
    // log(A) = 2 * sum z^(2k+1) / (2k+1),  z = (A - I)(A + I)^-1,  ||z|| <= ~0.13
    let denom = (a + ident)
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("matrix log: A + I singular".into()))?;
    let z = (a - ident) * denom;
    let z2 = z * z;
    let mut term = z;
    let mut acc = Matrix3::zeros();
    for k in 0..32 {
        let contrib = term / (2 * k + 1) as f64;
        acc += contrib;
        if contrib.norm() <= 1e-18 {
            break;
        }
        term *= z2;
    }
    Ok(acc * 2.0 * f64::from(2u32.pow(squarings)))
}

/// Scaling-and-squaring exponential with a Taylor core.
fn matrix_exp(m: &Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = *m / f64::from(2u32.pow(squarings));
    let mut acc = Matrix3::identity();
    let mut term = Matrix3::identity();
    for k in 1..=20 {
        term = term * scaled / k as f64;
        acc += term;
        if term.norm() <= 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        acc = acc * acc;
    }
    acc
}

// --- direct linear transform ------------------------------------------------

/// Hartley normalization: translate the centroid to the origin and scale the
/// mean distance to sqrt(2). Returns the transformed points and the transform.
fn hartley_normalize(points: &[Pt]) -> Result<(Vec<Pt>, Matrix3<f64>)> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= 1e-12 {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let mapped = points
        .iter()
        .map(|p| Point2::new(s * (p.x - cx), s * (p.y - cy)))
        .collect();
    Ok((mapped, t))
}

fn three_collinear(pts: &[Pt]) -> bool {
    let scale = pts
        .iter()
        .flat_map(|p| [p.x.abs(), p.y.abs()])
        .fold(1.0f64, f64::max);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                let ab = pts[j] - pts[i];
                let ac = pts[k] - pts[i];
                if (ab.x * ac.y - ab.y * ac.x).abs() <= 1e-9 * scale * scale {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized DLT homography fit, least squares for more than four pairs.
/// Exact on noiseless non-degenerate inputs.
pub fn estimate_homography_dlt(pairs: &[(Pt, Pt)]) -> Result<Homography> {
    let n = pairs.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 point pairs, got {n}"
        )));
    }
    let src: Vec<Pt> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<Pt> = pairs.iter().map(|p| p.1).collect();
    if n == 4 && (three_collinear(&src) || three_collinear(&dst)) {
        return Err(Error::Degenerate(
            "three of the four points are collinear".into(),
        ));
    }
    let (src_n, t_src) = hartley_normalize(&src)?;
    let (dst_n, t_dst) = hartley_normalize(&dst)?;

    // At least 9 rows, so the SVD carries a full 9-column V^T and the null
    // vector is actually present for minimal 4-point systems.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src_n.iter().zip(dst_n.iter()).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Internal("svd failed to produce V^T".into()))?;
    // nalgebra does not guarantee singular value ordering; find the extremes.
    let sv = &svd.singular_values;
    let mut min_idx = 0;
    let mut second_min = f64::INFINITY;
    let mut max_sv = 0.0f64;
    for (i, &s) in sv.iter().enumerate() {
        if s < sv[min_idx] {
            min_idx = i;
        }
        max_sv = max_sv.max(s);
    }
    for (i, &s) in sv.iter().enumerate() {
        if i != min_idx && s < second_min {
            second_min = s;
        }
    }
    if second_min <= 1e-9 * max_sv {
        return Err(Error::Degenerate(
            "point configuration does not determine a unique homography".into(),
        ));
    }
    let h_row = v_t.row(min_idx);
    let h_norm = Matrix3::new(
        h_row[0], h_row[1], h_row[2], h_row[3], h_row[4], h_row[5], h_row[6], h_row[7], h_row[8],
    );
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::Internal("normalization transform not invertible".into()))?;
    Homography::from_matrix(t_dst_inv * h_norm * t_src)
}

// --- RANSAC ------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Iteration cap; the adaptive schedule usually exits earlier.
    pub iterations: usize,
    /// Inlier gate on the RMS symmetric transfer distance, in pixels.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 500,
            inlier_threshold: 3.0,
            seed: 0,
        }
    }
}

fn symmetric_transfer(h: &Homography, h_inv: &Homography, s: Pt, d: Pt) -> f64 {
    let fwd = h.apply(s);
    let bwd = h_inv.apply(d);
    if !fwd.x.is_finite() || !fwd.y.is_finite() || !bwd.x.is_finite() || !bwd.y.is_finite() {
        return f64::INFINITY;
    }
    let e1 = (fwd - d).norm_squared();
    let e2 = (bwd - s).norm_squared();
    ((e1 + e2) / 2.0).sqrt()
}

fn inlier_indices(h: &Homography, pairs: &[(Pt, Pt)], threshold: f64) -> Vec<usize> {
    let h_inv = h.inverse();
    pairs
        .iter()
        .enumerate()
        .filter(|(_, &(s, d))| symmetric_transfer(h, &h_inv, s, d) < threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Robust homography fit: seeded 4-point minimal sampling with an adaptive
/// iteration count, refit on the consensus set.
pub fn ransac_homography(
    pairs: &[(Pt, Pt)],
    config: &RansacConfig,
) -> Result<(Homography, Vec<usize>)> {
    if pairs.len() < 4 {
        return Err(Error::NoModel {
            best: pairs.len().min(3),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec<usize>, Homography)> = None;
    let mut needed = config.iterations;
    let mut iter = 0;
    while iter < needed.min(config.iterations) {
        iter += 1;
        let sample = rand::seq::index::sample(&mut rng, pairs.len(), 4).into_vec();
        let minimal: Vec<(Pt, Pt)> = sample.iter().map(|&i| pairs[i]).collect();
        let model = match estimate_homography_dlt(&minimal) {
            Ok(h) => h,
            Err(_) => continue, // degenerate sample
        };
        let inliers = inlier_indices(&model, pairs, config.inlier_threshold);
        let improved = match &best {
            Some((cur, _)) => inliers.len() > cur.len(),
            None => inliers.len() >= 4,
        };
        if improved {
            let ratio = inliers.len() as f64 / pairs.len() as f64;
            let p_good = ratio.powi(4).min(1.0 - 1e-12);
            if p_good > 0.0 {
                let est = ((1e-3f64).ln() / (1.0 - p_good).ln()).ceil();
                if est.is_finite() && est >= 1.0 {
                    needed = est as usize;
                }
            }
            best = Some((inliers, model));
        }
    }
    let (inliers, model) = best.ok_or(Error::NoModel { best: 0 })?;
    if inliers.len() < 4 {
        return Err(Error::NoModel {
            best: inliers.len(),
        });
    }
    let consensus: Vec<(Pt, Pt)> = inliers.iter().map(|&i| pairs[i]).collect();
    match estimate_homography_dlt(&consensus) {
        Ok(refit) => {
            let refit_inliers = inlier_indices(&refit, pairs, config.inlier_threshold);
            if refit_inliers.len() >= inliers.len() {
                Ok((refit, refit_inliers))
            } else {
                Ok((refit, inliers))
            }
        }
        Err(_) => Ok((model, inliers)),
    }
}

// --- coverage ----------------------------------------------------------------

/// Axis-aligned rectangle, `x0 <= x1`, `y0 <= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    /// Rectangle centered in a `width` x `height` frame covering `fraction`
    /// of each side.
    pub fn centered(fraction: f64, width: f64, height: f64) -> Rect {
        let dx = width * (1.0 - fraction) / 2.0;
        let dy = height * (1.0 - fraction) / 2.0;
        Rect {
            x0: dx,
            y0: dy,
            x1: width - dx,
            y1: height - dy,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }

    pub fn corners(&self) -> [Pt; 4] {
        [
            Point2::new(self.x0, self.y0),
            Point2::new(self.x1, self.y0),
            Point2::new(self.x1, self.y1),
            Point2::new(self.x0, self.y1),
        ]
    }

    pub fn width(&self) -> f64 {
        (self.x1 - self.x0).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y1 - self.y0).max(0.0)
    }
}

fn polygon_area(poly: &[Pt]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc.abs() / 2.0
}

/// Sutherland-Hodgman clip of `subject` against a convex `clipper` given in
/// counter-clockwise order.
fn clip_convex(subject: &[Pt], clipper: &[Pt]) -> Vec<Pt> {
    let mut out: Vec<Pt> = subject.to_vec();
    for i in 0..clipper.len() {
        if out.is_empty() {
            break;
        }
        let a = clipper[i];
        let b = clipper[(i + 1) % clipper.len()];
        let edge = b - a;
        let inside = |p: Pt| edge.x * (p.y - a.y) - edge.y * (p.x - a.x) >= 0.0;
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in != prev_in {
                // Intersection of segment prev->cur with the clip line.
                let d = cur - prev;
                let denom = edge.x * d.y - edge.y * d.x;
                if denom.abs() > 0.0 {
                    let t = (edge.x * (a.y - prev.y) - edge.y * (a.x - prev.x)) / denom;
                    out.push(Point2::new(prev.x + t * d.x, prev.y + t * d.y));
                }
            }
            if cur_in {
                out.push(cur);
            }
        }
    }
    out
}

fn orient_ccw(mut poly: Vec<Pt>) -> Vec<Pt> {
    let mut signed = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        signed += a.x * b.y - b.x * a.y;
    }
    if signed < 0.0 {
        poly.reverse();
    }
    poly
}

/// Warps the frame quadrilateral through `h`, requiring a valid convex image.
pub fn warped_frame_quad(h: &Homography, width: f64, height: f64) -> Result<[Pt; 4]> {
    let corners = [
        Point2::new(0.0, 0.0),
        Point2::new(width, 0.0),
        Point2::new(width, height),
        Point2::new(0.0, height),
    ];
    let mut ws = [0.0f64; 4];
    let mut quad = [Point2::new(0.0, 0.0); 4];
    for (i, c) in corners.iter().enumerate() {
        let v = h.matrix() * Vector3::new(c.x, c.y, 1.0);
        ws[i] = v.z;
        quad[i] = Point2::new(v.x / v.z, v.y / v.z);
    }
    if ws.iter().any(|w| !w.is_finite() || w.abs() < 1e-12) {
        return Err(Error::Degenerate(
            "frame corner maps to the line at infinity".into(),
        ));
    }
    let all_pos = ws.iter().all(|&w| w > 0.0);
    let all_neg = ws.iter().all(|&w| w < 0.0);
    if !(all_pos || all_neg) {
        return Err(Error::Degenerate(
            "homography flips frame corners across the horizon".into(),
        ));
    }
    // Convexity with consistent turn direction; orientation flips show up as
    // mixed signs.
    let mut sign = 0.0f64;
    for i in 0..4 {
        let a = quad[i];
        let b = quad[(i + 1) % 4];
        let c = quad[(i + 2) % 4];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        if cross.abs() <= 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return Err(Error::Degenerate(
                "warped frame quadrilateral is not convex".into(),
            ));
        }
    }
    Ok(quad)
}

/// Fraction of `crop` covered by the warped frame.
pub fn coverage_fraction(h: &Homography, width: f64, height: f64, crop: &Rect) -> Result<f64> {
    let quad = warped_frame_quad(h, width, height)?;
    let quad = orient_ccw(quad.to_vec());
    let clipped = clip_convex(&crop.corners(), &quad);
    let crop_area = crop.area();
    if crop_area <= 0.0 {
        return Err(Error::InvalidArgument("crop rectangle has no area".into()));
    }
    Ok((polygon_area(&clipped) / crop_area).clamp(0.0, 1.0))
}

/// Fraction of `crop` covered by the union of convex quads, by
/// inclusion-exclusion over successive convex clips.
pub fn union_coverage(quads: &[[Pt; 4]], crop: &Rect) -> f64 {
    let crop_area = crop.area();
    if crop_area <= 0.0 || quads.is_empty() {
        return 0.0;
    }
    let polys: Vec<Vec<Pt>> = quads
        .iter()
        .map(|q| {
            let ccw = orient_ccw(q.to_vec());
            clip_convex(&crop.corners(), &ccw)
        })
        .collect();
    let n = polys.len().min(16); // stitches never come close to this
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut current: Option<Vec<Pt>> = None;
        for (i, poly) in polys.iter().enumerate().take(n) {
            if mask & (1 << i) == 0 {
                continue;
            }
            current = Some(match current {
                None => poly.clone(),
                Some(acc) => clip_convex(&acc, poly),
            });
            if current.as_ref().is_some_and(|p| p.len() < 3) {
                break;
            }
        }
        let area = current.map(|p| polygon_area(&p)).unwrap_or(0.0);
        if area == 0.0 {
            continue;
        }
        if mask.count_ones() % 2 == 1 {
            total += area;
        } else {
            total -= area;
        }
    }
    (total / crop_area).clamp(0.0, 1.0)
}

/// Splitmix-style hash used to derive per-pair RANSAC seeds.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base ^ a.wrapping_mul(0x9E3779B97F4A7C15) ^ b.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}
