//! Response maximum, quadrant norms around it, and their ratios.

use super::IntegralImage;
use crate::gabor::ResponseField;

/// Pixel position of the largest response magnitude as `(x, y)` =
/// `(column, row)`. Ties go to the smallest row, then the smallest column.
pub fn locate_center(field: &ResponseField) -> (usize, usize) {
    let mut best = 0;
    let mut best_mag = f64::NEG_INFINITY;
    for (i, v) in field.values().iter().enumerate() {
        let m = v.norm_sqr();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    (best % field.width(), best / field.width())
}

/// Quadrant l2-norms of the region of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResponses {
    pub tl: f64,
    pub tr: f64,
    pub bl: f64,
    pub br: f64,
    /// Quadrants clamped to zero area by the field border, in tl, tr, bl, br order.
    pub degenerate: [bool; 4],
}

impl QuadResponses {
    pub fn as_array(&self) -> [f64; 4] {
        [self.tl, self.tr, self.bl, self.br]
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|d| *d)
    }
}

/// Number of whole pixels a real half extent spans, at least one.
pub fn half_extent_px(sigma: f64) -> usize {
    (sigma.round() as usize).max(1)
}

/// Quadrant norms around `center = (x, y)`.
///
/// `half_extent = (horizontal, vertical)` in pixels is rounded to whole
/// pixels `(a, b)`. The left quadrants span columns `x-a..=x-1`, the right
/// ones `x+1..=x+a`; top rows are `y-b..=y-1`, bottom rows `y+1..=y+b`. The
/// center row and column belong to no quadrant, which keeps the four regions
/// disjoint and mirror-symmetric about the center. Ranges are clamped to the
/// field; a quadrant clamped to nothing has norm 0 and is marked degenerate.
pub fn quad_responses(iu: &IntegralImage, center: (usize, usize), half_extent: (f64, f64)) -> QuadResponses {
    let (x, y) = center;
    let (a, b) = (half_extent_px(half_extent.0), half_extent_px(half_extent.1));
    let (w, h) = (iu.width(), iu.height());
    // Inclusive spans, or None when empty after clamping.
    let before = |p: usize, ext: usize| (p > 0).then(|| (p.saturating_sub(ext), p - 1));
    let after = |p: usize, ext: usize, n: usize| (p + 1 < n).then(|| (p + 1, (p + ext).min(n - 1)));
    let cols = [before(x, a), after(x, a, w)];
    let rows = [before(y, b), after(y, b, h)];
    let mut out = [0.0; 4];
    let mut degenerate = [false; 4];
    for (qi, (ri, ci)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        match (rows[ri], cols[ci]) {
            (Some((r0, r1)), Some((c0, c1))) => out[qi] = iu.rect_sum(r0, c0, r1, c1).sqrt(),
            _ => degenerate[qi] = true,
        }
    }
    QuadResponses { tl: out[0], tr: out[1], bl: out[2], br: out[3], degenerate }
}

pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Ratio features `(TL/BL, TR/BR, TL/TR, BL/BR)`, each `num / (den + epsilon)`.
pub fn engineered_features(q: &QuadResponses, epsilon: f64) -> [f64; 4] {
    let r = |n: f64, d: f64| n / (d + epsilon);
    [r(q.tl, q.bl), r(q.tr, q.br), r(q.tl, q.tr), r(q.bl, q.br)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quads(tl: f64, tr: f64, bl: f64, br: f64) -> QuadResponses {
        QuadResponses { tl, tr, bl, br, degenerate: [false; 4] }
    }

    #[test]
    fn uniform_field_quadrants() {
        let iu = IntegralImage::from_magnitudes(6, 5, &[1.0; 30]).unwrap();
        let q = quad_responses(&iu, (2, 2), (2.0, 2.0));
        assert_eq!(q.as_array(), [2.0, 2.0, 2.0, 2.0]);
        assert!(!q.any_degenerate());
    }

    #[test]
    fn constant_field_center_is_origin() {
        let f = ResponseField::from_magnitudes(4, 3, &[0.5; 12]).unwrap();
        assert_eq!(locate_center(&f), (0, 0));
    }

    #[test]
    fn delta_field_center() {
        let mut m = vec![0.0; 20];
        m[2 * 5 + 3] = 1.0;
        let f = ResponseField::from_magnitudes(5, 4, &m).unwrap();
        assert_eq!(locate_center(&f), (3, 2));
    }

    #[test]
    fn mirror_symmetric_field_has_equal_left_right() {
        let (w, h) = (9, 7);
        let x0 = 4;
        let m: Vec<f64> = (0..w * h)
            .map(|i| {
                let (r, c) = (i / w, i % w);
                ((c as f64 - x0 as f64).abs() + 1.0) * (r as f64 + 0.5)
            })
            .collect();
        let iu = IntegralImage::from_magnitudes(w, h, &m).unwrap();
        let q = quad_responses(&iu, (x0, 3), (3.0, 2.0));
        assert!((q.tl - q.tr).abs() <= 1e-9 * q.tl);
        assert!((q.bl - q.br).abs() <= 1e-9 * q.bl);
    }

    #[test]
    fn corner_center_degenerates() {
        let iu = IntegralImage::from_magnitudes(5, 5, &[1.0; 25]).unwrap();
        let q = quad_responses(&iu, (0, 0), (2.0, 2.0));
        assert_eq!(q.degenerate, [true, true, true, false]);
        assert_eq!(q.as_array(), [0.0, 0.0, 0.0, 2.0]);
        // Partially clipped quadrants still count what remains.
        let q = quad_responses(&iu, (1, 4), (3.0, 3.0));
        assert_eq!(q.degenerate, [false, false, true, true]);
        assert!((q.tl - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ratio_features() {
        let e = engineered_features(&quads(2.0, 2.0, 2.0, 2.0), DEFAULT_EPSILON);
        assert!(e.iter().all(|v| (v - 1.0).abs() < 1e-8));
        let e = engineered_features(&quads(1.0, 1.0, 1.0, 2.0), DEFAULT_EPSILON);
        assert!(e[3] < 1.0);
        let e = engineered_features(&quads(1.0, 1.0, 3.0, 0.0), 1e-9);
        assert!((e[3] - 3e9).abs() < 1e-3);
    }
}
