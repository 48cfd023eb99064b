//! Axis-aligned boxes and 2D affine transforms.
//!
//! Boxes use top-left + size convention in whatever unit the caller works in
//! (pixels inside the tracker, [0, 1] image fractions inside the motion
//! filters). All geometry here is unit-agnostic.

use crate::error::{Error, Result};

/// Axis-aligned bounding box with a detector confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    /// Left edge.
    pub x: f64,
    /// Top edge.
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
}

impl BoundingBox {
    /// Validating constructor: finite coords, positive extent, confidence in [0, 1].
    pub fn new(x: f64, y: f64, w: f64, h: f64, confidence: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h, confidence };
        if !(b.x.is_finite() && b.y.is_finite() && b.w.is_finite() && b.h.is_finite()) {
            return Err(Error::InvalidBox { w, h, conf: confidence, reason: "non-finite coordinate" });
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { w, h, conf: confidence, reason: "non-positive extent" });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidBox { w, h, conf: confidence, reason: "confidence outside [0, 1]" });
        }
        Ok(b)
    }

    /// Box from known-good values; confidence defaults to 1.
    pub fn xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        BoundingBox { x, y, w, h, confidence: 1.0 }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Rescale from one unit system to another (e.g. pixels -> image fractions).
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        BoundingBox { x: self.x * sx, y: self.y * sy, w: self.w * sx, h: self.h * sy, confidence: self.confidence }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }
}

/// Intersection-over-union of two boxes. Zero-area inputs yield 0.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Grow a box about its center by `rate` per side, i.e. w' = w * (1 + rate).
/// The center is preserved; the result may extend past the image frame.
pub fn expand(b: &BoundingBox, rate: f64) -> BoundingBox {
    let (cx, cy) = b.center();
    let w = b.w * (1.0 + rate);
    let h = b.h * (1.0 + rate);
    BoundingBox { x: cx - w / 2.0, y: cy - h / 2.0, w, h, confidence: b.confidence }
}

/// 2D affine map `p' = M p + t`, stored row-major as [[a, b], [c, d]] with
/// translation [tx, ty]. Used for camera-motion alignment between frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl AffineTransform {
    pub const IDENTITY: AffineTransform = AffineTransform { m: [[1.0, 0.0], [0.0, 1.0]], t: [0.0, 0.0] };

    /// Build from the six coefficients `a, b, tx, c, d, ty` (row-major 2x3).
    /// Rejects numerically singular linear parts.
    pub fn new(a: f64, b: f64, tx: f64, c: f64, d: f64, ty: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !det.is_finite() || det.abs() <= 1e-9 {
            return Err(Error::SingularTransform { det });
        }
        Ok(AffineTransform { m: [[a, b], [c, d]], t: [tx, ty] })
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineTransform { m: [[1.0, 0.0], [0.0, 1.0]], t: [tx, ty] }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply_point(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.m[0][0] * x + self.m[0][1] * y + self.t[0],
            self.m[1][0] * x + self.m[1][1] * y + self.t[1],
        )
    }

    /// Map a box by transforming its top-left and bottom-right corners and
    /// taking the axis-aligned span of the two mapped points.
    pub fn apply_box(&self, b: &BoundingBox) -> BoundingBox {
        let (x0, y0) = self.apply_point(b.x, b.y);
        let (x1, y1) = self.apply_point(b.right(), b.bottom());
        let (lx, rx) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let (ty, by) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
        BoundingBox { x: lx, y: ty, w: rx - lx, h: by - ty, confidence: b.confidence }
    }

    /// The same motion expressed in rescaled units (x multiplied by `sx`, y
    /// by `sy`), i.e. the conjugation `S ∘ self ∘ S⁻¹` plus a rescaled
    /// translation. Converts a pixel-space camera transform to one acting on
    /// image-fraction coordinates with `sx = 1/width`, `sy = 1/height`.
    pub fn rescaled(&self, sx: f64, sy: f64) -> AffineTransform {
        AffineTransform {
            m: [
                [self.m[0][0], self.m[0][1] * sx / sy],
                [self.m[1][0] * sy / sx, self.m[1][1]],
            ],
            t: [self.t[0] * sx, self.t[1] * sy],
        }
    }

    /// Composition `outer ∘ inner`: applying the result equals applying
    /// `inner` first, then `outer`.
    pub fn compose(outer: &AffineTransform, inner: &AffineTransform) -> AffineTransform {
        let mo = outer.m;
        let mi = inner.m;
        let m = [
            [mo[0][0] * mi[0][0] + mo[0][1] * mi[1][0], mo[0][0] * mi[0][1] + mo[0][1] * mi[1][1]],
            [mo[1][0] * mi[0][0] + mo[1][1] * mi[1][0], mo[1][0] * mi[0][1] + mo[1][1] * mi[1][1]],
        ];
        let t = [
            mo[0][0] * inner.t[0] + mo[0][1] * inner.t[1] + outer.t[0],
            mo[1][0] * inner.t[0] + mo[1][1] * inner.t[1] + outer.t[1],
        ];
        AffineTransform { m, t }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::xywh(x, y, w, h)
    }

    #[test]
    fn iou_half_overlap() {
        let v = iou(&bb(0.0, 0.0, 10.0, 10.0), &bb(0.0, 5.0, 10.0, 10.0));
        assert!((v - 50.0 / 150.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn iou_identical_and_disjoint() {
        let a = bb(3.0, 4.0, 7.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&bb(0.0, 0.0, 1.0, 1.0), &bb(5.0, 5.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn expand_squares_and_rects() {
        let e = expand(&bb(10.0, 10.0, 20.0, 20.0), 0.7);
        assert!((e.x - 3.0).abs() < 1e-12);
        assert!((e.y - 3.0).abs() < 1e-12);
        assert!((e.w - 34.0).abs() < 1e-12);
        assert!((e.h - 34.0).abs() < 1e-12);

        let e = expand(&bb(0.0, 0.0, 10.0, 30.0), 0.35);
        assert!((e.x - -1.75).abs() < 1e-12);
        assert!((e.y - -5.25).abs() < 1e-12);
        assert!((e.w - 13.5).abs() < 1e-12);
        assert!((e.h - 40.5).abs() < 1e-12);
    }

    #[test]
    fn expand_zero_rate_is_identity() {
        let a = bb(1.0, 2.0, 3.0, 4.0);
        let e = expand(&a, 0.0);
        assert_eq!(a, e);
    }

    #[test]
    fn affine_identity_and_translation() {
        let id = AffineTransform::IDENTITY;
        let b = bb(5.0, 6.0, 7.0, 8.0);
        assert_eq!(id.apply_box(&b), b);

        let t = AffineTransform::translation(3.0, -2.0);
        let m = t.apply_box(&b);
        assert_eq!(m, bb(8.0, 4.0, 7.0, 8.0));
    }

    #[test]
    fn affine_rejects_singular() {
        assert!(AffineTransform::new(1.0, 2.0, 0.0, 2.0, 4.0, 0.0).is_err());
        assert!(AffineTransform::new(f64::NAN, 0.0, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn box_rejects_bad_inputs() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 1.0, 0.5).is_err());
        assert!(BoundingBox::new(0.0, 0.0, 1.0, 1.0, 1.5).is_err());
        assert!(BoundingBox::new(f64::INFINITY, 0.0, 1.0, 1.0, 0.5).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64)
            .prop_map(|(x, y, w, h)| bb(x, y, w, h))
    }

    fn arb_affine() -> impl Strategy<Value = AffineTransform> {
        // Well-conditioned transforms: mild rotation/scale plus translation.
        (-0.3..0.3f64, 0.8..1.2f64, -10.0..10.0f64, -10.0..10.0f64)
            .prop_map(|(theta, s, tx, ty)| {
                let (sin, cos) = theta.sin_cos();
                AffineTransform { m: [[s * cos, -s * sin], [s * sin, s * cos]], t: [tx, ty] }
            })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            let ba = iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn expand_preserves_center_and_scales_area(a in arb_box(), rate in 0.0..2.0f64) {
            let e = expand(&a, rate);
            let (cx, cy) = a.center();
            let (ex, ey) = e.center();
            prop_assert!((cx - ex).abs() < 1e-9);
            prop_assert!((cy - ey).abs() < 1e-9);
            let expected = a.area() * (1.0 + rate) * (1.0 + rate);
            prop_assert!((e.area() - expected).abs() / expected.max(1e-9) < 1e-9);
        }

        #[test]
        fn compose_is_associative(a in arb_affine(), b in arb_affine(), c in arb_affine(),
                                  px in -100.0..100.0f64, py in -100.0..100.0f64) {
            let left = AffineTransform::compose(&AffineTransform::compose(&a, &b), &c);
            let right = AffineTransform::compose(&a, &AffineTransform::compose(&b, &c));
            let (lx, ly) = left.apply_point(px, py);
            let (rx, ry) = right.apply_point(px, py);
            prop_assert!((lx - rx).abs() < 1e-7);
            prop_assert!((ly - ry).abs() < 1e-7);
        }

        #[test]
        fn compose_matches_sequential_application(a in arb_affine(), b in arb_affine(),
                                                  px in -100.0..100.0f64, py in -100.0..100.0f64) {
            let (ix, iy) = b.apply_point(px, py);
            let (sx, sy) = a.apply_point(ix, iy);
            let (cx, cy) = AffineTransform::compose(&a, &b).apply_point(px, py);
            prop_assert!((sx - cx).abs() < 1e-8);
            prop_assert!((sy - cy).abs() < 1e-8);
        }

        #[test]
        fn rescaled_commutes_with_unit_change(a in arb_affine(),
                                              px in -100.0..100.0f64, py in -100.0..100.0f64) {
            // Transform in pixels then convert to fractions, vs convert
            // first and transform in fraction units.
            let (w, h) = (640.0, 360.0);
            let (qx, qy) = a.apply_point(px, py);
            let (fx, fy) = a.rescaled(1.0 / w, 1.0 / h).apply_point(px / w, py / h);
            prop_assert!((qx / w - fx).abs() < 1e-9);
            prop_assert!((qy / h - fy).abs() < 1e-9);
        }
    }

    #[test]
    fn rescaled_translation_is_per_axis() {
        let t = AffineTransform::translation(10.0, 5.0).rescaled(1.0 / 100.0, 1.0 / 50.0);
        assert_eq!(t.t, [0.1, 0.1]);
        assert!(t.m == [[1.0, 0.0], [0.0, 1.0]]);
    }
}
