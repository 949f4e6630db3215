use super::GrayImage;

/// Inclusive pixel rectangle. Coordinates may lie outside the image; every
/// lookup clips first, which amounts to zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub const fn new(x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Rectangle of `w`×`h` pixels with top-left corner `(x, y)`.
    pub const fn with_size(x: i64, y: i64, w: i64, h: i64) -> Self {
        Self::new(x, y, x + w - 1, y + h - 1)
    }

    /// Intersection with `[0, width) × [0, height)`, or `None` when empty.
    pub fn clip(&self, width: usize, height: usize) -> Option<Rect> {
        let x0 = self.x0.max(0);
        let y0 = self.y0.max(0);
        let x1 = self.x1.min(width as i64 - 1);
        let y1 = self.y1.min(height as i64 - 1);
        (x0 <= x1 && y0 <= y1).then_some(Rect { x0, y0, x1, y1 })
    }

    pub fn contained_in(&self, width: usize, height: usize) -> bool {
        self.x0 >= 0
            && self.y0 >= 0
            && self.x1 < width as i64
            && self.y1 < height as i64
            && self.x0 <= self.x1
            && self.y0 <= self.y1
    }
}

/// Summed-area table: `at(x, y) = Σ_{u≤x, v≤y} data(u, v)`.
///
/// Stored with a leading zero row and column so box sums need no branches.
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    // (width + 1) × (height + 1), row-major
    table: Vec<f64>,
}

impl IntegralImage {
    pub fn new(img: &GrayImage) -> Self {
        Self::from_values(img.width(), img.height(), img.data())
    }

    /// Builds the table from arbitrary (not necessarily normalized) values.
    ///
    /// # Panics
    /// If `values.len() != width * height`.
    pub fn from_values(width: usize, height: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), width * height, "value count mismatch");
        let stride = width + 1;
        let mut table = vec![0.0; stride * (height + 1)];
        for y in 0..height {
            let mut row_sum = 0.0;
            for x in 0..width {
                row_sum += values[y * width + x];
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row_sum;
            }
        }
        Self {
            width,
            height,
            table,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// Inclusive cumulative sum at `(x, y)`.
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.table[(y + 1) * (self.width + 1) + x + 1]
    }

    pub fn total(&self) -> f64 {
        self.at(self.width - 1, self.height - 1)
    }

    /// Sum of the pixels inside `r`, clipped to the image.
    #[inline]
    pub fn box_sum(&self, r: Rect) -> f64 {
        match r.clip(self.width, self.height) {
            Some(c) => self.box_sum_unchecked(c.x0 as usize, c.y0 as usize, c.x1 as usize, c.y1 as usize),
            None => 0.0,
        }
    }

    /// Four-corner lookup for a rectangle already known to be inside.
    #[inline]
    pub(crate) fn box_sum_unchecked(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.width + 1;
        let a = self.table[y0 * s + x0];
        let b = self.table[y0 * s + x1 + 1];
        let c = self.table[(y1 + 1) * s + x0];
        let d = self.table[(y1 + 1) * s + x1 + 1];
        d - b - c + a
    }

    /// Horizontal Haar response: right half minus left half of the
    /// `size`×`size` window centered on `(cx, cy)`.
    ///
    /// The window spans `[cx - size/2, cx + size/2 - 1]` on both axes.
    pub fn haar_x(&self, cx: i64, cy: i64, size: usize) -> f64 {
        let h = half(size);
        let right = self.box_sum(Rect::new(cx, cy - h, cx + h - 1, cy + h - 1));
        let left = self.box_sum(Rect::new(cx - h, cy - h, cx - 1, cy + h - 1));
        right - left
    }

    /// Vertical Haar response: bottom half minus top half.
    pub fn haar_y(&self, cx: i64, cy: i64, size: usize) -> f64 {
        let h = half(size);
        let bottom = self.box_sum(Rect::new(cx - h, cy, cx + h - 1, cy + h - 1));
        let top = self.box_sum(Rect::new(cx - h, cy - h, cx + h - 1, cy - 1));
        bottom - top
    }

    /// Whether the whole Haar window around `(cx, cy)` lies inside the image.
    pub fn haar_fits(&self, cx: i64, cy: i64, size: usize) -> bool {
        let h = half(size);
        Rect::new(cx - h, cy - h, cx + h - 1, cy + h - 1).contained_in(self.width, self.height)
    }
}

fn half(size: usize) -> i64 {
    assert!(size >= 2 && size % 2 == 0, "haar size must be even and >= 2, got {size}");
    (size / 2) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_values(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|_| rng.random::<f64>()).collect()
    }

    fn brute_sum(values: &[f64], w: usize, h: usize, r: Rect) -> f64 {
        let mut s = 0.0;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1 {
                    s += values[y as usize * w + x as usize];
                }
            }
        }
        s
    }

    #[test]
    fn zeros_and_ones() {
        let z = IntegralImage::from_values(3, 3, &[0.0; 9]);
        for y in 0..3 {
            for x in 0..3 {
                assert_eq!(z.at(x, y), 0.0);
            }
        }
        let o = IntegralImage::from_values(3, 3, &[1.0; 9]);
        assert_eq!(o.at(2, 2), 9.0);
        assert_eq!(o.at(0, 2), 3.0);
    }

    #[test]
    fn cumsum_matches_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_values(&mut rng, 5, 5);
        let ii = IntegralImage::from_values(5, 5, &v);
        for y in 0..5 {
            for x in 0..5 {
                let mut s = 0.0;
                for v2 in 0..=y {
                    for u in 0..=x {
                        s += v[v2 * 5 + u];
                    }
                }
                assert!((ii.at(x, y) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn box_sum_cases() {
        let ii = IntegralImage::from_values(4, 4, &[1.0; 16]);
        assert_eq!(ii.box_sum(Rect::new(0, 0, 3, 3)), 16.0);
        assert_eq!(ii.box_sum(Rect::new(10, 10, 12, 12)), 0.0);
        assert_eq!(ii.box_sum(Rect::new(-5, -5, -1, 2)), 0.0);
        assert_eq!(ii.box_sum(Rect::new(-2, -2, 1, 1)), 4.0);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_values(&mut rng, 6, 6);
        let ii = IntegralImage::from_values(6, 6, &v);
        for _ in 0..200 {
            let x0 = rng.random_range(-3..8);
            let y0 = rng.random_range(-3..8);
            let r = Rect::new(x0, y0, x0 + rng.random_range(0..6), y0 + rng.random_range(0..6));
            assert!((ii.box_sum(r) - brute_sum(&v, 6, 6, r)).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_constant_and_ramp() {
        let c = IntegralImage::from_values(12, 12, &[0.3; 144]);
        assert!(c.haar_x(6, 6, 4).abs() < 1e-12);
        assert!(c.haar_y(6, 6, 4).abs() < 1e-12);

        let ramp: Vec<f64> = (0..144).map(|i| (i % 12) as f64).collect();
        let ii = IntegralImage::from_values(12, 12, &ramp);
        for cy in 2..=10 {
            for cx in 2..=10 {
                assert!(ii.haar_x(cx, cy, 4) > 0.0);
                assert_eq!(ii.haar_y(cx, cy, 4), 0.0);
            }
        }
        // left half {4,5} × 4 rows vs right half {6,7} × 4 rows
        assert_eq!(ii.haar_x(6, 6, 4), (6.0 + 7.0 - 4.0 - 5.0) * 4.0);
    }

    #[test]
    fn haar_matches_two_box_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (9, 7);
        let v = random_values(&mut rng, w, h);
        let ii = IntegralImage::from_values(w, h, &v);
        for _ in 0..200 {
            let cx = rng.random_range(-2..11);
            let cy = rng.random_range(-2..9);
            let size = 2 * rng.random_range(1..4usize);
            let hs = (size / 2) as i64;
            let hx = brute_sum(&v, w, h, Rect::new(cx, cy - hs, cx + hs - 1, cy + hs - 1))
                - brute_sum(&v, w, h, Rect::new(cx - hs, cy - hs, cx - 1, cy + hs - 1));
            let hy = brute_sum(&v, w, h, Rect::new(cx - hs, cy, cx + hs - 1, cy + hs - 1))
                - brute_sum(&v, w, h, Rect::new(cx - hs, cy - hs, cx + hs - 1, cy - 1));
            assert!((ii.haar_x(cx, cy, size) - hx).abs() < 1e-12);
            assert!((ii.haar_y(cx, cy, size) - hy).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_antisymmetric_under_mirror() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (w, h) = (10, 8);
        let v = random_values(&mut rng, w, h);
        let mirrored: Vec<f64> = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                v[y * w + (w - 1 - x)]
            })
            .collect();
        let a = IntegralImage::from_values(w, h, &v);
        let b = IntegralImage::from_values(w, h, &mirrored);
        for cx in -1..=(w as i64) {
            for cy in 0..h as i64 {
                let lhs = b.haar_x(w as i64 - cx, cy, 4);
                assert!((lhs + a.haar_x(cx, cy, 4)).abs() < 1e-12);
            }
        }
    }

    #[test]
    #[should_panic]
    fn haar_rejects_odd_size() {
        IntegralImage::from_values(4, 4, &[0.0; 16]).haar_x(2, 2, 3);
    }
}
