use std::cmp::Ordering;
use std::collections::HashMap;

use super::hessian::{filter_scale, ResponseStack};
use super::{DetectorParams, InterestPoint};

/// Strict 3×3×3 maxima of the response stack above `params.threshold`,
/// sorted strongest first.
///
/// The two middle layers of each octave are searched, plus the finest
/// layer of the first octave, which has no finer neighbor and is compared
/// against its own layer and the one above only. Candidates are restricted
/// to pixels where the next larger filter (and its 3×3 neighborhood) fits
/// inside the image.
pub fn detect(stack: &ResponseStack, params: &DetectorParams) -> Vec<InterestPoint> {
    let (w, h) = (stack.width(), stack.height());
    let mut found: Vec<(usize, InterestPoint)> = Vec::new();

    for (o, octave) in stack.octaves.iter().enumerate() {
        let first: usize = if o == 0 { 0 } else { 1 };
        for mid in first..=2 {
            let below = mid.checked_sub(1).map(|i| &stack.layers[octave[i]].responses[..]);
            let layer = &stack.layers[octave[mid]];
            let above = &stack.layers[octave[mid + 1]];
            let margin = above.border() + 1;
            if w <= 2 * margin || h <= 2 * margin {
                continue;
            }
            for y in margin..h - margin {
                for x in margin..w - margin {
                    let v = layer.response(x, y);
                    if v <= params.threshold {
                        continue;
                    }
                    if is_strict_max(v, x, y, [below, Some(&layer.responses), Some(&above.responses)], w) {
                        found.push((
                            octave[mid],
                            InterestPoint {
                                x: x as f64,
                                y: y as f64,
                                scale: filter_scale(layer.filter),
                                strength: v,
                                laplacian_positive: layer.laplacian[y * w + x],
                            },
                        ));
                    }
                }
            }
        }
    }

    found.sort_by(|(la, a), (lb, b)| {
        b.strength
            .total_cmp(&a.strength)
            .then(la.cmp(lb))
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    found.into_iter().map(|(_, p)| p).collect()
}

fn is_strict_max(v: f64, x: usize, y: usize, layers: [Option<&[f64]>; 3], w: usize) -> bool {
    for (li, layer) in layers.iter().enumerate() {
        let Some(layer) = layer else { continue };
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if li == 1 && xx == x && yy == y {
                    continue;
                }
                if layer[yy * w + xx] >= v {
                    return false;
                }
            }
        }
    }
    true
}

/// Keeps the strongest point of every `cell`×`cell` grid cell.
///
/// Equal strengths are resolved towards the smaller `(y, x)`. The result is
/// ordered strongest first.
pub fn grid_select(points: &[InterestPoint], cell: usize, width: usize, height: usize) -> Vec<InterestPoint> {
    assert!(cell > 0, "grid cell must be positive");
    let cols = width.div_ceil(cell);
    let mut best: HashMap<usize, InterestPoint> = HashMap::new();
    for p in points {
        if p.x < 0.0 || p.y < 0.0 || p.x >= width as f64 || p.y >= height as f64 {
            continue;
        }
        let key = (p.y as usize / cell) * cols + p.x as usize / cell;
        match best.get(&key) {
            Some(cur) if stronger(cur, p) != Ordering::Less => {}
            _ => {
                best.insert(key, *p);
            }
        }
    }
    let mut out: Vec<InterestPoint> = best.into_values().collect();
    out.sort_by(|a, b| stronger(b, a));
    out
}

/// `Greater` when `a` beats `b`.
fn stronger(a: &InterestPoint, b: &InterestPoint) -> Ordering {
    a.strength
        .total_cmp(&b.strength)
        .then(b.y.total_cmp(&a.y))
        .then(b.x.total_cmp(&a.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::GrayImage;
    use crate::surf::hessian::hessian_responses;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64, strength: f64) -> InterestPoint {
        InterestPoint {
            x,
            y,
            scale: 2.0,
            strength,
            laplacian_positive: false,
        }
    }

    #[test]
    fn grid_keeps_strongest_per_cell() {
        let pts = [pt(1.0, 1.0, 3.0), pt(5.0, 6.0, 5.0)];
        let sel = grid_select(&pts, 16, 64, 64);
        assert_eq!(sel, vec![pts[1]]);

        let spread = [pt(1.0, 1.0, 3.0), pt(20.0, 1.0, 1.0), pt(1.0, 40.0, 2.0)];
        assert_eq!(grid_select(&spread, 16, 64, 64).len(), 3);
    }

    #[test]
    fn grid_ties_prefer_smaller_y_then_x() {
        let pts = [pt(3.0, 2.0, 1.0), pt(2.0, 2.0, 1.0), pt(0.0, 5.0, 1.0)];
        assert_eq!(grid_select(&pts, 8, 8, 8), vec![pts[1]]);
    }

    #[test]
    fn grid_matches_brute_force_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (w, h, cell) = (100, 70, 12);
        let pts: Vec<_> = (0..400)
            .map(|_| {
                pt(
                    rng.random_range(0..w) as f64,
                    rng.random_range(0..h) as f64,
                    (rng.random_range(0..50) as f64) * 0.5,
                )
            })
            .collect();
        let sel = grid_select(&pts, cell, w, h);
        assert!(sel.len() <= w.div_ceil(cell) * h.div_ceil(cell));

        let mut expected = Vec::new();
        for cy in 0..h.div_ceil(cell) {
            for cx in 0..w.div_ceil(cell) {
                let mut winner: Option<InterestPoint> = None;
                for p in &pts {
                    if p.x as usize / cell != cx || p.y as usize / cell != cy {
                        continue;
                    }
                    winner = match winner {
                        None => Some(*p),
                        Some(q) => {
                            let better = p.strength > q.strength
                                || (p.strength == q.strength && (p.y, p.x) < (q.y, q.x));
                            Some(if better { *p } else { q })
                        }
                    };
                }
                expected.extend(winner);
            }
        }
        let key = |p: &InterestPoint| (p.y as i64, p.x as i64, p.strength.to_bits());
        let mut a: Vec<_> = sel.iter().map(key).collect();
        let mut b: Vec<_> = expected.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        // no two selected points share a cell
        let mut cells: Vec<_> = sel.iter().map(|p| (p.x as usize / cell, p.y as usize / cell)).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), sel.len());
    }

    #[test]
    fn constant_image_detects_nothing() {
        let img = GrayImage::constant(64, 64, 0.4);
        let params = DetectorParams::default();
        let stack = hessian_responses(&img.integral(), &params).unwrap();
        assert!(detect(&stack, &params).is_empty());
    }
}
