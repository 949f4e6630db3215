use serde::{Deserialize, Serialize};

use crate::surf::Feature;

/// A correspondence between a previous-frame and a current-frame feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub prev: usize,
    pub curr: usize,
    pub distance: f64,
}

/// Matches features between consecutive frames.
///
/// Each previous feature proposes its nearest current feature (descriptor
/// distance, ties to the lower index) among those strictly within `radius`
/// pixels. Proposals under `theta` are accepted greedily by ascending
/// distance so that every current feature is used at most once. Flat
/// (zero) descriptors never match.
pub fn match_features(prev: &[Feature], curr: &[Feature], radius: f64, theta: f64) -> Vec<Match> {
    let r2 = radius * radius;
    let mut proposals: Vec<Match> = Vec::new();
    for (i, p) in prev.iter().enumerate() {
        if p.desc.is_zero() {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in curr.iter().enumerate() {
            if c.desc.is_zero() {
                continue;
            }
            let dx = p.point.x - c.point.x;
            let dy = p.point.y - c.point.y;
            if dx * dx + dy * dy >= r2 {
                continue;
            }
            let d2 = p.desc.distance_sq(&c.desc);
            if best.map_or(true, |(_, b)| d2 < b) {
                best = Some((j, d2));
            }
        }
        if let Some((j, d2)) = best {
            let d = d2.sqrt();
            if d < theta {
                proposals.push(Match {
                    prev: i,
                    curr: j,
                    distance: d,
                });
            }
        }
    }
    proposals.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.prev.cmp(&b.prev)));
    let mut used = vec![false; curr.len()];
    proposals.retain(|m| !std::mem::replace(&mut used[m.curr], true));
    proposals
}

/// Copies previous-frame memberships onto matched current features.
/// Returns how many were transferred.
pub fn transfer_memberships(matches: &[Match], prev: &[Feature], curr: &mut [Feature]) -> usize {
    let mut n = 0;
    for m in matches {
        if let Some(mem) = prev[m.prev].membership {
            curr[m.curr].membership = Some(mem);
            n += 1;
        }
    }
    n
}
