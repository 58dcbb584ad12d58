//! FAST-9 corners on a real-valued phase congruency map, thinned by 3×3
//! non-maximum suppression and spread over the image by grid bucketing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::Raster;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC_LENGTH: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FastConfig {
    /// Intensity margin on the PC scale.
    pub threshold: f64,
    pub target_count: usize,
    /// Buckets along x and y.
    pub grid: (usize, usize),
    /// Minimum distance from every image border.
    pub margin: usize,
}

impl Default for FastConfig {
    fn default() -> Self {
        FastConfig {
            threshold: 0.05,
            target_count: 1000,
            grid: (8, 8),
            margin: 52,
        }
    }
}

impl FastConfig {
    /// Border margin that keeps both matching windows inside the image.
    pub fn margin_for_windows(template_size: usize, fine_window: usize) -> usize {
        template_size.max(fine_window) / 2 + 2
    }
}

/// Segment-test score at `(x, y)`, or `None` when no arc of nine contiguous
/// circle pixels is uniformly brighter or darker than the centre by more
/// than `threshold`. The score is the larger of the summed excess over the
/// bright set and over the dark set.
pub fn fast_score(r: &Raster, x: usize, y: usize, threshold: f64) -> Option<f64> {
    let c = r.get(x, y);
    let mut ring = [0.0; 16];
    for (v, &(dx, dy)) in ring.iter_mut().zip(&CIRCLE) {
        *v = r.get((x as isize + dx) as usize, (y as isize + dy) as usize);
    }
    let bright = |v: f64| v > c + threshold;
    let dark = |v: f64| v < c - threshold;
    if !has_arc(&ring, bright) && !has_arc(&ring, dark) {
        return None;
    }
    let sb: f64 = ring.iter().filter(|&&v| bright(v)).map(|&v| v - c - threshold).sum();
    let sd: f64 = ring.iter().filter(|&&v| dark(v)).map(|&v| c - v - threshold).sum();
    Some(sb.max(sd))
}

fn has_arc(ring: &[f64; 16], pred: impl Fn(f64) -> bool) -> bool {
    let mut run = 0;
    for i in 0..(16 + ARC_LENGTH - 1) {
        if pred(ring[i % 16]) {
            run += 1;
            if run >= ARC_LENGTH {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

/// Detects FAST-9 corners on `pc` and keeps at most `cfg.target_count`,
/// filling every grid cell's quota round by round. The result is sorted by
/// descending score, ties broken by lower `y` then lower `x`.
pub fn detect_fast(pc: &Raster, cfg: &FastConfig) -> Vec<Keypoint> {
    let (w, h) = (pc.width(), pc.height());
    let border = cfg.margin.max(3);
    if cfg.target_count == 0 || w <= 2 * border || h <= 2 * border {
        return Vec::new();
    }
    let scores: Vec<f64> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            (0..w).map(move |x| {
                if x < 3 || y < 3 || x + 3 >= w || y + 3 >= h {
                    0.0
                } else {
                    fast_score(pc, x, y, cfg.threshold).unwrap_or(0.0)
                }
            })
        })
        .collect();

    let mut corners = Vec::new();
    for y in border..h - border {
        for x in border..w - border {
            let s = scores[y * w + x];
            if s > 0.0 && is_local_max(&scores, w, x, y) {
                corners.push(Keypoint { x, y, score: s });
            }
        }
    }
    select_bucketed(corners, w, h, cfg)
}

/// No neighbour scores higher; on equal scores the earlier pixel in raster
/// order wins.
fn is_local_max(scores: &[f64], w: usize, x: usize, y: usize) -> bool {
    let s = scores[y * w + x];
    for ny in y - 1..=y + 1 {
        for nx in x - 1..=x + 1 {
            if (nx, ny) == (x, y) {
                continue;
            }
            let q = scores[ny * w + nx];
            if q > s || (q == s && (ny, nx) < (y, x)) {
                return false;
            }
        }
    }
    true
}

fn by_score(a: &Keypoint, b: &Keypoint) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.y.cmp(&b.y))
        .then(a.x.cmp(&b.x))
}

fn select_bucketed(corners: Vec<Keypoint>, w: usize, h: usize, cfg: &FastConfig) -> Vec<Keypoint> {
    let (gx, gy) = (cfg.grid.0.max(1), cfg.grid.1.max(1));
    let mut cells: Vec<Vec<Keypoint>> = vec![Vec::new(); gx * gy];
    for kp in corners {
        let cx = kp.x * gx / w;
        let cy = kp.y * gy / h;
        cells[cy * gx + cx].push(kp);
    }
    for c in &mut cells {
        c.sort_by(by_score);
    }
    let mut selected = Vec::with_capacity(cfg.target_count);
    let mut round = 0;
    while selected.len() < cfg.target_count {
        let mut tier: Vec<Keypoint> = cells.iter().filter_map(|c| c.get(round).copied()).collect();
        if tier.is_empty() {
            break;
        }
        tier.sort_by(by_score);
        let take = (cfg.target_count - selected.len()).min(tier.len());
        selected.extend_from_slice(&tier[..take]);
        round += 1;
    }
    selected.sort_by(by_score);
    selected
}

/// Cell of the selection grid that `kp` falls in.
pub fn grid_cell(kp: &Keypoint, width: usize, height: usize, grid: (usize, usize)) -> (usize, usize) {
    (kp.x * grid.0.max(1) / width, kp.y * grid.1.max(1) / height)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(margin: usize, count: usize) -> FastConfig {
        FastConfig {
            threshold: 0.1,
            target_count: count,
            grid: (8, 8),
            margin,
        }
    }

    #[test]
    fn constant_map_has_no_corners() {
        assert!(detect_fast(&Raster::filled(64, 64, 0.5), &cfg(5, 100)).is_empty());
    }

    /// Brute force over every pixel: exactly one passes the segment test.
    #[test]
    fn single_dot() {
        let r = Raster::from_fn(32, 32, |x, y| if (x, y) == (15, 17) { 1.0 } else { 0.0 });
        let passing: Vec<(usize, usize)> = (3..29)
            .flat_map(|y| (3..29).map(move |x| (x, y)))
            .filter(|&(x, y)| fast_score(&r, x, y, 0.1).is_some())
            .collect();
        assert_eq!(passing, vec![(15, 17)]);
        let kps = detect_fast(&r, &cfg(4, 10));
        assert_eq!(kps.len(), 1);
        assert_eq!((kps[0].x, kps[0].y), (15, 17));
        assert!((kps[0].score - 16.0 * 0.9).abs() < 1e-12);
    }

    #[test]
    fn arc_requires_nine_contiguous() {
        let mut ring = [0.0; 16];
        for v in ring.iter_mut().take(8) {
            *v = 1.0;
        }
        assert!(!has_arc(&ring, |v| v > 0.5));
        // wrap-around arc of nine
        let mut ring = [0.0; 16];
        for i in [12, 13, 14, 15, 0, 1, 2, 3, 4] {
            ring[i] = 1.0;
        }
        assert!(has_arc(&ring, |v| v > 0.5));
    }

    #[test]
    fn margin_is_respected() {
        let r = Raster::from_fn(64, 64, |x, y| if x % 9 == 4 && y % 9 == 4 { 1.0 } else { 0.0 });
        let kps = detect_fast(&r, &cfg(12, 1000));
        assert!(!kps.is_empty());
        assert!(kps.iter().all(|k| k.x >= 12 && k.y >= 12 && k.x < 52 && k.y < 52));
    }

    #[test]
    fn plateau_keeps_first_in_raster_order() {
        // two adjacent dots with identical scores
        let r = Raster::from_fn(32, 32, |x, y| if y == 15 && (x == 15 || x == 16) { 1.0 } else { 0.0 });
        let kps = detect_fast(&r, &cfg(4, 10));
        let at: Vec<_> = kps.iter().map(|k| (k.x, k.y)).collect();
        assert_eq!(at, vec![(15, 15)]);
    }
}
