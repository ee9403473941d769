use std::collections::BinaryHeap;

use crate::events::EventFrame;

/// Dot detection settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    /// Minimum total count of a blob (absolute, so it scales with the frame).
    pub min_mass: f64,
    /// Active pixels within this Chebyshev distance belong to the same blob
    /// (1 = plain 8-connectivity).
    pub link_radius_px: usize,
    /// Blobs whose bounding box exceeds this side length are treated as
    /// overlapping signatures and split; `None` disables splitting.
    pub split_extent_px: Option<usize>,
    /// Half-width of the box filter used to find seeds when splitting.
    pub smoothing_radius_px: usize,
    /// Seeds below this fraction of the blob's smoothed peak are merged.
    pub min_peak_fraction: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            min_mass: 1.0,
            link_radius_px: 1,
            split_extent_px: None,
            smoothing_radius_px: 2,
            min_peak_fraction: 0.3,
        }
    }
}

/// Intensity-weighted centroids of the active blobs in `frame`, in pixel
/// coordinates (pixel `i` spans `[i, i + 1)`).
pub fn detect_dots(frame: &EventFrame, min_mass: f64) -> Vec<(f64, f64)> {
    detect_dots_with(
        frame,
        &DetectConfig {
            min_mass,
            ..DetectConfig::default()
        },
    )
}

pub fn detect_dots_with(frame: &EventFrame, config: &DetectConfig) -> Vec<(f64, f64)> {
    let (h, w) = frame.counts.dim();
    let counts: Vec<f64> = frame.counts.iter().copied().collect();
    let mut label = vec![usize::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();

    for start in 0..w * h {
        if counts[start] <= 0.0 || label[start] != usize::MAX {
            continue;
        }
        let r = config.link_radius_px.max(1) as isize;
        let mut pixels = Vec::new();
        label[start] = start;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -r..=r {
                for dx in -r..=r {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if counts[j] > 0.0 && label[j] == usize::MAX {
                        label[j] = start;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();

        let (x0, y0, x1, y1) = bbox(&pixels, w);
        let oversized = config
            .split_extent_px
            .is_some_and(|limit| (x1 - x0 + 1).max(y1 - y0 + 1) > limit);
        if oversized {
            for part in split(&counts, w, &pixels, (x0, y0, x1, y1), config) {
                push_centroid(&mut out, &counts, w, &part, config.min_mass);
            }
        } else {
            push_centroid(&mut out, &counts, w, &pixels, config.min_mass);
        }
    }
    out
}

fn bbox(pixels: &[usize], w: usize) -> (usize, usize, usize, usize) {
    pixels
        .iter()
        .fold((usize::MAX, usize::MAX, 0, 0), |(x0, y0, x1, y1), &i| {
            let (x, y) = (i % w, i / w);
            (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
        })
}

fn push_centroid(
    out: &mut Vec<(f64, f64)>,
    counts: &[f64],
    w: usize,
    pixels: &[usize],
    min_mass: f64,
) {
    let (mut m, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let c = counts[i];
        m += c;
        sx += c * ((i % w) as f64 + 0.5);
        sy += c * ((i / w) as f64 + 0.5);
    }
    if m > 0.0 && m >= min_mass {
        out.push((sx / m, sy / m));
    }
}

/// Seeded watershed on a box-smoothed copy of one blob.
fn split(
    counts: &[f64],
    w: usize,
    pixels: &[usize],
    (x0, y0, x1, y1): (usize, usize, usize, usize),
    config: &DetectConfig,
) -> Vec<Vec<usize>> {
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let local = |i: usize| (i / w - y0) * bw + (i % w - x0);
    let mut inside = vec![false; bw * bh];
    let mut raw = vec![0.0; bw * bh];
    for &i in pixels {
        inside[local(i)] = true;
        raw[local(i)] = counts[i];
    }
    let r = config.smoothing_radius_px;
    let smooth = box_blur(&box_blur(&raw, bw, bh, r), bw, bh, r);
    let peak = pixels.iter().map(|&i| smooth[local(i)]).fold(0.0, f64::max);

    // Seeds: plateau-safe local maxima (strictly above earlier neighbours in
    // raster order, at least the later ones) over a (2r+1)^2 window.
    let mut seeds = Vec::new();
    for ly in 0..bh {
        for lx in 0..bw {
            let li = ly * bw + lx;
            let v = smooth[li];
            if !inside[li] || v < config.min_peak_fraction * peak {
                continue;
            }
            let mut is_max = true;
            'win: for ny in ly.saturating_sub(r.max(1))..(ly + r.max(1) + 1).min(bh) {
                for nx in lx.saturating_sub(r.max(1))..(lx + r.max(1) + 1).min(bw) {
                    let ni = ny * bw + nx;
                    if ni == li {
                        continue;
                    }
                    let u = smooth[ni];
                    if u > v || (u == v && ni < li) {
                        is_max = false;
                        break 'win;
                    }
                }
            }
            if is_max {
                seeds.push(li);
            }
        }
    }
    if seeds.len() <= 1 {
        return vec![pixels.to_vec()];
    }

    // priority flood, highest smoothed value first; ties by raster order
    let mut owner = vec![usize::MAX; bw * bh];
    let mut heap = BinaryHeap::new();
    for (k, &s) in seeds.iter().enumerate() {
        owner[s] = k;
        heap.push((smooth[s].to_bits(), std::cmp::Reverse(s)));
    }
    // same reach as the linking, so every pixel of the blob gets an owner
    let reach = config.link_radius_px.max(1);
    while let Some((_, std::cmp::Reverse(li))) = heap.pop() {
        let (lx, ly) = (li % bw, li / bw);
        for ny in ly.saturating_sub(reach)..(ly + reach + 1).min(bh) {
            for nx in lx.saturating_sub(reach)..(lx + reach + 1).min(bw) {
                let ni = ny * bw + nx;
                if inside[ni] && owner[ni] == usize::MAX {
                    owner[ni] = owner[li];
                    heap.push((smooth[ni].to_bits(), std::cmp::Reverse(ni)));
                }
            }
        }
    }

    let mut parts = vec![Vec::new(); seeds.len()];
    for &i in pixels {
        parts[owner[local(i)]].push(i);
    }
    parts
}

/// Separable box filter with clamped windows (mean over the in-bounds part).
fn box_blur(src: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b) = (x.saturating_sub(r), (x + r + 1).min(w));
            tmp[y * w + x] = src[y * w + a..y * w + b].iter().sum::<f64>() / (b - a) as f64;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let (a, b) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            out[y * w + x] = (a..b).map(|yy| tmp[yy * w + x]).sum::<f64>() / (b - a) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn frame(w: usize, h: usize, blobs: &[(usize, usize, f64)]) -> EventFrame {
        let mut f = EventFrame::zeros(w, h);
        for &(x, y, v) in blobs {
            f.counts[[y, x]] = v;
        }
        f
    }

    #[test]
    fn empty_frame_has_no_dots() {
        assert!(detect_dots(&EventFrame::zeros(8, 8), 0.0).is_empty());
    }

    #[test]
    fn weighted_centroid_of_one_blob() {
        let f = frame(10, 10, &[(3, 4, 1.0), (4, 4, 3.0)]);
        let dots = detect_dots(&f, 1.0);
        assert_eq!(dots.len(), 1);
        assert!((dots[0].0 - 4.25).abs() < 1e-12);
        assert!((dots[0].1 - 4.5).abs() < 1e-12);
    }

    #[test]
    fn diagonal_pixels_are_connected() {
        let f = frame(10, 10, &[(3, 3, 1.0), (4, 4, 1.0), (8, 8, 1.0)]);
        assert_eq!(detect_dots(&f, 0.0).len(), 2);
    }

    #[test]
    fn link_radius_bridges_gaps() {
        let f = frame(12, 5, &[(2, 2, 1.0), (5, 2, 1.0), (10, 2, 1.0)]);
        assert_eq!(detect_dots(&f, 0.0).len(), 3);
        let cfg = DetectConfig {
            min_mass: 0.0,
            link_radius_px: 3,
            ..DetectConfig::default()
        };
        assert_eq!(detect_dots_with(&f, &cfg), vec![(4.0, 2.5), (10.5, 2.5)]);
    }

    #[test]
    fn light_blobs_are_dropped() {
        let f = frame(10, 10, &[(1, 1, 1.0), (7, 7, 5.0)]);
        assert_eq!(detect_dots(&f, 2.0), vec![(7.5, 7.5)]);
    }

    #[test]
    fn touching_blobs_are_split_when_oversized() {
        // two 5x5 bumps joined by a thin bridge
        let mut counts = Array2::zeros((9, 20));
        for y in 2..7 {
            for x in 0..5 {
                let bump = 3.0 - (x as f64 - 2.0).abs().max((y as f64 - 4.0).abs());
                counts[[y, x + 1]] = bump;
                counts[[y, x + 13]] = bump;
            }
        }
        for x in 6..13 {
            counts[[4, x]] = 0.5;
        }
        let f = EventFrame { counts };
        assert_eq!(detect_dots(&f, 0.0).len(), 1);
        let cfg = DetectConfig {
            min_mass: 0.0,
            link_radius_px: 1,
            split_extent_px: Some(8),
            smoothing_radius_px: 1,
            min_peak_fraction: 0.3,
        };
        let mut dots = detect_dots_with(&f, &cfg);
        dots.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(dots.len(), 2);
        assert!((dots[0].0 - 3.5).abs() < 0.6 && (dots[1].0 - 15.5).abs() < 0.6);
        assert!(dots.iter().all(|d| (d.1 - 4.5).abs() < 1e-9));
    }

    #[test]
    fn scaling_does_not_move_centroids() {
        let f = frame(10, 10, &[(3, 4, 1.0), (4, 4, 3.0), (4, 5, 2.0)]);
        let a = detect_dots(&f, 0.0);
        let b = detect_dots(&f.scaled(7.3), 0.0);
        assert_eq!(a.len(), b.len());
        assert!((a[0].0 - b[0].0).abs() < 1e-12 && (a[0].1 - b[0].1).abs() < 1e-12);
    }
}
