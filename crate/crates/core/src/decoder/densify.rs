use ndarray::Array2;

use super::decode::SparsePoint;
use crate::error::{Error, Result};

/// Points below this confidence are ignored when densifying.
pub const MIN_CONFIDENCE: f64 = 0.1;
/// Side of the median window applied after nearest-neighbour fill.
pub const MEDIAN_WINDOW: usize = 5;

/// Nearest-neighbour (Voronoi) fill from the confident sparse points,
/// followed by a 5x5 median. Ties in distance go to the earlier point.
pub fn densify(points: &[SparsePoint], width: usize, height: usize) -> Result<Array2<f64>> {
    let usable: Vec<&SparsePoint> = points
        .iter()
        .filter(|p| p.confidence >= MIN_CONFIDENCE && p.depth_m.is_finite())
        .collect();
    if usable.is_empty() {
        return Err(Error::NoUsablePoints);
    }
    let nearest = Array2::from_shape_fn((height, width), |(y, x)| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut best = (f64::INFINITY, 0.0);
        for p in &usable {
            let d = (p.x - px).powi(2) + (p.y - py).powi(2);
            if d < best.0 {
                best = (d, p.depth_m);
            }
        }
        best.1
    });
    Ok(median_filter(&nearest, MEDIAN_WINDOW / 2))
}

/// Median over a `(2r+1)^2` window clipped at the borders; even-sized
/// windows take the lower middle value.
fn median_filter(img: &Array2<f64>, r: usize) -> Array2<f64> {
    let (h, w) = img.dim();
    let mut window = Vec::with_capacity((2 * r + 1) * (2 * r + 1));
    Array2::from_shape_fn((h, w), |(y, x)| {
        window.clear();
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                window.push(img[[yy, xx]]);
            }
        }
        window.sort_by(f64::total_cmp);
        window[(window.len() - 1) / 2]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, d: f64, c: f64) -> SparsePoint {
        SparsePoint {
            x,
            y,
            depth_m: d,
            confidence: c,
        }
    }

    #[test]
    fn single_point_gives_constant_map() {
        let m = densify(&[pt(3.0, 4.0, 1.7, 0.9)], 12, 9).unwrap();
        assert!(m.iter().all(|&v| v == 1.7));
    }

    #[test]
    fn low_confidence_points_are_ignored() {
        let m = densify(&[pt(3.0, 4.0, 1.7, 0.9), pt(5.0, 4.0, 0.9, 0.05)], 12, 9).unwrap();
        assert!(m.iter().all(|&v| v == 1.7));
        assert!(matches!(
            densify(&[pt(1.0, 1.0, 1.0, 0.01)], 4, 4),
            Err(Error::NoUsablePoints)
        ));
        assert!(matches!(densify(&[], 4, 4), Err(Error::NoUsablePoints)));
    }

    #[test]
    fn two_clusters_split_at_the_bisector() {
        let mut pts = Vec::new();
        for y in [5.0, 15.0, 25.0] {
            pts.push(pt(5.0, y, 1.0, 1.0));
            pts.push(pt(35.0, y, 2.0, 1.0));
        }
        let m = densify(&pts, 40, 30).unwrap();
        for ((_, x), &v) in m.indexed_iter() {
            let expected = if (x as f64) + 0.5 < 20.0 { 1.0 } else { 2.0 };
            assert_eq!(v, expected, "x={x}");
        }
    }

    #[test]
    fn median_removes_isolated_outliers() {
        let mut img = Array2::from_elem((7, 7), 1.0);
        img[[3, 3]] = 9.0;
        let out = median_filter(&img, 2);
        assert!(out.iter().all(|&v| v == 1.0));
    }
}
