use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::PsfBank;

/// Magnitude of the 2-D DFT of `kernel` zero-padded to `size x size`.
pub fn magnitude_spectrum(kernel: &Array2<f64>, size: usize) -> Array2<f64> {
    let (h, w) = kernel.dim();
    assert!(size >= h && size >= w, "padding size smaller than kernel");
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);

    let mut data = vec![Complex64::new(0.0, 0.0); size * size];
    for ((y, x), &v) in kernel.indexed_iter() {
        data[y * size + x] = Complex64::new(v, 0.0);
    }
    for row in data.chunks_exact_mut(size) {
        fft.process(row);
    }
    let mut column = vec![Complex64::new(0.0, 0.0); size];
    for x in 0..size {
        for y in 0..size {
            column[y] = data[y * size + x];
        }
        fft.process(&mut column);
        for y in 0..size {
            data[y * size + x] = column[y];
        }
    }
    Array2::from_shape_fn((size, size), |(y, x)| data[y * size + x].norm())
}

fn unit_normalized(mut a: Array2<f64>) -> Array2<f64> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        a /= norm;
    }
    a
}

/// Minimum pairwise distance between the PSFs' magnitude spectra.
///
/// Each spectrum is computed at the bank's largest support and scaled to unit
/// L2 norm, so the score lies in `[0, sqrt(2)]`; larger means every pair of
/// depths is easier to tell apart.
pub fn spectral_discriminability(bank: &PsfBank) -> f64 {
    let size = bank.max_support_px();
    let spectra: Vec<Array2<f64>> = bank
        .psfs()
        .iter()
        .map(|p| unit_normalized(magnitude_spectrum(p.kernel(), size)))
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..spectra.len() {
        for j in i + 1..spectra.len() {
            let d = (&spectra[i] - &spectra[j])
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    if best.is_finite() {
        best
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(n^4) DFT, independent of the FFT path.
    fn brute_force_magnitude(kernel: &Array2<f64>, size: usize) -> Array2<f64> {
        let tau = std::f64::consts::TAU;
        Array2::from_shape_fn((size, size), |(v, u)| {
            let (mut re, mut im) = (0.0, 0.0);
            for ((y, x), &k) in kernel.indexed_iter() {
                let phase = -tau * ((u * x) as f64 + (v * y) as f64) / size as f64;
                re += k * phase.cos();
                im += k * phase.sin();
            }
            (re * re + im * im).sqrt()
        })
    }

    #[test]
    fn fft_matches_brute_force_dft() {
        let k = Array2::from_shape_fn((5, 5), |(y, x)| ((y * 7 + x * 3) % 5) as f64 / 10.0);
        let fast = magnitude_spectrum(&k, 8);
        let slow = brute_force_magnitude(&k, 8);
        for (a, b) in fast.iter().zip(slow.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_spectrum_is_flat_and_box_is_dirichlet() {
        let delta =
            Array2::from_shape_fn((3, 3), |(y, x)| if y == 1 && x == 1 { 1.0 } else { 0.0 });
        let flat = magnitude_spectrum(&delta, 3);
        assert!(flat.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let boxk = Array2::from_elem((3, 3), 1.0 / 9.0);
        let spec = magnitude_spectrum(&boxk, 3);
        // only DC survives for a full-period box
        assert!((spec[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(spec.iter().skip(1).all(|v| v.abs() < 1e-12));
    }
}
