use apertura::events::blur_image;
use apertura::optics::{
    blur_circle_size, blur_diameter_px, build_psf_bank, synthesize_psf, ApertureMask, LensConfig,
    BUILTIN_APERTURES,
};
use apertura::scene::{render_latent, DotPattern, Scene};
use ndarray::s;
use proptest::prelude::*;

fn lens_strategy() -> impl Strategy<Value = LensConfig> {
    (4e-3..60e-3f64, 1.0..16.0f64, 1.5..40.0f64)
        .prop_map(|(f, n, k)| LensConfig::new(f, n, f * k, 20e-6, 320, 240).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blur_grows_beyond_focus_toward_its_asymptote(lens in lens_strategy(), a in 1.01..5.0f64, b in 1.01..5.0f64) {
        let zf = lens.focus_distance_m;
        let (z1, z2) = (zf * a.min(b), zf * a.max(b) + 1e-3);
        let (s1, s2) = (blur_circle_size(&lens, z1).unwrap(), blur_circle_size(&lens, z2).unwrap());
        let f = lens.focal_length_m;
        let limit = f * f / (lens.f_number * (zf - f));
        prop_assert!(s1 < s2);
        prop_assert!(s2 < limit);
        prop_assert_eq!(blur_circle_size(&lens, zf).unwrap(), 0.0);
    }

    #[test]
    fn psfs_are_normalized_and_cover_the_blur_circle(k in 0usize..6, z in 0.55..4.0f64, n in 1.0..4.0f64) {
        let lens = LensConfig::default().with_focus(0.5);
        let lens = LensConfig { f_number: n, ..lens };
        let ap = ApertureMask::builtin(BUILTIN_APERTURES[k]).unwrap();
        let psf = synthesize_psf(&lens, &ap, z).unwrap();
        let kernel = psf.kernel();
        prop_assert!(kernel.iter().all(|&v| v >= 0.0));
        prop_assert!((kernel.sum() - 1.0).abs() < 1e-12);
        let support = psf.support_px();
        prop_assert_eq!(support % 2, 1);
        let d = blur_diameter_px(&lens, z).unwrap();
        prop_assert!(support as f64 >= d.min(1.0));
        prop_assert!((support as f64) < d.max(1.0) + 2.0);
    }
}

#[test]
fn mirrored_mask_gives_mirrored_psf() {
    let lens = LensConfig::default();
    for name in BUILTIN_APERTURES {
        let ap = ApertureMask::builtin(name).unwrap();
        let flipped = ApertureMask::new(
            ap.grid().slice(s![.., ..;-1]).to_owned(),
            ap.physical_diameter_m(),
            "m",
        )
        .unwrap();
        for z in [0.8, 1.3, 2.4] {
            let a = synthesize_psf(&lens, &ap, z).unwrap();
            let b = synthesize_psf(&lens, &flipped, z).unwrap();
            let a_mirrored = a.kernel().slice(s![.., ..;-1]).to_owned();
            let err = (&a_mirrored - b.kernel())
                .mapv(f64::abs)
                .fold(0.0, |m: f64, &v| m.max(v));
            assert!(err < 1e-12, "{name} at {z} m: {err}");
        }
    }
}

#[test]
fn defocus_conserves_dot_energy() {
    let lens = LensConfig::default();
    let pattern = DotPattern::grid(6, 4, 1.0, 1.5).unwrap();
    for name in ["open", "w"] {
        let ap = ApertureMask::builtin(name).unwrap();
        let bank = build_psf_bank(&lens, &ap, 0.8, 2.5, 8).unwrap();
        for &z in bank.depths_m() {
            let latent = render_latent(&Scene::wall(z), &pattern, &lens).unwrap();
            let blurred = blur_image(&latent, &bank).unwrap();
            let (before, after) = (latent.intensity.sum(), blurred.intensity.sum());
            assert!(
                (before - after).abs() < 1e-9 * before,
                "{name} at {z}: {before} vs {after}"
            );
        }
    }
}

#[test]
fn bank_blur_sizes_follow_the_thin_lens() {
    let lens = LensConfig::default();
    let bank =
        build_psf_bank(&lens, &ApertureMask::builtin("open").unwrap(), 0.8, 2.5, 16).unwrap();
    let mut last = 0;
    for psf in bank.psfs() {
        let d = blur_diameter_px(&lens, psf.depth_m()).unwrap();
        assert_eq!(psf.support_px(), (d.ceil() as usize) | 1);
        assert!(psf.support_px() >= last);
        last = psf.support_px();
    }
}

/// Best IoU between the half-max support of `kernel` and the binarized mask
/// scaled to diameters around `d` pixels.
fn best_mask_iou(kernel: &ndarray::Array2<f64>, mask: &ndarray::Array2<f64>, d: f64) -> f64 {
    let n = kernel.nrows();
    let m = mask.nrows() as f64;
    let peak = kernel.iter().copied().fold(0.0, f64::max);
    let c = (n as f64 - 1.0) / 2.0;
    (0..=60)
        .map(|k| {
            let diam = d * (0.7 + 0.01 * k as f64);
            let (mut inter, mut union) = (0, 0);
            for ((y, x), &v) in kernel.indexed_iter() {
                let u = ((x as f64 - c) / diam + 0.5) * m;
                let w = ((y as f64 - c) / diam + 0.5) * m;
                let open =
                    u >= 0.0 && w >= 0.0 && u < m && w < m && mask[[w as usize, u as usize]] >= 0.5;
                let lit = v >= peak / 2.0;
                inter += usize::from(open && lit);
                union += usize::from(open || lit);
            }
            inter as f64 / union.max(1) as f64
        })
        .fold(0.0, f64::max)
}

#[test]
fn half_max_support_is_a_scaled_mask() {
    let lens = LensConfig::default();
    for name in BUILTIN_APERTURES {
        let ap = ApertureMask::builtin(name).unwrap();
        for z in [0.8, 1.2, 1.8, 2.5] {
            let d = blur_diameter_px(&lens, z).unwrap();
            if d < 3.0 {
                continue;
            }
            let psf = synthesize_psf(&lens, &ap, z).unwrap();
            let iou = best_mask_iou(psf.kernel(), ap.grid(), d);
            assert!(iou >= 0.8, "{name} at {z} m: IoU {iou}");
        }
    }
}
