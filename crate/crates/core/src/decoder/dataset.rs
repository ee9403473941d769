use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{simulate_event_frame, MotionProfile};
use crate::formats::{depth_png, evf};
use crate::io;
use crate::optics::{LensConfig, PsfBank};
use crate::scene::{render_latent, DotLayout, DotPattern, Scene};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Provenance of one (event frame, depth map) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub index: usize,
    pub events_file: String,
    pub depth_file: String,
    pub depth_scale_m_per_unit: f64,
    pub width: usize,
    pub height: usize,
    pub event_total: f64,
    pub lens: LensConfig,
    pub aperture: String,
    pub aperture_diameter_m: f64,
    pub bank_z_min_m: f64,
    pub bank_z_max_m: f64,
    pub bank_depths: usize,
    pub motion: MotionProfile,
    pub threshold: f64,
    pub pattern_layout: DotLayout,
    pub pattern_dots: usize,
    pub dot_radius_px: f64,
    pub scene: Scene,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }
}

/// Simulates every scene and writes `sample_NNNN.evf`, `sample_NNNN_depth.png`
/// (plus scale sidecar) and `manifest.jsonl` into `out_dir`.
///
/// Surfaces use the nearest bank PSF, exactly as a learned decoder trained on
/// the bank would see them.
pub fn export_training_dataset(
    bank: &PsfBank,
    pattern: &DotPattern,
    scenes: &[Scene],
    motion: &MotionProfile,
    threshold: f64,
    out_dir: &Path,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let lens = bank.lens();
    let mut manifest = Manifest::default();
    for (index, scene) in scenes.iter().enumerate() {
        let latent = render_latent(scene, pattern, lens)?;
        let frame = simulate_event_frame(&latent, bank, motion, threshold)?;
        let events_file = format!("sample_{index:04}.evf");
        let depth_file = format!("sample_{index:04}_depth.png");
        io::write_atomic(&out_dir.join(&events_file), &evf::encode(&frame))?;
        let scale = depth_png::write(&out_dir.join(&depth_file), &latent.depth_map)?;
        manifest.records.push(ManifestRecord {
            index,
            events_file,
            depth_file,
            depth_scale_m_per_unit: scale,
            width: frame.width(),
            height: frame.height(),
            event_total: frame.total(),
            lens: *lens,
            aperture: bank.aperture().name().to_string(),
            aperture_diameter_m: bank.aperture().physical_diameter_m(),
            bank_z_min_m: bank.z_min(),
            bank_z_max_m: bank.z_max(),
            bank_depths: bank.len(),
            motion: *motion,
            threshold,
            pattern_layout: pattern.layout(),
            pattern_dots: pattern.len(),
            dot_radius_px: pattern.dot_radius_px(),
            scene: scene.clone(),
        });
    }
    io::write_atomic(&out_dir.join(MANIFEST_FILE), manifest.to_jsonl().as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{build_psf_bank, ApertureMask};
    use crate::scene::{Layer, Rect};

    #[test]
    fn writes_pairs_and_manifest() {
        let lens = LensConfig::default().with_sensor(64, 48);
        let bank =
            build_psf_bank(&lens, &ApertureMask::builtin("w").unwrap(), 0.8, 2.5, 8).unwrap();
        let pattern = DotPattern::grid(4, 3, 1.0, 1.5).unwrap();
        let mut boxed = Scene::wall(2.0);
        boxed.layers.push(Layer {
            depth_m: 1.0,
            region: Rect {
                x0: 0,
                y0: 0,
                x1: 32,
                y1: 48,
            },
        });
        let scenes = vec![Scene::wall(1.5), boxed];
        let dir = tempfile::tempdir().unwrap();
        let m = export_training_dataset(
            &bank,
            &pattern,
            &scenes,
            &MotionProfile::default(),
            0.2,
            dir.path(),
        )
        .unwrap();
        assert_eq!(m.records.len(), 2);

        let text = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(Manifest::from_jsonl(&text).unwrap(), m);

        let r = &m.records[1];
        let frame = evf::decode(&std::fs::read(dir.path().join(&r.events_file)).unwrap()).unwrap();
        assert_eq!((frame.width(), frame.height()), (64, 48));
        assert_eq!(frame.total(), r.event_total);
        assert!(r.event_total > 0.0);
        let depth = depth_png::read(&dir.path().join(&r.depth_file)).unwrap();
        assert!((depth[[10, 5]] - 1.0).abs() < 1e-4);
        assert!((depth[[10, 50]] - 2.0).abs() < 1e-4);
        assert_eq!(r.aperture, "w");
    }

    #[test]
    fn io_errors_name_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let bank = build_psf_bank(
            &LensConfig::default(),
            &ApertureMask::builtin("open").unwrap(),
            0.8,
            2.5,
            2,
        )
        .unwrap();
        let err = export_training_dataset(
            &bank,
            &DotPattern::default(),
            &[Scene::wall(1.0)],
            &MotionProfile::default(),
            0.2,
            &blocker.join("sub"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
