//! `apertura`: batch front end for simulation, decoding and benchmarking.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apertura::benchmark::{
    emit_plots, psf_contact_sheet, run_sweep, sensitivity_curves, BenchSpec, PlotInput,
    SensitivityParams,
};
use apertura::config::KeyValues;
use apertura::decoder::{
    build_signature_bank_with, decode_frame, export_training_dataset, SignatureOptions,
};
use apertura::events::{simulate_event_frame, MotionProfile, DEFAULT_THRESHOLD};
use apertura::formats::{depth_png, evf, pgm};
use apertura::io::{read_to_string, write_atomic};
use apertura::optics::{
    blur_diameter_px, build_psf_bank, build_psf_bank_at, ApertureMask, LensConfig,
};
use apertura::scene::{render_latent, DotPattern, Scene, DEFAULT_DOT_COUNT, DEFAULT_DOT_RADIUS_PX};
use apertura::Error;
use clap::{Args, Parser, Subcommand};

type CliResult<T = ()> = Result<T, Error>;

#[derive(Parser, Debug)]
#[command(
    name = "apertura",
    version,
    about = "Coded-aperture event-camera depth simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "APERTURA_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write PSF kernels (PGM) and a contact sheet (SVG) for a set of depths.
    Psf(PsfArgs),
    /// Render, blur and accumulate events for one scene.
    Simulate(SimulateArgs),
    /// Decode an event frame into sparse and dense depth.
    Decode(DecodeArgs),
    /// Run the aperture x focus-distance benchmark.
    Bench(BenchArgs),
    /// Blur-sensitivity curves for f-number and focal-length families.
    Sensitivity(SensitivityArgs),
    /// Export simulated event frames with depth ground truth.
    Dataset(DatasetArgs),
}

#[derive(Args, Debug, Clone)]
struct OpticsArgs {
    /// Lens file (key=value); defaults are used for missing keys.
    #[arg(long)]
    lens: Option<PathBuf>,
    /// Built-in aperture name or path to a PGM mask.
    #[arg(long, default_value = "w")]
    aperture: String,
    /// Override a lens or motion key, e.g. `--set focus_distance_m=0.75`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug, Clone)]
struct MotionArgs {
    /// Motion file (key=value); `--set` overrides apply on top.
    #[arg(long)]
    motion: Option<PathBuf>,
    /// Contrast threshold in log-intensity units.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
}

#[derive(Args, Debug, Clone)]
struct PatternArgs {
    /// Pattern file (`grid` or `random` directive).
    #[arg(long, conflicts_with = "lattice")]
    pattern: Option<PathBuf>,
    /// Use a pixel lattice with this spacing instead of a pattern file.
    #[arg(long, value_name = "PX")]
    lattice: Option<usize>,
    /// Dot radius in pixels for generated patterns.
    #[arg(long, default_value_t = DEFAULT_DOT_RADIUS_PX)]
    dot_radius: f64,
}

#[derive(Args, Debug)]
struct PsfArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    /// Comma-separated depths in meters.
    #[arg(long, value_delimiter = ',', default_value = "0.8,1.2,1.8,2.5")]
    depths: Vec<f64>,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    motion: MotionArgs,
    #[command(flatten)]
    pattern: PatternArgs,
    /// Scene file; a wall at 1.5 m when omitted.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Seeds the default pseudorandom pattern.
    #[arg(long)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct BankArgs {
    /// Nearest depth of the decoding bank.
    #[arg(long, default_value_t = 0.75)]
    z_min: f64,
    /// Farthest depth of the decoding bank.
    #[arg(long, default_value_t = 2.75)]
    z_max: f64,
    /// Number of bank depths (inverse-depth spacing).
    #[arg(long, default_value_t = 128)]
    bank_depths: usize,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    /// Event frame (EVF1).
    #[arg(long)]
    frame: PathBuf,
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    motion: MotionArgs,
    #[command(flatten)]
    bank: BankArgs,
    /// Dot radius the frame was simulated with.
    #[arg(long, default_value_t = DEFAULT_DOT_RADIUS_PX)]
    dot_radius: f64,
    /// Sub-pixel template phases per axis.
    #[arg(long, default_value_t = 2)]
    phases: usize,
    /// Ground-truth depth PNG; enables metrics.json.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Benchmark spec file (key=value); defaults otherwise.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override a spec key, e.g. `--set apertures=open,w`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seeds the per-trial sub-pixel offsets.
    #[arg(long)]
    seed: u64,
    /// Record wall-clock decode time (makes output non-deterministic).
    #[arg(long)]
    timing: bool,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SensitivityArgs {
    /// Parameter file (key=value); defaults otherwise.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Override a parameter key, e.g. `--set samples=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[command(flatten)]
    optics: OpticsArgs,
    #[command(flatten)]
    motion: MotionArgs,
    #[command(flatten)]
    pattern: PatternArgs,
    #[command(flatten)]
    bank: BankArgs,
    /// Scene files, one sample each.
    #[arg(long, num_args = 1.., required = true)]
    scenes: Vec<PathBuf>,
    /// Seeds the default pseudorandom pattern.
    #[arg(long)]
    seed: u64,
    /// Output directory, created if missing.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let line: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.starts_with("Usage"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", line.join(" "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Invalid {
                what: "threads",
                reason: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Simulation(e.to_string()))?;
    }
    match cli.command {
        Command::Psf(a) => cmd_psf(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Dataset(a) => cmd_dataset(a),
    }
}

fn key_values(file: Option<&Path>, overrides: &[String]) -> CliResult<KeyValues> {
    let mut kv = match file {
        Some(p) => KeyValues::parse(&read_to_string(p)?)?,
        None => KeyValues::default(),
    };
    kv.apply_overrides(overrides.iter().map(String::as_str))?;
    Ok(kv)
}

fn load_lens(o: &OpticsArgs) -> CliResult<LensConfig> {
    LensConfig::from_key_values(&key_values(o.lens.as_deref(), &o.overrides)?)
}

fn load_motion(m: &MotionArgs, o: &OpticsArgs) -> CliResult<MotionProfile> {
    MotionProfile::from_key_values(&key_values(m.motion.as_deref(), &o.overrides)?)
}

fn load_pattern(p: &PatternArgs, lens: &LensConfig, seed: u64) -> CliResult<DotPattern> {
    match (&p.pattern, p.lattice) {
        (Some(path), _) => DotPattern::from_config(&read_to_string(path)?),
        (None, Some(spacing)) => DotPattern::pixel_grid(
            lens.sensor_width_px,
            lens.sensor_height_px,
            spacing,
            spacing,
            (0.0, 0.0),
            1.0,
            p.dot_radius,
        ),
        (None, None) => DotPattern::pseudorandom(DEFAULT_DOT_COUNT, seed, 1.0, p.dot_radius),
    }
}

fn load_scene(path: Option<&Path>, lens: &LensConfig) -> CliResult<Scene> {
    match path {
        Some(p) => Scene::from_config(&read_to_string(p)?, lens),
        None => {
            let s = Scene::wall(1.5);
            s.validate(lens)?;
            Ok(s)
        }
    }
}

fn scene_depths(scene: &Scene) -> Vec<f64> {
    let mut d: Vec<f64> = scene.layers.iter().map(|l| l.depth_m).collect();
    d.push(scene.background_depth_m);
    d
}

fn cmd_psf(a: PsfArgs) -> CliResult {
    let lens = load_lens(&a.optics)?;
    let aperture = ApertureMask::resolve(&a.optics.aperture)?;
    if a.depths.is_empty() {
        return Err(Error::Invalid {
            what: "depths",
            reason: "need at least one depth".into(),
        });
    }
    let bank = build_psf_bank_at(&lens, &aperture, &a.depths)?;
    let mut meta = String::from("index,z_m,blur_diameter_px,support_px,file\n");
    for (i, psf) in bank.psfs().iter().enumerate() {
        let k = psf.kernel();
        let peak = k.iter().copied().fold(0.0, f64::max);
        let name = format!("psf_{i:02}.pgm");
        write_atomic(&a.out.join(&name), &pgm::encode_p5(k, peak))?;
        meta.push_str(&format!(
            "{i},{:.6},{:.6},{},{name}\n",
            psf.depth_m(),
            blur_diameter_px(&lens, psf.depth_m())?,
            psf.support_px()
        ));
    }
    write_atomic(&a.out.join("psf.csv"), meta.as_bytes())?;
    write_atomic(
        &a.out.join("psf_sheet.svg"),
        psf_contact_sheet(bank.psfs()).as_bytes(),
    )?;
    write_atomic(&a.out.join("aperture.pgm"), &aperture.to_pgm())?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let lens = load_lens(&a.optics)?;
    let aperture = ApertureMask::resolve(&a.optics.aperture)?;
    let motion = load_motion(&a.motion, &a.optics)?;
    let pattern = load_pattern(&a.pattern, &lens, a.seed)?;
    let scene = load_scene(a.scene.as_deref(), &lens)?;
    let bank = build_psf_bank_at(&lens, &aperture, &scene_depths(&scene))?;
    let latent = render_latent(&scene, &pattern, &lens)?;
    let frame = simulate_event_frame(&latent, &bank, &motion, a.motion.threshold)?;
    write_atomic(&a.out.join("frame.evf"), &evf::encode(&frame))?;
    depth_png::write(&a.out.join("depth.png"), &latent.depth_map)?;
    let run = format!(
        "{}{}aperture={}\nthreshold={}\nseed={}\ndots={}\nevents={}\n",
        lens.to_config(),
        motion.to_config(),
        aperture.name(),
        a.motion.threshold,
        a.seed,
        pattern.len(),
        frame.total()
    );
    write_atomic(&a.out.join("run.cfg"), run.as_bytes())?;
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> CliResult {
    let frame = evf::decode(&apertura::io::read_bytes(&a.frame)?)?;
    let lens = load_lens(&a.optics)?.with_sensor(frame.width(), frame.height());
    let aperture = ApertureMask::resolve(&a.optics.aperture)?;
    let motion = load_motion(&a.motion, &a.optics)?;
    let bank = build_psf_bank(
        &lens,
        &aperture,
        a.bank.z_min,
        a.bank.z_max,
        a.bank.bank_depths,
    )?;
    let dot = DotPattern::single(0.5, 0.5, 1.0, a.dot_radius)?;
    let options = SignatureOptions {
        phases_per_axis: a.phases,
        ..SignatureOptions::default()
    };
    let sig = build_signature_bank_with(&bank, &dot, &motion, a.motion.threshold, options)?;
    let mut est = decode_frame(&frame, &sig)?;
    depth_png::write(&a.out.join("depth.png"), &est.dense_map)?;
    write_atomic(&a.out.join("sparse.csv"), est.sparse_csv().as_bytes())?;
    if let Some(truth) = &a.truth {
        let m = est.evaluate(&depth_png::read(truth)?)?;
        let json = format!(
            "{{\"sparse_l1_m\":{:.6},\"dense_l1_m\":{:.6},\"points\":{},\"skipped\":{}}}\n",
            m.sparse_l1_m,
            m.dense_l1_m,
            m.points,
            est.skipped.len()
        );
        write_atomic(&a.out.join("metrics.json"), json.as_bytes())?;
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let kv = key_values(a.spec.as_deref(), &a.overrides)?;
    let mut spec = BenchSpec::from_key_values(&kv)?;
    spec.seed = a.seed;
    spec.record_timing = a.timing;
    let result = run_sweep(&spec)?;
    emit_plots(PlotInput::Bench(&result), &a.out)?;
    let failures = result.failures().count();
    if failures > 0 {
        eprintln!("warning: {failures} benchmark cells failed (see the l1_m=nan rows)");
    }
    Ok(())
}

fn cmd_sensitivity(a: SensitivityArgs) -> CliResult {
    let kv = key_values(a.params.as_deref(), &a.overrides)?;
    let d = SensitivityParams::default();
    let params = SensitivityParams {
        f_numbers: kv.get_list("f_numbers")?.unwrap_or(d.f_numbers),
        base_focal_length_m: kv.get_or("base_focal_length_m", d.base_focal_length_m)?,
        focal_lengths_m: kv.get_list("focal_lengths_m")?.unwrap_or(d.focal_lengths_m),
        base_f_number: kv.get_or("base_f_number", d.base_f_number)?,
        focus_distance_m: kv.get_or("focus_distance_m", d.focus_distance_m)?,
        z_min_m: kv.get_or("z_min_m", d.z_min_m)?,
        z_max_m: kv.get_or("z_max_m", d.z_max_m)?,
        samples: kv.get_or("samples", d.samples)?,
    };
    let table = sensitivity_curves(&params)?;
    emit_plots(PlotInput::Sensitivity(&table), &a.out)?;
    Ok(())
}

fn cmd_dataset(a: DatasetArgs) -> CliResult {
    let lens = load_lens(&a.optics)?;
    let aperture = ApertureMask::resolve(&a.optics.aperture)?;
    let motion = load_motion(&a.motion, &a.optics)?;
    let pattern = load_pattern(&a.pattern, &lens, a.seed)?;
    let scenes = a
        .scenes
        .iter()
        .map(|p| load_scene(Some(p), &lens))
        .collect::<CliResult<Vec<_>>>()?;
    let bank = build_psf_bank(
        &lens,
        &aperture,
        a.bank.z_min,
        a.bank.z_max,
        a.bank.bank_depths,
    )?;
    export_training_dataset(
        &bank,
        &pattern,
        &scenes,
        &motion,
        a.motion.threshold,
        &a.out,
    )?;
    Ok(())
}
