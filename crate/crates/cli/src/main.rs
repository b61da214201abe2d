use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use stemdeg::benchmark::{drift_source_size, run_damage_benchmark, run_drift_benchmark, DamageBenchConfig, DriftBenchConfig};
use stemdeg::direct::{DirectConfig, DirectEstimator};
use stemdeg::image::{degrade_forward, AffineParams, ImageGrid};
use stemdeg::inference::{align_overlay, flow_map, infer_sequence, InferenceMode};
use stemdeg::io::{
    decode_model, encode_atdf, encode_model, fmt_sig6, json_error, load_image, read_bytes, save_image,
    write_bytes, EstimateFile, FrameTensor, TrainFile,
};
use stemdeg::learned::{train, LearnedEstimator, MapSource, SampleSource, SyntheticSource, TrainOutcome};
use stemdeg::rng::derive_seed;
use stemdeg::synth::{
    add_noise, gen_atom_map, interpolate_affine, interpolate_decay, make_final_decay, perlin_field, AtomMapSpec,
    DamageNoiseType, NoiseConfig,
};
use stemdeg::{Error, Estimator};

#[derive(Parser)]
#[command(name = "stemdeg", version, about = "Simulate and invert drift and beam damage in STEM frame series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic atom-column map.
    GenAtoms(GenAtoms),
    /// Degrade a reference frame into a full sequence.
    Simulate(Simulate),
    /// Recover drift and decay between two frames.
    Estimate(EstimateCmd),
    /// Train the learned estimator.
    Train(TrainCmd),
    /// Damage-curve benchmark.
    BenchDamage(BenchDamage),
    /// Drift benchmark on random crops.
    BenchDrift(BenchDrift),
    /// Render intermediate states between two frames.
    Infer(Infer),
    /// Displacement field of an estimate.
    Flow(Flow),
    /// Re-run the command recorded in a run manifest or preset.
    Replay(Replay),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Direct,
    Model,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    Interpolate,
    PerStep,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected 'a,b'")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("'{a}' is not a number"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("'{b}' is not a number"))?;
    Ok([a, b])
}

fn parse_noise(s: &str) -> Result<NoiseConfig, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Serialize)]
struct GenAtoms {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First lattice vector `dx,dy` in pixels.
    #[arg(long, value_parser = parse_pair)]
    lattice_a: Option<[f64; 2]>,
    #[arg(long, value_parser = parse_pair)]
    lattice_b: Option<[f64; 2]>,
    /// Blob amplitude range `lo,hi`.
    #[arg(long, value_parser = parse_pair)]
    amplitude: Option<[f64; 2]>,
    /// Blob width range `lo,hi` in pixels.
    #[arg(long, value_parser = parse_pair)]
    blob_width: Option<[f64; 2]>,
    /// Positional jitter of the atoms in pixels.
    #[arg(long)]
    jitter: Option<f64>,
}

#[derive(Args, Serialize, Deserialize)]
struct Simulate {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    theta: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tx: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    ty: f64,
    #[arg(long, default_value_t = 10)]
    steps: u32,
    #[arg(long, default_value_t = 3)]
    decay_cells: usize,
    #[arg(long, default_value_t = 3)]
    decay_octaves: usize,
    #[arg(long, default_value_t = 0.4)]
    min_survival: f64,
    /// `none`, `default` or `dose=..,jitter=..,readout=..`.
    #[arg(long, default_value = "none", value_parser = parse_noise)]
    #[serde(serialize_with = "display", deserialize_with = "from_text")]
    noise: NoiseConfig,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn from_text<'de, D: serde::Deserializer<'de>>(d: D) -> Result<NoiseConfig, D::Error> {
    let s = String::deserialize(d)?;
    parse_noise(&s).map_err(serde::de::Error::custom)
}

#[derive(Args, Serialize, Deserialize)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Method::Direct)]
    method: Method,
    /// Trained model (`.atdm`), required by `--method model`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSON overrides for the direct solver.
    #[arg(long)]
    direct_config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct EstimateCmd {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Step of the target frame; defaults to `--steps`.
    #[arg(long)]
    t: Option<f64>,
    #[arg(long, default_value_t = 10)]
    steps: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize)]
struct TrainCmd {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    history: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Serialize, Deserialize)]
struct BenchDamage {
    /// gaussian, perlin, random or all.
    #[arg(long, default_value = "all")]
    noise_type: String,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 0.9)]
    max_intensity: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct BenchDrift {
    /// Source image; a synthetic lattice is generated when omitted.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    rot: f64,
    #[arg(long, default_value_t = 5.0)]
    drift: f64,
    #[arg(long, default_value_t = 256)]
    crop: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct Infer {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    steps: u32,
    #[arg(long, value_enum, default_value_t = Mode::Interpolate)]
    mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Serialize, Deserialize)]
struct Flow {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 16)]
    stride: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Replay {
    #[arg(long)]
    manifest: PathBuf,
}

/// Failure of one command, with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Format { .. } | Error::Json(_) => 2,
            Error::TrainingDiverged { .. } | Error::DegenerateInput(_) | Error::SingularTransform { .. } => 3,
            Error::InvalidParameter(_) | Error::Dimension { .. } | Error::OutOfRange { .. } => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    params: &'a T,
}

/// Writes the run manifest; it holds no timestamps so identical runs
/// produce identical bytes.
fn write_manifest<T: Serialize>(path: &Path, command: &str, params: &T) -> Outcome {
    let m = Manifest {
        tool: "stemdeg",
        version: env!("CARGO_PKG_VERSION"),
        command,
        params,
    };
    let text = serde_json::to_string_pretty(&m).map_err(Error::from)? + "\n";
    write_bytes(path, text.as_bytes())?;
    Ok(())
}

/// `out.ext` -> `out.manifest.json`.
fn manifest_beside(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Fully resolved `gen-atoms` run, as recorded in its manifest.
#[derive(Serialize, Deserialize)]
struct AtomsRun {
    out: PathBuf,
    size: usize,
    atoms: AtomMapSpec,
}

fn gen_atoms(a: &GenAtoms) -> Outcome {
    let d = AtomMapSpec::default();
    let atoms = AtomMapSpec {
        lattice_a: a.lattice_a.unwrap_or(d.lattice_a),
        lattice_b: a.lattice_b.unwrap_or(d.lattice_b),
        amplitude_range: a.amplitude.unwrap_or(d.amplitude_range),
        width_range: a.blob_width.unwrap_or(d.width_range),
        jitter_sigma: a.jitter.unwrap_or(d.jitter_sigma),
        seed: a.seed,
        ..d
    };
    render_atoms(&AtomsRun {
        out: a.out.clone(),
        size: a.size,
        atoms,
    })
}

fn render_atoms(r: &AtomsRun) -> Outcome {
    let img = gen_atom_map(&r.atoms, r.size, r.size)?;
    save_image(&r.out, &img)?;
    write_manifest(&manifest_beside(&r.out), "gen-atoms", r)
}

fn step_name(prefix: &str, t: u32, total: u32) -> String {
    let width = total.to_string().len();
    format!("{prefix}_{t:0width$}.atdf")
}

#[derive(Serialize)]
struct SimulationSpec {
    theta_deg: f64,
    tx_px: f64,
    ty_px: f64,
    total_steps: u32,
    decay_cells: usize,
    decay_octaves: usize,
    min_survival: f64,
    noise: String,
    seed: u64,
    frames: Vec<String>,
    decay_maps: Vec<String>,
}

fn simulate(a: &Simulate) -> Outcome {
    if a.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    let x0 = load_image(&a.input)?;
    let (h, w) = x0.dims();
    let affine = AffineParams::new(a.theta, a.tx, a.ty);
    affine.validate()?;
    let field = perlin_field(h, w, a.decay_cells, a.decay_octaves, derive_seed(a.seed, 0))?;
    let lam_final = make_final_decay(&field, a.min_survival)?;
    std::fs::create_dir_all(&a.out_dir).map_err(Error::from)?;
    let noisy = |img: &ImageGrid, k: u64| add_noise(img, &a.noise, derive_seed(derive_seed(a.seed, 1), k));
    save_image(&a.out_dir.join("x0.atdf"), &noisy(&x0, 0)?)?;
    let mut frames = Vec::new();
    let mut decay_maps = Vec::new();
    let mut last = None;
    for t in 1..=a.steps {
        let lam = interpolate_decay(&lam_final, t as f64, a.steps)?;
        let aff = interpolate_affine(&affine, t as f64, a.steps)?;
        let frame = noisy(&degrade_forward(&x0, &lam, &aff, 0.0)?, t as u64)?;
        let (fname, lname) = (step_name("x", t, a.steps), step_name("lambda", t, a.steps));
        save_image(&a.out_dir.join(&fname), &frame)?;
        write_bytes(&a.out_dir.join(&lname), &encode_atdf(&FrameTensor::from_decay(&lam)))?;
        frames.push(fname);
        decay_maps.push(lname);
        last = Some(frame);
    }
    save_image(&a.out_dir.join("xT.atdf"), &last.expect("at least one step"))?;
    let spec = SimulationSpec {
        theta_deg: a.theta,
        tx_px: a.tx,
        ty_px: a.ty,
        total_steps: a.steps,
        decay_cells: a.decay_cells,
        decay_octaves: a.decay_octaves,
        min_survival: a.min_survival,
        noise: a.noise.to_string(),
        seed: a.seed,
        frames,
        decay_maps,
    };
    let text = serde_json::to_string_pretty(&spec).map_err(Error::from)? + "\n";
    write_bytes(&a.out_dir.join("spec.json"), text.as_bytes())?;
    write_manifest(&a.out_dir.join("manifest.json"), "simulate", a)
}

fn build_estimator(m: &ModelArgs) -> Result<Box<dyn Estimator>, Failure> {
    match m.method {
        Method::Direct => {
            let config = match &m.direct_config {
                Some(p) => {
                    let text = read_text(p)?;
                    serde_json::from_str::<DirectConfig>(&text).map_err(|e| json_error(&text, &e))?
                }
                None => DirectConfig::default(),
            };
            config.validate()?;
            Ok(Box::new(DirectEstimator { config }))
        }
        Method::Model => {
            let path = m.model.as_ref().ok_or_else(|| usage("--method model needs --model FILE"))?;
            let params = decode_model(&read_bytes(path)?)?;
            Ok(Box::new(LearnedEstimator::new(params)?))
        }
    }
}

fn load_pair(reference: &Path, target: &Path) -> Result<(ImageGrid, ImageGrid), Failure> {
    let x0 = load_image(reference)?;
    let xt = load_image(target)?;
    if x0.dims() != xt.dims() {
        return Err(usage(format!(
            "reference is {}x{} but target is {}x{}",
            x0.height(),
            x0.width(),
            xt.height(),
            xt.width()
        )));
    }
    Ok((x0, xt))
}

fn not_converged() -> Failure {
    Failure {
        code: 3,
        message: "estimate did not converge; results were written".into(),
    }
}

fn estimate(a: &EstimateCmd) -> Outcome {
    let (x0, xt) = load_pair(&a.reference, &a.target)?;
    let est = build_estimator(&a.model)?;
    let t = a.t.unwrap_or(a.steps as f64);
    let result = est.estimate(&x0, &xt, t, a.steps)?;
    let decay_path = a.out.with_extension("decay.atdf");
    write_bytes(&decay_path, &encode_atdf(&FrameTensor::from_decay(&result.decay)))?;
    let name = decay_path.file_name().expect("file name").to_string_lossy().into_owned();
    let record = EstimateFile::new(&result, name);
    write_bytes(&a.out, record.to_json()?.as_bytes())?;
    write_manifest(&manifest_beside(&a.out), "estimate", a)?;
    if !result.converged {
        return Err(not_converged());
    }
    Ok(())
}

fn history_csv(outcome: &TrainOutcome) -> String {
    let mut s = String::from("step,lr,loss,val_loss\n");
    for r in &outcome.history {
        let val = r.val_loss.map(fmt_sig6).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.step, fmt_sig6(r.lr), fmt_sig6(r.loss), val));
    }
    s
}

/// Fully resolved `train` run; map paths are relative to the working
/// directory rather than the config file.
#[derive(Serialize, Deserialize)]
struct TrainRun {
    config: TrainFile,
    out: PathBuf,
    history: PathBuf,
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read_bytes(path)?)
        .map_err(|e| Error::format(e.utf8_error().valid_up_to() as u64, "file is not UTF-8").into())
}

fn train_cmd(a: &TrainCmd) -> Outcome {
    let mut config = TrainFile::from_json(&read_text(&a.config)?)?;
    if let Some(seed) = a.seed {
        config.train.seed = seed;
    }
    let base = a.config.parent().unwrap_or(Path::new("."));
    for m in &mut config.maps {
        *m = base.join(&*m).to_string_lossy().into_owned();
    }
    run_training(&TrainRun {
        config,
        out: a.out.clone(),
        history: a.history.clone(),
    })
}

fn run_training(r: &TrainRun) -> Outcome {
    let file = &r.config;
    let data_seed = derive_seed(file.train.seed, 1);
    let source: Box<dyn SampleSource> = if file.maps.is_empty() {
        Box::new(SyntheticSource {
            atoms: file.atoms.clone(),
            sampler: file.sampler.clone(),
            size: file.model.input_size,
            seed: data_seed,
        })
    } else {
        let maps = file
            .maps
            .iter()
            .map(|m| load_image(Path::new(m)))
            .collect::<stemdeg::Result<Vec<_>>>()?;
        Box::new(MapSource::new(maps, file.sampler.clone(), file.model.input_size, data_seed)?)
    };
    let outcome = train(&file.train, &file.model, source.as_ref())?;
    write_bytes(&r.out, &encode_model(&outcome.params)?)?;
    write_bytes(&r.history, history_csv(&outcome).as_bytes())?;
    #[derive(Serialize)]
    struct Recorded<'a> {
        #[serde(flatten)]
        run: &'a TrainRun,
        identity_baseline: String,
        final_validation: Option<String>,
    }
    write_manifest(
        &manifest_beside(&r.out),
        "train",
        &Recorded {
            run: r,
            identity_baseline: fmt_sig6(outcome.identity_baseline),
            final_validation: outcome.final_validation_mean(100).map(fmt_sig6),
        },
    )
}

fn bench_damage(a: &BenchDamage) -> Outcome {
    let kinds: Vec<DamageNoiseType> = if a.noise_type == "all" {
        DamageNoiseType::ALL.to_vec()
    } else {
        vec![a.noise_type.parse()?]
    };
    let est = build_estimator(&a.model)?;
    let mut csv = String::from("noise_type,mae,mse,rmse,r2,var\n");
    for kind in kinds {
        let cfg = DamageBenchConfig {
            frames: a.frames,
            max_intensity: a.max_intensity,
            image_size: a.image_size,
            ..DamageBenchConfig::new(kind, a.trials, a.seed)
        };
        let m = run_damage_benchmark(&cfg, est.as_ref())?.mean;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            kind.name(),
            fmt_sig6(m.mae),
            fmt_sig6(m.mse),
            fmt_sig6(m.rmse),
            fmt_sig6(m.r2),
            fmt_sig6(m.var_err)
        ));
    }
    write_bytes(&a.out, csv.as_bytes())?;
    write_manifest(&manifest_beside(&a.out), "bench-damage", a)
}

fn bench_drift(a: &BenchDrift) -> Outcome {
    let cfg = DriftBenchConfig {
        rot_max_deg: a.rot,
        drift_max_px: a.drift,
        crop: a.crop,
        trials: a.trials,
        seed: a.seed,
    };
    let img = match &a.image {
        Some(p) => load_image(p)?,
        None => {
            let n = drift_source_size(&cfg);
            let spec = AtomMapSpec {
                seed: derive_seed(a.seed, u64::MAX),
                ..AtomMapSpec::default()
            };
            gen_atom_map(&spec, n, n)?
        }
    };
    let est = build_estimator(&a.model)?;
    let r = run_drift_benchmark(&img, &cfg, est.as_ref())?;
    let csv = format!(
        "rot_set_deg,drift_set_px,mean_drift_err_px,mean_rot_err_deg\n{},{},{},{}\n",
        fmt_sig6(a.rot),
        fmt_sig6(a.drift),
        fmt_sig6(r.mean_drift_err_px),
        fmt_sig6(r.mean_rot_err_deg)
    );
    write_bytes(&a.out, csv.as_bytes())?;
    write_manifest(&manifest_beside(&a.out), "bench-drift", a)
}

#[derive(Serialize)]
struct FrameRecord {
    t: f64,
    theta_deg: f64,
    tx_px: f64,
    ty_px: f64,
    frame: String,
    decay: String,
}

fn infer(a: &Infer) -> Outcome {
    let (x0, xt) = load_pair(&a.reference, &a.target)?;
    let est = build_estimator(&a.model)?;
    let mode = match a.mode {
        Mode::Interpolate => InferenceMode::Interpolate,
        Mode::PerStep => InferenceMode::PerStep,
    };
    let result = infer_sequence(&x0, &xt, est.as_ref(), a.n, a.steps, mode)?;
    std::fs::create_dir_all(&a.out_dir).map_err(Error::from)?;
    let total = result.frames.len() as u32;
    let mut records = Vec::with_capacity(result.frames.len());
    for (k, f) in result.frames.iter().enumerate() {
        let (fname, lname) = (step_name("frame", k as u32 + 1, total), step_name("lambda", k as u32 + 1, total));
        save_image(&a.out_dir.join(&fname), &f.frame)?;
        write_bytes(&a.out_dir.join(&lname), &encode_atdf(&FrameTensor::from_decay(&f.decay)))?;
        records.push(FrameRecord {
            t: f.t,
            theta_deg: f.affine.theta_deg,
            tx_px: f.affine.tx_px,
            ty_px: f.affine.ty_px,
            frame: fname,
            decay: lname,
        });
    }
    let end = result.frames.last().expect("end state").affine;
    save_image(&a.out_dir.join("overlay.atdf"), &align_overlay(&x0, &xt, &end)?)?;
    let text = serde_json::to_string_pretty(&records).map_err(Error::from)? + "\n";
    write_bytes(&a.out_dir.join("frames.json"), text.as_bytes())?;
    write_manifest(&a.out_dir.join("manifest.json"), "infer", a)
}

fn flow(a: &Flow) -> Outcome {
    let record = EstimateFile::from_json(&read_text(&a.est)?)?;
    if a.size == 0 {
        return Err(usage("--size must be at least 1"));
    }
    let field = flow_map(&record.affine(), a.size, a.size, a.stride)?;
    write_bytes(&a.out, &encode_atdf(&FrameTensor::from_flow(&field)))?;
    write_manifest(&manifest_beside(&a.out), "flow", a)
}

#[derive(Deserialize)]
struct Recorded {
    tool: String,
    command: String,
    params: serde_json::Value,
}

fn params<T: DeserializeOwned>(value: serde_json::Value) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure {
        code: 2,
        message: format!("manifest params: {e}"),
    })
}

fn replay(a: &Replay) -> Outcome {
    let text = read_text(&a.manifest)?;
    let rec: Recorded = serde_json::from_str(&text).map_err(|e| json_error(&text, &e))?;
    if rec.tool != "stemdeg" {
        return Err(usage(format!("manifest was written by '{}', not stemdeg", rec.tool)));
    }
    match rec.command.as_str() {
        "gen-atoms" => render_atoms(&params(rec.params)?),
        "simulate" => simulate(&params(rec.params)?),
        "estimate" => estimate(&params(rec.params)?),
        "train" => run_training(&params(rec.params)?),
        "bench-damage" => bench_damage(&params(rec.params)?),
        "bench-drift" => bench_drift(&params(rec.params)?),
        "infer" => infer(&params(rec.params)?),
        "flow" => flow(&params(rec.params)?),
        other => Err(usage(format!("manifest records unknown command '{other}'"))),
    }
}

fn run(args: impl IntoIterator<Item = OsString>) -> Outcome {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return if code == 0 {
                Ok(())
            } else {
                Err(Failure {
                    code,
                    message: String::new(),
                })
            };
        }
    };
    match &cli.command {
        Command::GenAtoms(a) => gen_atoms(a),
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Train(a) => train_cmd(a),
        Command::BenchDamage(a) => bench_damage(a),
        Command::BenchDrift(a) => bench_drift(a),
        Command::Infer(a) => infer(a),
        Command::Flow(a) => flow(a),
        Command::Replay(a) => replay(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
