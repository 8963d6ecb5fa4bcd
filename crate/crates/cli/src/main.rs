use clap::{Args, Parser, Subcommand};
use salt_core::codec::{
    encode_gop, read_raw_clip, write_raw_clip, CodecError, CodecParams, FeatureExtractor, Frame, BLOCK_SIZE,
};
use salt_core::exemplar::{fit, ClusterModel, DriftCase, ExemplarError};
use salt_core::mulkern::{hspm_multiply, sdmm_packed};
use salt_core::perfmodel::{
    batch_size, conv_iterations, distribution_scenarios, input_load, parse_scenario, raw_rate, redundancy_overhead,
    report_csv, AcceleratorConfig, Redundancy,
};
use salt_core::ring::{RingParams, RingPoly, SignedPoly};
use salt_core::rlwe::{encrypt, keygen, KeyPair, Plaintext, RlweError};
use salt_core::rng::SplitMix64;
use salt_core::storage::{
    archive, reconstruct, retrieve, verify_parity, ArchiveOptions, Backing, DrivePool, PoolLayout, Staging,
    StorageError, StripeMap,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "salt", version, about = "Layered, encrypted, RAID-5 archival of video clips")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an R-LWE key pair.
    Keygen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode, encrypt and stripe a raw clip onto the pool.
    Archive(ArchiveArgs),
    /// Read an archived clip back as a raw clip.
    Retrieve(RetrieveArgs),
    /// Check that every allocated stripe XORs to zero.
    Scrub {
        #[arg(long)]
        pool: PathBuf,
    },
    /// Remove a drive from the pool.
    Fail {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        drive: u32,
    },
    /// Rebuild a failed drive from its stripe peers.
    Rebuild {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        drive: u32,
    },
    /// Fit a cluster model or select exemplars from an archive.
    #[command(subcommand)]
    Exemplar(ExemplarCommand),
    /// Print the sizing model and time the kernels.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
    },
    /// Print the placement model as CSV.
    Model {
        /// Scenario files; the data-distribution rows when omitted.
        #[arg(long)]
        scenario: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ArchiveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Where the stripe map is written.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "layers", default_value_t = 4)]
    layers: usize,
    #[arg(long, default_value_t = 8)]
    base_step: u8,
    #[arg(long, default_value_t = 16)]
    anchor_interval: usize,
    /// Checkpoint directory; defaults to `<out>.staging`.
    #[arg(long)]
    staging: Option<PathBuf>,
    #[arg(long, hide = true)]
    abort_after: Option<usize>,
}

#[derive(Args)]
struct ReadArgs {
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Stripe map written by `archive`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    kmax: usize,
    #[arg(long, default_value_t = 4)]
    parallel: usize,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    read: ReadArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum ExemplarCommand {
    /// Cluster the features of a raw clip and save the model.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
    },
    /// Retrieve an archive and tag every frame against a model.
    Select {
        #[command(flatten)]
        read: ReadArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
        /// Optional raw clip of the exemplar frames.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        let msg = e.to_string();
        if e.is_data_error() {
            return Failure::Data(msg);
        }
        match e {
            StorageError::InvalidInput(_)
            | StorageError::CapacityExceeded { .. }
            | StorageError::NotCsd(_)
            | StorageError::Codec(CodecError::InvalidInput(_))
            | StorageError::Exemplar(ExemplarError::InvalidInput(_)) => Failure::Usage(msg),
            StorageError::Exemplar(ExemplarError::Decode(_)) => Failure::Data(msg),
            _ => Failure::Internal(msg),
        }
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        StorageError::from(e).into()
    }
}

impl From<ExemplarError> for Failure {
    fn from(e: ExemplarError) -> Self {
        StorageError::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

fn read_input(path: &Path, what: &str) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::Usage(format!("{what} {} not found", path.display())),
        _ => Failure::Internal(format!("reading {what} {}: {e}", path.display())),
    })
}

fn write_output(path: &Path, bytes: &[u8]) -> Outcome {
    std::fs::write(path, bytes).map_err(|e| Failure::Internal(format!("writing {}: {e}", path.display())))
}

fn load_keys(path: &Path) -> Result<(KeyPair, RingParams), Failure> {
    let bytes = read_input(path, "key file")?;
    KeyPair::from_bytes(&bytes).map_err(|e| Failure::Data(format!("key file {}: {e}", path.display())))
}

fn load_clip(path: &Path) -> Result<Vec<Frame>, Failure> {
    let bytes = read_input(path, "clip")?;
    read_raw_clip(&bytes).map_err(|e| Failure::Data(format!("clip {}: {e}", path.display())))
}

fn load_layout(path: &Path) -> Result<PoolLayout, Failure> {
    if !path.exists() {
        return Err(Failure::Usage(format!("pool layout {} not found", path.display())));
    }
    let layout = PoolLayout::load(path).map_err(|e| Failure::Usage(format!("pool layout {}: {e}", path.display())))?;
    if layout.backing != Backing::File {
        return Err(Failure::Usage("the command line needs a file-backed pool".into()));
    }
    Ok(layout)
}

/// Opens a pool that an earlier `archive` created.
fn open_pool(path: &Path) -> Result<DrivePool, Failure> {
    let layout = load_layout(path)?;
    if !layout.state_path.as_ref().is_some_and(|p| p.exists()) {
        return Err(Failure::Usage(format!(
            "pool {} has not been initialised; run archive first",
            path.display()
        )));
    }
    Ok(DrivePool::open(&layout)?)
}

fn load_map(path: &Path) -> Result<StripeMap, Failure> {
    let bytes = read_input(path, "stripe map")?;
    StripeMap::from_bytes(&bytes).map_err(|e| Failure::Data(format!("stripe map {}: {e}", path.display())))
}

fn check_parallel(p: usize) -> Outcome {
    if p == 0 {
        return Err(Failure::Usage("--parallel must be at least 1".into()));
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_keygen(seed: u64, out: &Path) -> Outcome {
    let params = RingParams::default();
    let keys = keygen(&params, seed).map_err(|e| Failure::Internal(e.to_string()))?;
    write_output(out, &keys.to_bytes(&params))?;
    println!("key {} written to {}", hex(&keys.public.key_id(&params)), out.display());
    Ok(())
}

fn cmd_archive(a: &ArchiveArgs) -> Outcome {
    let params = CodecParams {
        layers: a.layers,
        base_step: a.base_step,
        anchor_interval: a.anchor_interval,
        ..CodecParams::default()
    };
    params.validate()?;
    let frames = load_clip(&a.input)?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if w % BLOCK_SIZE != 0 || h % BLOCK_SIZE != 0 {
        return Err(Failure::Usage(format!("frame size {w}x{h} is not a multiple of {BLOCK_SIZE}")));
    }
    let (keys, ring) = load_keys(&a.key)?;
    let layout = load_layout(&a.pool)?;
    layout.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let object_id = a
        .out
        .file_stem()
        .map_or_else(|| "archive".to_string(), |s| s.to_string_lossy().into_owned());
    let staging_dir = a.staging.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".staging");
        PathBuf::from(p)
    });

    let mut pool = DrivePool::open_or_create(&layout)?;
    let mut staging = Staging::open(&staging_dir)?;
    let opts = ArchiveOptions {
        seed: a.seed,
        object_id,
        abort_after: a.abort_after,
    };
    let out = archive(&frames, &mut pool, &keys.public, &ring, &params, &opts, &mut staging)?;
    write_output(&a.out, &out.map.to_bytes())?;
    std::fs::remove_dir(&staging_dir).ok();
    let container = out.container.to_bytes().len();
    println!("frames={} groups={}", frames.len(), out.container.segment_count());
    println!(
        "raw_bytes={} encoded_bytes={} container_bytes={} stripes={}",
        out.raw_bytes,
        out.encoded_bytes,
        container,
        out.map.stripes.len()
    );
    if out.resumed_groups > 0 {
        println!("resumed after {} groups from checkpoint", out.resumed_groups);
    }
    println!("stripe map written to {}", a.out.display());
    Ok(())
}

struct Loaded {
    pool: DrivePool,
    map: StripeMap,
    keys: KeyPair,
    ring: RingParams,
}

fn load_for_read(r: &ReadArgs) -> Result<Loaded, Failure> {
    check_parallel(r.parallel)?;
    let map = load_map(&r.input)?;
    let (keys, ring) = load_keys(&r.key)?;
    let pool = open_pool(&r.pool)?;
    Ok(Loaded { pool, map, keys, ring })
}

fn cmd_retrieve(a: &RetrieveArgs) -> Outcome {
    let l = load_for_read(&a.read)?;
    let got = retrieve(&l.pool, &l.map, &l.keys, &l.ring, a.read.kmax, None, a.read.parallel)?;
    write_output(&a.out, &write_raw_clip(&got.frames)?)?;
    let failed = l.pool.failed_drives();
    if !failed.is_empty() {
        println!("degraded read: drives {failed:?} missing");
    }
    println!(
        "retrieved {} frames from {} segments with k_max {}",
        got.frames.len(),
        got.container.segment_count(),
        a.read.kmax
    );
    Ok(())
}

fn cmd_scrub(pool: &Path) -> Outcome {
    let pool = open_pool(pool)?;
    let failed = pool.failed_drives();
    if !failed.is_empty() {
        return Err(Failure::Data(format!("pool degraded: drives {failed:?} missing; run rebuild")));
    }
    let bad = verify_parity(&pool)?;
    if !bad.is_empty() {
        return Err(Failure::Data(format!("parity mismatch in stripes {bad:?}")));
    }
    println!("{} stripes verified", pool.next_stripe());
    Ok(())
}

fn cmd_fail(pool: &Path, drive: u32) -> Outcome {
    let pool = open_pool(pool)?;
    pool.position(drive).map_err(|e| Failure::Usage(e.to_string()))?;
    pool.fail_drive(drive)?;
    println!("drive {drive} failed");
    Ok(())
}

fn cmd_rebuild(pool: &Path, drive: u32) -> Outcome {
    let pool = open_pool(pool)?;
    pool.position(drive).map_err(|e| Failure::Usage(e.to_string()))?;
    let stripes = reconstruct(&pool, drive)?;
    println!("drive {drive} rebuilt: {stripes} stripes");
    Ok(())
}

fn override_thresholds(m: &mut ClusterModel, tau1: Option<f64>, tau2: Option<f64>) -> Outcome {
    if tau1.is_some() || tau2.is_some() {
        m.set_thresholds(tau1.unwrap_or(m.tau1()), tau2.unwrap_or(m.tau2()))?;
    }
    Ok(())
}

fn cmd_exemplar(c: &ExemplarCommand) -> Outcome {
    match c {
        ExemplarCommand::Fit {
            input,
            out,
            clusters,
            restarts,
            seed,
            tau1,
            tau2,
        } => {
            let frames = load_clip(input)?;
            let extractor = FeatureExtractor::new();
            let features = frames
                .iter()
                .map(|f| extractor.extract(f))
                .collect::<Result<Vec<_>, _>>()?;
            let mut model = fit(&features, *clusters, *restarts, *seed, 1e-9, 300)?;
            override_thresholds(&mut model, *tau1, *tau2)?;
            write_output(out, &model.to_bytes())?;
            println!(
                "k={} cost={:.6} tau1={:.6} tau2={:.6}",
                model.k(),
                model.cost(&features),
                model.tau1(),
                model.tau2()
            );
            Ok(())
        }
        ExemplarCommand::Select {
            read,
            model,
            tau1,
            tau2,
            out,
        } => {
            let bytes = read_input(model, "model")?;
            let mut m = ClusterModel::from_bytes(&bytes)
                .map_err(|e| Failure::Data(format!("model {}: {e}", model.display())))?;
            override_thresholds(&mut m, *tau1, *tau2)?;
            let l = load_for_read(read)?;
            let got = retrieve(&l.pool, &l.map, &l.keys, &l.ring, read.kmax, Some(&m), read.parallel)?;
            for (i, t) in got.tags.iter().enumerate() {
                let tag = match t {
                    DriftCase::Known => "known",
                    DriftCase::Drifted => "drifted",
                    DriftCase::Novel => "novel",
                };
                println!("frame {i}: {tag}");
            }
            println!("exemplars: {:?}", got.exemplars);
            if let Some(out) = out {
                let frames: Vec<Frame> = got.exemplar_frames().into_iter().cloned().collect();
                if frames.is_empty() {
                    println!("no exemplar frames; {} not written", out.display());
                } else {
                    write_output(out, &write_raw_clip(&frames)?)?;
                }
            }
            Ok(())
        }
    }
}

fn time<T>(label: &str, reps: usize, mut f: impl FnMut() -> T) {
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    let per = start.elapsed().as_secs_f64() / reps.max(1) as f64;
    println!("{label},{reps},{:.3}", per * 1e6);
}

fn cmd_bench(seed: u64, iterations: usize) -> Outcome {
    if iterations == 0 {
        return Err(Failure::Usage("--iterations must be at least 1".into()));
    }
    let internal = |e: RlweError| Failure::Internal(e.to_string());
    let acc = AcceleratorConfig::default();
    let rate = raw_rate(1920, 1080, 3, 4, 60).map_err(|e| Failure::Internal(e.to_string()))?;
    let model = |e: salt_core::perfmodel::PerfError| Failure::Internal(e.to_string());
    println!("# sizing");
    println!("tiles={} grid={}x{}", acc.tiles, acc.grid.0, acc.grid.1);
    println!(
        "input_sram_bytes={} input_half_bytes={}",
        acc.input_buffer_bytes, acc.input_half_bytes
    );
    println!("conv_iterations(64,3,3)={}", conv_iterations(64, 3, 3).map_err(model)?);
    println!("input_load(32,32,3)={:?}", input_load(32, 32, 3).map_err(model)?);
    println!("batch_size(64,16)={}", batch_size(64, 16).map_err(model)?);
    println!(
        "raw_1080p60: {:.2} MiB/frame {:.2} GiB/s {:.2} TiB/day",
        rate.per_frame_mib(),
        rate.per_second_gib(),
        rate.per_day_tib()
    );
    println!(
        "raid5_overhead(4)={:.4} mirror_overhead={:.1}",
        redundancy_overhead(Redundancy::Raid5, 4).map_err(model)?,
        redundancy_overhead(Redundancy::Mirror, 2).map_err(model)?
    );
    println!("# placement");
    print!("{}", report_csv(&distribution_scenarios()).map_err(model)?);

    println!("# kernels");
    println!("kernel,reps,us_per_op");
    let ring = RingParams::default();
    let mut g = SplitMix64::stream(seed, "bench");
    let a = RingPoly::from_coeffs((0..ring.n).map(|_| g.next_below(7681) as u16).collect(), &ring)
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let b = SignedPoly::from_coeffs((0..ring.n).map(|_| g.next_below(7) as i8 - 3).collect(), &ring)
        .map_err(|e| Failure::Internal(e.to_string()))?;
    let zero = RingPoly::zero(ring.n);
    time("sdmm_packed", iterations * 1000, || sdmm_packed(1234, -5, 17, ring.q));
    time("hspm_multiply", iterations, || hspm_multiply(&a, &b, &zero, &ring));
    let keys = keygen(&ring, seed).map_err(internal)?;
    let m = Plaintext::from_bytes(&[0xA5; 32], &ring).map_err(internal)?;
    let mut s = seed;
    time("encrypt_block", iterations, || {
        s = s.wrapping_add(1);
        encrypt(&m, &keys.public, &ring, s)
    });
    let frames: Vec<Frame> = (0..16)
        .map(|t| Frame::from_fn(64, 64, |y, x| ((x + 2 * y + 3 * t) % 256) as u8))
        .collect::<Result<_, _>>()?;
    let params = CodecParams::default();
    time("encode_gop_64x64x16", iterations.div_ceil(10), || encode_gop(&frames, &params));
    Ok(())
}

fn cmd_model(scenarios: &[PathBuf]) -> Outcome {
    let rows = if scenarios.is_empty() {
        distribution_scenarios()
    } else {
        scenarios
            .iter()
            .map(|p| {
                let text = read_input(p, "scenario")?;
                let text = String::from_utf8(text).map_err(|_| Failure::Data(format!("{} is not text", p.display())))?;
                parse_scenario(&text).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    print!("{}", report_csv(&rows).map_err(|e| Failure::Data(e.to_string()))?);
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Keygen { seed, out } => cmd_keygen(*seed, out),
        Command::Archive(a) => cmd_archive(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Scrub { pool } => cmd_scrub(pool),
        Command::Fail { pool, drive } => cmd_fail(pool, *drive),
        Command::Rebuild { pool, drive } => cmd_rebuild(pool, *drive),
        Command::Exemplar(c) => cmd_exemplar(c),
        Command::Bench { seed, iterations } => cmd_bench(*seed, *iterations),
        Command::Model { scenario } => cmd_model(scenario),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            e.print().ok();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
