//! Command-line front end for the sparse-audio library.
//!
//! Option precedence is flags > JSON config file > built-in defaults,
//! and every run that writes a primary output also writes a
//! `<out>.config.json` sidecar with the fully resolved settings.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use sparse_audio::adapt::{adapt, AdaptConfig};
use sparse_audio::bank::{BankConfig, FilterBank};
use sparse_audio::error::Error;
use sparse_audio::lca::{encode, Dictionary, LcaConfig, SparseCode};
use sparse_audio::repr::{
    load_repr_dir, load_wav, normalize_01, write_wav, DatasetManifest, EncodeOptions,
    EventRepresentation, ReprKind,
};
use sparse_audio::snn::{
    accuracy, train, LifConfig, LifNetwork, NetworkSpec, ResetMode, SynOps, TrainConfig,
};

type R = f64;

#[derive(Parser)]
#[command(name = "sparse-audio", version, about = "Sparse audio coding toolkit")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed (falls back to $SPARSE_AUDIO_SEED, then config, then 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-file work; 1 is fully serial.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter-bank construction, inspection, and adaptation.
    Bank {
        #[command(subcommand)]
        command: BankCommand,
    },
    /// Sparse-code one WAV file or a whole manifest.
    Encode(EncodeArgs),
    /// Render a sparse code back to a WAV file.
    Reconstruct(ReconstructArgs),
    /// Rescale event values to [0, 1] by the training-split maximum.
    Normalize(NormalizeArgs),
    /// Sparsity and activity statistics over event directories.
    Stats(StatsArgs),
    /// Train the LIF spiking readout on event representations.
    TrainReadout(TrainReadoutArgs),
    /// Synaptic-operation counts of a trained readout over a dataset.
    Synops(SynopsArgs),
}

#[derive(Subcommand)]
enum BankCommand {
    Build(BankBuildArgs),
    Dump(BankDumpArgs),
    Adapt(BankAdaptArgs),
}

#[derive(Args)]
struct BankBuildArgs {
    /// Number of channels.
    #[arg(long)]
    k: Option<usize>,
    /// Filter length in samples.
    #[arg(long)]
    flen: Option<usize>,
    /// Sample rate in Hz.
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long)]
    freq_min: Option<f64>,
    #[arg(long)]
    freq_max: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BankDumpArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Parameter CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BankAdaptArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Directory of training WAV files.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch summary CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// TBPTT window in LCA iterations.
    #[arg(long)]
    window: Option<usize>,
    /// Sparsity penalty scale.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    bank: PathBuf,
    /// Single input WAV (writes an .spcd to --out).
    #[arg(long, conflicts_with = "manifest")]
    input: Option<PathBuf>,
    #[arg(long, requires = "input")]
    out: Option<PathBuf>,
    /// Dataset manifest CSV (writes .evrp files to --out-dir).
    #[arg(long, requires = "out_dir")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step_ratio: Option<f64>,
    /// Per-iteration energy CSV (single-input mode).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    code: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reference WAV for the printed SNR.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Directory of training .evrp files (defines the scale).
    #[arg(long)]
    train: PathBuf,
    /// Additional directories normalized by the training scale.
    #[arg(long)]
    eval: Vec<PathBuf>,
    /// Output root; mirrors one subdirectory per input directory.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory of coded .evrp files.
    #[arg(long)]
    coded: PathBuf,
    /// Directory of reference .evrp files for the sparsity ratio.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainReadoutArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training log CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    recurrent: bool,
    /// Number of classes; inferred from labels when omitted.
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// TBPTT window in time steps; full BPTT when omitted.
    #[arg(long)]
    tbptt: Option<usize>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    mem_decay: Option<f64>,
    #[arg(long)]
    syn_decay: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Reset mode: subtract | zero.
    #[arg(long)]
    reset: Option<String>,
}

#[derive(Args)]
struct SynopsArgs {
    #[arg(long)]
    model: PathBuf,
    /// Directory of .evrp files.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Domain(_) | Error::Shape(_) => 3,
        Error::State(_)
        | Error::Training(_)
        | Error::Normalization(_)
        | Error::NonFiniteGradient { .. } => 4,
        Error::Ingestion { .. } | Error::Format(_) => 5,
        Error::Io(_) => 6,
    }
}

/// Key lookup helpers over the JSON config file.
struct FileConfig(Map<String, Value>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self, Error> {
        let map = match path {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(m)) => m,
                    Ok(_) => {
                        return Err(Error::Config(format!(
                            "{}: config must be a JSON object",
                            p.display()
                        )))
                    }
                    Err(e) => {
                        return Err(Error::Config(format!("{}: {}", p.display(), e)))
                    }
                }
            }
            None => Map::new(),
        };
        Ok(Self(map))
    }

    fn f64(&self, key: &str) -> Option<f64> {
        self.0.get(key).and_then(Value::as_f64)
    }

    fn usize(&self, key: &str) -> Option<usize> {
        self.0.get(key).and_then(Value::as_u64).map(|v| v as usize)
    }

    fn u64(&self, key: &str) -> Option<u64> {
        self.0.get(key).and_then(Value::as_u64)
    }

    fn string(&self, key: &str) -> Option<String> {
        self.0.get(key).and_then(Value::as_str).map(str::to_owned)
    }
}

fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> u64 {
    flag.or_else(|| {
        std::env::var("SPARSE_AUDIO_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .or_else(|| file.u64("seed"))
    .unwrap_or(0)
}

/// Echo the resolved configuration next to the primary output.
fn write_sidecar(out: &Path, subcommand: &str, resolved: &Map<String, Value>) -> Result<(), Error> {
    let mut doc = Map::new();
    doc.insert("subcommand".into(), json!(subcommand));
    for (k, v) in resolved {
        doc.insert(k.clone(), v.clone());
    }
    let mut path = out.as_os_str().to_owned();
    path.push(".config.json");
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
    fs::write(PathBuf::from(path), text + "\n")?;
    Ok(())
}

fn load_bank(path: &Path) -> Result<FilterBank<R>, Error> {
    let mut file = std::io::BufReader::new(fs::File::open(path)?);
    FilterBank::read_from(&mut file)
}

fn save_bank(bank: &FilterBank<R>, path: &Path) -> Result<(), Error> {
    let mut file = BufWriter::new(fs::File::create(path)?);
    bank.write_to(&mut file)
}

fn wav_dir(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Ingestion {
            path: dir.display().to_string(),
            reason: "no .wav files found".into(),
        });
    }
    Ok(paths)
}

fn snr_db(reference: &[R], estimate: &[R]) -> f64 {
    let n = reference.len().min(estimate.len());
    let mut signal = 0.0;
    let mut noise = 0.0;
    for i in 0..n {
        signal += reference[i] * reference[i];
        let d = reference[i] - estimate[i];
        noise += d * d;
    }
    for &r in &reference[n..] {
        signal += r * r;
        noise += r * r;
    }
    if noise == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / noise).log10()
    }
}

fn print_or_write(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_bank_build(a: &BankBuildArgs, file: &FileConfig) -> Result<(), Error> {
    let k = a.k.or_else(|| file.usize("k")).unwrap_or(32);
    let flen = a.flen.or_else(|| file.usize("flen")).unwrap_or(512);
    let fs_hz = a.fs.or_else(|| file.f64("fs")).unwrap_or(16000.0);
    let mut config = BankConfig::new(k, flen, fs_hz);
    let freq_min = a.freq_min.or_else(|| file.f64("freq_min"));
    let freq_max = a.freq_max.or_else(|| file.f64("freq_max"));
    if freq_min.is_some() || freq_max.is_some() {
        config = config.with_freq_range(
            freq_min.unwrap_or(config.freq_min_hz),
            freq_max.unwrap_or(config.freq_max_hz),
        );
    }
    let bank = FilterBank::gammatone(config)?;
    save_bank(&bank, &a.out)?;
    let mut resolved = Map::new();
    resolved.insert("k".into(), json!(k));
    resolved.insert("flen".into(), json!(flen));
    resolved.insert("fs".into(), json!(fs_hz));
    resolved.insert("freq_min".into(), json!(config.freq_min_hz));
    resolved.insert("freq_max".into(), json!(config.freq_max_hz));
    write_sidecar(&a.out, "bank build", &resolved)?;
    println!("wrote bank with {k} channels to {}", a.out.display());
    Ok(())
}

fn cmd_bank_dump(a: &BankDumpArgs) -> Result<(), Error> {
    let bank = load_bank(&a.bank)?;
    let mut buf = Vec::new();
    bank.write_csv(&mut buf)?;
    print_or_write(a.out.as_deref(), &String::from_utf8_lossy(&buf))
}

fn cmd_bank_adapt(a: &BankAdaptArgs, file: &FileConfig, seed: u64) -> Result<(), Error> {
    let bank = load_bank(&a.bank)?;
    let lambda = a.lambda.or_else(|| file.f64("lambda")).unwrap_or(0.1);
    let stride = a
        .stride
        .or_else(|| file.usize("stride"))
        .unwrap_or(bank.filter_len() / 2);
    let iterations = a
        .iterations
        .or_else(|| file.usize("iterations"))
        .unwrap_or(64);
    let mut cfg = LcaConfig::new(lambda);
    cfg.num_iterations = iterations;
    let mut acfg = AdaptConfig::new(
        a.lr.or_else(|| file.f64("lr")).unwrap_or(0.01),
    );
    acfg.num_epochs = a.epochs.or_else(|| file.usize("epochs")).unwrap_or(20);
    acfg.batch_size = a
        .batch_size
        .or_else(|| file.usize("batch_size"))
        .unwrap_or(8);
    acfg.tbptt_window = a
        .window
        .or_else(|| file.usize("window"))
        .unwrap_or(iterations);
    acfg.sparsity_scale = a.alpha.or_else(|| file.f64("alpha")).unwrap_or(1.0);
    acfg.seed = seed;

    let corpus: Vec<Vec<R>> = wav_dir(&a.data)?
        .iter()
        .map(|p| load_wav::<R>(p).map(|s| s.samples))
        .collect::<Result<_, _>>()?;
    let (adapted, trace) = adapt(&corpus, &bank, stride, &cfg, &acfg)?;
    save_bank(&adapted, &a.out)?;
    if let Some(trace_path) = &a.trace {
        let mut w = BufWriter::new(fs::File::create(trace_path)?);
        trace.write_csv(&mut w)?;
    }
    let mut resolved = Map::new();
    resolved.insert("lambda".into(), json!(lambda));
    resolved.insert("stride".into(), json!(stride));
    resolved.insert("iterations".into(), json!(iterations));
    resolved.insert("lr".into(), json!(acfg.learning_rate));
    resolved.insert("epochs".into(), json!(acfg.num_epochs));
    resolved.insert("batch_size".into(), json!(acfg.batch_size));
    resolved.insert("window".into(), json!(acfg.tbptt_window));
    resolved.insert("alpha".into(), json!(acfg.sparsity_scale));
    resolved.insert("seed".into(), json!(seed));
    write_sidecar(&a.out, "bank adapt", &resolved)?;
    if let Some(e) = trace.mean_scaled_energy.last() {
        println!("final mean scaled energy {e}");
    }
    Ok(())
}

fn lca_config(
    lambda: Option<f64>,
    stride: Option<usize>,
    iterations: Option<usize>,
    step_ratio: Option<f64>,
    file: &FileConfig,
    bank: &FilterBank<R>,
) -> (LcaConfig<R>, usize, Map<String, Value>) {
    let lambda = lambda.or_else(|| file.f64("lambda")).unwrap_or(0.1);
    let stride = stride
        .or_else(|| file.usize("stride"))
        .unwrap_or(bank.filter_len() / 2);
    let iterations = iterations.or_else(|| file.usize("iterations")).unwrap_or(64);
    let step_ratio = step_ratio.or_else(|| file.f64("step_ratio")).unwrap_or(0.01);
    let mut cfg = LcaConfig::new(lambda);
    cfg.num_iterations = iterations;
    cfg.step_ratio = step_ratio;
    let mut resolved = Map::new();
    resolved.insert("lambda".into(), json!(lambda));
    resolved.insert("stride".into(), json!(stride));
    resolved.insert("iterations".into(), json!(iterations));
    resolved.insert("step_ratio".into(), json!(step_ratio));
    (cfg, stride, resolved)
}

fn cmd_encode(a: &EncodeArgs, file: &FileConfig) -> Result<(), Error> {
    let bank = load_bank(&a.bank)?;
    let (cfg, stride, resolved) = lca_config(
        a.lambda,
        a.stride,
        a.iterations,
        a.step_ratio,
        file,
        &bank,
    );
    if let Some(input) = &a.input {
        let out = a
            .out
            .as_ref()
            .ok_or_else(|| Error::Config("--input requires --out".into()))?;
        let audio = load_wav::<R>(input)?;
        let dict = Dictionary::new(bank, stride, audio.samples.len())?;
        let (code, trace) = encode(&audio.samples, &dict, &cfg)?;
        let mut w = BufWriter::new(fs::File::create(out)?);
        code.write_to(&mut w)?;
        drop(w);
        if let Some(trace_path) = &a.trace {
            let mut w = BufWriter::new(fs::File::create(trace_path)?);
            trace.write_csv(&mut w)?;
        }
        write_sidecar(out, "encode", &resolved)?;
        println!(
            "encoded {} events ({} channels x {} frames)",
            code.l0(),
            code.num_channels,
            code.num_frames
        );
    } else if let Some(manifest_path) = &a.manifest {
        let out_dir = a
            .out_dir
            .as_ref()
            .ok_or_else(|| Error::Config("--manifest requires --out-dir".into()))?;
        fs::create_dir_all(out_dir)?;
        let manifest = DatasetManifest::load(manifest_path)?;
        let opts = EncodeOptions {
            stride_samples: stride,
            min_len_samples: None,
            kind: ReprKind::Lca,
        };
        let (ok, failed) = sparse_audio::repr::encode_dataset(&manifest, &bank, &cfg, &opts);
        for (i, (entry, rep)) in ok.iter().enumerate() {
            let stem = entry
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sample".into());
            rep.save(&out_dir.join(format!("{i:05}_{stem}.evrp")))?;
        }
        write_sidecar(out_dir, "encode", &resolved)?;
        println!("encoded {} files, {} failed", ok.len(), failed.len());
        for (path, e) in &failed {
            eprintln!("failed {}: {e}", path.display());
        }
        if !failed.is_empty() {
            return Err(Error::Ingestion {
                path: manifest_path.display().to_string(),
                reason: format!("{} file(s) failed to encode", failed.len()),
            });
        }
    } else {
        return Err(Error::Config("encode needs --input or --manifest".into()));
    }
    Ok(())
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Result<(), Error> {
    let bank = load_bank(&a.bank)?;
    let mut file = std::io::BufReader::new(fs::File::open(&a.code)?);
    let code = SparseCode::<R>::read_from(&mut file)?;
    let fs_hz = bank.config.sample_rate_hz;
    let dict = Dictionary::new(bank, code.stride_samples, code.source_len)?;
    let mut signal = dict.reconstruct(&code.to_coeffs())?;
    signal.truncate(code.source_len);
    write_wav(&a.out, &signal, fs_hz as u32)?;
    if let Some(reference) = &a.reference {
        let audio = load_wav::<R>(reference)?;
        println!("snr_db,{}", snr_db(&audio.samples, &signal));
    }
    Ok(())
}

fn cmd_normalize(a: &NormalizeArgs) -> Result<(), Error> {
    let mut train = load_repr_dir::<R>(&a.train)?;
    let mut evals: Vec<Vec<EventRepresentation<R>>> = a
        .eval
        .iter()
        .map(|dir| load_repr_dir::<R>(dir))
        .collect::<Result<_, _>>()?;
    let mut flat_eval: Vec<EventRepresentation<R>> = evals.concat();
    let scale = normalize_01(&mut train, &mut flat_eval)?;
    let mut offset = 0;
    for e in evals.iter_mut() {
        let n = e.len();
        e.clone_from_slice(&flat_eval[offset..offset + n]);
        offset += n;
    }
    let write_dir = |dir_in: &Path, reps: &[EventRepresentation<R>]| -> Result<(), Error> {
        let name = dir_in
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "split".into());
        let dir_out = a.out_dir.join(name);
        fs::create_dir_all(&dir_out)?;
        for (i, rep) in reps.iter().enumerate() {
            rep.save(&dir_out.join(format!("{i:05}.evrp")))?;
        }
        Ok(())
    };
    write_dir(&a.train, &train)?;
    for (dir, reps) in a.eval.iter().zip(&evals) {
        write_dir(dir, reps)?;
    }
    let mut resolved = Map::new();
    resolved.insert("scale".into(), json!(scale));
    write_sidecar(&a.out_dir, "normalize", &resolved)?;
    println!("scale,{scale}");
    Ok(())
}

fn cmd_stats(a: &StatsArgs) -> Result<(), Error> {
    let coded = load_repr_dir::<R>(&a.coded)?;
    let reference = load_repr_dir::<R>(&a.reference)?;
    let ratio = sparse_audio::repr::sparsity_ratio(&coded, &reference)?;
    let mut text = String::from("metric,class,value\n");
    text.push_str(&format!("sparsity_ratio,,{ratio}\n"));
    let mean = |reps: &[EventRepresentation<R>]| {
        reps.iter().map(|r| r.nonzero_count()).sum::<usize>() as f64 / reps.len() as f64
    };
    text.push_str(&format!("coded_mean_l0,,{}\n", mean(&coded)));
    let mut labels: Vec<u32> = coded.iter().filter_map(|r| r.label).collect();
    labels.sort_unstable();
    labels.dedup();
    for label in labels {
        let class: Vec<EventRepresentation<R>> = coded
            .iter()
            .filter(|r| r.label == Some(label))
            .cloned()
            .collect();
        text.push_str(&format!("class_mean_l0,{label},{}\n", mean(&class)));
    }
    print_or_write(a.out.as_deref(), &text)
}

fn cmd_train_readout(a: &TrainReadoutArgs, file: &FileConfig, seed: u64) -> Result<(), Error> {
    let train_set = load_repr_dir::<R>(&a.train)?;
    let valid_set = load_repr_dir::<R>(&a.valid)?;
    if train_set.is_empty() {
        return Err(Error::Training("empty training directory".into()));
    }
    let input_size = train_set[0].num_channels;
    let classes = a
        .classes
        .or_else(|| file.usize("classes"))
        .or_else(|| {
            train_set
                .iter()
                .chain(&valid_set)
                .filter_map(|r| r.label)
                .max()
                .map(|m| m as usize + 1)
        })
        .ok_or_else(|| Error::Training("cannot infer class count: no labels".into()))?;
    let hidden = a.hidden.or_else(|| file.usize("hidden")).unwrap_or(64);
    let spec = if a.recurrent {
        NetworkSpec::recurrent(input_size, hidden, classes)
    } else {
        NetworkSpec::feed_forward(input_size, hidden, classes)
    };
    let mut cfg = LifConfig::<R>::default();
    if let Some(v) = a.threshold.or_else(|| file.f64("threshold")) {
        cfg.threshold = v;
    }
    if let Some(v) = a.mem_decay.or_else(|| file.f64("mem_decay")) {
        cfg.mem_decay = v;
    }
    if let Some(v) = a.syn_decay.or_else(|| file.f64("syn_decay")) {
        cfg.syn_decay = v;
    }
    if let Some(v) = a.beta.or_else(|| file.f64("beta")) {
        cfg.surrogate_beta = v;
    }
    if let Some(mode) = a.reset.clone().or_else(|| file.string("reset")) {
        cfg.reset = match mode.as_str() {
            "subtract" => ResetMode::Subtract,
            "zero" => ResetMode::Zero,
            other => return Err(Error::Config(format!("unknown reset mode '{other}'"))),
        };
    }
    let mut tcfg = TrainConfig::new(a.lr.or_else(|| file.f64("lr")).unwrap_or(0.002));
    tcfg.num_epochs = a.epochs.or_else(|| file.usize("epochs")).unwrap_or(50);
    tcfg.batch_size = a
        .batch_size
        .or_else(|| file.usize("batch_size"))
        .unwrap_or(16);
    tcfg.tbptt_window = a.tbptt.or_else(|| file.usize("tbptt"));
    if let Some(l2) = a.l2.or_else(|| file.f64("l2")) {
        tcfg.l2_weight = l2;
    }
    tcfg.seed = seed;

    let mut net = LifNetwork::new(spec, cfg, seed)?;
    let trace = train(&mut net, &train_set, &valid_set, &tcfg)?;
    let mut w = BufWriter::new(fs::File::create(&a.out)?);
    net.write_to(&mut w)?;
    drop(w);
    if let Some(log) = &a.log {
        let mut w = BufWriter::new(fs::File::create(log)?);
        trace.write_csv(&mut w)?;
    }
    let mut resolved = Map::new();
    resolved.insert("hidden".into(), json!(hidden));
    resolved.insert("recurrent".into(), json!(a.recurrent));
    resolved.insert("classes".into(), json!(classes));
    resolved.insert("epochs".into(), json!(tcfg.num_epochs));
    resolved.insert("lr".into(), json!(tcfg.learning_rate));
    resolved.insert("batch_size".into(), json!(tcfg.batch_size));
    resolved.insert("l2".into(), json!(tcfg.l2_weight));
    resolved.insert("tbptt".into(), json!(tcfg.tbptt_window));
    resolved.insert("threshold".into(), json!(cfg.threshold));
    resolved.insert("mem_decay".into(), json!(cfg.mem_decay));
    resolved.insert("syn_decay".into(), json!(cfg.syn_decay));
    resolved.insert("beta".into(), json!(cfg.surrogate_beta));
    resolved.insert("seed".into(), json!(seed));
    write_sidecar(&a.out, "train-readout", &resolved)?;
    if !valid_set.is_empty() {
        println!("valid_accuracy,{}", accuracy(&net, &valid_set)?);
    }
    Ok(())
}

fn cmd_synops(a: &SynopsArgs) -> Result<(), Error> {
    let mut file = std::io::BufReader::new(fs::File::open(&a.model)?);
    let net = LifNetwork::<R>::read_from(&mut file)?;
    let reps = load_repr_dir::<R>(&a.data)?;
    let mut text = String::from("sample,input_layer,hidden,total\n");
    let mut total = SynOps::default();
    for (i, rep) in reps.iter().enumerate() {
        let (_, ops) = net.forward(rep)?;
        text.push_str(&format!(
            "{i},{},{},{}\n",
            ops.input_layer,
            ops.hidden,
            ops.total()
        ));
        total = total + ops;
    }
    text.push_str(&format!(
        "total,{},{},{}\n",
        total.input_layer,
        total.hidden,
        total.total()
    ));
    print_or_write(a.out.as_deref(), &text)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let seed = resolve_seed(cli.seed, &file);
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Bank { command } => match command {
            BankCommand::Build(a) => cmd_bank_build(a, &file),
            BankCommand::Dump(a) => cmd_bank_dump(a),
            BankCommand::Adapt(a) => cmd_bank_adapt(a, &file, seed),
        },
        Command::Encode(a) => cmd_encode(a, &file),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Normalize(a) => cmd_normalize(a),
        Command::Stats(a) => cmd_stats(a),
        Command::TrainReadout(a) => cmd_train_readout(a, &file, seed),
        Command::Synops(a) => cmd_synops(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
