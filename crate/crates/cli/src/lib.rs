//! Subcommands of the `diffprot` tool. Every command writes into a fresh
//! temporary directory next to its destination and renames it into place
//! only on success, so failed runs leave nothing behind.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use diffprot::evaluation::GridSpec;
use diffprot::pipeline::{
    config_hash, evaluate_pipeline, time_pipeline, train_pipeline, EvaluateConfig, ExperimentReport, PipelineModel,
    Slot, TrainConfig, TOOL_VERSION,
};
use diffprot::resampling::Strategy;
use diffprot::signal::{is_header, parse_row, read_csv, Waveform};
use diffprot::waveformgen::corpus::class_counts;
use diffprot::waveformgen::{generate_corpus, read_corpus, CorpusPlan};

pub const RUN_FILE: &str = "run.json";
pub const MODEL_FILE: &str = "pipeline.json";
pub const REPORT_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const DECISIONS_FILE: &str = "decisions.jsonl";

/// Exit status when `evaluate` finishes but a threshold is missed.
pub const EXIT_THRESHOLD_MISSED: u8 = 3;

/// Provenance sidecar written next to every output.
#[derive(Debug, Serialize)]
pub struct RunInfo<'a, C: Serialize> {
    pub tool_version: &'a str,
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: String,
    pub config: &'a C,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Build the output of `f` in a scratch directory, then move it to `out`.
/// An existing `out` is replaced only if it is empty or holds a previous run.
pub fn atomic_dir<C: Serialize>(
    out: &Path,
    command: &str,
    seed: u64,
    config: &C,
    f: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    if out.exists() {
        let empty = fs::read_dir(out).with_context(|| format!("reading {}", out.display()))?.next().is_none();
        if !empty && !out.join(RUN_FILE).is_file() {
            bail!("{} exists and was not written by this tool; refusing to replace it", out.display());
        }
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
    let tmp = tempfile::Builder::new().prefix(".diffprot-").tempdir_in(&parent)?;
    f(tmp.path())?;
    let info = RunInfo { tool_version: TOOL_VERSION, command, seed, config_hash: config_hash(config), config };
    write_json(&tmp.path().join(RUN_FILE), &info)?;
    if out.exists() {
        fs::remove_dir_all(out).with_context(|| format!("replacing {}", out.display()))?;
    }
    let kept = tmp.keep();
    fs::rename(&kept, out).with_context(|| format!("moving output to {}", out.display()))?;
    Ok(())
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// `10,30,inf` style list; `inf` is the noise-free baseline.
pub fn parse_snr_list(s: &str) -> Result<Vec<Option<f64>>, String> {
    s.split(',')
        .map(|t| match t.trim() {
            "inf" | "Inf" | "INF" => Ok(None),
            v => v.parse::<f64>().map(Some).map_err(|e| format!("bad SNR {v:?}: {e}")),
        })
        .collect()
}

// ---------------------------------------------------------------- generate

pub struct GenerateArgs {
    pub out: PathBuf,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub cases_per_class: Option<usize>,
    pub snr_db: Option<f64>,
}

pub fn cmd_generate(a: &GenerateArgs, log: &mut impl Write) -> Result<()> {
    let mut plan: CorpusPlan = match &a.config {
        Some(p) => load_json(p)?,
        None => CorpusPlan::reference(),
    };
    if let Some(n) = a.cases_per_class {
        plan.cap_per_class = Some(n);
        plan.fault_cap_per_stratum = None;
    }
    if a.snr_db.is_some() {
        plan.snr_db = a.snr_db;
    }
    let mut manifest = Vec::new();
    atomic_dir(&a.out, "generate", a.seed, &plan, |dir| {
        manifest = generate_corpus(&plan, a.seed, dir).context("generating corpus")?;
        Ok(())
    })?;
    writeln!(log, "{:<24} {:>6}", "class", "cases")?;
    for (class, n) in class_counts(&manifest) {
        writeln!(log, "{class:<24} {n:>6}")?;
    }
    writeln!(log, "{:<24} {:>6}", "total", manifest.len())?;
    Ok(())
}

// ------------------------------------------------------------------- train

pub struct TrainArgs {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub grid: Option<String>,
    pub resample: Option<Strategy>,
}

pub fn load_cases(corpus: &Path, fundamental_hz: f64) -> Result<Vec<(String, Waveform)>> {
    let cases = read_corpus(corpus, fundamental_hz).with_context(|| format!("loading corpus {}", corpus.display()))?;
    Ok(cases.into_iter().map(|(e, w)| (e.file, w)).collect())
}

pub fn cmd_train(a: &TrainArgs, log: &mut impl Write) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(g) = &a.grid {
        cfg.grid = GridSpec::by_name(g).with_context(|| format!("unknown grid {g:?}"))?;
    }
    if let Some(s) = a.resample {
        cfg.resample.strategy = s;
    }
    let cases = load_cases(&a.corpus, diffprot::signal::SamplingSpec::default().fundamental_hz)?;
    let model = train_pipeline(&cases, &cfg, a.seed).context("training")?;
    atomic_dir(&a.out, "train", a.seed, &cfg, |dir| {
        fs::write(dir.join(MODEL_FILE), model.to_json()).context("writing model")
    })?;
    print_training(&model, log)?;
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:6.2}%", 100.0 * v)
}

pub fn print_training(model: &PipelineModel, log: &mut impl Write) -> Result<()> {
    for (slot, st) in &model.metadata.stages {
        writeln!(
            log,
            "\n{slot} {} ({} train / {} holdout, {} classes)",
            st.task,
            st.n_train,
            st.n_holdout,
            st.classes.len()
        )?;
        if let Some(g) = &st.grid {
            writeln!(
                log,
                "  {:>8} {:>6} {:>6} {:>9}   {}-fold CV balanced accuracy",
                "n_est", "depth", "lr", "mean", g.cv_k
            )?;
            for r in &g.rows {
                let best = r.n_estimators == g.best.n_estimators
                    && r.max_depth == g.best.max_depth
                    && r.learning_rate == g.best.learning_rate;
                writeln!(
                    log,
                    "  {:>8} {:>6} {:>6} {:>9} {}",
                    r.n_estimators,
                    r.max_depth,
                    r.learning_rate,
                    pct(r.mean_score),
                    if best { "  <- selected" } else { "" }
                )?;
            }
        }
        if let Some(h) = &st.holdout {
            writeln!(log, "  holdout: accuracy {}  balanced accuracy {}", pct(h.accuracy), pct(h.balanced_accuracy))?;
            if *slot == Slot::Gbc1 {
                let c = h.per_class[0].counts;
                writeln!(log, "  fault class: TP {}  FN {}  TN {}  FP {}", c.tp, c.fn_, c.tn, c.fp)?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- evaluate

pub struct EvaluateArgs {
    pub corpus: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub config: Option<PathBuf>,
    pub snr: Option<Vec<Option<f64>>>,
    pub all_cases: bool,
    pub timing_runs: Option<usize>,
}

pub fn load_model(path: &Path) -> Result<PipelineModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PipelineModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

/// Returns whether every threshold was met.
pub fn cmd_evaluate(a: &EvaluateArgs, log: &mut impl Write) -> Result<bool> {
    let mut cfg: EvaluateConfig = match &a.config {
        Some(p) => load_json(p)?,
        None => EvaluateConfig::default(),
    };
    if let Some(s) = &a.snr {
        cfg.snr_db = s.clone();
    }
    cfg.all_cases |= a.all_cases;
    let model = load_model(&a.model)?;
    let cases = load_cases(&a.corpus, model.sampling.fundamental_hz)?;
    let (report, predictions) = evaluate_pipeline(&model, &cases, &cfg, a.seed, true).context("evaluating")?;
    let timing = match a.timing_runs {
        Some(runs) => Some(time_pipeline(&model, &cases, runs).context("timing")?),
        None => None,
    };
    atomic_dir(&a.out, "evaluate", a.seed, &cfg, |dir| {
        write_json(&dir.join(REPORT_FILE), &report)?;
        let mut w = BufWriter::new(fs::File::create(dir.join(PREDICTIONS_FILE))?);
        writeln!(w, "id,truth,verdict,predicted,trigger_index,inception_index")?;
        for p in &predictions {
            let t = p.trigger_index.map_or(String::new(), |t| t.to_string());
            writeln!(w, "{},{},{},{},{},{}", p.id, p.truth, p.verdict.name(), p.predicted, t, p.inception_index)?;
        }
        w.flush()?;
        if let Some(t) = &timing {
            write_json(&dir.join(TIMING_FILE), t)?;
        }
        Ok(())
    })?;
    print_report(&report, log)?;
    if let Some(t) = &timing {
        writeln!(log, "\nexecution time over {} cases", t.n_cases)?;
        for s in &t.stages {
            writeln!(log, "  {s}")?;
        }
    }
    Ok(report.passed)
}

pub fn print_report(r: &ExperimentReport, log: &mut impl Write) -> Result<()> {
    writeln!(log, "{} cases; balanced accuracy = {}", r.n_cases, r.balanced_accuracy_definition)?;
    writeln!(log, "{:<6} {:<22} {:>6} {:>9} {:>9}", "slot", "task", "n", "accuracy", "balanced")?;
    for (slot, m) in &r.stages {
        writeln!(
            log,
            "{:<6} {:<22} {:>6} {:>9} {:>9}",
            slot.name(),
            slot.task().name(),
            m.n,
            pct(m.accuracy),
            pct(m.balanced_accuracy)
        )?;
    }
    let e = &r.end_to_end;
    writeln!(
        log,
        "end to end: verdict balanced accuracy {}, seven-class balanced accuracy {}, {} undetected",
        pct(e.verdict.balanced_accuracy),
        pct(e.top_class.balanced_accuracy),
        e.no_event
    )?;
    if let Some(l) = e.latency.max_verdict_from_trigger_samples {
        writeln!(log, "verdict latency from trigger: {l} samples")?;
    }
    writeln!(log, "verdict accuracy under noise      retrained  clean-trained")?;
    for (n, c) in r.noise.iter().zip(&r.noise_clean_model) {
        let snr = n.snr_db.map_or("inf".to_string(), |s| format!("{s} dB"));
        writeln!(
            log,
            "  SNR {snr:>7}                    {:>9}  {:>13}",
            pct(n.metrics.accuracy),
            pct(c.metrics.accuracy)
        )?;
    }
    for c in &r.checks {
        let v = c.value.map_or("n/a".to_string(), pct);
        writeln!(log, "{} {:<30} {} (minimum {})", if c.passed { "PASS" } else { "FAIL" }, c.name, v, pct(c.minimum))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- classify

pub struct ClassifyArgs {
    pub model: PathBuf,
    pub inputs: Vec<PathBuf>,
    pub stream: bool,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ClassifyConfig<'a> {
    model: String,
    model_config_hash: &'a str,
    inputs: Vec<String>,
    stream: bool,
}

/// Decisions as JSON lines, to `out` (a directory) or to `stdout`.
pub fn cmd_classify(a: &ClassifyArgs, stdin: impl BufRead, stdout: &mut impl Write) -> Result<()> {
    let model = load_model(&a.model)?;
    if a.stream == !a.inputs.is_empty() {
        bail!("give either CSV inputs or --stream");
    }
    let mut lines = Vec::new();
    if a.stream {
        stream_decisions(&model, stdin, &mut |l| lines.push(l))?;
    } else {
        for path in &a.inputs {
            let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let rec = read_csv(BufReader::new(f), model.sampling.fundamental_hz)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut d = model.decide_record(&rec).with_context(|| format!("classifying {}", path.display()))?;
            d.id =
                Some(path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()));
            lines.push(d.to_json_line());
        }
    }
    match &a.out {
        None => {
            for l in &lines {
                writeln!(stdout, "{l}")?;
            }
        }
        Some(out) => {
            let cfg = ClassifyConfig {
                model: a.model.display().to_string(),
                model_config_hash: &model.metadata.config_hash,
                inputs: a.inputs.iter().map(|p| p.display().to_string()).collect(),
                stream: a.stream,
            };
            atomic_dir(out, "classify", model.metadata.seed, &cfg, |dir| {
                let mut text = lines.join("\n");
                if !text.is_empty() {
                    text.push('\n');
                }
                fs::write(dir.join(DECISIONS_FILE), text).context("writing decisions")
            })?;
        }
    }
    Ok(())
}

/// One `t,ia,ib,ic` row per line; memory stays bounded by the windows.
pub fn stream_decisions(model: &PipelineModel, input: impl BufRead, emit: &mut impl FnMut(String)) -> Result<()> {
    let mut stream = model.stream()?;
    let dt = 1.0 / model.sampling.sample_rate_hz;
    let mut first_t = None;
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading standard input")?;
        if line.trim().is_empty() || (i == 0 && is_header(&line)) {
            continue;
        }
        let (t, s) = parse_row(&line, i + 1)?;
        let n = stream.samples_seen();
        match first_t {
            None => first_t = Some(t),
            Some(t0) if n == 1 && ((t - t0) - dt).abs() > 1e-6 * dt => {
                bail!("line {}: sample spacing {} s does not match the model's {} s", i + 1, t - t0, dt)
            }
            _ => {}
        }
        if let Some(d) = stream.push(s)? {
            emit(serde_json::to_string(&d)?);
        }
    }
    if let Some(d) = stream.finish() {
        emit(d.to_json_line());
    }
    Ok(())
}
