use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use cibnet::analysis::{
    cluster_report, format_report_table, nmi_partitions, time_gap_density, write_gap_density_csv, ClusterReport,
    NmiNorm,
};
use cibnet::audiofp::{cluster_voiceprints, resample_linear, voiceprint, write_k_distance_csv, write_labels_csv, MelAnalyzer};
use cibnet::ingest::{
    parse_comments, parse_embeddings, parse_posts, read_packed_embeddings, read_wav_file, write_comments_jsonl,
    write_embeddings_jsonl, write_posts_jsonl, CommentRecord, EmbeddingRecord, Ledger, ParseOptions, PostRecord,
};
use cibnet::pipeline::{detect_all, format_robustness_table, restrict, robustness, Corpus, StageTimings};
use cibnet::prune::Cluster;
use cibnet::simnet::{write_edge_csv, write_graphml};
use cibnet::synthbench::{evaluate, generate_dataset, Dataset, EvalResult, GroundTruth, Scenario};
use cibnet::traces::TraceKind;
use serde::{Deserialize, Serialize};

use crate::config::{file_sha256, EmbeddingInput, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for a finished command that did not error outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NoData,
    /// Some (window, trace) runs failed; carries the exit code.
    Partial(i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub name: String,
    pub sha256: String,
    pub records: usize,
    pub issues: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub window: String,
    pub trace: TraceKind,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub nodes: usize,
    pub edges: usize,
    pub pruned_nodes: usize,
    pub pruned_edges: usize,
    pub clusters: usize,
    pub accounts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    pub timings_ms: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputSummary>,
    #[serde(default)]
    pub runs: Vec<RunSummary>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Manifest {
        Manifest {
            tool: "cibnet".into(),
            version: VERSION.into(),
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            inputs: Vec::new(),
            runs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| cibnet::Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text).map_err(|e| cibnet::Error::Data(format!("{}: {e}", path.display())))?)
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cibnet::Error>() {
            return error_code(e);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

pub fn error_code(e: &cibnet::Error) -> i32 {
    match e {
        cibnet::Error::Config(_) | cibnet::Error::Contract(_) => 2,
        cibnet::Error::Data(_) | cibnet::Error::Io(_) => 3,
        cibnet::Error::NonConvergence { .. } => 4,
    }
}

fn status_name(e: &cibnet::Error) -> &'static str {
    match error_code(e) {
        2 => "config_error",
        3 => "data_error",
        _ => "non_convergence",
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| cibnet::Error::Data(format!("{}: {e}", path.display())))?)
}

fn display_name(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

pub struct Inputs {
    pub posts: Vec<PostRecord>,
    pub comments: Vec<CommentRecord>,
    pub embeddings: Vec<EmbeddingRecord>,
    pub summaries: Vec<InputSummary>,
    pub ledgers: Vec<(String, Ledger)>,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    cfg.check_inputs()?;
    let posts_path = cfg
        .posts
        .as_deref()
        .ok_or_else(|| cibnet::Error::Config("no posts file configured".into()))?;
    let mut summaries = Vec::new();
    let mut ledgers = Vec::new();
    let mut record = |name: &Path, path: &Path, records: usize, ledger: Ledger| -> Result<()> {
        summaries.push(InputSummary {
            name: display_name(name),
            sha256: file_sha256(path)?,
            records,
            issues: ledger.len(),
        });
        ledgers.push((display_name(name), ledger));
        Ok(())
    };

    let path = cfg.resolve(posts_path);
    let opts = ParseOptions { case_sensitive_hashtags: cfg.case_sensitive_hashtags };
    let parsed = parse_posts(BufReader::new(File::open(&path)?), opts)?;
    let posts = parsed.records;
    record(posts_path, &path, posts.len(), parsed.ledger)?;

    let mut comments = Vec::new();
    if let Some(c) = &cfg.comments {
        let path = cfg.resolve(c);
        let known: HashSet<&str> = posts.iter().map(|p| p.post_id.as_str()).collect();
        let parsed = parse_comments(BufReader::new(File::open(&path)?), Some(&known))?;
        comments = parsed.records;
        record(c, &path, comments.len(), parsed.ledger)?;
    }

    let mut embeddings = Vec::new();
    for input in &cfg.embeddings {
        let path = cfg.resolve(input.path());
        let reader = BufReader::new(File::open(&path)?);
        let parsed = match input {
            EmbeddingInput::Path(_) => parse_embeddings(reader)?,
            EmbeddingInput::Packed { kind, .. } => read_packed_embeddings(reader, *kind)?,
        };
        let n = parsed.records.len();
        embeddings.extend(parsed.records);
        record(input.path(), &path, n, parsed.ledger)?;
    }
    Ok(Inputs { posts, comments, embeddings, summaries, ledgers })
}

pub fn ingest_check(cfg: &RunConfig) -> Result<Outcome> {
    let t = Instant::now();
    let inputs = load_inputs(cfg)?;
    let mut out = std::io::stdout().lock();
    for (s, (_, ledger)) in inputs.summaries.iter().zip(&inputs.ledgers) {
        writeln!(out, "{}\t{} records\t{} issues", s.name, s.records, s.issues)?;
        for issue in ledger.issues.iter().take(20) {
            writeln!(out, "  line {}: {:?}: {}", issue.line, issue.kind, issue.message)?;
        }
        if ledger.len() > 20 {
            writeln!(out, "  ... {} more", ledger.len() - 20)?;
        }
    }
    if let Some(dir) = &cfg.out {
        let dir = cfg.resolve(dir);
        fs::create_dir_all(&dir)?;
        let mut m = Manifest::new("ingest-check", cfg);
        m.inputs = inputs.summaries.clone();
        m.timings_ms.insert("total".into(), ms(t));
        let issues: BTreeMap<&str, &Ledger> = inputs.ledgers.iter().map(|(n, l)| (n.as_str(), l)).collect();
        write_json(&dir.join("issues.json"), &issues)?;
        write_json(&dir.join("manifest.json"), &m)?;
    }
    Ok(if inputs.posts.is_empty() { Outcome::NoData } else { Outcome::Success })
}

pub fn detect(cfg: &RunConfig) -> Result<Outcome> {
    let t_total = Instant::now();
    cfg.validate()?;
    let windows = cfg.window_list()?;
    let traces = cfg.trace_list();
    let out = cfg.out_dir()?;
    let t_ingest = Instant::now();
    let inputs = load_inputs(cfg)?;
    if inputs.posts.is_empty() {
        eprintln!("no data: the posts input contains no valid records");
        return Ok(Outcome::NoData);
    }
    let ingest_ms = ms(t_ingest);
    let corpus = Corpus { posts: &inputs.posts, comments: &inputs.comments, embeddings: &inputs.embeddings };
    log::info!("{} posts, {} comments, {} embeddings", inputs.posts.len(), inputs.comments.len(), inputs.embeddings.len());

    let results = detect_all(&traces, &windows, corpus, &cfg.detect);
    fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new("detect", cfg);
    manifest.inputs = inputs.summaries.clone();
    let mut all_reports = Vec::new();
    let mut worst = 0;
    let mut restricted: HashMap<String, (Vec<PostRecord>, Vec<CommentRecord>)> = HashMap::new();
    for (label, kind, result) in results {
        let mut summary = RunSummary {
            window: label.clone(),
            trace: kind,
            status: "ok".into(),
            error: None,
            nodes: 0,
            edges: 0,
            pruned_nodes: 0,
            pruned_edges: 0,
            clusters: 0,
            accounts: 0,
            dir: None,
            timings_ms: StageTimings::default(),
        };
        match result {
            Err(e) => {
                log::warn!("{label}/{}: {e}", kind.as_str());
                worst = worst.max(error_code(&e));
                summary.status = status_name(&e).into();
                summary.error = Some(e.to_string());
            }
            Ok(run) => {
                let rel = format!("{label}/{}", kind.as_str());
                let dir = out.join(&rel);
                fs::create_dir_all(&dir)?;
                write_graphml(create(&dir.join("pruned.graphml"))?, &run.pruned)?;
                write_edge_csv(create(&dir.join("pruned_edges.csv"))?, &run.pruned)?;
                write_json(&dir.join("clusters.json"), &run.clusters)?;

                let window = windows.iter().find(|w| w.label == label).expect("window of a run");
                let (posts, comments) = restricted.entry(label.clone()).or_insert_with(|| restrict(corpus, window));
                let reports: Vec<ClusterReport> = run
                    .clusters
                    .iter()
                    .enumerate()
                    .map(|(i, c)| cluster_report(i + 1, c, posts, comments, &cfg.detect.trace))
                    .collect::<cibnet::Result<_>>()?;
                write_json(&dir.join("reports.json"), &reports)?;
                write_text(&dir.join("report.txt"), &format_report_table(&reports))?;
                all_reports.extend(reports);

                summary.nodes = run.network.node_count();
                summary.edges = run.network.edge_count();
                summary.pruned_nodes = run.pruned.node_count();
                summary.pruned_edges = run.pruned.edge_count();
                summary.clusters = run.clusters.len();
                summary.accounts = run.accounts().len();
                summary.dir = Some(rel);
                summary.timings_ms = run.timings;
            }
        }
        manifest.runs.push(summary);
    }
    let table = format_report_table(&all_reports);
    write_text(&out.join("report.txt"), &table)?;
    print!("{table}");
    for r in manifest.runs.iter().filter(|r| r.status != "ok") {
        eprintln!("{}/{}: {}", r.window, r.trace.as_str(), r.error.as_deref().unwrap_or(""));
    }
    manifest.timings_ms.insert("ingest".into(), ingest_ms);
    manifest.timings_ms.insert("total".into(), ms(t_total));
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(if worst == 0 { Outcome::Success } else { Outcome::Partial(worst) })
}

fn load_clusters(out: &Path, run: &RunSummary) -> Result<Vec<Cluster>> {
    match &run.dir {
        Some(d) => read_json(&out.join(d).join("clusters.json")),
        None => Ok(Vec::new()),
    }
}

/// Forensic extras over a finished detect run: per-cluster posting-gap
/// densities against the rest of the window, and cross-trace NMI.
pub fn report(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.out_dir()?;
    let manifest = Manifest::read(&out)?;
    let inputs = load_inputs(cfg)?;
    let windows = cfg.window_list()?;
    let corpus = Corpus { posts: &inputs.posts, comments: &inputs.comments, embeddings: &inputs.embeddings };
    let bin = cfg.detect.trace.bin_width;

    let mut all_reports: Vec<ClusterReport> = Vec::new();
    let mut partitions: BTreeMap<String, Vec<(TraceKind, HashMap<String, usize>)>> = BTreeMap::new();
    for run in manifest.runs.iter().filter(|r| r.status == "ok") {
        let Some(rel) = &run.dir else { continue };
        let dir = out.join(rel);
        let clusters = load_clusters(&out, run)?;
        let reports: Vec<ClusterReport> = read_json(&dir.join("reports.json"))?;
        all_reports.extend(reports);

        let window = match windows.iter().find(|w| w.label == run.window) {
            Some(w) => w.clone(),
            None => cibnet::pipeline::Window::parse(&run.window)?,
        };
        let (posts, _) = restrict(corpus, &window);
        for (i, c) in clusters.iter().enumerate() {
            let members: HashSet<&str> = c.members.iter().map(String::as_str).collect();
            let (mut inside, mut outside): (Vec<i64>, Vec<i64>) = (Vec::new(), Vec::new());
            for p in &posts {
                if members.contains(p.user_id.as_str()) {
                    inside.push(p.timestamp);
                } else {
                    outside.push(p.timestamp);
                }
            }
            inside.sort_unstable();
            outside.sort_unstable();
            if inside.len() >= 2 && outside.len() >= 2 {
                let d = time_gap_density(&inside, &outside, bin)?;
                write_gap_density_csv(create(&dir.join(format!("gaps_{}.csv", i + 1)))?, &d)?;
            }
        }
        let labels: HashMap<String, usize> = clusters
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.members.iter().map(move |m| (m.clone(), i)))
            .collect();
        partitions.entry(run.window.clone()).or_default().push((run.trace, labels));
    }

    let mut nmi = String::from("window\ttrace_a\ttrace_b\tnmi\tshared\tjaccard\n");
    for (window, parts) in &partitions {
        for (i, (ka, a)) in parts.iter().enumerate() {
            for (kb, b) in &parts[i + 1..] {
                if a.is_empty() && b.is_empty() {
                    continue;
                }
                let v = nmi_partitions(a, b, NmiNorm::Geometric)?;
                let shared = a.keys().filter(|k| b.contains_key(*k)).count();
                let jaccard = shared as f64 / (a.len() + b.len() - shared) as f64;
                nmi.push_str(&format!(
                    "{window}\t{}\t{}\t{v:.6}\t{shared}\t{jaccard:.6}\n",
                    ka.as_str(),
                    kb.as_str()
                ));
            }
        }
    }
    write_text(&out.join("nmi.tsv"), &nmi)?;
    let table = format_report_table(&all_reports);
    write_text(&out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub window: String,
    /// `None` for the union over all traces.
    pub trace: Option<TraceKind>,
    pub result: EvalResult,
}

pub fn eval(cfg: &RunConfig) -> Result<Outcome> {
    let out = cfg.out_dir()?;
    let truth_path = cfg
        .truth
        .as_deref()
        .ok_or_else(|| cibnet::Error::Config("eval needs a \"truth\" file".into()))?;
    let truth: GroundTruth = read_json(&cfg.resolve(truth_path))?;
    let manifest = Manifest::read(&out)?;
    let mut rows = Vec::new();
    let mut union: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for run in manifest.runs.iter().filter(|r| r.status == "ok") {
        let detected: BTreeSet<String> =
            load_clusters(&out, run)?.into_iter().flat_map(|c| c.members).collect();
        union.entry(run.window.clone()).or_default().extend(detected.iter().cloned());
        rows.push(EvalRow { window: run.window.clone(), trace: Some(run.trace), result: evaluate(&detected, &truth) });
    }
    for (window, detected) in union {
        rows.push(EvalRow { window, trace: None, result: evaluate(&detected, &truth) });
    }
    let mut table = String::from("window\ttrace\tdetected\tprecision\trecall\tf1\n");
    for r in &rows {
        table.push_str(&format!(
            "{}\t{}\t{}\t{:.3}\t{:.3}\t{:.3}\n",
            r.window,
            r.trace.map_or("any", TraceKind::as_str),
            r.result.detected,
            r.result.precision,
            r.result.recall,
            r.result.f1
        ));
    }
    write_json(&out.join("eval.json"), &rows)?;
    write_text(&out.join("eval.tsv"), &table)?;
    print!("{table}");
    Ok(Outcome::Success)
}

fn scenario_for(cfg: &RunConfig, preset: Option<&str>) -> Result<Scenario> {
    if let Some(name) = preset {
        return Ok(Scenario::preset(name)?);
    }
    if let Some(s) = &cfg.scenario {
        s.validate()?;
        return Ok(s.clone());
    }
    Ok(Scenario::preset(cfg.preset.as_deref().unwrap_or("paper-august"))?)
}

pub fn synth(cfg: &RunConfig, preset: Option<&str>) -> Result<Outcome> {
    let t = Instant::now();
    let scenario = scenario_for(cfg, preset)?;
    let out = cfg.out_dir()?;
    let data = generate_dataset(&scenario, cfg.seed)?;
    fs::create_dir_all(&out)?;
    write_posts_jsonl(create(&out.join("posts.jsonl"))?, &data.posts)?;
    write_comments_jsonl(create(&out.join("comments.jsonl"))?, &data.comments)?;
    write_embeddings_jsonl(create(&out.join("embeddings.jsonl"))?, &data.embeddings)?;
    write_json(&out.join("truth.json"), &data.truth)?;
    write_text(&out.join("scenario.json"), &(scenario.to_json() + "\n"))?;

    let run = RunConfig {
        posts: Some("posts.jsonl".into()),
        comments: Some("comments.jsonl".into()),
        embeddings: vec![EmbeddingInput::Path("embeddings.jsonl".into())],
        truth: Some("truth.json".into()),
        seed: cfg.seed,
        detect: cfg.detect.clone(),
        ..RunConfig::default()
    };
    write_json(&out.join("config.json"), &run)?;

    let mut m = Manifest::new("synth", cfg);
    for (name, n) in [
        ("posts.jsonl", data.posts.len()),
        ("comments.jsonl", data.comments.len()),
        ("embeddings.jsonl", data.embeddings.len()),
    ] {
        m.inputs.push(InputSummary { name: name.into(), sha256: file_sha256(&out.join(name))?, records: n, issues: 0 });
    }
    m.timings_ms.insert("total".into(), ms(t));
    write_json(&out.join("manifest.json"), &m)?;
    println!(
        "{}: {} posts, {} comments, {} embeddings, {} campaigns ({} accounts), {} organic users",
        scenario.name,
        data.posts.len(),
        data.comments.len(),
        data.embeddings.len(),
        data.truth.campaigns.len(),
        data.truth.coordinated().len(),
        data.truth.organic.len()
    );
    Ok(Outcome::Success)
}

pub fn robustness_cmd(cfg: &RunConfig, fractions: &[f64], preset: Option<&str>) -> Result<Outcome> {
    let t = Instant::now();
    let fractions = if fractions.is_empty() { cfg.loss_fractions.clone() } else { fractions.to_vec() };
    for &f in &fractions {
        if !(0.0..1.0).contains(&f) {
            return Err(cibnet::Error::Config(format!("loss fraction must be in [0, 1), got {f}")).into());
        }
    }
    cfg.validate()?;
    let mut m = Manifest::new("robustness", cfg);
    let data = if cfg.posts.is_some() && preset.is_none() {
        let inputs = load_inputs(cfg)?;
        m.inputs = inputs.summaries;
        let truth = match &cfg.truth {
            Some(p) => read_json(&cfg.resolve(p))?,
            None => GroundTruth::default(),
        };
        Dataset { posts: inputs.posts, comments: inputs.comments, embeddings: inputs.embeddings, truth }
    } else {
        generate_dataset(&scenario_for(cfg, preset)?, cfg.seed)?
    };
    if data.posts.is_empty() {
        eprintln!("no data: the posts input contains no valid records");
        return Ok(Outcome::NoData);
    }
    let seeds: Vec<u64> = (0..cfg.loss_seeds).collect();
    let rows = robustness(&data, &cfg.trace_list(), &fractions, &seeds, &cfg.detect)?;
    let table = format_robustness_table(&rows, &fractions);
    print!("{table}");
    if let Some(dir) = &cfg.out {
        let dir = cfg.resolve(dir);
        fs::create_dir_all(&dir)?;
        write_text(&dir.join("robustness.tsv"), &table)?;
        write_json(&dir.join("robustness.json"), &rows)?;
        m.timings_ms.insert("total".into(), ms(t));
        write_json(&dir.join("manifest.json"), &m)?;
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoiceSummary {
    pub clips: Vec<String>,
    pub eps: f64,
    pub clusters: usize,
    pub noise: usize,
    pub labels: Vec<i32>,
}

pub fn audio_cluster(cfg: &RunConfig) -> Result<Outcome> {
    let t = Instant::now();
    cfg.mel.validate()?;
    let dir = cfg
        .audio_dir
        .as_deref()
        .ok_or_else(|| cibnet::Error::Config("no audio_dir configured".into()))?;
    cfg.check_inputs()?;
    let out = cfg.out_dir()?;
    let mut files: Vec<PathBuf> = fs::read_dir(cfg.resolve(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        eprintln!("no data: no .wav files in {}", dir.display());
        return Ok(Outcome::NoData);
    }
    let analyzer = MelAnalyzer::new(cfg.mel)?;
    let mut clips = Vec::new();
    let mut prints = Vec::new();
    let mut m = Manifest::new("audio-cluster", cfg);
    for f in &files {
        let audio = read_wav_file(f)?;
        let samples = if audio.sample_rate == cfg.mel.sample_rate {
            audio.samples
        } else {
            resample_linear(&audio.samples, audio.sample_rate, cfg.mel.sample_rate)?
        };
        let spec = analyzer.spectrogram(&samples)?;
        prints.push(voiceprint(&spec)?);
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        m.inputs.push(InputSummary { name: name.clone(), sha256: file_sha256(f)?, records: 1, issues: 0 });
        clips.push(name);
    }
    let vc = cluster_voiceprints(&prints, &cfg.voice)?;
    fs::create_dir_all(&out)?;
    write_labels_csv(create(&out.join("labels.csv"))?, &clips, &vc.labels)?;
    write_k_distance_csv(create(&out.join("k_distance.csv"))?, &vc.k_distance)?;
    let summary = VoiceSummary {
        noise: vc.labels.iter().filter(|&&l| l < 0).count(),
        clips,
        eps: vc.eps,
        clusters: vc.n_clusters,
        labels: vc.labels,
    };
    write_json(&out.join("voice_clusters.json"), &summary)?;
    m.timings_ms.insert("total".into(), ms(t));
    write_json(&out.join("manifest.json"), &m)?;
    println!(
        "{} clips, eps {:.4}, {} clusters, {} noise",
        summary.clips.len(),
        summary.eps,
        summary.clusters,
        summary.noise
    );
    Ok(Outcome::Success)
}
