use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use figment::providers::{Format, Json, Serialized, Toml};
use figment::Figment;

use kindred_core::analytics::report::{analyze, AnalysisConfig};
use kindred_core::clock::{Clock, SystemClock};
use kindred_core::empathy::{score_corpus, Lexicons, RemoteScorer, RuleScorer, ScoringContext};
use kindred_core::platform::{ingest_posts, IngestReport, Platform, PlatformParts};
use kindred_core::rewriter::{RemoteRewriter, TemplateBank};
use kindred_core::safety::SafetyRuleSet;
use kindred_core::study::simulate::{simulate_population, PopulationSpec};
use kindred_core::study::{EventLog, Post, PostPool, StudyForms};

use crate::api::{router, AppState};
use crate::config::ServiceConfig;

#[derive(Debug, Parser)]
#[command(name = "kindred", version, about = "Empathic-feedback study platform")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve(ServeArgs),
    /// Run simulated participants and write their event log.
    Simulate(SimulateArgs),
    /// Recompute every analysis table from an event log.
    Analyze(AnalyzeArgs),
    /// Score seeker/response pairs with the rule scorer.
    Score(ScoreArgs),
    /// Gate raw seeker posts through the safety rules.
    IngestPosts(IngestArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub listen_address: Option<String>,
    /// Event log output; overrides the config file.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Population spec, TOML or JSON. Defaults apply to missing keys.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Event log output (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth table output (JSON).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Safety rules; the bundled set when omitted.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n_boot: Option<usize>,
    /// Safety rules used for the run, recorded in the manifest.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Lines of `seeker post<TAB>response`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output table; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Lines of `id<TAB>text`, or bare text lines (ids are then line numbers).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Admitted pool output, `id<TAB>text`.
    #[arg(long)]
    pub out: PathBuf,
    /// Escalation report output (JSON).
    #[arg(long)]
    pub report: PathBuf,
}

fn load_rules(path: Option<&Path>) -> Result<SafetyRuleSet> {
    match path {
        Some(p) => SafetyRuleSet::load(p).with_context(|| format!("loading safety rules from {}", p.display())),
        None => Ok(SafetyRuleSet::bundled()),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

/// Merges CLI flags over the loaded configuration.
pub fn serve_config(args: &ServeArgs) -> Result<ServiceConfig> {
    let mut cfg = ServiceConfig::load(args.config.as_deref()).map_err(|e| anyhow!(e))?;
    if let Some(r) = &args.rules {
        cfg.rules = Some(r.clone());
    }
    if let Some(p) = &args.posts {
        cfg.posts = Some(p.clone());
    }
    if let Some(s) = args.seed {
        cfg.platform.study.seed = s;
        cfg.platform.rewriter.seed = s;
        cfg.platform.eval_seed = s;
    }
    if let Some(a) = &args.listen_address {
        cfg.listen_address = a.clone();
    }
    if let Some(l) = &args.log {
        cfg.log = Some(l.clone());
    }
    cfg.validate().map_err(|e| anyhow!(e))?;
    Ok(cfg)
}

/// Assembles the platform for `serve`. Refuses to proceed without a safety
/// rule set that loads and compiles.
pub fn build_platform(cfg: &ServiceConfig, clock: Arc<dyn Clock>) -> Result<(Platform, IngestReport)> {
    let rules_path = cfg
        .rules
        .as_deref()
        .ok_or_else(|| anyhow!("refusing to start: no safety rule set configured (use --rules)"))?;
    let rules = SafetyRuleSet::load(rules_path)
        .with_context(|| format!("refusing to start: safety rules at {} are unusable", rules_path.display()))?;
    let posts_path = cfg
        .posts
        .as_deref()
        .ok_or_else(|| anyhow!("no seeker posts configured (use --posts)"))?;
    let posts = PostPool::parse_tsv(&read(posts_path)?).map_err(|e| anyhow!("{}: {e}", posts_path.display()))?;

    let mut parts = PlatformParts::new(cfg.platform.clone(), rules, posts, clock);
    if let Some(dir) = &cfg.data_dir {
        parts.templates = TemplateBank::load_dir(dir).map_err(|e| anyhow!(e))?;
        parts.scorer = RuleScorer::new(Lexicons::load_dir(dir).map_err(|e| anyhow!(e))?);
        let forms = dir.join("study_forms.json");
        if forms.exists() {
            parts.forms = StudyForms::parse(&read(&forms)?).map_err(|e| anyhow!("{}: {e}", forms.display()))?;
        }
    }
    let timeout = Duration::from_millis(cfg.remote.timeout_ms);
    if let Some(url) = &cfg.remote.scorer_url {
        parts.primary_scorer = Some(Box::new(RemoteScorer::new(url.clone(), timeout)));
    }
    if let Some(url) = &cfg.remote.rewriter_url {
        parts.remote_rewriter = Some(Box::new(RemoteRewriter::new(url.clone(), timeout)));
    }
    if let Some(path) = &cfg.log {
        if std::fs::metadata(path).map(|m| m.len() > 0).unwrap_or(false) {
            bail!("event log {} already holds events; choose a new path", path.display());
        }
        parts.log = EventLog::with_sink(path).map_err(|e| anyhow!(e))?;
    }
    Platform::new(parts).map_err(|e| anyhow!(e))
}

pub fn analysis_config(cfg: &ServiceConfig, rules_version: Option<String>) -> AnalysisConfig {
    AnalysisConfig {
        seed: cfg.platform.study.seed,
        n_boot: cfg.n_boot,
        indirect_similarity: cfg.indirect_similarity,
        rules_version,
        ..AnalysisConfig::default()
    }
}

async fn serve(args: ServeArgs) -> Result<()> {
    let cfg = serve_config(&args)?;
    let (platform, report) = build_platform(&cfg, Arc::new(SystemClock))?;
    tracing::info!(
        admitted = report.admitted.len(),
        escalated = report.escalated.len(),
        rules = %report.rules_version,
        "seeker posts gated"
    );
    let state = AppState::new(platform, analysis_config(&cfg, Some(report.rules_version.clone())));
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            let dropped = sweeper.platform.lock().map(|mut p| p.sweep_inactive());
            if let Ok(Ok(ids)) = dropped {
                if !ids.is_empty() {
                    tracing::info!(?ids, "dropped inactive participants");
                }
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(&cfg.listen_address)
        .await
        .with_context(|| format!("binding {}", cfg.listen_address))?;
    tracing::info!(address = %cfg.listen_address, "listening");
    axum::serve(listener, router(state)).await?;
    Ok(())
}

pub fn load_spec(path: Option<&Path>) -> Result<PopulationSpec> {
    let mut fig = Figment::from(Serialized::defaults(PopulationSpec::default()));
    if let Some(p) = path {
        if !p.exists() {
            bail!("population spec {} does not exist", p.display());
        }
        fig = match p.extension().and_then(|e| e.to_str()) {
            Some("json") => fig.merge(Json::file(p)),
            _ => fig.merge(Toml::file(p)),
        };
    }
    let spec: PopulationSpec = fig.extract().context("invalid population spec")?;
    spec.validate().map_err(|e| anyhow!("invalid population spec: {e}"))?;
    Ok(spec)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec = load_spec(args.spec.as_deref())?;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let sim = simulate_population(&spec, load_rules(args.rules.as_deref())?)?;
    sim.log.write_jsonl(&args.out).map_err(|e| anyhow!(e))?;
    if let Some(t) = &args.truth {
        write(t, &(serde_json::to_string_pretty(&sim.truth)? + "\n"))?;
    }
    eprintln!(
        "simulated {} participants: {} events, {} posts escalated",
        spec.participants,
        sim.log.len(),
        sim.ingest.escalated.len()
    );
    Ok(())
}

pub fn analyze_cmd(args: &AnalyzeArgs) -> Result<()> {
    let log = EventLog::read_jsonl(&args.log).map_err(|e| anyhow!(e))?;
    let mut cfg = AnalysisConfig {
        seed: args.seed,
        ..AnalysisConfig::default()
    };
    if let Some(n) = args.n_boot {
        cfg.n_boot = n;
    }
    if let Some(r) = &args.rules {
        cfg.rules_version = Some(load_rules(Some(r))?.version().to_string());
    }
    let report = analyze(&log, &cfg)?;
    report
        .write_to(&args.out)
        .with_context(|| format!("writing to {}", args.out.display()))?;
    eprintln!("wrote {} tables and manifest.json to {}", report.files.len(), args.out.display());
    Ok(())
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let src = read(&args.corpus)?;
    let mut pairs = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (seeker, response) = line
            .split_once('\t')
            .ok_or_else(|| anyhow!("corpus line {}: expected seeker<TAB>response", i + 1))?;
        pairs.push(ScoringContext::new(seeker, response).map_err(|e| anyhow!("corpus line {}: {e}", i + 1))?);
    }
    let scorer = RuleScorer::default();
    let scored = score_corpus(&scorer, &pairs, args.seed)?;
    let mut out = String::from("row\temotional_reactions\tinterpretations\texplorations\ttotal\n");
    for (i, s) in scored.items.iter().enumerate() {
        out += &format!(
            "{}\t{}\t{}\t{}\t{}\n",
            i + 1,
            s.emotional_reactions(),
            s.interpretations(),
            s.explorations(),
            s.total()
        );
    }
    if let (Some(m), Some(ci)) = (scored.mean, scored.ci) {
        out += &format!("# mean total {m:.4} (95% CI {:.4} to {:.4})\n", ci.lo, ci.hi);
    }
    match &args.out {
        Some(p) => write(p, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

pub fn ingest(args: &IngestArgs) -> Result<IngestReport> {
    let rules = Arc::new(load_rules(args.rules.as_deref())?);
    let posts: Vec<Post> = read(&args.input)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match l.split_once('\t') {
            Some((id, text)) => Post {
                id: id.trim().to_string(),
                text: text.trim().to_string(),
            },
            None => Post {
                id: format!("line-{}", i + 1),
                text: l.trim().to_string(),
            },
        })
        .collect();
    let report = ingest_posts(rules, posts);
    let pool: String = report.admitted.iter().map(|p| format!("{}\t{}\n", p.id, p.text)).collect();
    write(&args.out, &pool)?;
    write(&args.report, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    eprintln!(
        "admitted {} posts, escalated {}",
        report.admitted.len(),
        report.escalated.len()
    );
    Ok(report)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve(a) => tokio::runtime::Runtime::new()?.block_on(serve(a)),
        Command::Simulate(a) => simulate(&a),
        Command::Analyze(a) => analyze_cmd(&a),
        Command::Score(a) => score(&a),
        Command::IngestPosts(a) => ingest(&a).map(|_| ()),
    }
}
