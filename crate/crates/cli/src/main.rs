use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ipelicit_cli::campaign::{read_records, rescoring_deviation, run_campaign, RunMode};
use ipelicit_cli::config::{CampaignConfig, StudyConfig};
use ipelicit_cli::export::{
    auroc_by_method, concordance_by_method, ledger_for, write_cost_csv, write_csv, write_study_csv, ScoreField, Target,
};
use ipelicit_cli::mock::{AgentParams, MockEndpoint, MockScript};
use ipelicit_cli::server::MockServer;
use ipelicit_cli::study::run_synthetic_study;
use ipelicit_cli::CliError;
use ipelicit_core::synth::{generate_icl_task, NoiseSpec, TransformSpec};
use ipelicit_core::CandidateSet;
use ipelicit_elicit::{
    elicit_with_retry, ChatEndpoint, ElicitError, ElicitOptions, HttpEndpoint, ModelEndpoint, PromptKind,
};

#[derive(Parser)]
#[command(
    name = "ipelicit",
    version,
    about = "Imprecise-probability uncertainty elicitation for language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Elicit one report from one endpoint and print it as JSON.
    Elicit(ElicitArgs),
    /// Run or resume a campaign described by a TOML config.
    #[command(subcommand)]
    Campaign(CampaignCmd),
    /// Synthetic ICL tasks.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Evaluate stored run records.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Mock endpoint.
    #[command(subcommand)]
    Mock(MockCmd),
}

#[derive(Args)]
struct ElicitArgs {
    #[arg(long)]
    kind: PromptKind,
    #[arg(long)]
    question: String,
    /// Candidate answer (repeatable).
    #[arg(long = "candidate")]
    candidates: Vec<String>,
    #[arg(long)]
    base_url: String,
    #[arg(long)]
    model: String,
    #[arg(long)]
    auth_token_env: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = ipelicit_elicit::DEFAULT_MAX_ATTEMPTS)]
    max_attempts: u32,
    /// Script for `mock://` base URLs.
    #[arg(long)]
    mock_script: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CampaignCmd {
    /// Start a campaign; refuses to overwrite existing records.
    Run(CampaignArgs),
    /// Continue a campaign, skipping records already written.
    Resume(CampaignArgs),
    /// Recompute scores from stored payloads and report the largest deviation.
    Verify { records: PathBuf },
}

/// Config file plus overrides for its most commonly tuned fields.
#[derive(Args)]
struct CampaignArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u32>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<PromptKind>>,
    #[arg(long)]
    mock_script: Option<PathBuf>,
}

impl CampaignArgs {
    fn load(self) -> Result<CampaignConfig> {
        let mut cfg = CampaignConfig::load(&self.config)?;
        if let Some(v) = self.output_dir {
            cfg.output_dir = v;
        }
        if let Some(v) = self.concurrency {
            cfg.concurrency = v;
        }
        if let Some(v) = self.max_attempts {
            cfg.max_attempts = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = v;
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.mock_script {
            cfg.mock_script = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum SynthCmd {
    /// Print generated tasks as JSON lines.
    Gen {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        word_length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transform spec as JSON; defaults to rotation 13 then shift 1.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Run a (p, m) sweep and write summary rows as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// AUROC per method.
    Auroc {
        records: PathBuf,
        #[arg(long, default_value = "second_order")]
        score: String,
        #[arg(long, default_value = "ambiguous")]
        target: String,
    },
    /// Concordance of a score with the reference entropy.
    Concordance {
        records: PathBuf,
        #[arg(long, default_value = "first_order")]
        score: String,
    },
    /// Token and currency totals, priced from the campaign config.
    Cost {
        records: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum MockCmd {
    /// Serve a mock script over HTTP until killed.
    Serve {
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:0")]
        addr: String,
    },
}

fn out_writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn load_script(path: Option<&PathBuf>) -> Result<MockScript> {
    Ok(match path {
        Some(p) => MockScript::load(p)?,
        None => MockScript::agent(AgentParams::default()),
    })
}

fn cmd_elicit(a: ElicitArgs) -> Result<()> {
    let mut cfg = ModelEndpoint::new(a.base_url, a.model);
    cfg.auth_token_env = a.auth_token_env;
    cfg.validate()?;
    let endpoint: Box<dyn ChatEndpoint> = if cfg.base_url.starts_with("mock://") {
        Box::new(MockEndpoint::new(&cfg, Arc::new(load_script(a.mock_script.as_ref())?)))
    } else {
        Box::new(HttpEndpoint::new(cfg)?)
    };
    let cands = if a.candidates.is_empty() {
        None
    } else {
        Some(CandidateSet::new(a.candidates, false)?)
    };
    let opts = ElicitOptions::default()
        .with_max_attempts(a.max_attempts)
        .with_seed(a.seed);
    let result = match elicit_with_retry(endpoint.as_ref(), a.kind, &a.question, cands.as_ref(), &opts) {
        Ok(r) => r,
        Err(ElicitError::RetriesExhausted(r)) => {
            println!("{}", serde_json::to_string_pretty(&r)?);
            bail!("no coherent report after {} attempts", r.attempts);
        }
        Err(e) => return Err(e.into()),
    };
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn cmd_campaign(c: CampaignCmd) -> Result<()> {
    let (args, mode) = match c {
        CampaignCmd::Run(a) => (a, RunMode::Fresh),
        CampaignCmd::Resume(a) => (a, RunMode::Resume),
        CampaignCmd::Verify { records } => {
            let recs = read_records(&records)?;
            let dev = rescoring_deviation(&recs)?;
            println!("records: {}\nmax rescoring deviation: {dev:e}", recs.len());
            if dev > 1e-12 {
                bail!("stored scores do not match recomputation");
            }
            return Ok(());
        }
    };
    let cfg = args.load()?;
    let report = run_campaign(&cfg, mode)?;
    eprintln!(
        "written {} skipped {} failed {} requests {}",
        report.written, report.skipped, report.failed, report.requests
    );
    Ok(())
}

fn cmd_synth(c: SynthCmd) -> Result<()> {
    match c {
        SynthCmd::Gen {
            p,
            m,
            count,
            word_length,
            seed,
            spec,
        } => {
            let spec: TransformSpec = match spec {
                Some(s) => serde_json::from_str(&s).context("parsing --spec")?,
                None => TransformSpec::base_setup(),
            };
            let mut out = std::io::stdout().lock();
            for i in 0..count as u64 {
                let s = seed.wrapping_add(i);
                let task = generate_icl_task(&spec, &NoiseSpec::new(p, s ^ 0x5EED)?, m, word_length, s)?;
                writeln!(out, "{}", serde_json::to_string(&task)?)?;
            }
            Ok(())
        }
        SynthCmd::Run { config, out } => {
            let cfg = StudyConfig::load(&config)?;
            let script = cfg.mock_script.as_deref().map(MockScript::load).transpose()?;
            let endpoint = cfg.endpoint.clone();
            let result = run_synthetic_study(&cfg, |p| -> Result<Arc<dyn ChatEndpoint>, CliError> {
                if endpoint.base_url.starts_with("mock://") {
                    // the simulated agent is told the true noise level
                    let mut s = script.clone().unwrap_or_default();
                    let mut params = s.agent.take().unwrap_or_default();
                    params.p = Some(p);
                    s.agent = Some(params);
                    Ok(Arc::new(MockEndpoint::new(&endpoint, Arc::new(s))))
                } else {
                    Ok(Arc::new(HttpEndpoint::new(endpoint.clone())?))
                }
            })?;
            if result.failures > 0 {
                eprintln!("{} elicitation(s) exhausted their retry budget", result.failures);
            }
            write_study_csv(&result.rows, out_writer(out.as_ref())?)?;
            Ok(())
        }
    }
}

fn cmd_eval(c: EvalCmd) -> Result<()> {
    match c {
        EvalCmd::Auroc { records, score, target } => {
            let recs = read_records(&records)?;
            let rows = auroc_by_method(&recs, score.parse::<ScoreField>()?, target.parse::<Target>()?);
            write_csv(&rows, std::io::stdout().lock())?;
        }
        EvalCmd::Concordance { records, score } => {
            let recs = read_records(&records)?;
            write_csv(&concordance_by_method(&recs, score.parse()?), std::io::stdout().lock())?;
        }
        EvalCmd::Cost { records, config } => {
            let cfg = CampaignConfig::load(&config)?;
            let prices: Vec<_> = cfg.endpoints.iter().map(|e| e.price()).collect();
            let ledger = ledger_for(&read_records(&records)?, &prices)?;
            write_cost_csv(&ledger, std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn cmd_mock(c: MockCmd) -> Result<()> {
    let MockCmd::Serve { script, addr } = c;
    let server = MockServer::start(load_script(script.as_ref())?, &addr)?;
    println!("listening on {}", server.base_url());
    std::io::stdout().flush()?;
    server.wait();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Elicit(a) => cmd_elicit(a),
        Command::Campaign(c) => cmd_campaign(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Eval(c) => cmd_eval(c),
        Command::Mock(c) => cmd_mock(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<CliError>() {
                Some(CliError::PartialCampaign(_)) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
