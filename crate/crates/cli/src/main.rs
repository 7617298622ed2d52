use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wildskill_core::classifier::{eval_stored, Classifier};
use wildskill_core::corpus::{build_corpus, Dataset};
use wildskill_core::harness::{
    classifier_stage, dump_frames, eval_all, policy_stage, run_experiment, zero_shot,
    ExperimentConfig, RunOptions, ScriptedController, SkillMetrics, CLASSIFIER_FILE, CORPUS_FILE,
    POLICY_FILE,
};
use wildskill_core::policy::{IterLog, Policy};
use wildskill_core::tensor::Checkpoint;
use wildskill_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "wildskill", version, about = "Skills from synthetic animal clips: corpus, classifier, constrained PPO")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed override: corpus seed for gen-corpus, RL seed elsewhere.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Extra `key=value` override applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate the labelled creature corpus.
    GenCorpus,
    /// Train one classifier on the corpus.
    TrainClassifier(Inputs),
    /// Train the soup members and average them.
    Soup(Inputs),
    /// Validation and zero-shot robot accuracy of a classifier.
    EvalClassifier(Inputs),
    /// Train a policy with classifier rewards.
    TrainPolicy(Inputs),
    /// Deterministic per-skill metrics of a policy checkpoint.
    EvalPolicy(PolicyArg),
    /// Full pipeline for every configured seed.
    RunExperiment(RunArgs),
    /// One rendered clip per skill, as PGM frames.
    DumpFrames(DumpArgs),
    /// Metrics (and optionally frames) of the scripted gaits.
    OracleRun(OracleArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Corpus file (default: <out>/corpus.bin).
    #[arg(long, value_name = "PATH")]
    corpus: Option<PathBuf>,
    /// Classifier checkpoint (default: <out>/classifier.ckpt).
    #[arg(long, value_name = "PATH")]
    classifier: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PolicyArg {
    /// Policy checkpoint (default: <out>/seed_<seed>/policy.ckpt).
    #[arg(long, value_name = "PATH")]
    checkpoint: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Fail instead of building a missing stage.
    #[arg(long)]
    no_build: bool,
    /// Stop after the classifier evaluation.
    #[arg(long)]
    classifier_only: bool,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    policy: PolicyArg,
    /// Dump the scripted gaits instead of a policy.
    #[arg(long, conflicts_with = "checkpoint")]
    oracle: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Also dump one clip per skill.
    #[arg(long)]
    frames: bool,
}

struct Ctx {
    cfg: ExperimentConfig,
    seed: Option<u64>,
    out: PathBuf,
}

impl Ctx {
    fn rl_seed(&self) -> u64 {
        self.seed.unwrap_or(self.cfg.seeds[0])
    }

    fn seed_dir(&self) -> PathBuf {
        self.out.join(format!("seed_{}", self.rl_seed()))
    }

    fn corpus_path(&self, i: &Inputs) -> PathBuf {
        i.corpus.clone().unwrap_or_else(|| self.out.join(CORPUS_FILE))
    }

    fn classifier_path(&self, i: &Inputs) -> PathBuf {
        i.classifier.clone().unwrap_or_else(|| self.out.join(CLASSIFIER_FILE))
    }

    fn policy_path(&self, p: &PolicyArg) -> PathBuf {
        p.checkpoint.clone().unwrap_or_else(|| self.seed_dir().join(POLICY_FILE))
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_classifier(path: &Path) -> Result<Classifier> {
    Classifier::from_checkpoint(&Checkpoint::load(path)?)
}

fn load_policy(path: &Path) -> Result<Policy> {
    Policy::from_checkpoint(&Checkpoint::load(path)?)
}

fn print_metrics(label: &str, metrics: &[SkillMetrics]) {
    println!("{label},skill,metric_name,value");
    for m in metrics {
        for (name, v) in m.rows() {
            println!("{label},{},{name},{v}", m.skill.name());
        }
    }
}

fn metrics_csv(metrics: &[SkillMetrics]) -> String {
    let mut s = String::from("skill,metric_name,value\n");
    for m in metrics {
        for (name, v) in m.rows() {
            s.push_str(&format!("{},{name},{v}\n", m.skill.name()));
        }
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn log_iter(seed: u64, l: &IterLog) {
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    eprintln!(
        "seed {seed} iter {} raw [{}] reward [{}] mean delta {:.4}",
        l.iter,
        fmt(&l.raw_score),
        fmt(&l.reward),
        l.mean_delta
    );
}

fn train_classifier_cmd(ctx: &Ctx, i: &Inputs, soup: bool) -> Result<()> {
    let data = Dataset::load(ctx.corpus_path(i))?;
    let mut cfg = ctx.cfg.clone();
    cfg.soup_enabled = soup;
    let path = ctx.classifier_path(i);
    let c = classifier_stage(&cfg, &data, &path)?;
    let val = eval_stored(&c, data.val())?;
    println!("validation accuracy {:.4}", val.accuracy);
    println!("wrote {}", path.display());
    Ok(())
}

fn dump_oracle(ctx: &Ctx, dir: &Path) -> Result<()> {
    let ctrl = ScriptedController::new(&ctx.cfg.rl.robot);
    dump_frames(&ctrl, &ctx.cfg, ctx.rl_seed(), dir)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli)?;
    let ctx = Ctx {
        cfg,
        seed: cli.seed,
        out: cli.out.clone(),
    };
    match &cli.cmd {
        Cmd::GenCorpus => {
            let seed = ctx.seed.unwrap_or(ctx.cfg.corpus.seed);
            let data = build_corpus(ctx.cfg.corpus.per_class, ctx.cfg.corpus.mode, seed)?;
            let path = ctx.out.join(CORPUS_FILE);
            std::fs::create_dir_all(&ctx.out).map_err(|e| io_err(&ctx.out, e))?;
            data.save(&path)?;
            println!("wrote {} clips to {}", data.len(), path.display());
        }
        Cmd::TrainClassifier(i) => train_classifier_cmd(&ctx, i, false)?,
        Cmd::Soup(i) => train_classifier_cmd(&ctx, i, true)?,
        Cmd::EvalClassifier(i) => {
            let c = load_classifier(&ctx.classifier_path(i))?;
            let corpus = ctx.corpus_path(i);
            let mut text = String::new();
            if corpus.exists() {
                let val = eval_stored(&c, Dataset::load(&corpus)?.val())?;
                text.push_str(&format!("validation\n{}", val.report()));
            }
            let cfg = &ctx.cfg;
            let t = zero_shot(&c, &cfg.rl.robot, &cfg.rl.rollout.camera, &cfg.transfer, cfg.corpus.seed)?;
            text.push_str(&format!("zero-shot\n{}", t.report()));
            print!("{text}");
            write_file(&ctx.out.join("classifier_eval.txt"), &text)?;
        }
        Cmd::TrainPolicy(i) => {
            let c = load_classifier(&ctx.classifier_path(i))?;
            let seed = ctx.rl_seed();
            let dir = ctx.seed_dir();
            policy_stage(&ctx.cfg, &c, seed, &dir, |l| log_iter(seed, l))?;
            println!("wrote {}", dir.join(POLICY_FILE).display());
        }
        Cmd::EvalPolicy(p) => {
            let path = ctx.policy_path(p);
            let policy = load_policy(&path)?;
            let m = eval_all(&policy, &ctx.cfg.rl.robot, &ctx.cfg.eval, ctx.rl_seed())?;
            print_metrics("policy", &m);
            let dest = path.parent().unwrap_or(Path::new(".")).join("eval.csv");
            write_file(&dest, &metrics_csv(&m))?;
        }
        Cmd::RunExperiment(a) => {
            let mut cfg = ctx.cfg.clone();
            if let Some(s) = ctx.seed {
                cfg.seeds = vec![s];
            }
            let opts = RunOptions {
                build_missing: !a.no_build,
                corpus: a.inputs.corpus.clone(),
                classifier: a.inputs.classifier.clone(),
                classifier_only: a.classifier_only,
            };
            let report = run_experiment(&cfg, &ctx.out, &opts, log_iter)?;
            println!("validation accuracy {:.4}", report.val.accuracy);
            println!("zero-shot accuracy {:.4}", report.transfer.accuracy);
            println!("results in {}", report.dir.display());
        }
        Cmd::DumpFrames(d) => {
            let dir = ctx.out.join("frames");
            if d.oracle {
                dump_oracle(&ctx, &dir)?;
            } else {
                let policy = load_policy(&ctx.policy_path(&d.policy))?;
                dump_frames(&policy, &ctx.cfg, ctx.rl_seed(), &dir)?;
            }
            println!("frames in {}", dir.display());
        }
        Cmd::OracleRun(o) => {
            let ctrl = ScriptedController::new(&ctx.cfg.rl.robot);
            let m = eval_all(&ctrl, &ctx.cfg.rl.robot, &ctx.cfg.eval, ctx.rl_seed())?;
            print_metrics("oracle", &m);
            write_file(&ctx.out.join("oracle_metrics.csv"), &metrics_csv(&m))?;
            if o.frames {
                dump_oracle(&ctx, &ctx.out.join("oracle_frames"))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
