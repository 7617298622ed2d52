use super::config::ExperimentConfig;
use super::gait::Controller;
use super::metrics::{eval_all, record_clip, zero_shot, SkillMetrics};
use crate::classifier::{eval_stored, make_soup, train_classifier, Classifier, Evaluation};
use crate::corpus::{build_corpus, Dataset};
use crate::error::{Error, Result};
use crate::policy::{log_csv, train_policy, IterLog, Policy};
use crate::seeding::stream_rng;
use crate::skill::Skill;
use crate::tensor::Checkpoint;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const CORPUS_FILE: &str = "corpus.bin";
pub const CLASSIFIER_FILE: &str = "classifier.ckpt";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const CONFIG_FILE: &str = "config.resolved";
pub const RESULTS_FILE: &str = "results.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const HASH_FILE: &str = "inputs.sha256";

/// Where prerequisites come from.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Build a stage whose output is absent instead of failing.
    pub build_missing: bool,
    /// Use these files instead of the experiment directory's own.
    pub corpus: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    /// Skip RL and policy evaluation.
    pub classifier_only: bool,
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub preset: String,
    /// `None` for seed-independent rows.
    pub seed: Option<u64>,
    /// A skill name, or `all`.
    pub skill: String,
    pub metric: String,
    pub value: f64,
}

impl ResultRow {
    pub const HEADER: &'static str = "preset,seed,skill,metric_name,value";

    pub fn csv(&self) -> String {
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        format!("{},{},{},{},{}", self.preset, seed, self.skill, self.metric, self.value)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub dir: PathBuf,
    pub rows: Vec<ResultRow>,
    pub val: Evaluation,
    pub transfer: Evaluation,
    /// Per seed, metrics in [`Skill::ALL`] order.
    pub metrics: Vec<(u64, Vec<SkillMetrics>)>,
    pub inputs_hash: String,
}

/// Git-style content hash: SHA-256 over `blob <len>\0<bytes>`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn missing(stage: &str, path: &Path) -> Error {
    Error::MissingStage {
        stage: stage.into(),
        detail: format!("{} does not exist", path.display()),
    }
}

/// Loads the corpus, building it when allowed.
pub fn corpus_stage(cfg: &ExperimentConfig, path: &Path, build: bool) -> Result<Dataset> {
    if path.exists() {
        return Dataset::load(path);
    }
    if !build {
        return Err(missing("corpus", path));
    }
    let data = build_corpus(cfg.corpus.per_class, cfg.corpus.mode, cfg.corpus.seed)?;
    data.save(path)?;
    Ok(data)
}

/// Trains the classifier (or soup) on the configured share of the corpus
/// and writes its checkpoint and logs next to `path`.
pub fn classifier_stage(cfg: &ExperimentConfig, data: &Dataset, path: &Path) -> Result<Classifier> {
    let data = data.subsample(cfg.corpus.fraction)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut counts = format!("train_clips,{}\nval_clips,{}\n", data.train().count(), data.val().count());
    let classifier = if cfg.soup_enabled {
        let report = make_soup(&data, &cfg.soup_config())?;
        let _ = writeln!(counts, "warm_val_acc,{}", report.warm_val_acc);
        for (wd, epochs, acc) in &report.members {
            let _ = writeln!(counts, "member_wd{wd}_e{epochs},{acc}");
        }
        let _ = writeln!(counts, "soup_val_acc,{}", report.soup_val_acc);
        report.soup
    } else {
        let out = train_classifier(&data, &cfg.classifier)?;
        write(&dir.join("classifier_log.csv"), out.log_csv())?;
        out.classifier
    };
    write(&dir.join("classifier_summary.csv"), counts)?;
    classifier.to_checkpoint().save(path)?;
    Ok(classifier)
}

fn load_classifier(path: &Path) -> Result<Classifier> {
    Classifier::from_checkpoint(&Checkpoint::load(path)?)
}

/// Trains one seed's policy and writes its checkpoint and log.
pub fn policy_stage(
    cfg: &ExperimentConfig,
    classifier: &Classifier,
    seed: u64,
    dir: &Path,
    progress: impl FnMut(&IterLog),
) -> Result<Policy> {
    let out = train_policy(&cfg.rl_for_seed(seed), classifier, progress)?;
    write(&dir.join("train_log.csv"), log_csv(&out.log))?;
    out.policy.to_checkpoint().save(dir.join(POLICY_FILE))?;
    Ok(out.policy)
}

/// One clip per skill from the deterministic policy, as PGM frames.
pub fn dump_frames(ctrl: &dyn Controller, cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<()> {
    let interval = cfg.rl.rollout.render_interval as usize;
    let warmup = 100;
    for skill in Skill::ALL {
        let mut rng = stream_rng(seed, &[50, skill.index() as u64]);
        let clip = record_clip(ctrl, &cfg.rl.robot, &cfg.rl.rollout.camera, skill, warmup, interval, &mut rng)?;
        clip.save_pgms(dir.join(skill.name()), skill.name(), (warmup + interval) as u64, interval as u64)?;
    }
    Ok(())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Preset row of the skill table: the primary metric of each skill as
/// `mean ± std` over seeds.
pub fn skill_table(preset: &str, metrics: &[(u64, Vec<SkillMetrics>)]) -> String {
    let mut out = String::from("preset");
    for s in Skill::ALL {
        let _ = write!(out, ",{}", s.name());
    }
    out.push('\n');
    out.push_str(preset);
    for k in 0..Skill::COUNT {
        let vals: Vec<f64> = metrics.iter().map(|(_, m)| m[k].primary().1).collect();
        let (mean, std) = mean_std(&vals);
        let _ = write!(out, ",{} {mean:.4} ± {std:.4}", metrics.first().map_or("", |(_, m)| m[k].primary().0));
    }
    out.push('\n');
    out
}

/// Runs the full pipeline: corpus, classifier (or soup), RL for every
/// seed, evaluation, and the report files.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    dir: &Path,
    opts: &RunOptions,
    mut progress: impl FnMut(u64, &IterLog),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snapshot = cfg.to_text();
    write(&dir.join(CONFIG_FILE), &snapshot)?;

    let corpus_path = opts.corpus.clone().unwrap_or_else(|| dir.join(CORPUS_FILE));
    let classifier_path = opts.classifier.clone().unwrap_or_else(|| dir.join(CLASSIFIER_FILE));
    let classifier = if classifier_path.exists() {
        load_classifier(&classifier_path)?
    } else if opts.classifier.is_some() || !opts.build_missing {
        return Err(missing("classifier", &classifier_path));
    } else {
        let data = corpus_stage(cfg, &corpus_path, true)?;
        classifier_stage(cfg, &data, &classifier_path)?
    };
    if classifier.mode() != cfg.classifier.mode {
        return Err(Error::Config(format!(
            "classifier at {} was trained in {} mode, config asks for {}",
            classifier_path.display(),
            classifier.mode(),
            cfg.classifier.mode
        )));
    }
    if !corpus_path.exists() {
        return Err(missing("corpus", &corpus_path));
    }
    let data = Dataset::load(&corpus_path)?;
    let val = eval_stored(&classifier, data.val())?;
    let transfer = zero_shot(&classifier, &cfg.rl.robot, &cfg.rl.rollout.camera, &cfg.transfer, cfg.corpus.seed)?;

    let preset = cfg.preset.name().to_string();
    let mut rows = vec![
        ResultRow {
            preset: preset.clone(),
            seed: None,
            skill: "all".into(),
            metric: "val_acc".into(),
            value: val.accuracy,
        },
        ResultRow {
            preset: preset.clone(),
            seed: None,
            skill: "all".into(),
            metric: "zero_shot_acc".into(),
            value: transfer.accuracy,
        },
    ];
    write(&dir.join("classifier_eval.txt"), format!("validation\n{}\nzero-shot\n{}", val.report(), transfer.report()))?;

    let mut metrics = Vec::new();
    if !opts.classifier_only {
        for &seed in &cfg.seeds {
            let seed_dir = dir.join(format!("seed_{seed}"));
            let policy_path = seed_dir.join(POLICY_FILE);
            let policy = if policy_path.exists() {
                Policy::from_checkpoint(&Checkpoint::load(&policy_path)?)?
            } else if opts.build_missing {
                policy_stage(cfg, &classifier, seed, &seed_dir, |l| progress(seed, l))?
            } else {
                return Err(missing("policy", &policy_path));
            };
            let m = eval_all(&policy, &cfg.rl.robot, &cfg.eval, seed)?;
            for sm in &m {
                for (name, value) in sm.rows() {
                    rows.push(ResultRow {
                        preset: preset.clone(),
                        seed: Some(seed),
                        skill: sm.skill.name().into(),
                        metric: name.into(),
                        value,
                    });
                }
            }
            dump_frames(&policy, cfg, seed, &seed_dir.join("frames"))?;
            metrics.push((seed, m));
        }
        write(&dir.join(TABLE_FILE), skill_table(&preset, &metrics))?;
    }

    let mut csv = format!("{}\n", ResultRow::HEADER);
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv());
    }
    write(&dir.join(RESULTS_FILE), csv)?;

    let mut hashes = vec![(CONFIG_FILE.to_string(), content_hash(snapshot.as_bytes()))];
    hashes.push(("corpus".into(), content_hash(&read(&corpus_path)?)));
    hashes.push(("classifier".into(), content_hash(&read(&classifier_path)?)));
    let mut listing: String = hashes.iter().map(|(name, h)| format!("{h}  {name}\n")).collect();
    let inputs_hash = content_hash(listing.as_bytes());
    let _ = writeln!(listing, "{inputs_hash}  inputs");
    write(&dir.join(HASH_FILE), listing)?;

    Ok(ExperimentReport {
        dir: dir.to_path_buf(),
        rows,
        val,
        transfer,
        metrics,
        inputs_hash,
    })
}
