//! Run configuration: a TOML file, overridden by `PROTOFSM_*` environment
//! variables, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use protofsm_core::checker::{AdversaryConfig, Capability, CheckOptions};
use protofsm_core::dsl::{ChannelNaming, Env};
use protofsm_core::logic::LogicLimits;
use protofsm_core::par::Exec;
use protofsm_core::pipeline::ExtractOptions;
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub lexicon: PathBuf,
    pub rules: PathBuf,
    pub threshold: f64,
    pub context_depth: usize,
    pub default_participant: String,
    pub recover: bool,
    pub merge: bool,
    pub max_atoms: usize,
    pub max_terms: usize,
    pub bound: usize,
    pub memory_cap: usize,
    pub capabilities: Vec<Capability>,
    pub injectable: Vec<String>,
    pub replay_buffer_size: usize,
    pub sequential: bool,
    pub env: Env,
    pub initial: BTreeMap<String, String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let x = ExtractOptions::default();
        let l = LogicLimits::default();
        let c = CheckOptions::default();
        PipelineConfig {
            lexicon: "data/lexicon.tsv".into(),
            rules: "data/dsl_rules.txt".into(),
            threshold: x.threshold,
            context_depth: x.context_depth,
            default_participant: x.default_participant,
            recover: x.recover,
            merge: x.merge,
            max_atoms: l.max_atoms,
            max_terms: l.max_terms,
            bound: c.bound,
            memory_cap: c.memory_cap,
            capabilities: vec![],
            injectable: vec![],
            replay_buffer_size: AdversaryConfig::default().replay_buffer_size,
            sequential: false,
            env: Env::default(),
            initial: BTreeMap::new(),
        }
    }
}

/// Knobs settable by flag or environment variable. Clap reads the variable
/// when the flag is absent, so flags take precedence.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// Configuration file (TOML).
    #[arg(long, short = 'c', env = "PROTOFSM_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "PROTOFSM_LEXICON", global = true)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, env = "PROTOFSM_RULES", global = true)]
    pub rules: Option<PathBuf>,
    /// Normalised edit distance accepted when linking keywords.
    #[arg(long, env = "PROTOFSM_THRESHOLD", global = true)]
    pub threshold: Option<f64>,
    /// Preceding paragraphs searched for missing arguments.
    #[arg(long, env = "PROTOFSM_CONTEXT_DEPTH", global = true)]
    pub context_depth: Option<usize>,
    #[arg(long, env = "PROTOFSM_DEFAULT_PARTICIPANT", global = true)]
    pub default_participant: Option<String>,
    #[arg(long, env = "PROTOFSM_RECOVER", global = true)]
    pub recover: Option<bool>,
    #[arg(long, env = "PROTOFSM_MERGE", global = true)]
    pub merge: Option<bool>,
    /// Most distinct atoms a decision procedure accepts.
    #[arg(long, env = "PROTOFSM_MAX_ATOMS", global = true)]
    pub max_atoms: Option<usize>,
    /// Most DNF terms produced before giving up.
    #[arg(long, env = "PROTOFSM_MAX_TERMS", global = true)]
    pub max_terms: Option<usize>,
    #[arg(long, env = "PROTOFSM_BOUND", global = true)]
    pub bound: Option<usize>,
    #[arg(long, env = "PROTOFSM_MEMORY_CAP", global = true)]
    pub memory_cap: Option<usize>,
    /// Adversary capabilities: drop, modify, inject, replay.
    #[arg(
        long = "capability",
        env = "PROTOFSM_CAPABILITIES",
        value_delimiter = ',',
        global = true
    )]
    pub capabilities: Option<Vec<Capability>>,
    /// Messages the adversary can forge.
    #[arg(
        long = "injectable",
        env = "PROTOFSM_INJECTABLE",
        value_delimiter = ',',
        global = true
    )]
    pub injectable: Option<Vec<String>>,
    #[arg(long, env = "PROTOFSM_REPLAY_BUFFER_SIZE", global = true)]
    pub replay_buffer_size: Option<usize>,
    /// Run every stage on one thread.
    #[arg(long, env = "PROTOFSM_SEQUENTIAL", global = true)]
    pub sequential: Option<bool>,
    #[arg(
        long,
        env = "PROTOFSM_PARTICIPANTS",
        value_delimiter = ',',
        global = true
    )]
    pub participants: Option<Vec<String>>,
    /// `src-dst` or `dst-src`.
    #[arg(long, env = "PROTOFSM_CHANNEL_NAMING", global = true)]
    pub channel_naming: Option<String>,
    /// Agent aliases as `agent=participant`.
    #[arg(
        long = "alias",
        env = "PROTOFSM_AGENT_ALIASES",
        value_delimiter = ',',
        global = true
    )]
    pub aliases: Option<Vec<String>>,
    /// Initial states as `participant=state`.
    #[arg(
        long = "initial",
        env = "PROTOFSM_INITIAL",
        value_delimiter = ',',
        global = true
    )]
    pub initial: Option<Vec<String>>,
}

fn pairs(items: &[String], what: &str) -> Result<BTreeMap<String, String>> {
    items
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
            None => bail!("{what} `{s}` is not of the form `key=value`"),
        })
        .collect()
}

impl PipelineConfig {
    /// Loads the file named by `--config`, if any, then applies overrides.
    /// Relative paths in the file resolve against the file's directory.
    pub fn load(o: &Overrides) -> Result<PipelineConfig> {
        let mut cfg = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut cfg: PipelineConfig =
                    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let table: toml::Table = toml::from_str(&text)?;
                let base = path.parent().unwrap_or(Path::new("."));
                for (key, p) in [("lexicon", &mut cfg.lexicon), ("rules", &mut cfg.rules)] {
                    if table.contains_key(key) && p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                cfg
            }
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &o.$f { cfg.$f = v.clone(); } )* };
        }
        set!(
            lexicon,
            rules,
            threshold,
            context_depth,
            default_participant,
            recover,
            merge,
            max_atoms,
            max_terms,
            bound,
            memory_cap,
            capabilities,
            injectable,
            replay_buffer_size,
            sequential
        );
        if let Some(p) = &o.participants {
            cfg.env.participants = p.clone();
        }
        if let Some(n) = &o.channel_naming {
            cfg.env.channel_naming = match n.as_str() {
                "src-dst" => ChannelNaming::SrcDst,
                "dst-src" => ChannelNaming::DstSrc,
                other => bail!("unknown channel naming `{other}`"),
            };
        }
        if let Some(a) = &o.aliases {
            cfg.env.agent_aliases = pairs(a, "alias")?;
        }
        if let Some(i) = &o.initial {
            cfg.initial = pairs(i, "initial state")?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            bail!("threshold must be in [0, 1), got {}", self.threshold);
        }
        for (name, v) in [
            ("context_depth", self.context_depth),
            ("max_atoms", self.max_atoms),
            ("max_terms", self.max_terms),
            ("bound", self.bound),
            ("memory_cap", self.memory_cap),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if self.env.participants.is_empty() {
            bail!("at least one participant is required");
        }
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::default()
        }
    }

    pub fn limits(&self) -> LogicLimits {
        LogicLimits {
            max_atoms: self.max_atoms,
            max_terms: self.max_terms,
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            env: self.env.clone(),
            threshold: self.threshold,
            context_depth: self.context_depth,
            default_participant: self.default_participant.clone(),
            initial: self.initial.clone(),
            recover: self.recover,
            merge: self.merge,
        }
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions {
            bound: self.bound,
            memory_cap: self.memory_cap,
            exec: self.exec(),
        }
    }

    pub fn adversary(&self) -> AdversaryConfig {
        AdversaryConfig {
            capabilities: self.capabilities.clone(),
            replay_buffer_size: self.replay_buffer_size,
            injectable: self.injectable.clone(),
        }
    }
}
