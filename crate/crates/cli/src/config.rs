//! Experiment configuration files.
//!
//! ```toml
//! [experiment]
//! name = "long-path"
//! seeds = [0, 1, 2]
//! master_seed = 7
//! lambda_sweep = [0.0, 0.35, 0.6]
//! output_dir = "out"
//!
//! [game]
//! kind = "long_path"
//! n = 100
//!
//! [psro]
//! max_iterations = 120
//! track_ne_regret = true
//!
//! [[mss]]
//! kind = "RRD"
//! lambda = 0.15
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use egta_core::bps::BpsConfig;
use egta_core::factory::{
    load_game, make_long_path_game, make_mrcp_closed_game, make_random_game, matching_pennies,
    PayoffDistribution, RandomGameSpec,
};
use egta_core::game::Game;
use egta_core::meta::{LambdaMode, LambdaSchedule, MssKind, MssParams, MssSpec};
use egta_core::psro::OracleMode;
use egta_core::solvers::{MrcpConfig, QreConfig, RdConfig};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    game: Spanned<RawGame>,
    #[serde(default)]
    psro: RawPsro,
    #[serde(default)]
    mss: Vec<Spanned<RawMss>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Option<String>,
    seeds: Spanned<Vec<u64>>,
    #[serde(default)]
    master_seed: u64,
    lambda_sweep: Option<Spanned<Vec<f64>>>,
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawGame {
    MrcpClosed,
    MatchingPennies,
    LongPath {
        n: usize,
    },
    Random {
        sizes: Vec<usize>,
        #[serde(default)]
        distribution: Distribution,
        #[serde(default)]
        zero_sum: bool,
        #[serde(default)]
        symmetric: bool,
        /// Fixed game seed; without it every experiment seed gets its own game.
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Default, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Distribution {
    #[default]
    Uniform01,
    Gaussian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPsro {
    #[serde(default = "default_max_iterations")]
    max_iterations: usize,
    #[serde(default = "default_epsilon")]
    epsilon_stop: f64,
    #[serde(default)]
    track_ne_regret: bool,
    #[serde(default)]
    oracle: Oracle,
    initial: Option<Vec<usize>>,
    #[serde(default)]
    noise_std: f64,
    #[serde(default = "default_samples")]
    samples_per_profile: u32,
    #[serde(default)]
    bps: bool,
    #[serde(default = "default_bps_tol")]
    bps_tol: f64,
}

impl Default for RawPsro {
    fn default() -> Self {
        RawPsro {
            max_iterations: default_max_iterations(),
            epsilon_stop: default_epsilon(),
            track_ne_regret: false,
            oracle: Oracle::Argmax,
            initial: None,
            noise_std: 0.0,
            samples_per_profile: default_samples(),
            bps: false,
            bps_tol: default_bps_tol(),
        }
    }
}

fn default_max_iterations() -> usize {
    50
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_samples() -> u32 {
    1
}
fn default_bps_tol() -> f64 {
    1e-6
}

#[derive(Debug, Default, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum Oracle {
    #[default]
    Argmax,
    ForceOutside,
    SampledProfile,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMss {
    kind: String,
    label: Option<String>,
    lambda: Option<f64>,
    lambda_end: Option<f64>,
    schedule: Option<String>,
    horizon: Option<usize>,
    step_size: Option<f64>,
    max_steps: Option<usize>,
    floor: Option<f64>,
    steps: Option<usize>,
    tau: Option<f64>,
    iters: Option<usize>,
    damping: Option<f64>,
    p: Option<f64>,
    restarts: Option<usize>,
    iterations: Option<usize>,
}

impl RawMss {
    /// Names of the optional fields that are set.
    fn set_fields(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut push = |set: bool, name| {
            if set {
                out.push(name)
            }
        };
        push(self.lambda.is_some(), "lambda");
        push(self.lambda_end.is_some(), "lambda_end");
        push(self.schedule.is_some(), "schedule");
        push(self.horizon.is_some(), "horizon");
        push(self.step_size.is_some(), "step_size");
        push(self.max_steps.is_some(), "max_steps");
        push(self.floor.is_some(), "floor");
        push(self.steps.is_some(), "steps");
        push(self.tau.is_some(), "tau");
        push(self.iters.is_some(), "iters");
        push(self.damping.is_some(), "damping");
        push(self.p.is_some(), "p");
        push(self.restarts.is_some(), "restarts");
        push(self.iterations.is_some(), "iterations");
        out
    }
}

fn allowed_fields(kind: MssKind) -> &'static [&'static str] {
    match kind {
        MssKind::DoNash | MssKind::FpUniform | MssKind::LastStrategy => &[],
        MssKind::Prd => &["step_size", "max_steps", "floor"],
        MssKind::Rrd => &["lambda", "lambda_end", "schedule", "horizon", "step_size", "max_steps"],
        MssKind::FixedRd => &["steps", "step_size"],
        MssKind::Qre => &["tau", "iters", "damping"],
        MssKind::MrcpOracle => &["restarts", "iterations"],
        MssKind::NashUniformMix => &["p"],
    }
}

/// Where the full game comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    MrcpClosed,
    MatchingPennies,
    LongPath(usize),
    Random {
        sizes: Vec<usize>,
        distribution: PayoffDistribution,
        zero_sum: bool,
        symmetric: bool,
        seed: Option<u64>,
    },
    File(PathBuf),
}

impl GameSource {
    /// Whether each experiment seed draws its own game.
    pub fn per_seed(&self) -> bool {
        matches!(self, GameSource::Random { seed: None, .. })
    }

    /// Builds the game; `derived_seed` is used by seedless random games.
    pub fn build(&self, derived_seed: u64) -> Result<(String, Game)> {
        Ok(match self {
            GameSource::MrcpClosed => ("mrcp_closed".into(), make_mrcp_closed_game()),
            GameSource::MatchingPennies => ("matching_pennies".into(), matching_pennies()),
            GameSource::LongPath(n) => (format!("long_path_{n}"), make_long_path_game(*n)?),
            GameSource::Random { sizes, distribution, zero_sum, symmetric, seed } => {
                let seed = seed.unwrap_or(derived_seed);
                let spec = RandomGameSpec {
                    num_players: sizes.len(),
                    sizes: sizes.clone(),
                    distribution: *distribution,
                    zero_sum: *zero_sum,
                    symmetric: *symmetric,
                    seed,
                };
                let shape: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
                let tag = if *zero_sum { "_zs" } else { "" };
                (format!("random_{}{tag}_g{seed}", shape.join("x")), make_random_game(&spec)?)
            }
            GameSource::File(path) => {
                let game = load_game(path).map_err(|source| CliError::GameFile { path: path.clone(), source })?;
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "game".into());
                (stem, game)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MssEntry {
    pub label: String,
    pub spec: MssSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsroSettings {
    pub max_iterations: usize,
    pub epsilon_stop: f64,
    pub track_ne_regret: bool,
    pub oracle: OracleMode,
    /// One starting strategy per player; defaults to strategy 0 each.
    pub initial: Option<Vec<usize>>,
    pub noise_std: f64,
    pub samples_per_profile: u32,
    pub bps: Option<BpsConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub game: GameSource,
    pub mss: Vec<MssEntry>,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub psro: PsroSettings,
    pub output_dir: PathBuf,
    pub lambda_sweep: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses config text. `path` is used in diagnostics and to resolve
    /// relative game-file paths.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let at = |span: std::ops::Range<usize>, message: String| CliError::ConfigAt {
            path: path.to_path_buf(),
            line: line_of(text, span.start),
            message,
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => at(span, e.message().to_string()),
            None => CliError::Config { path: path.to_path_buf(), message: e.message().to_string() },
        })?;

        let seeds_span = raw.experiment.seeds.span();
        let seeds = raw.experiment.seeds.into_inner();
        if seeds.is_empty() {
            return Err(at(seeds_span, "seeds must list at least one seed".into()));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(at(seeds_span, "seeds must be distinct".into()));
        }

        let lambda_sweep = match raw.experiment.lambda_sweep {
            Some(sweep) => {
                let span = sweep.span();
                let values = sweep.into_inner();
                if values.is_empty() {
                    return Err(at(span, "lambda_sweep must not be empty".into()));
                }
                if let Some(bad) = values.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                    return Err(at(span, format!("lambda values must be non-negative, got {bad}")));
                }
                Some(values)
            }
            None => None,
        };

        let game_span = raw.game.span();
        let game = resolve_game(raw.game.into_inner(), path).map_err(|m| at(game_span.clone(), m))?;

        let mut mss = Vec::with_capacity(raw.mss.len());
        for entry in raw.mss {
            let span = entry.span();
            let entry = resolve_mss(entry.into_inner()).map_err(|m| at(span.clone(), m))?;
            if mss.iter().any(|e: &MssEntry| e.label == entry.label) {
                return Err(at(span, format!("duplicate mss label '{}'; set `label` to tell them apart", entry.label)));
            }
            mss.push(entry);
        }

        let p = raw.psro;
        let bps = p.bps.then(|| BpsConfig::with_tol(p.bps_tol));
        let psro = PsroSettings {
            max_iterations: p.max_iterations,
            epsilon_stop: p.epsilon_stop,
            track_ne_regret: p.track_ne_regret,
            oracle: match p.oracle {
                Oracle::Argmax => OracleMode::Argmax,
                Oracle::ForceOutside => OracleMode::ForceOutside,
                Oracle::SampledProfile => OracleMode::SampledProfile,
            },
            initial: p.initial,
            noise_std: p.noise_std,
            samples_per_profile: p.samples_per_profile,
            bps,
        };
        let cfg = ExperimentConfig {
            name: raw.experiment.name.unwrap_or_else(|| "experiment".into()),
            game,
            mss,
            seeds,
            master_seed: raw.experiment.master_seed,
            psro,
            output_dir: raw.experiment.output_dir.unwrap_or_else(|| PathBuf::from("egta-out")),
            lambda_sweep,
        };
        cfg.validate().map_err(|message| CliError::Config { path: path.to_path_buf(), message })?;
        Ok(cfg)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let s = &self.psro;
        if s.max_iterations == 0 {
            return Err("[psro] max_iterations must be at least 1".into());
        }
        if !(s.epsilon_stop >= 0.0) {
            return Err(format!("[psro] epsilon_stop must be non-negative, got {}", s.epsilon_stop));
        }
        if !(s.noise_std.is_finite() && s.noise_std >= 0.0) {
            return Err(format!("[psro] noise_std must be non-negative, got {}", s.noise_std));
        }
        if s.samples_per_profile == 0 {
            return Err("[psro] samples_per_profile must be positive".into());
        }
        if let Some(b) = &s.bps {
            if !(b.tol >= 0.0) {
                return Err(format!("[psro] bps_tol must be non-negative, got {}", b.tol));
            }
        }
        Ok(())
    }

    /// Checks that the experiment can run: at least one solver and a
    /// start profile that fits the game.
    pub fn check_runnable(&self, game: &Game) -> Result<()> {
        if self.mss.is_empty() {
            return Err(CliError::Usage("the config must list at least one [[mss]] entry".into()));
        }
        if let Some(init) = &self.psro.initial {
            game.check_pure(init)
                .map_err(|e| CliError::Usage(format!("[psro] initial = {init:?} does not fit the game: {e}")))?;
        }
        Ok(())
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name = {}", self.name)?;
        writeln!(f, "game = {:?}", self.game)?;
        writeln!(f, "seeds = {:?}", self.seeds)?;
        writeln!(f, "master_seed = {}", self.master_seed)?;
        writeln!(f, "lambda_sweep = {:?}", self.lambda_sweep)?;
        writeln!(f, "output_dir = {}", self.output_dir.display())?;
        writeln!(f, "psro = {:?}", self.psro)?;
        for m in &self.mss {
            writeln!(f, "mss {} = {:?}", m.label, m.spec)?;
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn resolve_game(raw: RawGame, config_path: &Path) -> std::result::Result<GameSource, String> {
    Ok(match raw {
        RawGame::MrcpClosed => GameSource::MrcpClosed,
        RawGame::MatchingPennies => GameSource::MatchingPennies,
        RawGame::LongPath { n } => {
            if n < 4 {
                return Err(format!("long_path needs n >= 4, got {n}"));
            }
            GameSource::LongPath(n)
        }
        RawGame::Random { sizes, distribution, zero_sum, symmetric, seed } => {
            if sizes.len() < 2 || sizes.contains(&0) {
                return Err("random games need at least two players with positive strategy counts".into());
            }
            if zero_sum && sizes.len() != 2 {
                return Err("zero_sum requires exactly two players".into());
            }
            if symmetric && sizes.iter().any(|&s| s != sizes[0]) {
                return Err("symmetric requires equal strategy counts".into());
            }
            let distribution = match distribution {
                Distribution::Uniform01 => PayoffDistribution::Uniform01,
                Distribution::Gaussian => PayoffDistribution::Gaussian,
            };
            GameSource::Random { sizes, distribution, zero_sum, symmetric, seed }
        }
        RawGame::File { path } => {
            let path = if path.is_relative() {
                config_path.parent().map(|d| d.join(&path)).unwrap_or(path)
            } else {
                path
            };
            GameSource::File(path)
        }
    })
}

fn resolve_mss(raw: RawMss) -> std::result::Result<MssEntry, String> {
    let kind: MssKind = raw.kind.parse().map_err(|e: egta_core::Error| e.to_string())?;
    let allowed = allowed_fields(kind);
    if let Some(extra) = raw.set_fields().into_iter().find(|f| !allowed.contains(f)) {
        return Err(format!("field `{extra}` does not apply to {kind}"));
    }
    let rd = |threshold: f64| RdConfig {
        step_size: raw.step_size.unwrap_or(RdConfig::DEFAULT_STEP_SIZE),
        max_steps: raw.max_steps.unwrap_or(RdConfig::DEFAULT_MAX_STEPS),
        prd_lower_bound: raw.floor.unwrap_or(RdConfig::DEFAULT_PRD_FLOOR),
        ..RdConfig::with_threshold(threshold)
    };
    let params = match kind {
        MssKind::DoNash => MssParams::DoNash,
        MssKind::FpUniform => MssParams::FpUniform,
        MssKind::LastStrategy => MssParams::LastStrategy,
        MssKind::Prd => MssParams::Prd(rd(0.0)),
        MssKind::Rrd => {
            let start = raw.lambda.ok_or("RRD needs `lambda`")?;
            let mode = match raw.schedule.as_deref().unwrap_or("constant") {
                "constant" => LambdaMode::Constant,
                "linear" => LambdaMode::LinearDecay,
                "exponential" => LambdaMode::ExpDecay,
                other => return Err(format!("unknown schedule '{other}' (constant, linear, exponential)")),
            };
            let schedule = match mode {
                LambdaMode::Constant => {
                    if raw.lambda_end.is_some() || raw.horizon.is_some() {
                        return Err("a constant schedule takes no lambda_end or horizon".into());
                    }
                    LambdaSchedule::constant(start)
                }
                _ => LambdaSchedule {
                    mode,
                    start,
                    end: raw.lambda_end.ok_or("decaying schedules need `lambda_end`")?,
                    horizon: raw.horizon.ok_or("decaying schedules need `horizon`")?,
                },
            };
            MssParams::Rrd { schedule, rd: rd(start) }
        }
        MssKind::FixedRd => MssParams::FixedRd {
            steps: raw.steps.ok_or("FIXED_RD needs `steps`")?,
            step_size: raw.step_size.unwrap_or(RdConfig::DEFAULT_STEP_SIZE),
        },
        MssKind::Qre => {
            let mut q = QreConfig::new(raw.tau.ok_or("QRE needs `tau`")?);
            q.iters = raw.iters.unwrap_or(q.iters);
            q.damping = raw.damping.unwrap_or(q.damping);
            MssParams::Qre(q)
        }
        MssKind::MrcpOracle => {
            let d = MrcpConfig::default();
            MssParams::MrcpOracle(MrcpConfig {
                restarts: raw.restarts.unwrap_or(d.restarts),
                iterations: raw.iterations.unwrap_or(d.iterations),
                ..d
            })
        }
        MssKind::NashUniformMix => MssParams::NashUniformMix { p: raw.p.ok_or("NASH_UNIFORM_MIX needs `p`")? },
    };
    let spec = MssSpec::new(params, 0);
    spec.validate().map_err(|e| e.to_string())?;
    let label = match raw.label {
        Some(l) if l.is_empty() || l.contains([',', '/', '\\', '"', '\n']) => {
            return Err(format!("label {l:?} must be non-empty and free of , / \\ and quotes"));
        }
        Some(l) => l,
        None => kind.name().to_string(),
    };
    Ok(MssEntry { label, spec })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("test.toml"))
    }

    const BASE: &str = "[experiment]\nseeds = [1, 2]\n[game]\nkind = \"mrcp_closed\"\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse(&format!("{BASE}[[mss]]\nkind = \"DO_NASH\"\n")).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.psro.max_iterations, 50);
        assert_eq!(cfg.mss[0].label, "DO_NASH");
        assert_eq!(cfg.game, GameSource::MrcpClosed);
        assert!(cfg.psro.bps.is_none());
    }

    #[test]
    fn rrd_schedules() {
        let cfg = parse(&format!(
            "{BASE}[[mss]]\nkind = \"rrd\"\nlambda = 0.5\nlambda_end = 0.1\nschedule = \"linear\"\nhorizon = 10\n"
        ))
        .unwrap();
        assert!((cfg.mss[0].spec.lambda_for(10).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(cfg.mss[0].spec.lambda_for(0), Some(0.5));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse(&format!("{BASE}[psro]\nmax_iterations = \"ten\"\n")).unwrap_err();
        match err {
            CliError::ConfigAt { line, .. } => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_point_at_the_entry() {
        let text = format!("{BASE}[[mss]]\nkind = \"DO_NASH\"\n[[mss]]\nkind = \"BOGUS\"\n");
        match parse(&text).unwrap_err() {
            CliError::ConfigAt { line, message, .. } => {
                assert!(message.contains("BOGUS"), "{message}");
                assert!(line >= 7, "line {line}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        for (text, needle) in [
            ("[experiment]\nseeds = []\n[game]\nkind = \"mrcp_closed\"\n", "at least one seed"),
            ("[experiment]\nseeds = [1, 1]\n[game]\nkind = \"mrcp_closed\"\n", "distinct"),
            ("[experiment]\nseeds = [1]\n[game]\nkind = \"long_path\"\nn = 3\n", "n >= 4"),
            (&format!("{BASE}[[mss]]\nkind = \"DO_NASH\"\ntau = 1.0\n"), "does not apply"),
            (&format!("{BASE}[[mss]]\nkind = \"RRD\"\n"), "needs `lambda`"),
            (&format!("{BASE}[[mss]]\nkind = \"RRD\"\nlambda = 0.1\n[[mss]]\nkind = \"RRD\"\nlambda = 0.2\n"), "duplicate"),
            (&format!("{BASE}[psro]\nmax_iterations = 0\n"), "max_iterations"),
            (&format!("{BASE}[psro]\nunknown_key = 1\n"), "unknown field"),
            ("[experiment]\nseeds = [1]\n[game]\nkind = \"random\"\nsizes = [3, 3, 3]\nzero_sum = true\n", "two players"),
        ] {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{err} should mention {needle}");
        }
    }

    #[test]
    fn relative_game_files_resolve_against_the_config() {
        let cfg = ExperimentConfig::parse(
            "[experiment]\nseeds = [0]\n[game]\nkind = \"file\"\npath = \"g.game\"\n",
            Path::new("/tmp/exp/config.toml"),
        )
        .unwrap();
        assert_eq!(cfg.game, GameSource::File(PathBuf::from("/tmp/exp/g.game")));
    }
}
