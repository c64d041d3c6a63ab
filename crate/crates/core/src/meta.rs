//! Meta-strategy solvers: map an empirical game to the profile the next
//! best responses are trained against.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::empirical::EmpiricalGame;
use crate::error::{Error, Result};
use crate::game::{MixedProfile, MixedStrategy};
use crate::solvers::{
    fixed_rd, mrcp, nash_np, prd, qre_logit, rrd, MrcpConfig, NashConfig, QreConfig, RdConfig,
};

/// Shape constant of the exponential schedule: at the horizon the
/// remaining gap to `end` is e^-3, about 5% of the initial gap.
pub const EXP_DECAY_SHAPE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LambdaMode {
    Constant,
    LinearDecay,
    ExpDecay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSchedule {
    pub mode: LambdaMode,
    pub start: f64,
    pub end: f64,
    pub horizon: usize,
}

impl LambdaSchedule {
    pub fn constant(lambda: f64) -> Self {
        LambdaSchedule { mode: LambdaMode::Constant, start: lambda, end: lambda, horizon: 1 }
    }

    pub fn linear(start: f64, end: f64, horizon: usize) -> Self {
        LambdaSchedule { mode: LambdaMode::LinearDecay, start, end, horizon }
    }

    pub fn exponential(start: f64, end: f64, horizon: usize) -> Self {
        LambdaSchedule { mode: LambdaMode::ExpDecay, start, end, horizon }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda start must be non-negative, got {}", self.start)));
        }
        if self.mode != LambdaMode::Constant {
            if !(self.end >= 0.0 && self.end <= self.start) {
                return Err(Error::InvalidConfig(format!(
                    "decaying lambda needs 0 <= end <= start, got start {} end {}",
                    self.start, self.end
                )));
            }
            if self.horizon == 0 {
                return Err(Error::InvalidConfig("lambda horizon must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Regret threshold scheduled for `iteration`.
pub fn lambda_at(schedule: &LambdaSchedule, iteration: usize) -> f64 {
    let frac = iteration as f64 / schedule.horizon.max(1) as f64;
    match schedule.mode {
        LambdaMode::Constant => schedule.start,
        LambdaMode::LinearDecay => schedule.start + (schedule.end - schedule.start) * frac.min(1.0),
        LambdaMode::ExpDecay => schedule.end + (schedule.start - schedule.end) * (-EXP_DECAY_SHAPE * frac).exp(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MssKind {
    DoNash,
    FpUniform,
    Prd,
    Rrd,
    FixedRd,
    Qre,
    MrcpOracle,
    LastStrategy,
    NashUniformMix,
}

impl MssKind {
    pub const ALL: [MssKind; 9] = [
        MssKind::DoNash,
        MssKind::FpUniform,
        MssKind::Prd,
        MssKind::Rrd,
        MssKind::FixedRd,
        MssKind::Qre,
        MssKind::MrcpOracle,
        MssKind::LastStrategy,
        MssKind::NashUniformMix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MssKind::DoNash => "DO_NASH",
            MssKind::FpUniform => "FP_UNIFORM",
            MssKind::Prd => "PRD",
            MssKind::Rrd => "RRD",
            MssKind::FixedRd => "FIXED_RD",
            MssKind::Qre => "QRE",
            MssKind::MrcpOracle => "MRCP_ORACLE",
            MssKind::LastStrategy => "LAST_STRATEGY",
            MssKind::NashUniformMix => "NASH_UNIFORM_MIX",
        }
    }

    /// Whether the kind reads estimated payoffs of the restricted box.
    pub fn needs_payoffs(self) -> bool {
        !matches!(self, MssKind::FpUniform | MssKind::LastStrategy)
    }
}

impl fmt::Display for MssKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MssKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MssKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown meta-strategy solver '{s}'")))
    }
}

/// Kind-specific parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MssParams {
    DoNash,
    FpUniform,
    Prd(RdConfig),
    /// The schedule overrides `rd.regret_threshold` at every iteration.
    Rrd { schedule: LambdaSchedule, rd: RdConfig },
    FixedRd { steps: usize, step_size: f64 },
    Qre(QreConfig),
    MrcpOracle(MrcpConfig),
    LastStrategy,
    /// Probability of using the equilibrium target in a given iteration.
    NashUniformMix { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MssSpec {
    pub params: MssParams,
    pub seed: u64,
    /// Equilibrium search settings for DO_NASH and NASH_UNIFORM_MIX.
    pub nash: NashConfig,
}

impl MssSpec {
    pub fn new(params: MssParams, seed: u64) -> Self {
        MssSpec { params, seed, nash: NashConfig::default() }
    }

    pub fn do_nash() -> Self {
        Self::new(MssParams::DoNash, 0)
    }

    pub fn rrd(lambda: f64) -> Self {
        Self::new(
            MssParams::Rrd { schedule: LambdaSchedule::constant(lambda), rd: RdConfig::with_threshold(lambda) },
            0,
        )
    }

    pub fn kind(&self) -> MssKind {
        match self.params {
            MssParams::DoNash => MssKind::DoNash,
            MssParams::FpUniform => MssKind::FpUniform,
            MssParams::Prd(_) => MssKind::Prd,
            MssParams::Rrd { .. } => MssKind::Rrd,
            MssParams::FixedRd { .. } => MssKind::FixedRd,
            MssParams::Qre(_) => MssKind::Qre,
            MssParams::MrcpOracle(_) => MssKind::MrcpOracle,
            MssParams::LastStrategy => MssKind::LastStrategy,
            MssParams::NashUniformMix { .. } => MssKind::NashUniformMix,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.params {
            MssParams::Prd(rd) => rd.validate(),
            MssParams::Rrd { schedule, rd } => {
                schedule.validate()?;
                rd.validate()
            }
            MssParams::FixedRd { step_size, .. } if !(*step_size > 0.0 && step_size.is_finite()) => {
                Err(Error::InvalidConfig(format!("fixed_rd step_size must be positive, got {step_size}")))
            }
            MssParams::Qre(q) if !(q.tau >= 0.0 && q.damping > 0.0 && q.damping <= 1.0 && q.iters > 0) => {
                Err(Error::InvalidConfig("qre needs tau >= 0, damping in (0, 1] and iters >= 1".into()))
            }
            MssParams::NashUniformMix { p } if !(0.0..=1.0).contains(p) => {
                Err(Error::InvalidConfig(format!("mix probability must lie in [0, 1], got {p}")))
            }
            _ => Ok(()),
        }
    }

    /// The RRD threshold for `iteration`, if this is an RRD spec.
    pub fn lambda_for(&self, iteration: usize) -> Option<f64> {
        match &self.params {
            MssParams::Rrd { schedule, .. } => Some(lambda_at(schedule, iteration)),
            _ => None,
        }
    }
}

/// A meta-strategy target with the solver diagnostics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MssOutcome {
    /// Indexed by positions in the empirical strategy sets.
    pub profile: MixedProfile,
    pub lambda: Option<f64>,
    /// Logit residual for QRE.
    pub residual: Option<f64>,
    /// RRD: threshold met.
    pub hit_threshold: Option<bool>,
}

impl MssOutcome {
    fn plain(profile: MixedProfile) -> Self {
        MssOutcome { profile, lambda: None, residual: None, hit_threshold: None }
    }
}

/// Per-iteration coin of NASH_UNIFORM_MIX, derived from the spec seed and
/// the iteration so it is independent of any other randomness.
pub fn mix_uses_nash(seed: u64, iteration: usize, p: f64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (iteration as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.random::<f64>() < p
}

fn uniform_target(emp: &EmpiricalGame) -> MixedProfile {
    MixedProfile::uniform(&emp.sets().counts())
}

fn nash_target(spec: &MssSpec, emp: &EmpiricalGame) -> Result<MixedProfile> {
    let game = emp.restricted_game()?;
    Ok(nash_np(&game, &NashConfig { seed: spec.seed, ..spec.nash })?.profile)
}

/// Computes the best-response target for `iteration`.
pub fn solve_mss(spec: &MssSpec, emp: &EmpiricalGame, iteration: usize) -> Result<MssOutcome> {
    spec.validate()?;
    let outcome = match &spec.params {
        MssParams::DoNash => MssOutcome::plain(nash_target(spec, emp)?),
        MssParams::FpUniform => MssOutcome::plain(uniform_target(emp)),
        MssParams::Prd(rd) => MssOutcome::plain(prd(&emp.restricted_game()?, rd)?.profile),
        MssParams::Rrd { schedule, rd } => {
            let lambda = lambda_at(schedule, iteration);
            let res = rrd(&emp.restricted_game()?, &RdConfig { regret_threshold: lambda, ..*rd })?;
            MssOutcome {
                profile: res.profile,
                lambda: Some(lambda),
                residual: None,
                hit_threshold: Some(res.hit_threshold),
            }
        }
        MssParams::FixedRd { steps, step_size } => {
            MssOutcome::plain(fixed_rd(&emp.restricted_game()?, *steps, *step_size)?.profile)
        }
        MssParams::Qre(q) => {
            let res = qre_logit(&emp.restricted_game()?, q)?;
            MssOutcome { residual: res.residual, ..MssOutcome::plain(res.profile) }
        }
        MssParams::MrcpOracle(m) => {
            let res = mrcp(emp.full_game(), emp.sets(), &MrcpConfig { seed: spec.seed, ..*m })?;
            MssOutcome::plain(res.profile)
        }
        MssParams::LastStrategy => {
            let sets = emp.sets();
            let strategies = (0..sets.num_players())
                .map(|i| {
                    let pos = sets.position(i, sets.most_recent(i)).expect("present");
                    MixedStrategy::pure(sets.len(i), pos)
                })
                .collect();
            MssOutcome::plain(MixedProfile::new(strategies)?)
        }
        MssParams::NashUniformMix { p } => {
            if mix_uses_nash(spec.seed, iteration, *p) {
                MssOutcome::plain(nash_target(spec, emp)?)
            } else {
                MssOutcome::plain(uniform_target(emp))
            }
        }
    };
    Ok(outcome)
}
