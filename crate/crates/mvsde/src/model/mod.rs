//! Coefficient functions, Levy measure specifications, the taming transforms
//! and numerical growth-bound checkers.
//!
//! A [`ModelSpec`] owns the drift `b_t(x, mu)`, diffusion `sigma_t(x, mu)`,
//! jump coefficient `gamma_t(x, mu, z)` and the closed-form compensator
//! `int_Z gamma_t(x, mu, z) nu(dz)`. Coefficients are pure functions and are
//! called concurrently from many worker threads; they receive the evaluation
//! context through [`CoeffArgs`] (time, state, empirical measure, switching
//! regime and, for delay equations, the lagged state and measure).
//!
//! [`tame`] and [`tame_delay`] wrap a model with the step-count-dependent
//! damping `1 / (1 + n^{-1/2}|x|^chi)` (plus `n^{-1/2}|x_lag|^{2 chi}` in the
//! delay case) applied to all three coefficients and to the compensator.

mod presets;

pub use presets::{
    cubic_interaction, delay_cubic, mean_field_ou, preset, pure_jump_linear, switching_cubic,
    CubicParams, DelayCubicParams, MeanFieldOuParams, PresetBundle, PureJumpParams,
    SwitchingCubicParams,
};

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::measure::EmpiricalMeasure;
use crate::rng::{stream, Domain};
use crate::util::norm;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown preset `{name}`")]
    UnknownPreset { name: String },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("tame_delay requires a model with a delay specification")]
    DelayRequired,
    #[error(
        "delay tau = {tau} does not align with the grid: {steps} steps of size {horizon}/{n} per lag"
    )]
    DelayMisaligned { tau: f64, horizon: f64, n: usize, steps: f64 },
}

/// Lagged state passed to the coefficients of a delay equation.
#[derive(Debug, Clone, Copy)]
pub struct DelayedArgs<'a> {
    /// `y_{kappa_n(s - tau)}` for the particle being updated.
    pub x: &'a [f64],
    /// Empirical measure of the ensemble at `kappa_n(s - tau)`.
    pub measure: &'a EmpiricalMeasure,
}

/// Evaluation context handed to every coefficient call.
#[derive(Debug, Clone, Copy)]
pub struct CoeffArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub measure: &'a EmpiricalMeasure,
    /// Switching-chain state at the left grid point; `0` when unswitched.
    pub regime: usize,
    /// Present only for delay models.
    pub delayed: Option<DelayedArgs<'a>>,
}

/// Writes a drift / compensator vector (length `d`) or a diffusion matrix
/// (length `d * m`, row-major) for the given context.
pub type CoeffFn = dyn Fn(&CoeffArgs<'_>, &mut [f64]) + Send + Sync;

/// Writes the jump coefficient (length `d`) for context and mark.
pub type JumpFn = dyn Fn(&CoeffArgs<'_>, &[f64], &mut [f64]) + Send + Sync;

/// Draws one mark into the output slice.
pub type MarkSampler = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;

/// Sampler for one particle's initial condition.
pub type InitialSampler = dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync;

/// Deterministic initial segment of a delay equation: `segment(u)` is the
/// value of the path at time `u - tau` for `u` in `[0, tau)`.
pub type SegmentFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Which jump-activity regime the Levy measure is in.
#[derive(Clone)]
pub enum LevyKind {
    /// `nu(Z) = lambda < infinity`: compound Poisson, simulated exactly.
    /// `lambda = 0` disables jumps altogether.
    FiniteActivity { lambda: f64 },
    /// A sigma-finite measure restricted to marks with `|z| > epsilon`.
    /// Jumps below the cutoff are dropped; their compensator contribution is
    /// the caller's responsibility (fold it into `jump_compensator`). The
    /// truncation bias is documented, not corrected.
    TruncatedInfinite { epsilon: f64, lambda_eps: f64 },
}

/// Jump-mark law: total event intensity plus a mark sampler.
#[derive(Clone)]
pub struct LevySpec {
    kind: LevyKind,
    mark_dim: usize,
    mark_sampler: Arc<MarkSampler>,
    /// Optional user-declared bound on the growth constant of
    /// `int_Z |gamma|^2 nu(dz)`, for diagnostics only.
    pub second_moment_bound: Option<f64>,
}

impl LevySpec {
    pub fn finite_activity(
        lambda: f64,
        mark_dim: usize,
        sampler: impl Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self, ModelError> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "finite-activity intensity must be >= 0 and finite, got {lambda}"
            )));
        }
        if mark_dim == 0 {
            return Err(ModelError::InvalidParameter("mark dimension must be positive".into()));
        }
        Ok(Self {
            kind: LevyKind::FiniteActivity { lambda },
            mark_dim,
            mark_sampler: Arc::new(sampler),
            second_moment_bound: None,
        })
    }

    pub fn truncated_infinite(
        epsilon: f64,
        lambda_eps: f64,
        mark_dim: usize,
        sampler: impl Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static,
    ) -> Result<Self, ModelError> {
        if !(epsilon > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "small-jump cutoff must be positive, got {epsilon}"
            )));
        }
        if !lambda_eps.is_finite() || lambda_eps <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "tail intensity nu(|z| > eps) must be positive and finite, got {lambda_eps}"
            )));
        }
        if mark_dim == 0 {
            return Err(ModelError::InvalidParameter("mark dimension must be positive".into()));
        }
        Ok(Self {
            kind: LevyKind::TruncatedInfinite { epsilon, lambda_eps },
            mark_dim,
            mark_sampler: Arc::new(sampler),
            second_moment_bound: None,
        })
    }

    /// No jumps at all.
    pub fn none() -> Self {
        Self::finite_activity(0.0, 1, |_, out| out.fill(0.0)).expect("zero intensity is valid")
    }

    /// Event intensity actually simulated (`lambda` or `lambda_eps`).
    pub fn rate(&self) -> f64 {
        match self.kind {
            LevyKind::FiniteActivity { lambda } => lambda,
            LevyKind::TruncatedInfinite { lambda_eps, .. } => lambda_eps,
        }
    }

    pub fn kind(&self) -> &LevyKind {
        &self.kind
    }

    pub fn mark_dim(&self) -> usize {
        self.mark_dim
    }

    pub fn sample_mark(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        (self.mark_sampler)(rng, out);
    }
}

impl fmt::Debug for LevySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LevyKind::FiniteActivity { lambda } => f
                .debug_struct("LevySpec")
                .field("kind", &"finite-activity")
                .field("lambda", &lambda)
                .field("mark_dim", &self.mark_dim)
                .finish(),
            LevyKind::TruncatedInfinite { epsilon, lambda_eps } => f
                .debug_struct("LevySpec")
                .field("kind", &"truncated-infinite")
                .field("epsilon", &epsilon)
                .field("lambda_eps", &lambda_eps)
                .field("mark_dim", &self.mark_dim)
                .finish(),
        }
    }
}

/// Distribution of the i.i.d. initial conditions `x_0^i`.
#[derive(Clone)]
pub enum InitialLaw {
    Constant(Vec<f64>),
    Gaussian { mean: Vec<f64>, std: f64 },
    Custom { sampler: Arc<InitialSampler>, mean: Vec<f64> },
}

impl InitialLaw {
    pub fn mean(&self) -> &[f64] {
        match self {
            InitialLaw::Constant(point) => point,
            InitialLaw::Gaussian { mean, .. } => mean,
            InitialLaw::Custom { mean, .. } => mean,
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self {
            InitialLaw::Constant(point) => out.copy_from_slice(point),
            InitialLaw::Gaussian { mean, std } => {
                for (slot, m) in out.iter_mut().zip(mean) {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    *slot = m + std * z;
                }
            }
            InitialLaw::Custom { sampler, .. } => sampler(rng, out),
        }
    }
}

impl fmt::Debug for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::Constant(p) => write!(f, "Constant({p:?})"),
            InitialLaw::Gaussian { mean, std } => write!(f, "Gaussian({mean:?}, std {std})"),
            InitialLaw::Custom { mean, .. } => write!(f, "Custom(mean {mean:?})"),
        }
    }
}

/// Fixed-lag specification for delay equations.
#[derive(Clone)]
pub struct DelaySpec {
    /// The lag `tau > 0`.
    pub tau: f64,
    /// Initial segment; see [`SegmentFn`].
    pub segment: Arc<SegmentFn>,
}

impl fmt::Debug for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DelaySpec(tau {})", self.tau)
    }
}

/// A McKean-Vlasov model: coefficients, jump law and scalar parameters.
#[derive(Clone)]
pub struct ModelSpec {
    dim: usize,
    wiener_dim: usize,
    drift: Arc<CoeffFn>,
    diffusion: Arc<CoeffFn>,
    jump: Arc<JumpFn>,
    jump_compensator: Arc<CoeffFn>,
    pub levy: LevySpec,
    /// Growth exponent of the local Lipschitz bound of the drift.
    pub chi: f64,
    /// Moment parameter used by diagnostics (`p0 > 4` for the rate theory).
    pub p0: f64,
    /// Terminal time `T`.
    pub horizon: f64,
    pub initial: InitialLaw,
    pub delay: Option<DelaySpec>,
    /// Number of switching regimes the coefficients understand (1 = none).
    pub regimes: usize,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("dim", &self.dim)
            .field("wiener_dim", &self.wiener_dim)
            .field("chi", &self.chi)
            .field("p0", &self.p0)
            .field("horizon", &self.horizon)
            .field("regimes", &self.regimes)
            .field("delay", &self.delay)
            .field("levy", &self.levy)
            .finish()
    }
}

impl ModelSpec {
    pub fn builder(dim: usize, wiener_dim: usize) -> ModelBuilder {
        ModelBuilder::new(dim, wiener_dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn wiener_dim(&self) -> usize {
        self.wiener_dim
    }

    pub fn drift(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.drift)(args, out);
    }

    pub fn diffusion(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim * self.wiener_dim);
        (self.diffusion)(args, out);
    }

    pub fn jump(&self, args: &CoeffArgs<'_>, mark: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.jump)(args, mark, out);
    }

    /// The exact value of `int_Z gamma_t(x, mu, z) nu(dz)`.
    pub fn jump_compensator(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        (self.jump_compensator)(args, out);
    }

    /// Monte Carlo cross-check of the user-supplied compensator against
    /// `rate * E_Z[gamma(z)]` at one evaluation point. Returns the maximum
    /// componentwise deviation in standard-error units.
    pub fn compensator_consistency(
        &self,
        args: &CoeffArgs<'_>,
        mark_samples: usize,
        seed: u64,
    ) -> f64 {
        let rate = self.levy.rate();
        let mut exact = vec![0.0; self.dim];
        self.jump_compensator(args, &mut exact);
        if rate == 0.0 {
            return exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
        }
        let mut rng = stream(seed, Domain::BoundCheck, 0);
        let mut mark = vec![0.0; self.levy.mark_dim()];
        let mut buf = vec![0.0; self.dim];
        let mut sum = vec![0.0; self.dim];
        let mut sumsq = vec![0.0; self.dim];
        for _ in 0..mark_samples {
            self.levy.sample_mark(&mut rng, &mut mark);
            self.jump(args, &mark, &mut buf);
            for j in 0..self.dim {
                sum[j] += buf[j];
                sumsq[j] += buf[j] * buf[j];
            }
        }
        let m = mark_samples as f64;
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            let mean = sum[j] / m;
            let var = (sumsq[j] / m - mean * mean).max(0.0);
            let se = rate * (var / m).sqrt();
            let dev = (rate * mean - exact[j]).abs();
            // dev in SE units; exact agreement with zero variance counts as 0
            worst = worst.max(if se > 0.0 { dev / se } else { dev * 1e16 });
        }
        worst
    }
}

/// Step-by-step builder; only dimensions are mandatory, everything else
/// defaults to the zero model with no jumps on `[0, 1]`.
pub struct ModelBuilder {
    dim: usize,
    wiener_dim: usize,
    drift: Arc<CoeffFn>,
    diffusion: Arc<CoeffFn>,
    jump: Arc<JumpFn>,
    jump_compensator: Arc<CoeffFn>,
    levy: LevySpec,
    chi: f64,
    p0: f64,
    horizon: f64,
    initial: InitialLaw,
    delay: Option<DelaySpec>,
    regimes: usize,
}

impl ModelBuilder {
    pub fn new(dim: usize, wiener_dim: usize) -> Self {
        Self {
            dim,
            wiener_dim,
            drift: Arc::new(|_, out| out.fill(0.0)),
            diffusion: Arc::new(|_, out| out.fill(0.0)),
            jump: Arc::new(|_, _, out| out.fill(0.0)),
            jump_compensator: Arc::new(|_, out| out.fill(0.0)),
            levy: LevySpec::none(),
            chi: 0.0,
            p0: 6.0,
            horizon: 1.0,
            initial: InitialLaw::Constant(vec![0.0; dim]),
            delay: None,
            regimes: 1,
        }
    }

    pub fn drift(mut self, f: impl Fn(&CoeffArgs<'_>, &mut [f64]) + Send + Sync + 'static) -> Self {
        self.drift = Arc::new(f);
        self
    }

    pub fn diffusion(
        mut self,
        f: impl Fn(&CoeffArgs<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Arc::new(f);
        self
    }

    pub fn jump(
        mut self,
        f: impl Fn(&CoeffArgs<'_>, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jump = Arc::new(f);
        self
    }

    pub fn jump_compensator(
        mut self,
        f: impl Fn(&CoeffArgs<'_>, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.jump_compensator = Arc::new(f);
        self
    }

    pub fn levy(mut self, levy: LevySpec) -> Self {
        self.levy = levy;
        self
    }

    pub fn chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn p0(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn initial(mut self, initial: InitialLaw) -> Self {
        self.initial = initial;
        self
    }

    pub fn delay(
        mut self,
        tau: f64,
        segment: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.delay = Some(DelaySpec { tau, segment: Arc::new(segment) });
        self
    }

    pub fn regimes(mut self, regimes: usize) -> Self {
        self.regimes = regimes;
        self
    }

    pub fn build(self) -> Result<ModelSpec, ModelError> {
        if self.dim == 0 || self.wiener_dim == 0 {
            return Err(ModelError::InvalidParameter(
                "state and Wiener dimensions must be positive".into(),
            ));
        }
        if !(self.horizon > 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !(self.chi >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "growth exponent chi must be >= 0, got {}",
                self.chi
            )));
        }
        if self.regimes == 0 {
            return Err(ModelError::InvalidParameter("regime count must be positive".into()));
        }
        if let Some(delay) = &self.delay {
            if !(delay.tau > 0.0) {
                return Err(ModelError::InvalidParameter(format!(
                    "delay must be positive, got {}",
                    delay.tau
                )));
            }
        }
        Ok(ModelSpec {
            dim: self.dim,
            wiener_dim: self.wiener_dim,
            drift: self.drift,
            diffusion: self.diffusion,
            jump: self.jump,
            jump_compensator: self.jump_compensator,
            levy: self.levy,
            chi: self.chi,
            p0: self.p0,
            horizon: self.horizon,
            initial: self.initial,
            delay: self.delay,
            regimes: self.regimes,
        })
    }
}

/// Which denominator the tamed coefficients use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TamingKind {
    /// `1 + n^{-1/2} |x|^chi`.
    Plain,
    /// `1 + n^{-1/2} |x|^chi + n^{-1/2} |x_lag|^{2 chi}`.
    Delay,
    /// No damping at all — diagnostic mode for demonstrating divergence.
    Bypass,
}

/// A model together with the step count `n` entering the taming denominator.
#[derive(Clone)]
pub struct TamedModel {
    model: ModelSpec,
    n: usize,
    kind: TamingKind,
    inv_sqrt_n: f64,
}

impl fmt::Debug for TamedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TamedModel(n {}, {:?}, {:?})", self.n, self.kind, self.model)
    }
}

/// `|x|^chi` with the convention that `chi = 0` means "no damping": a model
/// that declares no growth needs no taming, and the tamed coefficients then
/// coincide with the raw ones everywhere (not just at the origin).
fn growth_penalty(x: &[f64], chi: f64) -> f64 {
    if chi == 0.0 {
        0.0
    } else {
        norm(x).powf(chi)
    }
}

impl TamedModel {
    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> TamingKind {
        self.kind
    }

    /// The taming denominator at the given (and, for delay models, lagged)
    /// state. Always `>= 1`.
    pub fn denominator(&self, x: &[f64], delayed_x: Option<&[f64]>) -> f64 {
        let chi = self.model.chi;
        match self.kind {
            TamingKind::Bypass => 1.0,
            TamingKind::Plain => 1.0 + self.inv_sqrt_n * growth_penalty(x, chi),
            TamingKind::Delay => {
                let lag = delayed_x.expect("delay taming needs the lagged state");
                1.0 + self.inv_sqrt_n * growth_penalty(x, chi)
                    + self.inv_sqrt_n * growth_penalty(lag, 2.0 * chi)
            }
        }
    }

    fn denominator_for(&self, args: &CoeffArgs<'_>) -> f64 {
        self.denominator(args.x, args.delayed.as_ref().map(|d| d.x))
    }

    pub fn drift(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        self.model.drift(args, out);
        scale(out, 1.0 / self.denominator_for(args));
    }

    pub fn diffusion(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        self.model.diffusion(args, out);
        scale(out, 1.0 / self.denominator_for(args));
    }

    pub fn jump(&self, args: &CoeffArgs<'_>, mark: &[f64], out: &mut [f64]) {
        self.model.jump(args, mark, out);
        scale(out, 1.0 / self.denominator_for(args));
    }

    pub fn jump_compensator(&self, args: &CoeffArgs<'_>, out: &mut [f64]) {
        self.model.jump_compensator(args, out);
        scale(out, 1.0 / self.denominator_for(args));
    }
}

fn scale(xs: &mut [f64], factor: f64) {
    for v in xs {
        *v *= factor;
    }
}

/// Plain taming: divide all coefficients by `1 + n^{-1/2}|x|^chi`.
pub fn tame(model: &ModelSpec, n: usize) -> Result<TamedModel, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("step count must be >= 1".into()));
    }
    Ok(TamedModel {
        model: model.clone(),
        n,
        kind: TamingKind::Plain,
        inv_sqrt_n: 1.0 / (n as f64).sqrt(),
    })
}

/// Delay taming: denominator `1 + n^{-1/2}|x|^chi + n^{-1/2}|x_lag|^{2 chi}`.
///
/// Rejects step counts whose grid does not contain the lag, i.e. when
/// `tau` is not an integer multiple of `horizon / n`.
pub fn tame_delay(model: &ModelSpec, n: usize) -> Result<TamedModel, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("step count must be >= 1".into()));
    }
    let delay = model.delay.as_ref().ok_or(ModelError::DelayRequired)?;
    let steps = delay.tau * n as f64 / model.horizon;
    if (steps - steps.round()).abs() > 1e-9 || steps.round() < 1.0 {
        return Err(ModelError::DelayMisaligned {
            tau: delay.tau,
            horizon: model.horizon,
            n,
            steps,
        });
    }
    Ok(TamedModel {
        model: model.clone(),
        n,
        kind: TamingKind::Delay,
        inv_sqrt_n: 1.0 / (n as f64).sqrt(),
    })
}

/// Diagnostic mode: no damping. Exists so experiments can demonstrate the
/// divergence that taming prevents.
pub fn untamed(model: &ModelSpec, n: usize) -> Result<TamedModel, ModelError> {
    if n == 0 {
        return Err(ModelError::InvalidParameter("step count must be >= 1".into()));
    }
    Ok(TamedModel { model: model.clone(), n, kind: TamingKind::Bypass, inv_sqrt_n: 0.0 })
}

/// Configuration of the random spot checks in [`check_taming_bounds`].
#[derive(Debug, Clone)]
pub struct BoundCheckConfig {
    /// States are drawn uniformly from `[-radius, radius]^d`.
    pub radius: f64,
    /// Atom count of the random empirical measures.
    pub measure_atoms: usize,
    /// Mark draws used to estimate `int |gamma^n|^2 nu(dz)` per sample.
    pub mark_samples: usize,
    /// A ratio above this constant flags a violation.
    pub threshold: f64,
    pub seed: u64,
}

impl Default for BoundCheckConfig {
    fn default() -> Self {
        Self { radius: 10.0, measure_atoms: 8, mark_samples: 32, threshold: 10.0, seed: 0x0b0d }
    }
}

/// Outcome of the growth-bound spot check. A violation is a report outcome,
/// not an error.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub samples: usize,
    /// max of `|b^n| / (n^{1/4} (1 + |x| + W2(mu, delta_0)))`.
    pub drift_ratio: f64,
    /// max of `|sigma^n| / (n^{1/6} (1 + |x| + W2(mu, delta_0)))`.
    pub diffusion_ratio: f64,
    /// max of `int |gamma^n|^2 nu / (n^{1/3} (1 + |x| + W2(mu, delta_0))^2)`.
    pub jump_ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Spot-checks the step-count growth bounds of a tamed model: over random
/// `(t, x, mu)` draws, the tamed drift, diffusion and jump second moment must
/// stay below `n^{1/4}`, `n^{1/6}` and `n^{1/3}` multiples of
/// `1 + |x| + W2(mu, delta_0)` (to the appropriate power).
pub fn check_taming_bounds(
    tamed: &TamedModel,
    sample_count: usize,
    config: &BoundCheckConfig,
) -> BoundReport {
    let model = tamed.model();
    let d = model.dim();
    let n = tamed.n() as f64;
    let drift_gauge = n.powf(0.25);
    let diffusion_gauge = n.powf(1.0 / 6.0);
    let jump_gauge = n.powf(1.0 / 3.0);

    let mut rng = stream(config.seed, Domain::BoundCheck, 0);
    let mut x = vec![0.0; d];
    let mut lag = vec![0.0; d];
    let mut atoms = vec![0.0; d * config.measure_atoms];
    let mut drift_buf = vec![0.0; d];
    let mut diff_buf = vec![0.0; d * model.wiener_dim()];
    let mut jump_buf = vec![0.0; d];
    let mut mark = vec![0.0; model.levy.mark_dim()];

    let mut report = BoundReport {
        samples: sample_count,
        drift_ratio: 0.0,
        diffusion_ratio: 0.0,
        jump_ratio: 0.0,
        threshold: config.threshold,
        pass: true,
    };

    for _ in 0..sample_count {
        let t = rng.random_range(0.0..model.horizon);
        for slot in x.iter_mut().chain(lag.iter_mut()).chain(atoms.iter_mut()) {
            *slot = rng.random_range(-config.radius..config.radius);
        }
        let mu = EmpiricalMeasure::new(d, atoms.clone()).expect("sampled atoms are finite");
        let regime = rng.random_range(0..model.regimes);
        let delayed =
            model.delay.as_ref().map(|_| DelayedArgs { x: lag.as_slice(), measure: &mu });
        let args = CoeffArgs { t, x: &x, measure: &mu, regime, delayed };

        let gauge = 1.0 + norm(&x) + mu.w2_to_dirac0();

        tamed.drift(&args, &mut drift_buf);
        report.drift_ratio = report.drift_ratio.max(norm(&drift_buf) / (drift_gauge * gauge));

        tamed.diffusion(&args, &mut diff_buf);
        report.diffusion_ratio =
            report.diffusion_ratio.max(norm(&diff_buf) / (diffusion_gauge * gauge));

        let rate = model.levy.rate();
        if rate > 0.0 {
            let mut second_moment = 0.0;
            for _ in 0..config.mark_samples {
                model.levy.sample_mark(&mut rng, &mut mark);
                tamed.jump(&args, &mark, &mut jump_buf);
                second_moment += jump_buf.iter().map(|v| v * v).sum::<f64>();
            }
            second_moment = rate * second_moment / config.mark_samples as f64;
            report.jump_ratio =
                report.jump_ratio.max(second_moment / (jump_gauge * gauge * gauge));
        }
    }

    report.pass = report.drift_ratio <= config.threshold
        && report.diffusion_ratio <= config.threshold
        && report.jump_ratio <= config.threshold;
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic_drift_model(chi: f64) -> ModelSpec {
        ModelSpec::builder(1, 1)
            .drift(|args, out| out[0] = -args.x[0].powi(3))
            .chi(chi)
            .build()
            .unwrap()
    }

    fn args_at<'a>(x: &'a [f64], mu: &'a EmpiricalMeasure) -> CoeffArgs<'a> {
        CoeffArgs { t: 0.0, x, measure: mu, regime: 0, delayed: None }
    }

    #[test]
    fn tame_cubic_at_two() {
        // b(x) = -x^3, chi = 4, x = 2, n = 16: -8 / (1 + 16^{-1/2} * 2^4) = -1.6
        let model = cubic_drift_model(4.0);
        let tamed = tame(&model, 16).unwrap();
        let mu = EmpiricalMeasure::dirac0(1);
        let mut out = [0.0];
        tamed.drift(&args_at(&[2.0], &mu), &mut out);
        assert!((out[0] + 1.6).abs() < 1e-14, "got {}", out[0]);
    }

    #[test]
    fn taming_identity_at_origin() {
        for chi in [0.0, 1.0, 4.0] {
            let model = cubic_drift_model(chi);
            let tamed = tame(&model, 64).unwrap();
            assert_eq!(tamed.denominator(&[0.0], None), 1.0);
        }
    }

    #[test]
    fn monotone_recovery_in_n() {
        let model = cubic_drift_model(4.0);
        let mu = EmpiricalMeasure::dirac0(1);
        let mut prev = 0.0;
        let mut out = [0.0];
        for n in [4usize, 16, 64, 256, 4096, 1 << 20] {
            let tamed = tame(&model, n).unwrap();
            tamed.drift(&args_at(&[3.0], &mu), &mut out);
            let mag = out[0].abs();
            assert!(mag >= prev, "taming magnitude not nondecreasing at n = {n}");
            prev = mag;
        }
        assert!((prev - 27.0).abs() < 0.1, "tamed drift should approach |b(3)| = 27, got {prev}");
    }

    #[test]
    fn delay_taming_formula() {
        // f = 1, chi = 1, x = 1, lagged x = 2, n = 4:
        // 1 / (1 + 0.5 * 1 + 0.5 * 4) = 1 / 3.5
        let model = ModelSpec::builder(1, 1)
            .drift(|_, out| out[0] = 1.0)
            .chi(1.0)
            .delay(0.25, |_, out| out[0] = 0.0)
            .build()
            .unwrap();
        let tamed = tame_delay(&model, 4).unwrap();
        let mu = EmpiricalMeasure::dirac0(1);
        let lag = [2.0];
        let lag_mu = EmpiricalMeasure::dirac(&lag);
        let args = CoeffArgs {
            t: 0.0,
            x: &[1.0],
            measure: &mu,
            regime: 0,
            delayed: Some(DelayedArgs { x: &lag, measure: &lag_mu }),
        };
        let mut out = [0.0];
        tamed.drift(&args, &mut out);
        assert!((out[0] - 1.0 / 3.5).abs() < 1e-14);

        // both states at zero: tamed == untamed
        assert_eq!(tamed.denominator(&[0.0], Some(&[0.0])), 1.0);
    }

    #[test]
    fn delay_taming_dominates_plain() {
        let model = ModelSpec::builder(1, 1)
            .drift(|_, out| out[0] = 1.0)
            .chi(2.0)
            .delay(0.25, |_, out| out[0] = 0.0)
            .build()
            .unwrap();
        let plain = tame(&model, 16).unwrap();
        let delayed = tame_delay(&model, 16).unwrap();
        for (x, lag) in [(0.5, 1.0), (2.0, 0.25), (-1.0, -3.0)] {
            let dp = plain.denominator(&[x], None);
            let dd = delayed.denominator(&[x], Some(&[lag]));
            assert!(dd > dp, "delay denominator must dominate when the lagged state is nonzero");
        }
    }

    #[test]
    fn tame_delay_rejects_misaligned_grids() {
        let model = ModelSpec::builder(1, 1)
            .delay(0.3, |_, out| out[0] = 0.0)
            .build()
            .unwrap();
        assert!(matches!(tame_delay(&model, 16), Err(ModelError::DelayMisaligned { .. })));
        assert!(tame_delay(&model, 10).is_ok());
        let plain = ModelSpec::builder(1, 1).build().unwrap();
        assert!(matches!(tame_delay(&plain, 16), Err(ModelError::DelayRequired)));
    }

    #[test]
    fn bound_check_zero_model_passes() {
        let model = ModelSpec::builder(2, 2).build().unwrap();
        let tamed = tame(&model, 64).unwrap();
        let report = check_taming_bounds(&tamed, 200, &BoundCheckConfig::default());
        assert!(report.pass);
        assert_eq!(report.drift_ratio, 0.0);
        assert_eq!(report.diffusion_ratio, 0.0);
        assert_eq!(report.jump_ratio, 0.0);
    }

    #[test]
    fn bound_check_flags_untamed_cubic() {
        let model = cubic_drift_model(4.0);
        // growing sample radius drives the untamed ratio up without bound,
        // while the tamed one stays put
        let mut untamed_prev = 0.0;
        for radius in [10.0, 100.0, 1000.0] {
            let config = BoundCheckConfig { radius, ..Default::default() };
            let bypass = untamed(&model, 64).unwrap();
            let report = check_taming_bounds(&bypass, 500, &config);
            assert!(report.drift_ratio > untamed_prev);
            untamed_prev = report.drift_ratio;

            let tamed = tame(&model, 64).unwrap();
            let tamed_report = check_taming_bounds(&tamed, 500, &config);
            assert!(tamed_report.pass, "tamed cubic must pass at radius {radius}");
        }
        assert!(untamed_prev > 10.0, "untamed ratio should exceed the threshold");
    }

    #[test]
    fn compensator_cross_check_on_presets() {
        for name in ["mean_field_ou", "cubic_interaction", "pure_jump_linear"] {
            let bundle = preset(name).unwrap();
            let mu = EmpiricalMeasure::new(
                bundle.model.dim(),
                vec![0.4; bundle.model.dim() * 4],
            )
            .unwrap();
            let x = vec![0.7; bundle.model.dim()];
            let args = CoeffArgs { t: 0.3, x: &x, measure: &mu, regime: 0, delayed: None };
            let dev = bundle.model.compensator_consistency(&args, 20_000, 5);
            assert!(dev < 4.0, "{name}: compensator off by {dev} standard errors");
        }
    }
}
