//! Built-in model presets.
//!
//! All presets keep their compensators in closed form (the mark laws have
//! known means) and satisfy the coercivity / local-Lipschitz assumptions the
//! rate theory needs, so they double as the experiment suite's fixtures:
//!
//! * `mean_field_ou` — globally Lipschitz linear drift with mean-field
//!   attraction; the ensemble mean obeys the scalar ODE `m' = (a + c) m`,
//!   which gives an independent oracle.
//! * `cubic_interaction` — super-linear `-x^3` drift with mean attraction,
//!   multiplicative diffusion and multiplicative jumps (`chi = 4`).
//! * `switching_cubic` — `cubic_interaction` with regime-dependent constants
//!   driven by a two-state Markov chain.
//! * `delay_cubic` — `cubic_interaction` with lagged-state feedback.
//! * `pure_jump_linear` — no drift, no diffusion, linear jump coefficient
//!   with centred marks: the state is a martingale.

use rand::Rng;

use super::{InitialLaw, LevySpec, ModelError, ModelSpec};
use crate::engine::ChainSpec;

/// A preset model plus, for switching presets, its chain generator.
#[derive(Debug, Clone)]
pub struct PresetBundle {
    pub model: ModelSpec,
    pub chain: Option<ChainSpec>,
}

/// Looks up a preset by name with default parameters.
///
/// Known names: `mean_field_ou`, `cubic_interaction`, `switching_cubic`,
/// `delay_cubic`, `pure_jump_linear`.
pub fn preset(name: &str) -> Result<PresetBundle, ModelError> {
    match name {
        "mean_field_ou" => Ok(PresetBundle {
            model: mean_field_ou(&MeanFieldOuParams::default())?,
            chain: None,
        }),
        "cubic_interaction" => Ok(PresetBundle {
            model: cubic_interaction(&CubicParams::default())?,
            chain: None,
        }),
        "switching_cubic" => {
            let (model, chain) = switching_cubic(&SwitchingCubicParams::default())?;
            Ok(PresetBundle { model, chain: Some(chain) })
        }
        "delay_cubic" => Ok(PresetBundle {
            model: delay_cubic(&DelayCubicParams::default())?,
            chain: None,
        }),
        "pure_jump_linear" => Ok(PresetBundle {
            model: pure_jump_linear(&PureJumpParams::default())?,
            chain: None,
        }),
        other => Err(ModelError::UnknownPreset { name: other.to_string() }),
    }
}

/// Parameters of the mean-field Ornstein-Uhlenbeck preset:
/// `b = a x + c mean(mu)`, constant diffusion, additive jumps.
#[derive(Debug, Clone)]
pub struct MeanFieldOuParams {
    pub a: f64,
    pub c: f64,
    pub sigma: f64,
    /// Jump coefficient `gamma(z) = jump_scale * z`.
    pub jump_scale: f64,
    /// Marks are `N(mark_mean, 1)`; a nonzero mean exercises the
    /// closed-form compensator `lambda * jump_scale * mark_mean`.
    pub mark_mean: f64,
    pub lambda: f64,
    pub x0_mean: f64,
    pub x0_std: f64,
    pub horizon: f64,
    pub p0: f64,
}

impl Default for MeanFieldOuParams {
    fn default() -> Self {
        Self {
            a: -1.0,
            c: 0.5,
            sigma: 0.2,
            jump_scale: 0.1,
            mark_mean: 0.5,
            lambda: 1.0,
            x0_mean: 1.0,
            x0_std: 0.5,
            horizon: 1.0,
            p0: 6.0,
        }
    }
}

/// Globally Lipschitz scalar model; `chi = 0`, so taming is a no-op and the
/// scheme reduces to classical Euler-Maruyama with compensated jumps.
pub fn mean_field_ou(p: &MeanFieldOuParams) -> Result<ModelSpec, ModelError> {
    let MeanFieldOuParams { a, c, sigma, jump_scale, mark_mean, lambda, .. } = *p;
    let compensator = lambda * jump_scale * mark_mean;
    ModelSpec::builder(1, 1)
        .drift(move |args, out| out[0] = a * args.x[0] + c * args.measure.mean()[0])
        .diffusion(move |_, out| out[0] = sigma)
        .jump(move |_, mark, out| out[0] = jump_scale * mark[0])
        .jump_compensator(move |_, out| out[0] = compensator)
        .levy(LevySpec::finite_activity(lambda, 1, move |rng, out| {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            out[0] = mark_mean + z;
        })?)
        .chi(0.0)
        .p0(p.p0)
        .horizon(p.horizon)
        .initial(InitialLaw::Gaussian { mean: vec![p.x0_mean], std: p.x0_std })
        .build()
}

/// Parameters of the cubic-interaction preset:
/// `b_j = -x_j^3 + kappa mean_j(mu)`, `sigma = s diag(x)`,
/// `gamma_j = g x_j z` with scalar marks uniform on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct CubicParams {
    pub dim: usize,
    pub kappa: f64,
    pub sigma: f64,
    pub jump_scale: f64,
    pub lambda: f64,
    pub x0_mean: f64,
    pub x0_std: f64,
    pub horizon: f64,
    pub p0: f64,
}

impl Default for CubicParams {
    fn default() -> Self {
        Self {
            dim: 1,
            kappa: 0.5,
            sigma: 0.25,
            jump_scale: 0.1,
            lambda: 1.0,
            x0_mean: 0.0,
            x0_std: 1.0,
            horizon: 1.0,
            p0: 6.0,
        }
    }
}

/// Super-linear model with `chi = 4`. Extends coordinatewise to any `dim`.
pub fn cubic_interaction(p: &CubicParams) -> Result<ModelSpec, ModelError> {
    let CubicParams { dim, kappa, sigma, jump_scale, lambda, .. } = *p;
    if dim == 0 {
        return Err(ModelError::InvalidParameter("cubic preset needs dim >= 1".into()));
    }
    ModelSpec::builder(dim, dim)
        .drift(move |args, out| {
            let mean = args.measure.mean();
            for j in 0..dim {
                out[j] = -args.x[j].powi(3) + kappa * mean[j];
            }
        })
        .diffusion(move |args, out| {
            out.fill(0.0);
            for j in 0..dim {
                out[j * dim + j] = sigma * args.x[j];
            }
        })
        .jump(move |args, mark, out| {
            for j in 0..dim {
                out[j] = jump_scale * args.x[j] * mark[0];
            }
        })
        // marks are centred, so the compensator vanishes identically
        .jump_compensator(|_, out| out.fill(0.0))
        .levy(LevySpec::finite_activity(lambda, 1, |rng, out| {
            out[0] = rng.random_range(-1.0..1.0);
        })?)
        .chi(4.0)
        .p0(p.p0)
        .horizon(p.horizon)
        .initial(InitialLaw::Gaussian { mean: vec![p.x0_mean; dim], std: p.x0_std })
        .build()
}

/// Parameters of the two-regime switching preset. Regime `i` uses
/// `b = -scale_i x^3 + kappa_i mean(mu)`, `sigma_i x` diffusion and
/// `g_i x z` jumps; the shared chain switches symmetrically at `switch_rate`.
#[derive(Debug, Clone)]
pub struct SwitchingCubicParams {
    pub drift_scale: [f64; 2],
    pub kappa: [f64; 2],
    pub sigma: [f64; 2],
    pub jump_scale: [f64; 2],
    pub lambda: f64,
    pub switch_rate: f64,
    pub x0_mean: f64,
    pub x0_std: f64,
    pub horizon: f64,
    pub p0: f64,
}

impl Default for SwitchingCubicParams {
    fn default() -> Self {
        Self {
            drift_scale: [1.0, 2.0],
            kappa: [0.5, 0.25],
            sigma: [0.25, 0.4],
            jump_scale: [0.1, 0.05],
            lambda: 1.0,
            switch_rate: 1.0,
            x0_mean: 0.0,
            x0_std: 1.0,
            horizon: 1.0,
            p0: 6.0,
        }
    }
}

/// Scalar cubic model whose constants depend on the chain regime.
pub fn switching_cubic(
    p: &SwitchingCubicParams,
) -> Result<(ModelSpec, ChainSpec), ModelError> {
    let SwitchingCubicParams { drift_scale, kappa, sigma, jump_scale, lambda, .. } = *p;
    let model = ModelSpec::builder(1, 1)
        .drift(move |args, out| {
            let r = args.regime;
            out[0] = -drift_scale[r] * args.x[0].powi(3) + kappa[r] * args.measure.mean()[0];
        })
        .diffusion(move |args, out| out[0] = sigma[args.regime] * args.x[0])
        .jump(move |args, mark, out| out[0] = jump_scale[args.regime] * args.x[0] * mark[0])
        .jump_compensator(|_, out| out.fill(0.0))
        .levy(LevySpec::finite_activity(lambda, 1, |rng, out| {
            out[0] = rng.random_range(-1.0..1.0);
        })?)
        .chi(4.0)
        .p0(p.p0)
        .horizon(p.horizon)
        .initial(InitialLaw::Gaussian { mean: vec![p.x0_mean], std: p.x0_std })
        .regimes(2)
        .build()?;
    let r = p.switch_rate;
    let chain = ChainSpec::new(2, vec![-r, r, r, -r], 0)
        .map_err(|e| ModelError::InvalidParameter(format!("switching chain: {e}")))?;
    Ok((model, chain))
}

/// Parameters of the delayed cubic preset:
/// `f = -x^3 + kappa mean(mu) + lag_feedback y_lag + lag_kappa mean(mu_lag)`.
#[derive(Debug, Clone)]
pub struct DelayCubicParams {
    pub kappa: f64,
    pub sigma: f64,
    pub jump_scale: f64,
    pub lambda: f64,
    pub lag_feedback: f64,
    pub lag_kappa: f64,
    pub tau: f64,
    /// Constant value of the initial segment on `[-tau, 0)`.
    pub segment_value: f64,
    pub x0_mean: f64,
    pub x0_std: f64,
    pub horizon: f64,
    pub p0: f64,
}

impl Default for DelayCubicParams {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            sigma: 0.25,
            jump_scale: 0.1,
            lambda: 1.0,
            lag_feedback: 0.25,
            lag_kappa: 0.25,
            tau: 0.5,
            segment_value: 0.5,
            x0_mean: 0.5,
            x0_std: 0.2,
            horizon: 1.0,
            p0: 6.0,
        }
    }
}

/// Scalar cubic model with a fixed lag; tamed with the delay denominator.
pub fn delay_cubic(p: &DelayCubicParams) -> Result<ModelSpec, ModelError> {
    let DelayCubicParams { kappa, sigma, jump_scale, lambda, lag_feedback, lag_kappa, .. } = *p;
    let segment_value = p.segment_value;
    ModelSpec::builder(1, 1)
        .drift(move |args, out| {
            let lag = args.delayed.expect("delay model evaluated without lagged state");
            out[0] = -args.x[0].powi(3)
                + kappa * args.measure.mean()[0]
                + lag_feedback * lag.x[0]
                + lag_kappa * lag.measure.mean()[0];
        })
        .diffusion(move |args, out| out[0] = sigma * args.x[0])
        .jump(move |args, mark, out| out[0] = jump_scale * args.x[0] * mark[0])
        .jump_compensator(|_, out| out.fill(0.0))
        .levy(LevySpec::finite_activity(lambda, 1, |rng, out| {
            out[0] = rng.random_range(-1.0..1.0);
        })?)
        .chi(4.0)
        .p0(p.p0)
        .horizon(p.horizon)
        .initial(InitialLaw::Gaussian { mean: vec![p.x0_mean], std: p.x0_std })
        .delay(p.tau, move |_, out| out[0] = segment_value)
        .build()
}

/// Parameters of the pure-jump preset: `gamma = g x z` with centred uniform
/// marks, `b = sigma = 0`.
#[derive(Debug, Clone)]
pub struct PureJumpParams {
    pub jump_scale: f64,
    pub lambda: f64,
    /// Marks are uniform on `[-mark_half_width, mark_half_width]`.
    pub mark_half_width: f64,
    pub x0: f64,
    pub horizon: f64,
    pub p0: f64,
}

impl Default for PureJumpParams {
    fn default() -> Self {
        Self {
            jump_scale: 1.0,
            lambda: 2.0,
            mark_half_width: 0.4,
            x0: 1.0,
            horizon: 1.0,
            p0: 6.0,
        }
    }
}

/// Compensated pure-jump model: the state is a martingale, so the ensemble
/// mean is conserved in expectation at every grid time.
pub fn pure_jump_linear(p: &PureJumpParams) -> Result<ModelSpec, ModelError> {
    let PureJumpParams { jump_scale, lambda, mark_half_width, .. } = *p;
    ModelSpec::builder(1, 1)
        .jump(move |args, mark, out| out[0] = jump_scale * args.x[0] * mark[0])
        .jump_compensator(|_, out| out.fill(0.0))
        .levy(LevySpec::finite_activity(lambda, 1, move |rng, out| {
            out[0] = rng.random_range(-mark_half_width..mark_half_width);
        })?)
        .chi(1.0)
        .p0(p.p0)
        .horizon(p.horizon)
        .initial(InitialLaw::Constant(vec![p.x0]))
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_by_name() {
        for name in [
            "mean_field_ou",
            "cubic_interaction",
            "switching_cubic",
            "delay_cubic",
            "pure_jump_linear",
        ] {
            let bundle = preset(name).unwrap();
            assert_eq!(bundle.chain.is_some(), name == "switching_cubic", "{name}");
            assert_eq!(bundle.model.delay.is_some(), name == "delay_cubic", "{name}");
        }
        assert!(matches!(preset("nope"), Err(ModelError::UnknownPreset { .. })));
    }

    #[test]
    fn taming_bounds_hold_on_presets() {
        use crate::model::{check_taming_bounds, tame, tame_delay, BoundCheckConfig};
        for name in ["mean_field_ou", "cubic_interaction", "switching_cubic", "pure_jump_linear"]
        {
            for n in [16usize, 256] {
                let bundle = preset(name).unwrap();
                let tamed = tame(&bundle.model, n).unwrap();
                let report = check_taming_bounds(&tamed, 2000, &BoundCheckConfig::default());
                assert!(report.pass, "{name} at n = {n}: {report:?}");
            }
        }
        let delay = preset("delay_cubic").unwrap();
        let tamed = tame_delay(&delay.model, 16).unwrap();
        let report = check_taming_bounds(&tamed, 2000, &BoundCheckConfig::default());
        assert!(report.pass, "delay_cubic: {report:?}");
    }
}
