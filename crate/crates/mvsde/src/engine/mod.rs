//! The tamed Euler interacting-particle stepper.
//!
//! One step advances every particle `i` by
//!
//! ```text
//! x' = x + (b^n - compensator^n)(t_k, x, mu_k) dt
//!        + sigma^n(t_k, x, mu_k) dW^i_k
//!        + sum over events (t, z) in cell k of gamma^n(t_k, x, mu_k, z)
//! ```
//!
//! with every coefficient frozen at the left grid point `t_k = kappa_n(s)`
//! and evaluated against the empirical measure `mu_k` of the pre-step
//! ensemble (a read-only snapshot, so the parallel update has no intra-step
//! races and is bit-identical for every worker count). The compensated jump
//! integral is realized as explicit events minus the closed-form compensator
//! drift.
//!
//! Variants share this single code path:
//! * switching: a chain path sampled once per bundle seed supplies the
//!   regime at `t_k`, shared by all particles;
//! * delay: a ring buffer of past ensembles supplies the lagged state and
//!   lagged measure, and the taming denominator gains the lag term;
//! * frozen measure flow: coefficients read `mu_k` from a supplied flow
//!   instead of the ensemble (the fixed-point solver's inner run).
//!
//! Non-finite updates abort the run with the offending particle and step:
//! taming is the stabilization mechanism, and masking a divergence would
//! hide an assumption violation.

mod ctmc;

pub use ctmc::{sample_ctmc, ChainSpec, CtmcPath};

use std::collections::VecDeque;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::measure::{EmpiricalMeasure, MeasureError, MeasureFlow};
use crate::model::{
    tame, tame_delay, untamed, CoeffArgs, DelayedArgs, ModelError, ModelSpec, TamedModel,
};
use crate::noise::{NoiseBundle, NoiseError, NoiseView};
use crate::rng::{stream, Domain};
use crate::util::all_finite;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("non-finite update for particle {particle} at step {step}: model or assumption violation (not a library bug)")]
    NonFinite { particle: usize, step: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("requested {requested} particles, bundle holds {available}")]
    ParticleCount { requested: usize, available: usize },
    #[error("model/bundle shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid chain specification: {0}")]
    BadChain(String),
    #[error("chain has {chain_states} states but the model understands {model_regimes} regimes")]
    ChainRegimes { chain_states: usize, model_regimes: usize },
    #[error("frozen measure flow has {got} grid points, expected {expected}")]
    FlowGrid { expected: usize, got: usize },
    #[error("delay models with a frozen measure flow are not supported")]
    DelayWithFrozenFlow,
    #[error("trajectory data unavailable: run was not recorded on the grid")]
    NoGridRecord,
    #[error("{0}")]
    Misuse(String),
}

/// Particle ensemble: `particles x dim` values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    data: Vec<f64>,
}

impl Ensemble {
    pub fn zeros(dim: usize, particles: usize) -> Self {
        Self { dim, data: vec![0.0; dim * particles] }
    }

    pub fn from_data(dim: usize, data: Vec<f64>) -> Result<Self, EngineError> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(EngineError::ShapeMismatch(format!(
                "ensemble data of length {} does not split into dimension-{dim} particles",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Particle count.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.dim, self.data.clone()).expect("ensemble states stay finite")
    }
}

/// What the driver keeps from a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Only the terminal ensemble.
    Endpoint,
    /// Empirical measure at every grid time (including `t = 0`).
    Grid,
}

/// Run configuration beyond `(model, n, bundle)`.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions<'a> {
    pub particles: usize,
    pub record: RecordMode,
    /// Switching chain; one path is sampled per bundle seed and shared by
    /// all particles.
    pub chain: Option<&'a ChainSpec>,
    /// Evaluate coefficients against this flow instead of the ensemble.
    pub frozen_flow: Option<&'a MeasureFlow>,
    /// Diagnostic mode: bypass taming to demonstrate divergence.
    pub untamed: bool,
    /// Start from this ensemble instead of sampling the initial law.
    pub initial_override: Option<&'a Ensemble>,
}

impl SimOptions<'_> {
    pub fn new(particles: usize) -> SimOptions<'static> {
        SimOptions {
            particles,
            record: RecordMode::Endpoint,
            chain: None,
            frozen_flow: None,
            untamed: false,
            initial_override: None,
        }
    }
}

/// Samples the i.i.d. initial conditions `x_0^i` from the model's initial
/// law. Particle `i`'s draw is keyed by `(seed, Initial, i)`, so it does not
/// depend on the particle count.
pub fn draw_initials(model: &ModelSpec, seed: u64, particles: usize) -> Ensemble {
    let dim = model.dim();
    let mut data = vec![0.0; dim * particles];
    for (i, slot) in data.chunks_exact_mut(dim).enumerate() {
        let mut rng = stream(seed, Domain::Initial, i as u64);
        model.initial.sample(&mut rng, slot);
    }
    Ensemble { dim, data }
}

struct DelayHistory {
    steps: usize,
    /// Ensemble and its measure at the most recent `steps + 1` grid times.
    entries: VecDeque<(Ensemble, EmpiricalMeasure)>,
}

enum DelayedSource<'b> {
    History { ensemble: &'b Ensemble, measure: &'b EmpiricalMeasure },
    Segment { point: Vec<f64>, measure: EmpiricalMeasure },
}

impl DelayedSource<'_> {
    fn x_for(&self, i: usize) -> &[f64] {
        match self {
            DelayedSource::History { ensemble, .. } => ensemble.particle(i),
            DelayedSource::Segment { point, .. } => point,
        }
    }

    fn measure(&self) -> &EmpiricalMeasure {
        match self {
            DelayedSource::History { measure, .. } => measure,
            DelayedSource::Segment { measure, .. } => measure,
        }
    }
}

struct Scratch {
    drift: Vec<f64>,
    comp: Vec<f64>,
    diff: Vec<f64>,
    jump: Vec<f64>,
    dw: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize, wiener_dim: usize) -> Self {
        Self {
            drift: vec![0.0; dim],
            comp: vec![0.0; dim],
            diff: vec![0.0; dim * wiener_dim],
            jump: vec![0.0; dim],
            dw: vec![0.0; wiener_dim],
        }
    }
}

/// Step-by-step simulation of one interacting ensemble.
pub struct Simulator<'a> {
    tamed: TamedModel,
    view: NoiseView<'a>,
    particles: usize,
    chain_path: Option<CtmcPath>,
    frozen_flow: Option<&'a MeasureFlow>,
    history: Option<DelayHistory>,
    state: Ensemble,
    next: Vec<f64>,
    step_index: usize,
}

impl<'a> Simulator<'a> {
    pub fn new(
        model: &ModelSpec,
        n: usize,
        bundle: &'a NoiseBundle,
        opts: &SimOptions<'a>,
    ) -> Result<Self, EngineError> {
        if opts.particles == 0 || opts.particles > bundle.particle_count() {
            return Err(EngineError::ParticleCount {
                requested: opts.particles,
                available: bundle.particle_count(),
            });
        }
        if model.wiener_dim() != bundle.wiener_dim() {
            return Err(EngineError::ShapeMismatch(format!(
                "model Wiener dimension {} vs bundle {}",
                model.wiener_dim(),
                bundle.wiener_dim()
            )));
        }
        if model.levy.mark_dim() != bundle.mark_dim() {
            return Err(EngineError::ShapeMismatch(format!(
                "model mark dimension {} vs bundle {}",
                model.levy.mark_dim(),
                bundle.mark_dim()
            )));
        }
        if model.horizon != bundle.horizon() {
            return Err(EngineError::ShapeMismatch(format!(
                "model horizon {} vs bundle horizon {}",
                model.horizon,
                bundle.horizon()
            )));
        }
        let view = bundle.view(n)?;

        let tamed = if opts.untamed {
            untamed(model, n)?
        } else if model.delay.is_some() {
            tame_delay(model, n)?
        } else {
            tame(model, n)?
        };

        let chain_path = match opts.chain {
            Some(spec) => {
                if spec.states() > model.regimes {
                    return Err(EngineError::ChainRegimes {
                        chain_states: spec.states(),
                        model_regimes: model.regimes,
                    });
                }
                let mut rng = stream(bundle.seed(), Domain::Chain, 0);
                Some(sample_ctmc(spec, model.horizon, &mut rng))
            }
            None => None,
        };

        if let Some(flow) = opts.frozen_flow {
            if model.delay.is_some() {
                return Err(EngineError::DelayWithFrozenFlow);
            }
            if flow.len() != n + 1 {
                return Err(EngineError::FlowGrid { expected: n + 1, got: flow.len() });
            }
            if flow.dim() != model.dim() {
                return Err(EngineError::ShapeMismatch(format!(
                    "frozen flow dimension {} vs model {}",
                    flow.dim(),
                    model.dim()
                )));
            }
        }

        let state = match opts.initial_override {
            Some(e) => {
                if e.dim() != model.dim() || e.len() != opts.particles {
                    return Err(EngineError::ShapeMismatch(
                        "initial override has the wrong shape".into(),
                    ));
                }
                e.clone()
            }
            None => draw_initials(model, bundle.seed(), opts.particles),
        };
        if !all_finite(state.data()) {
            return Err(EngineError::NonFinite { particle: 0, step: 0 });
        }

        let history = match &model.delay {
            Some(delay) => {
                let steps = (delay.tau * n as f64 / model.horizon).round() as usize;
                let mut entries = VecDeque::with_capacity(steps + 1);
                entries.push_back((state.clone(), state.to_measure()));
                Some(DelayHistory { steps, entries })
            }
            None => None,
        };

        Ok(Self {
            tamed,
            view,
            particles: opts.particles,
            chain_path,
            frozen_flow: opts.frozen_flow,
            history,
            state,
            next: vec![0.0; model.dim() * opts.particles],
            step_index: 0,
        })
    }

    pub fn resolution(&self) -> usize {
        self.view.resolution()
    }

    /// Fine bundle cells per scheme cell.
    pub fn stride(&self) -> usize {
        self.view.stride()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn time(&self) -> f64 {
        if self.step_index == self.resolution() {
            self.tamed.model().horizon
        } else {
            self.view.cell_start(self.step_index)
        }
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.state
    }

    pub fn tamed(&self) -> &TamedModel {
        &self.tamed
    }

    pub fn chain_path(&self) -> Option<&CtmcPath> {
        self.chain_path.as_ref()
    }

    /// Empirical measure of the current ensemble.
    pub fn measure(&self) -> EmpiricalMeasure {
        match &self.history {
            Some(h) => h.entries.back().expect("history is never empty").1.clone(),
            None => self.state.to_measure(),
        }
    }

    /// Positions after consuming the first `fine_count` fine cells of the
    /// current scheme cell, written into `out` (`particles x dim`).
    /// `fine_count = stride()` reproduces exactly what [`Simulator::step`]
    /// applies.
    fn advance_into(&self, fine_count: usize, out: &mut [f64]) -> Result<(), EngineError> {
        let n = self.view.resolution();
        let k = self.step_index;
        if k >= n {
            return Err(EngineError::Misuse(format!(
                "simulation already completed its {n} steps"
            )));
        }
        if fine_count == 0 || fine_count > self.view.stride() {
            return Err(EngineError::Misuse(format!(
                "fine cell count {fine_count} outside 1..={}",
                self.view.stride()
            )));
        }
        let model = self.tamed.model();
        let dim = model.dim();
        let wiener_dim = model.wiener_dim();
        debug_assert_eq!(out.len(), dim * self.particles);

        let t_k = self.view.cell_start(k);
        let fine_dt = model.horizon / self.view.bundle().n_max() as f64;
        let partial_dt = fine_count as f64 * fine_dt;
        let full_cell = fine_count == self.view.stride();
        let jump_limit = if full_cell { None } else { Some(t_k + partial_dt) };

        // pre-step snapshot the coefficients see
        let measure_owned;
        let measure: &EmpiricalMeasure = if let Some(flow) = self.frozen_flow {
            flow.measure_at(k)
        } else if let Some(h) = &self.history {
            &h.entries.back().expect("history is never empty").1
        } else {
            measure_owned = self.state.to_measure();
            &measure_owned
        };

        let regime = self.chain_path.as_ref().map_or(0, |p| p.state_at(t_k));

        let delayed: Option<DelayedSource<'_>> = match (&self.history, &model.delay) {
            (Some(h), Some(delay)) => {
                if h.entries.len() > h.steps {
                    let idx = h.entries.len() - 1 - h.steps;
                    let (ensemble, measure) = &h.entries[idx];
                    Some(DelayedSource::History { ensemble, measure })
                } else {
                    // lagged time is negative: read the initial segment at
                    // kappa_n(t_k - tau) + tau = t_k
                    let mut point = vec![0.0; dim];
                    (delay.segment)(t_k, &mut point);
                    let measure = EmpiricalMeasure::dirac(&point);
                    Some(DelayedSource::Segment { point, measure })
                }
            }
            _ => None,
        };

        let state = &self.state;
        let tamed = &self.tamed;
        let view = &self.view;
        out.par_chunks_mut(dim).enumerate().for_each_init(
            || Scratch::new(dim, wiener_dim),
            |scratch, (i, slot)| {
                let x = state.particle(i);
                let delayed_args = delayed.as_ref().map(|src| DelayedArgs {
                    x: src.x_for(i),
                    measure: src.measure(),
                });
                let args = CoeffArgs { t: t_k, x, measure, regime, delayed: delayed_args };
                let denom = tamed.denominator(x, delayed_args.as_ref().map(|d| d.x));

                let raw = tamed.model();
                raw.drift(&args, &mut scratch.drift);
                raw.jump_compensator(&args, &mut scratch.comp);
                raw.diffusion(&args, &mut scratch.diff);
                view.partial_wiener_increment(i, k, fine_count, &mut scratch.dw);

                for j in 0..dim {
                    let mut acc = (scratch.drift[j] - scratch.comp[j]) * partial_dt;
                    let row = &scratch.diff[j * wiener_dim..(j + 1) * wiener_dim];
                    for (s, dw) in row.iter().zip(&scratch.dw) {
                        acc += s * dw;
                    }
                    slot[j] = acc;
                }
                for (_, mark) in view.jumps_in_cell(i, k, jump_limit) {
                    raw.jump(&args, mark, &mut scratch.jump);
                    for j in 0..dim {
                        slot[j] += scratch.jump[j];
                    }
                }
                for j in 0..dim {
                    slot[j] = x[j] + slot[j] / denom;
                }
            },
        );
        Ok(())
    }

    /// One scheme step. On a non-finite update the state is left at the last
    /// finite ensemble and the offending (lowest-index) particle is reported.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let mut next = std::mem::take(&mut self.next);
        let result = self.advance_into(self.view.stride(), &mut next);
        if let Err(e) = result {
            self.next = next;
            return Err(e);
        }
        if let Some(particle) = first_nonfinite(&next, self.state.dim()) {
            let step = self.step_index;
            self.next = next;
            return Err(EngineError::NonFinite { particle, step });
        }
        std::mem::swap(&mut self.state.data, &mut next);
        self.next = next;
        self.step_index += 1;
        if let Some(h) = &mut self.history {
            let measure = self.state.to_measure();
            h.entries.push_back((self.state.clone(), measure));
            while h.entries.len() > h.steps + 1 {
                h.entries.pop_front();
            }
        }
        Ok(())
    }

    /// Within-cell displacement probe: how far the scheme moves from
    /// `kappa_n(t)` after `fine_count` fine cells, without advancing the
    /// simulation. Writes `particles x dim` displacements.
    pub fn cell_displacement(&self, fine_count: usize, out: &mut Vec<f64>) -> Result<(), EngineError> {
        let dim = self.state.dim();
        out.resize(dim * self.particles, 0.0);
        self.advance_into(fine_count, out)?;
        for (slot, x) in out.iter_mut().zip(self.state.data()) {
            *slot -= x;
        }
        if let Some(particle) = first_nonfinite(out, dim) {
            return Err(EngineError::NonFinite { particle, step: self.step_index });
        }
        Ok(())
    }

    pub fn into_state(self) -> Ensemble {
        self.state
    }
}

fn first_nonfinite(data: &[f64], dim: usize) -> Option<usize> {
    data.chunks_exact(dim).position(|p| !all_finite(p))
}

/// Everything a run hands back.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub resolution: usize,
    pub horizon: f64,
    /// Grid times and measures when recorded with [`RecordMode::Grid`].
    pub flow: Option<MeasureFlow>,
    pub final_state: Ensemble,
    pub chain: Option<CtmcPath>,
}

impl SimOutput {
    /// Per-grid-time empirical `p`-th moments (grid recording only).
    pub fn moment_curve(&self, p: f64) -> Result<Vec<f64>, EngineError> {
        let flow = self.flow.as_ref().ok_or(EngineError::NoGridRecord)?;
        flow.measures()
            .iter()
            .map(|m| m.moment(p).map_err(EngineError::from))
            .collect()
    }

    /// CSV export: `step,time,particle,x_1..x_d[,chain_state]`.
    pub fn write_trajectory_csv(&self, mut w: impl Write) -> io::Result<()> {
        let dim = self.final_state.dim();
        write!(w, "step,time,particle")?;
        for j in 1..=dim {
            write!(w, ",x_{j}")?;
        }
        if self.chain.is_some() {
            write!(w, ",chain_state")?;
        }
        writeln!(w)?;
        let mut write_row = |step: usize, time: f64, particle: usize, x: &[f64]| -> io::Result<()> {
            write!(w, "{step},{time},{particle}")?;
            for v in x {
                write!(w, ",{v}")?;
            }
            if let Some(chain) = &self.chain {
                write!(w, ",{}", chain.state_at(time))?;
            }
            writeln!(w)
        };
        match &self.flow {
            Some(flow) => {
                for (step, (time, measure)) in
                    flow.times().iter().zip(flow.measures()).enumerate()
                {
                    for particle in 0..measure.len() {
                        write_row(step, *time, particle, measure.atom(particle))?;
                    }
                }
            }
            None => {
                for particle in 0..self.final_state.len() {
                    write_row(
                        self.resolution,
                        self.horizon,
                        particle,
                        self.final_state.particle(particle),
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Per-grid-time empirical `p0`-moments of a recorded run.
pub fn moment_tracker(output: &SimOutput, p0: f64) -> Result<Vec<f64>, EngineError> {
    output.moment_curve(p0)
}

/// Core run loop shared by all `simulate*` entry points.
pub fn run_simulation(
    model: &ModelSpec,
    n: usize,
    bundle: &NoiseBundle,
    opts: &SimOptions<'_>,
) -> Result<SimOutput, EngineError> {
    let mut sim = Simulator::new(model, n, bundle, opts)?;
    let record_grid = matches!(opts.record, RecordMode::Grid);
    let mut times = Vec::new();
    let mut measures = Vec::new();
    if record_grid {
        times.push(0.0);
        measures.push(sim.measure());
    }
    for k in 0..n {
        sim.step()?;
        if record_grid {
            let t = if k + 1 == n { model.horizon } else { sim.time() };
            times.push(t);
            measures.push(sim.measure());
        }
    }
    let chain = sim.chain_path().cloned();
    let final_state = sim.into_state();
    let flow = if record_grid { Some(MeasureFlow::new(times, measures)?) } else { None };
    Ok(SimOutput { resolution: n, horizon: model.horizon, flow, final_state, chain })
}

/// Tamed Euler run of the interacting particle system.
pub fn simulate(
    model: &ModelSpec,
    n: usize,
    particles: usize,
    bundle: &NoiseBundle,
    record: RecordMode,
) -> Result<SimOutput, EngineError> {
    let opts = SimOptions { record, ..SimOptions::new(particles) };
    run_simulation(model, n, bundle, &opts)
}

/// Switching run: one chain path (sampled from the bundle seed) drives the
/// regime argument of every particle's coefficients.
pub fn simulate_switching(
    model: &ModelSpec,
    chain: &ChainSpec,
    n: usize,
    particles: usize,
    bundle: &NoiseBundle,
    record: RecordMode,
) -> Result<SimOutput, EngineError> {
    let opts = SimOptions { record, chain: Some(chain), ..SimOptions::new(particles) };
    run_simulation(model, n, bundle, &opts)
}

/// Delay run; the model must carry a delay specification, and the lag must
/// be an integer number of grid cells.
pub fn simulate_delay(
    model: &ModelSpec,
    n: usize,
    particles: usize,
    bundle: &NoiseBundle,
    record: RecordMode,
) -> Result<SimOutput, EngineError> {
    if model.delay.is_none() {
        return Err(EngineError::Model(ModelError::DelayRequired));
    }
    let opts = SimOptions { record, ..SimOptions::new(particles) };
    run_simulation(model, n, bundle, &opts)
}

#[cfg(test)]
mod tests;
