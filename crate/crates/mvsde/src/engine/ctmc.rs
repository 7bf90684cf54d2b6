//! Exact simulation of the switching chain.
//!
//! The chain has generator `Q`: off-diagonal `q_{ij} >= 0` are jump rates,
//! rows sum to zero, and transition probabilities over a short interval are
//! `P(alpha_{t+dt} = j | alpha_t = i) = q_{ij} dt + o(dt)`. Exact sampling
//! holds each state `i` for an `Exp(-q_{ii})` time, then moves to `j != i`
//! with probability `q_{ij} / (-q_{ii})`. A zero row is absorbing.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::EngineError;

/// State space size and generator of the switching chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    states: usize,
    /// Row-major `states x states` generator.
    generator: Vec<f64>,
    initial_state: usize,
}

impl ChainSpec {
    pub fn new(states: usize, generator: Vec<f64>, initial_state: usize) -> Result<Self, EngineError> {
        if states == 0 {
            return Err(EngineError::BadChain("state space must be non-empty".into()));
        }
        if generator.len() != states * states {
            return Err(EngineError::BadChain(format!(
                "generator must be {states} x {states}, got {} entries",
                generator.len()
            )));
        }
        if initial_state >= states {
            return Err(EngineError::BadChain(format!(
                "initial state {initial_state} outside 0..{states}"
            )));
        }
        for i in 0..states {
            let mut row_sum = 0.0;
            let mut scale = 0.0f64;
            for j in 0..states {
                let q = generator[i * states + j];
                if !q.is_finite() {
                    return Err(EngineError::BadChain(format!("non-finite rate at ({i}, {j})")));
                }
                if i != j && q < 0.0 {
                    return Err(EngineError::BadChain(format!(
                        "off-diagonal rate q[{i}][{j}] = {q} must be >= 0"
                    )));
                }
                row_sum += q;
                scale = scale.max(q.abs());
            }
            if row_sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(EngineError::BadChain(format!(
                    "row {i} sums to {row_sum}, generator rows must sum to zero"
                )));
            }
        }
        Ok(Self { states, generator, initial_state })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.generator[from * self.states + to]
    }

    /// Total exit rate of a state (`-q_{ii}`).
    pub fn exit_rate(&self, state: usize) -> f64 {
        -self.rate(state, state)
    }
}

/// Piecewise-constant chain path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmcPath {
    /// Transition instants; `times[0] = 0`.
    times: Vec<f64>,
    /// `states[k]` holds on `[times[k], times[k + 1])`.
    states: Vec<usize>,
    horizon: f64,
}

impl CtmcPath {
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        self.states[idx.saturating_sub(1)]
    }

    pub fn switch_count(&self) -> usize {
        self.states.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `(transition time, new state)` pairs, including the start.
    pub fn segments(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.times.iter().copied().zip(self.states.iter().copied())
    }
}

/// Exact CTMC path sampling via exponential holding times.
pub fn sample_ctmc(chain: &ChainSpec, horizon: f64, rng: &mut impl Rng) -> CtmcPath {
    let mut times = vec![0.0];
    let mut states = vec![chain.initial_state()];
    let mut t = 0.0;
    let mut state = chain.initial_state();
    loop {
        let exit = chain.exit_rate(state);
        if exit <= 0.0 {
            break; // absorbing: holds forever
        }
        let hold = Exp::new(exit).expect("positive exit rate").sample(rng);
        t += hold;
        if t >= horizon {
            break;
        }
        // next state j != state with probability q[state][j] / exit
        let mut u = rng.random_range(0.0..1.0) * exit;
        let mut next = state;
        for j in 0..chain.states() {
            if j == state {
                continue;
            }
            let q = chain.rate(state, j);
            if u < q {
                next = j;
                break;
            }
            u -= q;
        }
        if next == state {
            // numerical guard: cumulative rounding put u past the last rate
            next = (0..chain.states()).rev().find(|&j| j != state && chain.rate(state, j) > 0.0).unwrap_or(state);
            if next == state {
                break;
            }
        }
        state = next;
        times.push(t);
        states.push(state);
    }
    CtmcPath { times, states, horizon }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    #[test]
    fn single_state_is_constant() {
        let chain = ChainSpec::new(1, vec![0.0], 0).unwrap();
        let mut rng = stream(1, Domain::Chain, 0);
        let path = sample_ctmc(&chain, 5.0, &mut rng);
        assert_eq!(path.switch_count(), 0);
        for t in [0.0, 1.7, 4.999] {
            assert_eq!(path.state_at(t), 0);
        }
    }

    #[test]
    fn symmetric_two_state_switch_frequency() {
        // rates (1, 1): expected number of switches on [0, 1] is 1
        let chain = ChainSpec::new(2, vec![-1.0, 1.0, 1.0, -1.0], 0).unwrap();
        let paths = 10_000;
        let mut total = 0usize;
        for i in 0..paths {
            let mut rng = stream(2, Domain::Chain, i);
            total += sample_ctmc(&chain, 1.0, &mut rng).switch_count();
        }
        let mean = total as f64 / paths as f64;
        let se = (1.0f64 / paths as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean switches {mean}, 3 SE = {}", 3.0 * se);
    }

    #[test]
    fn absorbing_state_holds_forever() {
        // state 1 has a zero row: once entered, never left
        let chain = ChainSpec::new(2, vec![-5.0, 5.0, 0.0, 0.0], 0).unwrap();
        for i in 0..100 {
            let mut rng = stream(3, Domain::Chain, i);
            let path = sample_ctmc(&chain, 50.0, &mut rng);
            let entered = path.segments().find(|&(_, s)| s == 1).map(|(t, _)| t);
            if let Some(t_in) = entered {
                for frac in 1..10 {
                    let t = t_in + (50.0 - t_in) * frac as f64 / 10.0;
                    assert_eq!(path.state_at(t), 1);
                }
            }
        }
    }

    #[test]
    fn generator_validation() {
        assert!(ChainSpec::new(2, vec![-1.0, 1.0, 1.0, -0.5], 0).is_err()); // bad row sum
        assert!(ChainSpec::new(2, vec![1.0, -1.0, -1.0, 1.0], 0).is_err()); // negative off-diag
        assert!(ChainSpec::new(2, vec![-1.0, 1.0, 1.0, -1.0], 2).is_err()); // bad initial
        assert!(ChainSpec::new(2, vec![-1.0, 1.0, 0.5, -0.5], 1).is_ok());
    }
}
