//! Empirical measures, Wasserstein-2 distances and the sup-over-time flow
//! metric.
//!
//! Everything here works with equally weighted atom sets: the particle
//! schemes only ever compare same-size empirical measures (or a Dirac mass
//! at the origin, which is the `N = 1` case). For equal weights the W2
//! optimal transport problem reduces to sorting in one dimension and to a
//! minimum-cost perfect matching in general.

use std::sync::OnceLock;

use rand::Rng;
use thiserror::Error;

use crate::rng::{stream, Domain};
use crate::util::{all_finite, dist2, norm};

/// Seed for sliced-W2 projection directions when the caller does not care.
/// Kept separate from path noise so distance estimates never consume
/// simulation randomness.
pub const DEFAULT_SLICED_SEED: u64 = 0x5715_ced2;

/// Largest atom count accepted by the exact assignment solver (O(N^3)).
pub const ASSIGNMENT_CAP: usize = 512;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("measure must contain at least one atom")]
    Empty,
    #[error("atom data of length {len} is not a multiple of dimension {dim}")]
    RaggedAtoms { len: usize, dim: usize },
    #[error("non-finite atom coordinate")]
    NonFinite,
    #[error("atom counts differ: {left} vs {right}")]
    AtomCountMismatch { left: usize, right: usize },
    #[error("dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("exact1d requires dimension 1, got {dim}")]
    NotOneDimensional { dim: usize },
    #[error("assignment solver capped at {cap} atoms, got {n}")]
    AssignmentTooLarge { n: usize, cap: usize },
    #[error("sliced estimator needs at least one projection")]
    NoProjections,
    #[error("measure flows are on different grids")]
    GridMismatch,
    #[error("flow needs at least one grid time")]
    EmptyFlow,
    #[error("moment order must be >= 1, got {p}")]
    BadMomentOrder { p: f64 },
}

/// `N` equally weighted atoms in `R^d`.
///
/// Immutable after construction; derived statistics (mean, distance to the
/// Dirac mass at zero) are cached on first use, which keeps coefficient
/// evaluations that only need `mean(mu)` at O(1) per particle.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    dim: usize,
    atoms: Vec<f64>,
    mean: OnceLock<Vec<f64>>,
    w2_dirac0: OnceLock<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure from flat row-major atom data (`len = N * dim`).
    pub fn new(dim: usize, atoms: Vec<f64>) -> Result<Self, MeasureError> {
        if dim == 0 || atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if atoms.len() % dim != 0 {
            return Err(MeasureError::RaggedAtoms { len: atoms.len(), dim });
        }
        if !all_finite(&atoms) {
            return Err(MeasureError::NonFinite);
        }
        Ok(Self { dim, atoms, mean: OnceLock::new(), w2_dirac0: OnceLock::new() })
    }

    /// Single atom at `point`.
    pub fn dirac(point: &[f64]) -> Self {
        Self::new(point.len(), point.to_vec()).expect("dirac point must be finite and non-empty")
    }

    /// The Dirac mass at the origin of `R^dim`.
    pub fn dirac0(dim: usize) -> Self {
        Self::dirac(&vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // constructor rejects empty data
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.dim)
    }

    pub fn raw(&self) -> &[f64] {
        &self.atoms
    }

    /// Barycenter `(1/N) sum x^j`, cached.
    pub fn mean(&self) -> &[f64] {
        self.mean.get_or_init(|| {
            let n = self.len() as f64;
            let mut m = vec![0.0; self.dim];
            for atom in self.atoms() {
                for (acc, v) in m.iter_mut().zip(atom) {
                    *acc += v;
                }
            }
            for acc in &mut m {
                *acc /= n;
            }
            m
        })
    }

    /// `W2(mu, delta_0) = sqrt((1/N) sum |x^j|^2)`, cached.
    ///
    /// The coupling with a single atom is forced, so this is exact.
    pub fn w2_to_dirac0(&self) -> f64 {
        *self.w2_dirac0.get_or_init(|| {
            let n = self.len() as f64;
            let ss: f64 = self.atoms.iter().map(|v| v * v).sum();
            (ss / n).sqrt()
        })
    }

    /// Raw p-th absolute moment `(1/N) sum |x^j|^p`.
    pub fn moment(&self, p: f64) -> Result<f64, MeasureError> {
        if p < 1.0 {
            return Err(MeasureError::BadMomentOrder { p });
        }
        let n = self.len() as f64;
        Ok(self.atoms().map(|a| norm(a).powf(p)).sum::<f64>() / n)
    }
}

/// How to evaluate the Wasserstein-2 distance between two empirical measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum W2Method {
    /// Sort both atom lists; exact for `d = 1`.
    Exact1d,
    /// Minimum-cost perfect matching on squared Euclidean costs; exact in any
    /// dimension, capped at [`ASSIGNMENT_CAP`] atoms.
    Assignment,
    /// Root-mean of exact 1d distances over random unit-direction
    /// projections. A distinct, downward-biased estimator — never reported
    /// as the exact W2.
    Sliced { projections: usize, seed: u64 },
}

impl W2Method {
    /// `exact1d` for scalar state, `sliced(64)` otherwise.
    pub fn auto(dim: usize) -> Self {
        if dim == 1 {
            W2Method::Exact1d
        } else {
            W2Method::Sliced { projections: 64, seed: DEFAULT_SLICED_SEED }
        }
    }
}

/// Wasserstein-2 distance between two equal-size empirical measures.
pub fn w2(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, method: W2Method) -> Result<f64, MeasureError> {
    if mu.dim() != nu.dim() {
        return Err(MeasureError::DimensionMismatch { left: mu.dim(), right: nu.dim() });
    }
    if mu.len() != nu.len() {
        return Err(MeasureError::AtomCountMismatch { left: mu.len(), right: nu.len() });
    }
    match method {
        W2Method::Exact1d => {
            if mu.dim() != 1 {
                return Err(MeasureError::NotOneDimensional { dim: mu.dim() });
            }
            Ok(w2_sorted_1d(mu.raw(), nu.raw()))
        }
        W2Method::Assignment => {
            let n = mu.len();
            if n > ASSIGNMENT_CAP {
                return Err(MeasureError::AssignmentTooLarge { n, cap: ASSIGNMENT_CAP });
            }
            let mut cost = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    cost[i * n + j] = dist2(mu.atom(i), nu.atom(j));
                }
            }
            let total = min_cost_assignment(n, &cost);
            Ok((total / n as f64).sqrt())
        }
        W2Method::Sliced { projections, seed } => {
            if projections == 0 {
                return Err(MeasureError::NoProjections);
            }
            let d = mu.dim();
            let mut rng = stream(seed, Domain::Sliced, 0);
            let mut acc = 0.0;
            let mut dir = vec![0.0; d];
            let mut pa = vec![0.0; mu.len()];
            let mut pb = vec![0.0; nu.len()];
            for _ in 0..projections {
                sample_unit_direction(&mut rng, &mut dir);
                for (slot, atom) in pa.iter_mut().zip(mu.atoms()) {
                    *slot = dot(atom, &dir);
                }
                for (slot, atom) in pb.iter_mut().zip(nu.atoms()) {
                    *slot = dot(atom, &dir);
                }
                let d1 = w2_sorted_1d(&pa, &pb);
                acc += d1 * d1;
            }
            Ok((acc / projections as f64).sqrt())
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sample_unit_direction(rng: &mut impl Rng, out: &mut [f64]) {
    loop {
        for slot in out.iter_mut() {
            *slot = rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        let n = norm(out);
        if n > 1e-12 {
            for slot in out.iter_mut() {
                *slot /= n;
            }
            return;
        }
    }
}

/// Exact 1d W2 for equal-weight samples: RMS of sorted differences.
fn w2_sorted_1d(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

/// Minimum total cost of a perfect matching on an `n x n` cost matrix
/// (row-major), via shortest augmenting paths with dual potentials.
fn min_cost_assignment(n: usize, cost: &[f64]) -> f64 {
    // 1-based arrays; p[j] is the row matched to column j, 0 meaning free.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost[(p[j] - 1) * n + (j - 1)]).sum()
}

/// One empirical measure per grid time; an element of the cadlag space
/// `D([0,T]; P_2(R^d))` sampled at grid resolution.
#[derive(Debug, Clone)]
pub struct MeasureFlow {
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureFlow {
    pub fn new(times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self, MeasureError> {
        if times.is_empty() || times.len() != measures.len() {
            return Err(MeasureError::EmptyFlow);
        }
        let n0 = measures[0].len();
        let d0 = measures[0].dim();
        for m in &measures[1..] {
            if m.len() != n0 {
                return Err(MeasureError::AtomCountMismatch { left: n0, right: m.len() });
            }
            if m.dim() != d0 {
                return Err(MeasureError::DimensionMismatch { left: d0, right: m.dim() });
            }
        }
        Ok(Self { times, measures })
    }

    /// Constant-in-time flow holding `atoms` copies of one point at every
    /// grid time (the fixed-point solver starts from this).
    pub fn constant(times: Vec<f64>, point: &[f64], atoms: usize) -> Result<Self, MeasureError> {
        let data: Vec<f64> = point.iter().copied().cycle().take(point.len() * atoms).collect();
        let m = EmpiricalMeasure::new(point.len(), data)?;
        let measures = vec![m; times.len()];
        Self::new(times, measures)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn measure_at(&self, idx: usize) -> &EmpiricalMeasure {
        &self.measures[idx]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    /// `rho_T(f, g) = max over grid times of W2(f_t, g_t)`.
    pub fn flow_distance(&self, other: &MeasureFlow, method: W2Method) -> Result<f64, MeasureError> {
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| a != b)
        {
            return Err(MeasureError::GridMismatch);
        }
        let mut best = 0.0f64;
        for (f, g) in self.measures.iter().zip(&other.measures) {
            best = best.max(w2(f, g, method)?);
        }
        Ok(best)
    }
}

/// Free-function form of [`EmpiricalMeasure::w2_to_dirac0`].
pub fn w2_to_dirac0(mu: &EmpiricalMeasure) -> f64 {
    mu.w2_to_dirac0()
}

/// Free-function form of [`EmpiricalMeasure::moment`].
pub fn moment(mu: &EmpiricalMeasure, p: f64) -> Result<f64, MeasureError> {
    mu.moment(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meas(dim: usize, atoms: &[f64]) -> EmpiricalMeasure {
        EmpiricalMeasure::new(dim, atoms.to_vec()).unwrap()
    }

    /// Brute-force exact W2 by enumerating all permutations (oracle).
    pub(crate) fn w2_brute_force(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) -> f64 {
        fn permute(rest: &mut Vec<usize>, chosen: &mut Vec<usize>, best: &mut f64, mu: &EmpiricalMeasure, nu: &EmpiricalMeasure) {
            if rest.is_empty() {
                let cost: f64 = chosen
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| dist2(mu.atom(i), nu.atom(j)))
                    .sum();
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            for k in 0..rest.len() {
                let j = rest.remove(k);
                chosen.push(j);
                permute(rest, chosen, best, mu, nu);
                chosen.pop();
                rest.insert(k, j);
            }
        }
        let n = mu.len();
        let mut best = f64::INFINITY;
        permute(&mut (0..n).collect(), &mut Vec::new(), &mut best, mu, nu);
        (best / n as f64).sqrt()
    }

    #[test]
    fn dirac0_distance_trivial_cases() {
        assert_eq!(meas(1, &[0.0]).w2_to_dirac0(), 0.0);
        assert_eq!(meas(1, &[1.0, -1.0]).w2_to_dirac0(), 1.0);
        assert_eq!(meas(2, &[3.0, 4.0]).w2_to_dirac0(), 5.0);
    }

    #[test]
    fn moments() {
        assert_eq!(meas(1, &[0.0]).moment(2.0).unwrap(), 0.0);
        assert!((meas(1, &[2.0]).moment(3.0).unwrap() - 8.0).abs() < 1e-12);
        // hand sum: (1 + 9) / 2
        assert!((meas(1, &[1.0, 3.0]).moment(2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(meas(1, &[1.0]).moment(0.5).is_err());
    }

    #[test]
    fn w2_identity_for_all_methods() {
        let mu = meas(2, &[0.5, -1.0, 2.0, 0.25, -0.75, 1.5]);
        for method in [
            W2Method::Assignment,
            W2Method::Sliced { projections: 16, seed: DEFAULT_SLICED_SEED },
        ] {
            assert!(w2(&mu, &mu, method).unwrap() < 1e-12);
        }
        let one_d = meas(1, &[0.3, -0.2, 0.9]);
        assert!(w2(&one_d, &one_d, W2Method::Exact1d).unwrap() < 1e-12);
    }

    #[test]
    fn w2_two_atom_example() {
        // brute force over the two couplings of {0,2} vs {1,3}: the monotone
        // matching gives mean squared cost 1, the crossed one 5.
        let mu = meas(1, &[0.0, 2.0]);
        let nu = meas(1, &[1.0, 3.0]);
        let exact = w2(&mu, &nu, W2Method::Exact1d).unwrap();
        assert!((exact - 1.0).abs() < 1e-12);
        assert!((w2_brute_force(&mu, &nu) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force_small_instances() {
        let mut rng = stream(11, Domain::Sliced, 99);
        for trial in 0..40 {
            let dim = 1 + trial % 3;
            let n = 2 + trial % 5;
            let gen = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..n * dim).map(|_| rng.random_range(-2.0..2.0)).collect()
            };
            let mu = meas(dim, &gen(&mut rng));
            let nu = meas(dim, &gen(&mut rng));
            let exact = w2(&mu, &nu, W2Method::Assignment).unwrap();
            let brute = w2_brute_force(&mu, &nu);
            assert!(
                (exact - brute).abs() < 1e-12,
                "assignment {exact} vs brute force {brute} (dim {dim}, n {n})"
            );
        }
    }

    #[test]
    fn sliced_never_exceeds_exact() {
        // projections contract distances, so the sliced estimate is a lower
        // bound up to nothing at all: check the deterministic inequality.
        let mut rng = stream(12, Domain::Sliced, 100);
        for _ in 0..20 {
            let n = 6;
            let gen = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..n * 2).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            let mu = meas(2, &gen(&mut rng));
            let nu = meas(2, &gen(&mut rng));
            let exact = w2(&mu, &nu, W2Method::Assignment).unwrap();
            let sliced = w2(&mu, &nu, W2Method::Sliced { projections: 32, seed: 7 }).unwrap();
            assert!(sliced <= exact + 1e-12, "sliced {sliced} > exact {exact}");
        }
    }

    #[test]
    fn dirac0_equals_assignment_to_zero_atoms() {
        let mu = meas(2, &[0.5, -1.0, 2.0, 0.25]);
        let zeros = meas(2, &[0.0, 0.0, 0.0, 0.0]);
        let via_assignment = w2(&mu, &zeros, W2Method::Assignment).unwrap();
        assert!((mu.w2_to_dirac0() - via_assignment).abs() < 1e-12);
    }

    #[test]
    fn method_preconditions() {
        let mu = meas(2, &[0.0, 0.0]);
        let nu = meas(2, &[1.0, 1.0]);
        assert!(matches!(
            w2(&mu, &nu, W2Method::Exact1d),
            Err(MeasureError::NotOneDimensional { .. })
        ));
        let a = meas(1, &[0.0, 1.0]);
        let b = meas(1, &[0.0]);
        assert!(matches!(
            w2(&a, &b, W2Method::Exact1d),
            Err(MeasureError::AtomCountMismatch { .. })
        ));
    }

    #[test]
    fn flow_distance_definition() {
        let times = vec![0.0, 0.5, 1.0];
        let f = MeasureFlow::new(
            times.clone(),
            vec![meas(1, &[0.0]), meas(1, &[0.0]), meas(1, &[0.0])],
        )
        .unwrap();
        assert_eq!(f.flow_distance(&f, W2Method::Exact1d).unwrap(), 0.0);

        // shift a single time slice by h in a one-atom flow: distance = h
        let g = MeasureFlow::new(
            times.clone(),
            vec![meas(1, &[0.0]), meas(1, &[0.75]), meas(1, &[0.0])],
        )
        .unwrap();
        assert!((f.flow_distance(&g, W2Method::Exact1d).unwrap() - 0.75).abs() < 1e-12);

        // flow distance dominates each per-time distance
        for (fm, gm) in f.measures().iter().zip(g.measures()) {
            let per_time = w2(fm, gm, W2Method::Exact1d).unwrap();
            assert!(f.flow_distance(&g, W2Method::Exact1d).unwrap() >= per_time - 1e-15);
        }

        let other_grid = MeasureFlow::new(vec![0.0, 1.0], vec![meas(1, &[0.0]), meas(1, &[0.0])]).unwrap();
        assert!(matches!(
            f.flow_distance(&other_grid, W2Method::Exact1d),
            Err(MeasureError::GridMismatch)
        ));
    }

    #[test]
    fn metric_axioms_on_sampled_triples() {
        let mut rng = stream(21, Domain::Sliced, 3);
        for _ in 0..25 {
            let n = 4;
            let dim = 2;
            let gen = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                (0..n * dim).map(|_| rng.random_range(-3.0..3.0)).collect()
            };
            let a = meas(dim, &gen(&mut rng));
            let b = meas(dim, &gen(&mut rng));
            let c = meas(dim, &gen(&mut rng));
            let ab = w2(&a, &b, W2Method::Assignment).unwrap();
            let ba = w2(&b, &a, W2Method::Assignment).unwrap();
            let bc = w2(&b, &c, W2Method::Assignment).unwrap();
            let ac = w2(&a, &c, W2Method::Assignment).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!(ac <= ab + bc + 1e-12);
        }
    }
}
