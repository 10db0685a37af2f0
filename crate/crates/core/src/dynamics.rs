//! Unitary evolution of the joint state.
//!
//! `dω/dt = −i([H_S ⊗ I, ω] + [H_C, ω] + [I ⊗ H_M, ω])`. The exact path
//! conjugates by `exp(−iHt)`; the stepped path integrates the three
//! commutators separately with classical Runge–Kutta and exists as an
//! independent check of the exact one.

use std::io::{self, Write};

use crate::csv::{fmt_f64, push_row};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, DensityTolerances, HermitianOperator, SpectralDecomposition, UnitaryPropagator, C64};
use crate::model::{prepare_initial, BipartiteModel, Preparation};

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

/// The three commutator terms, precomputed for repeated evaluation.
struct ComponentForm {
    system: HermitianOperator,
    coupling: HermitianOperator,
    apparatus: HermitianOperator,
}

impl ComponentForm {
    fn new(m: &BipartiteModel) -> Self {
        Self { system: m.system_term(), coupling: m.h_c().clone(), apparatus: m.apparatus_term() }
    }

    fn rhs(&self, w: &ComplexMatrix) -> ComplexMatrix {
        let sum = self.system.matrix().commutator(w) + self.coupling.matrix().commutator(w) + self.apparatus.matrix().commutator(w);
        sum.scale(MINUS_I)
    }
}

fn check_state_dim(m: &BipartiteModel, w: &DensityOperator) -> Result<()> {
    if w.dim() != m.dim() {
        return Err(Error::DimensionMismatch { context: "joint state", expected: m.dim(), found: w.dim() });
    }
    Ok(())
}

/// Right-hand side evaluated term by term as three separate commutators.
pub fn rhs_component_form(m: &BipartiteModel, w: &DensityOperator) -> Result<ComplexMatrix> {
    check_state_dim(m, w)?;
    Ok(ComponentForm::new(m).rhs(w.matrix()))
}

/// Right-hand side as a single commutator with the total Hamiltonian.
pub fn rhs_full_commutator(m: &BipartiteModel, w: &DensityOperator) -> Result<ComplexMatrix> {
    check_state_dim(m, w)?;
    Ok(m.total_hamiltonian().matrix().commutator(w.matrix()).scale(MINUS_I))
}

/// Exact propagation with a cached decomposition of the total Hamiltonian.
#[derive(Clone, Debug)]
pub struct ExactEvolution {
    propagator: UnitaryPropagator,
}

impl ExactEvolution {
    pub fn new(m: &BipartiteModel) -> Self {
        Self { propagator: UnitaryPropagator::new(&m.total_hamiltonian()) }
    }

    pub fn dim(&self) -> usize {
        self.propagator.dim()
    }

    pub fn unitary(&self, t: f64) -> ComplexMatrix {
        self.propagator.at(t)
    }

    /// `U(t)·ω·U(t)†`.
    pub fn evolve(&self, w: &DensityOperator, t: f64) -> Result<DensityOperator> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("evolution time must be finite and non-negative, got {t}")));
        }
        if w.dim() != self.dim() {
            return Err(Error::DimensionMismatch { context: "joint state", expected: self.dim(), found: w.dim() });
        }
        let u = self.propagator.at(t);
        w.derive(&(&u * w.matrix()) * &u.adjoint())
    }

    /// States at each of `times`, which must start at 0 and increase
    /// strictly.
    pub fn trajectory(&self, w0: &DensityOperator, times: &[f64]) -> Result<Trajectory> {
        check_time_grid(times)?;
        let states = times.iter().map(|&t| self.evolve(w0, t)).collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { times: times.to_vec(), states })
    }
}

/// `ω(t) = U ω(0) U†` with `U = exp(−iHt)`.
pub fn evolve_exact(m: &BipartiteModel, w0: &DensityOperator, t: f64) -> Result<DensityOperator> {
    check_state_dim(m, w0)?;
    ExactEvolution::new(m).evolve(w0, t)
}

fn check_time_grid(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::invalid("time grid must start at 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("time grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Joint states sampled at strictly increasing times starting at 0.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl Trajectory {
    /// A single-point trajectory holding the initial state.
    pub fn initial(w0: DensityOperator) -> Self {
        Self { times: vec![0.0], states: vec![w0] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &DensityOperator {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    /// `|tr ω(t_end) − 1|`.
    pub fn terminal_trace_deviation(&self) -> f64 {
        (self.last().matrix().trace() - C64::new(1.0, 0.0)).norm()
    }

    /// `max_t |tr ω(t)² − tr ω(0)²|`.
    pub fn max_purity_drift(&self) -> f64 {
        let p0 = self.states[0].purity();
        self.states.iter().map(|s| (s.purity() - p0).abs()).fold(0.0, f64::max)
    }

    /// CSV with header `time,re_0_0,im_0_0,re_0_1,…`; one row per time
    /// point, entries of `ω` in row-major joint-index order.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map(DensityOperator::dim).unwrap_or(0);
        let mut out = String::new();
        let mut header = vec!["time".to_string()];
        for r in 0..n {
            for c in 0..n {
                header.push(format!("re_{r}_{c}"));
                header.push(format!("im_{r}_{c}"));
            }
        }
        push_row(&mut out, &header);
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut row = Vec::with_capacity(1 + 2 * n * n);
            row.push(fmt_f64(*t));
            for z in s.matrix().to_row_major() {
                row.push(fmt_f64(z.re));
                row.push(fmt_f64(z.im));
            }
            push_row(&mut out, &row);
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Uniform grid `0, h, 2h, …, t_end` with `h = t_end / n` and
/// `n = ⌈t_end / dt⌉` (an exact multiple is honoured despite rounding).
/// The last point is exactly `t_end`.
pub fn step_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_end.is_finite() && dt <= t_end * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("stepping needs 0 < dt ≤ t_end, got dt = {dt}, t_end = {t_end}")));
    }
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio { ratio.round() } else { ratio.ceil() };
    let steps = (steps as usize).max(1);
    let h = t_end / steps as f64;
    Ok((0..=steps).map(|k| if k == steps { t_end } else { k as f64 * h }).collect())
}

/// Fourth-order Runge–Kutta on [`step_grid`]. Every stored state is
/// re-validated with [`DensityTolerances::stepped`]; the first violation
/// aborts with the offending time.
pub fn evolve_stepped(m: &BipartiteModel, w0: &DensityOperator, t_end: f64, dt: f64) -> Result<Trajectory> {
    check_state_dim(m, w0)?;
    let grid = step_grid(t_end, dt)?;
    let steps = grid.len() - 1;
    let h = t_end / steps as f64;

    let form = ComponentForm::new(m);
    let tolerances = DensityTolerances::stepped();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(DensityOperator::with_tolerances(w0.matrix().clone(), tolerances)?);

    let mut w = w0.matrix().clone();
    for &t in &grid[1..] {
        let k1 = form.rhs(&w);
        let k2 = form.rhs(&(&w + &k1.scale_real(h / 2.0)));
        let k3 = form.rhs(&(&w + &k2.scale_real(h / 2.0)));
        let k4 = form.rhs(&(&w + &k3.scale_real(h)));
        let incr = (k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4).scale_real(h / 6.0);
        w = &w + &incr;
        let state =
            DensityOperator::with_tolerances(w.clone(), tolerances).map_err(|e| Error::Integration { time: t, source: Box::new(e) })?;
        times.push(t);
        states.push(state);
    }
    Ok(Trajectory { times, states })
}

/// `max_t ‖ω(t) − ω(0)‖_F` under exact evolution from an eigenbasis
/// product preparation.
pub fn state_constancy_check(m: &BipartiteModel, prep: &Preparation, pointer_basis: &SpectralDecomposition, t_grid: &[f64]) -> Result<f64> {
    if !matches!(prep, Preparation::Eigenbasis { .. }) {
        return Err(Error::invalid("state constancy is defined for eigenbasis preparations"));
    }
    let w0 = prepare_initial(m, prep, pointer_basis)?;
    max_deviation(&ExactEvolution::new(m), &w0, t_grid)
}

/// `max_t ‖ω(t) − ω(0)‖_F` over an arbitrary set of non-negative times.
pub fn max_deviation(evolution: &ExactEvolution, w0: &DensityOperator, t_grid: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in t_grid {
        let w = evolution.evolve(w0, t)?;
        worst = worst.max(w.matrix().frobenius_distance(w0.matrix()));
    }
    Ok(worst)
}

/// `n + 1` evenly spaced points on `[0, horizon]`.
pub fn uniform_grid(horizon: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| if k == n { horizon } else { horizon * k as f64 / n as f64 }).collect()
}
