//! Pointer readout of the apparatus.
//!
//! Outcomes are indexed by the eigenvectors `|m_λ⟩` of a pointer
//! observable on `M`. Probabilities follow `p_λ = tr(ω · (I ⊗ Π_λ))` and a
//! recorded outcome projects the apparatus factor,
//! `ω ↦ (I ⊗ Π_λ) ω (I ⊗ Π_λ) / p_λ`.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::csv::{fmt_f64, push_row};
use crate::dynamics::ExactEvolution;
use crate::error::{Error, Result};
use crate::linalg::{spectral, tensor, ComplexMatrix, DensityOperator, HermitianOperator, SpectralDecomposition};
use crate::model::{prepare_initial, BipartiteModel, Preparation};
use crate::rng::{trial_rng, SimRng};
use crate::tol;

/// Apparatus observable whose eigenvalues are the raw pointer readings.
#[derive(Clone, Debug)]
pub struct PointerObservable {
    operator: HermitianOperator,
    basis: SpectralDecomposition,
}

impl PointerObservable {
    pub fn new(operator: HermitianOperator) -> Self {
        let basis = spectral(&operator);
        Self { operator, basis }
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.operator
    }

    pub fn basis(&self) -> &SpectralDecomposition {
        &self.basis
    }

    /// Raw readings, one per outcome, ascending.
    pub fn values(&self) -> &[f64] {
        self.basis.eigenvalues()
    }

    /// `Π_λ = |m_λ⟩⟨m_λ|`.
    pub fn projector(&self, lambda: usize) -> ComplexMatrix {
        self.basis.projector(lambda)
    }

    /// `I_S ⊗ Π_λ`.
    pub fn joint_projector(&self, lambda: usize, d_s: usize) -> ComplexMatrix {
        tensor(&ComplexMatrix::identity(d_s), &self.projector(lambda))
    }
}

/// Reading `c_{iλ}` reported for outcome `λ` when system state `i` was
/// prepared.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    table: Vec<Vec<f64>>,
    raw: Vec<f64>,
}

impl Calibration {
    /// `c_{iλ} = values[λ]` for every `i`.
    pub fn from_pointer(pointer: &PointerObservable, d_s: usize) -> Self {
        let raw = pointer.values().to_vec();
        Self { table: vec![raw.clone(); d_s], raw }
    }

    /// Explicit `d_s × d_m` table; unlabelled readings fall back to the
    /// pointer eigenvalues.
    pub fn from_table(table: Vec<Vec<f64>>, pointer: &PointerObservable) -> Result<Self> {
        let d_m = pointer.dim();
        if table.is_empty() {
            return Err(Error::invalid("calibration table has no rows"));
        }
        if let Some(row) = table.iter().find(|r| r.len() != d_m) {
            return Err(Error::DimensionMismatch { context: "calibration row", expected: d_m, found: row.len() });
        }
        if table.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("calibration values must be finite"));
        }
        Ok(Self { table, raw: pointer.values().to_vec() })
    }

    pub fn d_s(&self) -> usize {
        self.table.len()
    }

    pub fn d_m(&self) -> usize {
        self.raw.len()
    }

    /// `c_{iλ}`, or the raw reading for `λ` when `i` is absent.
    pub fn reading(&self, system: Option<usize>, lambda: usize) -> Result<f64> {
        if lambda >= self.d_m() {
            return Err(Error::IndexOutOfRange { what: "pointer", index: lambda, bound: self.d_m() });
        }
        match system {
            Some(i) if i >= self.d_s() => Err(Error::IndexOutOfRange { what: "system", index: i, bound: self.d_s() }),
            Some(i) => Ok(self.table[i][lambda]),
            None => Ok(self.raw[lambda]),
        }
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

fn check_pointer_dims(w: &DensityOperator, pointer: &PointerObservable, d_s: usize, d_m: usize) -> Result<()> {
    if pointer.dim() != d_m {
        return Err(Error::DimensionMismatch { context: "pointer observable", expected: d_m, found: pointer.dim() });
    }
    if w.dim() != d_s * d_m {
        return Err(Error::DimensionMismatch { context: "joint state", expected: d_s * d_m, found: w.dim() });
    }
    Ok(())
}

/// Born weights `p_λ = tr(ω · (I_S ⊗ Π_λ))`.
///
/// Values in `[-ε_pos, 0)` are clipped to zero and the vector is
/// renormalized; anything more negative is an error.
pub fn outcome_distribution(w: &DensityOperator, pointer: &PointerObservable, d_s: usize, d_m: usize) -> Result<Vec<f64>> {
    check_pointer_dims(w, pointer, d_s, d_m)?;
    let m = w.matrix();
    let mut p = Vec::with_capacity(d_m);
    for lambda in 0..d_m {
        let v = pointer.basis().vector(lambda);
        // ⟨m_λ| μ_M |m_λ⟩ with μ_M the apparatus marginal.
        let mut acc = 0.0;
        for i in 0..d_s {
            for a in 0..d_m {
                for b in 0..d_m {
                    acc += (v[a].conj() * m[(i * d_m + a, i * d_m + b)] * v[b]).re;
                }
            }
        }
        p.push(acc);
    }
    normalize_probabilities(p)
}

fn normalize_probabilities(mut p: Vec<f64>) -> Result<Vec<f64>> {
    for (lambda, x) in p.iter_mut().enumerate() {
        if *x < -tol::POSITIVITY || !x.is_finite() {
            return Err(Error::InvalidArgument(format!("outcome {lambda} has probability {x:e}")));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("outcome distribution has zero total weight"));
    }
    for x in &mut p {
        *x /= total;
    }
    Ok(p)
}

/// Inverts the cumulative distribution at `u ∈ [0, 1)`: the first index
/// with `u < Σ_{k≤λ} p_k`. Boundary ties go to the lower index.
pub fn sample_outcome(p: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (lambda, &x) in p.iter().enumerate() {
        cumulative += x;
        if u < cumulative {
            return lambda;
        }
    }
    // Rounding left u above the final cumulative sum.
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// One uniform draw from `rng`, then [`sample_outcome`].
pub fn draw_outcome(p: &[f64], rng: &mut SimRng) -> usize {
    sample_outcome(p, rng.random::<f64>())
}

/// Projects the apparatus onto `|m_λ⟩` and renormalizes.
pub fn collapse_after_outcome(
    w: &DensityOperator,
    pointer: &PointerObservable,
    lambda: usize,
    d_s: usize,
    d_m: usize,
) -> Result<DensityOperator> {
    check_pointer_dims(w, pointer, d_s, d_m)?;
    if lambda >= d_m {
        return Err(Error::IndexOutOfRange { what: "pointer", index: lambda, bound: d_m });
    }
    let proj = pointer.joint_projector(lambda, d_s);
    let projected = &(&proj * w.matrix()) * &proj;
    let probability = projected.trace().re;
    if !(probability > tol::POSITIVITY) {
        return Err(Error::ImpossibleOutcome { lambda, probability });
    }
    w.derive(projected.scale_real(1.0 / probability))
}

/// One pointer reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecordEntry {
    pub trial: u64,
    pub time: f64,
    pub system: Option<usize>,
    pub lambda: usize,
    pub reading: f64,
}

/// Readings in trial order, then time order within a trial.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasurementRecord {
    pub entries: Vec<RecordEntry>,
}

impl MeasurementRecord {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of consecutive readings within a trial whose outcome differs
    /// from the previous one, summed over trials.
    pub fn repeat_changes(&self) -> usize {
        self.entries.windows(2).filter(|w| w[0].trial == w[1].trial && w[0].lambda != w[1].lambda).count()
    }

    /// First reading of every trial.
    pub fn first_readings(&self) -> Vec<RecordEntry> {
        let mut out: Vec<RecordEntry> = Vec::new();
        for e in &self.entries {
            if out.last().is_none_or(|l| l.trial != e.trial) {
                out.push(*e);
            }
        }
        out
    }

    /// CSV with header `trial,time,i,lambda,reading`; `i` is empty when
    /// the preparation carries no system label.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        push_row(&mut out, &["trial", "time", "i", "lambda", "reading"].map(String::from));
        for e in &self.entries {
            push_row(
                &mut out,
                &[
                    e.trial.to_string(),
                    fmt_f64(e.time),
                    e.system.map(|i| i.to_string()).unwrap_or_default(),
                    e.lambda.to_string(),
                    fmt_f64(e.reading),
                ],
            );
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }
}

/// Timing of a repeated readout: first reading at `tau`, then one every
/// `delta_tau`, `repeats` readings in total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepeatSchedule {
    pub tau: f64,
    pub delta_tau: f64,
    pub repeats: usize,
}

impl RepeatSchedule {
    fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.delta_tau > 0.0 && self.tau.is_finite() && self.delta_tau.is_finite()) {
            return Err(Error::invalid("tau and delta_tau must be positive"));
        }
        if self.repeats < 2 {
            return Err(Error::invalid(format!("repeatability needs at least 2 readings, got {}", self.repeats)));
        }
        Ok(())
    }
}

/// Everything a readout experiment needs besides the seed.
#[derive(Clone, Debug)]
pub struct Experiment<'a> {
    pub model: &'a BipartiteModel,
    pub preparation: &'a Preparation,
    pub pointer: &'a PointerObservable,
    pub calibration: &'a Calibration,
}

impl Experiment<'_> {
    fn initial_state(&self) -> Result<DensityOperator> {
        if self.pointer.dim() != self.model.d_m() {
            return Err(Error::DimensionMismatch { context: "pointer observable", expected: self.model.d_m(), found: self.pointer.dim() });
        }
        prepare_initial(self.model, self.preparation, self.pointer.basis())
    }

    fn read(&self, w: &DensityOperator, rng: &mut SimRng) -> Result<(usize, f64)> {
        let (d_s, d_m) = (self.model.d_s(), self.model.d_m());
        let lambda = draw_outcome(&outcome_distribution(w, self.pointer, d_s, d_m)?, rng);
        Ok((lambda, self.calibration.reading(self.preparation.system_label(), lambda)?))
    }

    fn run_trial(
        &self,
        evolution: &ExactEvolution,
        w0: &DensityOperator,
        schedule: &RepeatSchedule,
        seed: u64,
        trial: u64,
    ) -> Result<Vec<RecordEntry>> {
        let (d_s, d_m) = (self.model.d_s(), self.model.d_m());
        let mut rng = trial_rng(seed, trial);
        let mut w = evolution.evolve(w0, schedule.tau)?;
        let mut entries = Vec::with_capacity(schedule.repeats);
        for r in 0..schedule.repeats {
            if r > 0 {
                w = evolution.evolve(&w, schedule.delta_tau)?;
            }
            let (lambda, reading) = self.read(&w, &mut rng)?;
            entries.push(RecordEntry {
                trial,
                time: schedule.tau + r as f64 * schedule.delta_tau,
                system: self.preparation.system_label(),
                lambda,
                reading,
            });
            w = collapse_after_outcome(&w, self.pointer, lambda, d_s, d_m)?;
        }
        Ok(entries)
    }
}

/// Prepare, evolve to `tau`, read and collapse, then `repeats − 1` more
/// times evolve by `delta_tau`, read and collapse. Recorded as trial 0.
pub fn repeatability_protocol(exp: &Experiment<'_>, schedule: &RepeatSchedule, seed: u64) -> Result<MeasurementRecord> {
    repeated_trials(exp, schedule, 1, seed)
}

/// `n_trials` independent runs of [`repeatability_protocol`]; trial `k`
/// draws from the stream derived from `(seed, k)`.
pub fn repeated_trials(exp: &Experiment<'_>, schedule: &RepeatSchedule, n_trials: usize, seed: u64) -> Result<MeasurementRecord> {
    schedule.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    let w0 = exp.initial_state()?;
    let evolution = ExactEvolution::new(exp.model);
    let per_trial = (0..n_trials as u64)
        .into_par_iter()
        .map(|k| exp.run_trial(&evolution, &w0, schedule, seed, k).map_err(|e| Error::Trial { trial: k, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementRecord { entries: per_trial.into_iter().flatten().collect() })
}

/// Outcome weights and the calibrated mean reading
/// `σ_i = Σ_λ p_λ c_{iλ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointerStatistics {
    pub p: Vec<f64>,
    pub sigma: f64,
    pub system: Option<usize>,
}

/// σ from a probability vector.
pub fn aggregate_sigma(p: &[f64], cal: &Calibration, system: Option<usize>) -> Result<PointerStatistics> {
    if p.len() != cal.d_m() {
        return Err(Error::DimensionMismatch { context: "distribution length", expected: cal.d_m(), found: p.len() });
    }
    if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > tol::NORMALIZATION {
        return Err(Error::invalid("not a probability distribution"));
    }
    let mut sigma = 0.0;
    for (lambda, &x) in p.iter().enumerate() {
        sigma += x * cal.reading(system, lambda)?;
    }
    Ok(PointerStatistics { p: p.to_vec(), sigma, system })
}

/// σ̂ from observed outcome frequencies.
pub fn aggregate_sigma_empirical(entries: &[RecordEntry], cal: &Calibration, system: Option<usize>) -> Result<PointerStatistics> {
    if entries.is_empty() {
        return Err(Error::invalid("empirical statistics need at least one reading"));
    }
    let mut counts = vec![0usize; cal.d_m()];
    for e in entries {
        if e.lambda >= counts.len() {
            return Err(Error::IndexOutOfRange { what: "pointer", index: e.lambda, bound: counts.len() });
        }
        counts[e.lambda] += 1;
    }
    let n = entries.len() as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut sigma = 0.0;
    for (lambda, &x) in p.iter().enumerate() {
        sigma += x * cal.reading(system, lambda)?;
    }
    Ok(PointerStatistics { p, sigma, system })
}

/// Readings of independent prepare → evolve → read trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Dispersion {
    pub entries: Vec<RecordEntry>,
    /// Population variance of the readings.
    pub variance: f64,
}

impl Dispersion {
    /// Fewer than two trials: the variance is 0 by convention.
    pub fn is_degenerate(&self) -> bool {
        self.entries.len() < 2
    }

    pub fn readings(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.reading).collect()
    }
}

/// Population variance, computed on readings shifted by the first one so
/// identical readings give exactly zero.
pub fn population_variance(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else { return 0.0 };
    let n = xs.len() as f64;
    let mean = xs.iter().map(|x| x - x0).sum::<f64>() / n;
    xs.iter().map(|x| (x - x0 - mean).powi(2)).sum::<f64>() / n
}

/// `n_trials` independent single readings at `tau`. Trial `k` uses the
/// same random stream as trial `k` of [`repeated_trials`], so its reading
/// equals that trial's first reading.
pub fn dispersion_experiment(exp: &Experiment<'_>, tau: f64, n_trials: usize, seed: u64) -> Result<Dispersion> {
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau must be finite and non-negative"));
    }
    let w0 = exp.initial_state()?;
    let evolution = ExactEvolution::new(exp.model);
    let w = evolution.evolve(&w0, tau)?;
    let (d_s, d_m) = (exp.model.d_s(), exp.model.d_m());
    let p = outcome_distribution(&w, exp.pointer, d_s, d_m)?;
    let system = exp.preparation.system_label();
    let entries = (0..n_trials as u64)
        .map(|k| {
            let lambda = draw_outcome(&p, &mut trial_rng(seed, k));
            Ok(RecordEntry { trial: k, time: tau, system, lambda, reading: exp.calibration.reading(system, lambda)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let readings: Vec<f64> = entries.iter().map(|e| e.reading).collect();
    Ok(Dispersion { variance: population_variance(&readings), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::model::{random_density, random_model, ModelFamily};
    use crate::rng::model_rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn sz_pointer() -> PointerObservable {
        PointerObservable::new(HermitianOperator::pauli_z())
    }

    /// `(|0⟩|m₀⟩ + |1⟩|m₁⟩)/√2` with `m` the σz pointer basis (m₀ = |1⟩).
    fn entangled() -> DensityOperator {
        let s = FRAC_1_SQRT_2;
        let z = C64::new(0.0, 0.0);
        DensityOperator::pure(&[z, C64::new(s, 0.0), C64::new(s, 0.0), z]).unwrap()
    }

    #[test]
    fn projectors_are_complete_and_orthogonal() {
        for seed in 0..5 {
            let op = crate::model::random_hermitian(3, &mut model_rng(seed));
            let ptr = PointerObservable::new(op);
            let mut sum = ComplexMatrix::zeros(6, 6);
            for l in 0..3 {
                let p = ptr.projector(l);
                assert!((&p * &p).approx_eq(&p, 1e-12));
                for k in 0..l {
                    assert!((&p * &ptr.projector(k)).frobenius_norm() < 1e-12);
                }
                sum = sum + ptr.joint_projector(l, 2);
            }
            assert!(sum.approx_eq(&ComplexMatrix::identity(6), 1e-8));
        }
    }

    #[test]
    fn distribution_examples() {
        let ptr = sz_pointer();
        let rho = random_density(2, &mut model_rng(0));
        let m0 = DensityOperator::new(ptr.projector(0)).unwrap();
        let p = outcome_distribution(&rho.tensor(&m0).unwrap(), &ptr, 2, 2).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] == 0.0);

        let ptr3 = PointerObservable::new(HermitianOperator::from_real_diagonal(&[0.0, 1.0, 2.0]));
        let p = outcome_distribution(&rho.tensor(&DensityOperator::maximally_mixed(3)).unwrap(), &ptr3, 2, 3).unwrap();
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));

        let p = outcome_distribution(&entangled(), &ptr, 2, 2).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        assert!(outcome_distribution(&entangled(), &ptr, 4, 1).is_err());
    }

    #[test]
    fn clipping_of_tiny_negative_weights() {
        let p = normalize_probabilities(vec![1.0 + 5e-10, -5e-10]).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        assert!(normalize_probabilities(vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn cdf_inversion() {
        assert_eq!(sample_outcome(&[1.0, 0.0], 0.0), 0);
        assert_eq!(sample_outcome(&[1.0, 0.0], 0.999_999), 0);
        assert_eq!(sample_outcome(&[0.5, 0.5], 0.25), 0);
        assert_eq!(sample_outcome(&[0.5, 0.5], 0.75), 1);
        // Boundary goes to the upper bin since u < cumulative is strict.
        assert_eq!(sample_outcome(&[0.5, 0.5], 0.5), 1);
        assert_eq!(sample_outcome(&[0.0, 1.0], 0.0), 1);
        assert_eq!(sample_outcome(&[0.3, 0.3, 0.0], 0.9999), 1);
    }

    #[test]
    fn sampling_frequencies_within_three_sigma() {
        let p = [0.3, 0.7];
        let n = 100_000;
        let mut rng = trial_rng(2024, 0);
        let ones = (0..n).filter(|_| draw_outcome(&p, &mut rng) == 1).count();
        let freq = ones as f64 / n as f64;
        let band = 3.0 * (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((freq - 0.7).abs() <= band, "{freq}");
    }

    #[test]
    fn collapse_examples() {
        let ptr = sz_pointer();
        let rho = random_density(2, &mut model_rng(1));
        let w = rho.tensor(&DensityOperator::new(ptr.projector(0)).unwrap()).unwrap();
        let after = collapse_after_outcome(&w, &ptr, 0, 2, 2).unwrap();
        assert!(after.matrix().approx_eq(w.matrix(), 1e-14));

        let after = collapse_after_outcome(&entangled(), &ptr, 0, 2, 2).unwrap();
        // |0⟩⟨0| ⊗ |m₀⟩⟨m₀| with m₀ = |1⟩ is the joint basis state 1.
        let want = ComplexMatrix::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]);
        assert!(after.matrix().approx_eq(&want, 1e-14));
        assert!((after.matrix().trace().re - 1.0).abs() < 1e-14);

        match collapse_after_outcome(&w, &ptr, 1, 2, 2) {
            Err(Error::ImpossibleOutcome { lambda: 1, .. }) => {}
            other => panic!("expected impossible outcome, got {other:?}"),
        }
    }

    #[test]
    fn sigma_examples() {
        let ptr = sz_pointer();
        let cal = Calibration::from_table(vec![vec![1.0, -1.0]], &ptr).unwrap();
        assert_eq!(aggregate_sigma(&[0.5, 0.5], &cal, Some(0)).unwrap().sigma, 0.0);
        let cal = Calibration::from_table(vec![vec![2.5, -4.0]], &ptr).unwrap();
        assert_eq!(aggregate_sigma(&[1.0, 0.0], &cal, Some(0)).unwrap().sigma, 2.5);
        assert!(aggregate_sigma(&[0.5, 0.6], &cal, Some(0)).is_err());
        assert!(aggregate_sigma_empirical(&[], &cal, Some(0)).is_err());
        // Absent system label reads the raw eigenvalues of σz: (−1, +1).
        assert_eq!(aggregate_sigma(&[0.25, 0.75], &cal, None).unwrap().sigma, 0.5);
    }

    #[test]
    fn empirical_sigma_matches_closed_form() {
        let ptr = sz_pointer();
        let cal = Calibration::from_table(vec![vec![2.0, -1.0]], &ptr).unwrap();
        let p = [0.3, 0.7];
        let n = 100_000u64;
        let entries: Vec<RecordEntry> = (0..n)
            .map(|k| {
                let lambda = draw_outcome(&p, &mut trial_rng(99, k));
                RecordEntry { trial: k, time: 0.0, system: Some(0), lambda, reading: 0.0 }
            })
            .collect();
        let analytic = aggregate_sigma(&p, &cal, Some(0)).unwrap().sigma;
        assert!((analytic - (-0.1)).abs() < 1e-15);
        let empirical = aggregate_sigma_empirical(&entries, &cal, Some(0)).unwrap().sigma;
        let std = (0.3f64 * 4.0 + 0.7 - 0.01).sqrt();
        assert!((empirical - analytic).abs() <= 3.0 * std / (n as f64).sqrt());
    }

    #[test]
    fn variance_examples() {
        assert_eq!(population_variance(&[0.1; 1000]), 0.0);
        assert_eq!(population_variance(&[1.0, -1.0]), 1.0);
        assert_eq!(population_variance(&[3.0]), 0.0);
    }

    fn qnd_experiment(seed: u64) -> (BipartiteModel, PointerObservable) {
        let m = random_model(2, 3, ModelFamily::Qnd, seed).unwrap();
        let ptr = PointerObservable::new(m.h_m().clone());
        (m, ptr)
    }

    #[test]
    fn repeatability_under_qnd() {
        let schedule = RepeatSchedule { tau: 0.8, delta_tau: 1.3, repeats: 5 };
        for seed in 0..30 {
            let (m, ptr) = qnd_experiment(seed);
            let cal = Calibration::from_pointer(&ptr, 2);
            let prep = Preparation::Eigenbasis { system: 1, apparatus: (seed % 3) as usize };
            let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
            let rec = repeated_trials(&exp, &schedule, 10, seed).unwrap();
            assert_eq!(rec.len(), 50);
            assert_eq!(rec.repeat_changes(), 0);
            assert!(rec.entries.iter().all(|e| e.lambda == (seed % 3) as usize));
        }
    }

    #[test]
    fn repeatability_changes_under_violation() {
        let schedule = RepeatSchedule { tau: 1.0, delta_tau: 1.0, repeats: 5 };
        let mut changes = 0;
        for seed in 0..10 {
            let m = random_model(2, 2, ModelFamily::Violating, seed).unwrap();
            let ptr = PointerObservable::new(m.h_m().clone());
            let cal = Calibration::from_pointer(&ptr, 2);
            let prep = Preparation::Eigenbasis { system: 0, apparatus: 0 };
            let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
            changes += repeated_trials(&exp, &schedule, 5, seed).unwrap().repeat_changes();
        }
        assert!(changes > 0);
    }

    #[test]
    fn protocol_rejects_bad_schedules() {
        let (m, ptr) = qnd_experiment(0);
        let cal = Calibration::from_pointer(&ptr, 2);
        let prep = Preparation::Eigenbasis { system: 0, apparatus: 0 };
        let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
        assert!(repeatability_protocol(&exp, &RepeatSchedule { tau: 1.0, delta_tau: 1.0, repeats: 1 }, 0).is_err());
        assert!(repeatability_protocol(&exp, &RepeatSchedule { tau: 0.0, delta_tau: 1.0, repeats: 3 }, 0).is_err());
        let rec = repeatability_protocol(&exp, &RepeatSchedule { tau: 1.0, delta_tau: 0.5, repeats: 3 }, 0).unwrap();
        assert_eq!(rec.entries.iter().map(|e| e.time).collect::<Vec<_>>(), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn dispersion_matches_first_readings() {
        let m = random_model(2, 2, ModelFamily::Violating, 5).unwrap();
        let ptr = PointerObservable::new(m.h_m().clone());
        let cal = Calibration::from_pointer(&ptr, 2);
        let prep = Preparation::Eigenbasis { system: 0, apparatus: 1 };
        let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
        let schedule = RepeatSchedule { tau: 1.5, delta_tau: 0.5, repeats: 3 };
        let rec = repeated_trials(&exp, &schedule, 50, 17).unwrap();
        let disp = dispersion_experiment(&exp, 1.5, 50, 17).unwrap();
        assert_eq!(rec.first_readings(), disp.entries);
        assert!(disp.variance > 0.0);
    }

    #[test]
    fn dispersion_is_zero_under_qnd() {
        for seed in 0..20 {
            let (m, ptr) = qnd_experiment(seed);
            let cal = Calibration::from_pointer(&ptr, 2);
            let prep = Preparation::Eigenbasis { system: 0, apparatus: 2 };
            let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
            let d = dispersion_experiment(&exp, 3.0, 200, seed).unwrap();
            assert_eq!(d.variance, 0.0);
        }
        let (m, ptr) = qnd_experiment(0);
        let cal = Calibration::from_pointer(&ptr, 2);
        let prep = Preparation::Eigenbasis { system: 0, apparatus: 2 };
        let exp = Experiment { model: &m, preparation: &prep, pointer: &ptr, calibration: &cal };
        let d = dispersion_experiment(&exp, 3.0, 1, 0).unwrap();
        assert!(d.is_degenerate() && d.variance == 0.0);
    }

    #[test]
    fn calibration_validation() {
        let ptr = sz_pointer();
        assert!(Calibration::from_table(vec![vec![1.0]], &ptr).is_err());
        assert!(Calibration::from_table(vec![], &ptr).is_err());
        let cal = Calibration::from_pointer(&ptr, 3);
        assert_eq!(cal.reading(Some(2), 1).unwrap(), 1.0);
        assert!(cal.reading(Some(3), 0).is_err());
        assert!(cal.reading(None, 2).is_err());
    }

    #[test]
    fn record_csv() {
        let rec = MeasurementRecord {
            entries: vec![
                RecordEntry { trial: 0, time: 1.0, system: Some(1), lambda: 0, reading: -1.0 },
                RecordEntry { trial: 1, time: 1.5, system: None, lambda: 1, reading: 0.25 },
            ],
        };
        assert_eq!(rec.to_csv(), "trial,time,i,lambda,reading\n0,1,1,0,-1\n1,1.5,,1,0.25\n");
    }
}
