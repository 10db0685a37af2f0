//! Bipartite system/apparatus models, commutation checks and initial
//! states.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{commutator_defect, spectral, ComplexMatrix, DensityOperator, HermitianOperator, SpectralDecomposition, C64};
use crate::rng::{model_rng, SimRng};
use crate::tol;

/// Default relative defect below which a commutation condition holds.
pub const DEFAULT_CONDITION_THRESHOLD: f64 = tol::COMMUTATION;

/// System Hamiltonian `h_s` (dimension `d_s`), apparatus Hamiltonian
/// `h_m` (dimension `d_m`) and coupling `h_c` on the joint space.
#[derive(Clone, Debug)]
pub struct BipartiteModel {
    h_s: HermitianOperator,
    h_m: HermitianOperator,
    h_c: HermitianOperator,
}

impl BipartiteModel {
    pub fn new(h_s: HermitianOperator, h_m: HermitianOperator, h_c: HermitianOperator) -> Result<Self> {
        let joint = h_s.dim() * h_m.dim();
        if h_c.dim() != joint {
            return Err(Error::DimensionMismatch { context: "coupling Hamiltonian (d_S·d_M)", expected: joint, found: h_c.dim() });
        }
        Ok(Self { h_s, h_m, h_c })
    }

    /// All three Hamiltonians zero.
    pub fn free(d_s: usize, d_m: usize) -> Self {
        Self { h_s: HermitianOperator::zero(d_s), h_m: HermitianOperator::zero(d_m), h_c: HermitianOperator::zero(d_s * d_m) }
    }

    pub fn d_s(&self) -> usize {
        self.h_s.dim()
    }

    pub fn d_m(&self) -> usize {
        self.h_m.dim()
    }

    /// Dimension of the joint space.
    pub fn dim(&self) -> usize {
        self.d_s() * self.d_m()
    }

    pub fn h_s(&self) -> &HermitianOperator {
        &self.h_s
    }

    pub fn h_m(&self) -> &HermitianOperator {
        &self.h_m
    }

    pub fn h_c(&self) -> &HermitianOperator {
        &self.h_c
    }

    /// `H_S ⊗ I_M`.
    pub fn system_term(&self) -> HermitianOperator {
        self.h_s.kron(&HermitianOperator::identity(self.d_m()))
    }

    /// `I_S ⊗ H_M`.
    pub fn apparatus_term(&self) -> HermitianOperator {
        HermitianOperator::identity(self.d_s()).kron(&self.h_m)
    }

    pub fn total_hamiltonian(&self) -> HermitianOperator {
        let sum = &(self.system_term().into_matrix() + self.apparatus_term().into_matrix()) + self.h_c.matrix();
        HermitianOperator::from_hermitian_parts(sum)
    }
}

/// `H = H_S ⊗ I_M + I_S ⊗ H_M + H_C`.
pub fn total_hamiltonian(m: &BipartiteModel) -> HermitianOperator {
    m.total_hamiltonian()
}

/// Commutator defects of the coupling against both free Hamiltonians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionReport {
    /// Defect of `[H_S ⊗ I_M, H_C]`.
    pub eq4_defect: f64,
    /// Defect of `[H_C, I_S ⊗ H_M]`.
    pub eq5_defect: f64,
    pub eq4_holds: bool,
    pub eq5_holds: bool,
    pub threshold: f64,
}

impl ConditionReport {
    pub fn both_hold(&self) -> bool {
        self.eq4_holds && self.eq5_holds
    }
}

pub fn check_conditions(m: &BipartiteModel, threshold: f64) -> Result<ConditionReport> {
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!("condition threshold must be positive, got {threshold}")));
    }
    let eq4_defect = commutator_defect(&m.system_term(), m.h_c())?;
    let eq5_defect = commutator_defect(m.h_c(), &m.apparatus_term())?;
    Ok(ConditionReport { eq4_defect, eq5_defect, eq4_holds: eq4_defect <= threshold, eq5_holds: eq5_defect <= threshold, threshold })
}

/// Initial joint state `ω(0) = ρ_S(0) ⊗ μ_M(0)`.
#[derive(Clone, Debug)]
pub enum Preparation {
    /// `|i⟩⟨i| ⊗ |m_λ⟩⟨m_λ|` with `|i⟩` the `system`-th eigenvector of
    /// `H_S` and `|m_λ⟩` the `apparatus`-th pointer eigenvector.
    Eigenbasis { system: usize, apparatus: usize },
    /// An arbitrary product of subsystem states.
    Product { rho: DensityOperator, mu: DensityOperator },
}

impl Preparation {
    /// The prepared system eigenstate label, if there is one.
    pub fn system_label(&self) -> Option<usize> {
        match self {
            Preparation::Eigenbasis { system, .. } => Some(*system),
            Preparation::Product { .. } => None,
        }
    }
}

pub fn prepare_initial(m: &BipartiteModel, prep: &Preparation, pointer_basis: &SpectralDecomposition) -> Result<DensityOperator> {
    if pointer_basis.dim() != m.d_m() {
        return Err(Error::DimensionMismatch { context: "pointer basis", expected: m.d_m(), found: pointer_basis.dim() });
    }
    match prep {
        Preparation::Eigenbasis { system, apparatus } => {
            if *system >= m.d_s() {
                return Err(Error::IndexOutOfRange { what: "system", index: *system, bound: m.d_s() });
            }
            if *apparatus >= m.d_m() {
                return Err(Error::IndexOutOfRange { what: "apparatus", index: *apparatus, bound: m.d_m() });
            }
            let system_vec = spectral(m.h_s()).vector(*system);
            let pointer_vec = pointer_basis.vector(*apparatus);
            let joint: Vec<C64> = system_vec.iter().flat_map(|a| pointer_vec.iter().map(move |b| a * b)).collect();
            DensityOperator::new(ComplexMatrix::outer(&joint, &joint))
        }
        Preparation::Product { rho, mu } => {
            if rho.dim() != m.d_s() {
                return Err(Error::DimensionMismatch { context: "system state", expected: m.d_s(), found: rho.dim() });
            }
            if mu.dim() != m.d_m() {
                return Err(Error::DimensionMismatch { context: "apparatus state", expected: m.d_m(), found: mu.dim() });
            }
            rho.tensor(mu)
        }
    }
}

/// Coupling family for [`random_model`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelFamily {
    /// `H_C = Σ_k A_k ⊗ B_k` with every `A_k` diagonal in the `H_S`
    /// eigenbasis and every `B_k` diagonal in the `H_M` eigenbasis.
    Qnd,
    /// Dense random Hermitian coupling.
    Violating,
    /// `(1 − η)·H_C^qnd + η·H_C^violating` for the same seed.
    Interpolated(f64),
}

/// Draws a model with random free Hamiltonians and a coupling from
/// `family`.
///
/// The draw order is fixed (free Hamiltonians, QND coupling, dense
/// coupling) and independent of the family, so all families share `H_S`
/// and `H_M` for a given seed and `Interpolated(0.0)` equals `Qnd`.
pub fn random_model(d_s: usize, d_m: usize, family: ModelFamily, seed: u64) -> Result<BipartiteModel> {
    if d_s < 2 || d_m < 2 {
        return Err(Error::invalid(format!("random models need d_S, d_M ≥ 2, got ({d_s}, {d_m})")));
    }
    if let ModelFamily::Interpolated(eta) = family {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("interpolation parameter must lie in [0, 1], got {eta}")));
        }
    }
    let mut rng = model_rng(seed);
    let h_s = random_hermitian(d_s, &mut rng);
    let h_m = random_hermitian(d_m, &mut rng);
    let qnd = qnd_coupling(&h_s, &h_m, &mut rng);
    let dense = random_hermitian(d_s * d_m, &mut rng);
    let h_c = match family {
        ModelFamily::Qnd => qnd,
        ModelFamily::Violating => dense,
        ModelFamily::Interpolated(eta) => {
            HermitianOperator::from_hermitian_parts(&qnd.matrix().scale_real(1.0 - eta) + &dense.matrix().scale_real(eta))
        }
    };
    BipartiteModel::new(h_s, h_m, h_c)
}

fn qnd_coupling(h_s: &HermitianOperator, h_m: &HermitianOperator, rng: &mut SimRng) -> HermitianOperator {
    let (d_s, d_m) = (h_s.dim(), h_m.dim());
    let v_s = spectral(h_s).eigenvectors().clone();
    let v_m = spectral(h_m).eigenvectors().clone();
    let mut acc = ComplexMatrix::zeros(d_s * d_m, d_s * d_m);
    for _ in 0..d_s.min(d_m) {
        let a: Vec<f64> = (0..d_s).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let b: Vec<f64> = (0..d_m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let a_k = &(&v_s * &ComplexMatrix::from_real_diagonal(&a)) * &v_s.adjoint();
        let b_k = &(&v_m * &ComplexMatrix::from_real_diagonal(&b)) * &v_m.adjoint();
        acc = acc + hermitize(crate::linalg::tensor(&a_k, &b_k));
    }
    HermitianOperator::from_hermitian_parts(acc)
}

fn hermitize(m: ComplexMatrix) -> ComplexMatrix {
    (&m + &m.adjoint()).scale_real(0.5)
}

/// Dense Hermitian matrix with entries uniform in the unit square.
pub fn random_hermitian(n: usize, rng: &mut SimRng) -> HermitianOperator {
    let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    HermitianOperator::from_hermitian_parts(hermitize(g))
}

/// Full-rank mixed state `G·G† / tr(G·G†)`.
pub fn random_density(n: usize, rng: &mut SimRng) -> DensityOperator {
    let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let gg = hermitize(&g * &g.adjoint());
    let tr = gg.trace().re;
    DensityOperator::new(gg.scale_real(1.0 / tr)).expect("G·G† is a valid state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;

    fn pauli_model(coupling: HermitianOperator) -> BipartiteModel {
        let z = HermitianOperator::pauli_z();
        BipartiteModel::new(z.clone(), z, coupling).unwrap()
    }

    #[test]
    fn total_hamiltonian_examples() {
        let zero = BipartiteModel::free(2, 3);
        assert_eq!(zero.total_hamiltonian().frobenius_norm(), 0.0);

        let z = HermitianOperator::pauli_z();
        let m = BipartiteModel::new(z.clone(), HermitianOperator::zero(2), HermitianOperator::zero(4)).unwrap();
        let want = ComplexMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        assert!(total_hamiltonian(&m).matrix().approx_eq(&want, 0.0));

        let m = pauli_model(z.kron(&z));
        let want = ComplexMatrix::from_real_diagonal(&[3.0, -1.0, -1.0, -1.0]);
        assert!(total_hamiltonian(&m).matrix().approx_eq(&want, 0.0));
    }

    #[test]
    fn coupling_dimension_is_checked() {
        let z = HermitianOperator::pauli_z();
        let err = BipartiteModel::new(z.clone(), z, HermitianOperator::zero(3));
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn condition_examples() {
        let r = check_conditions(&BipartiteModel::free(2, 2), 1e-10).unwrap();
        assert_eq!((r.eq4_defect, r.eq5_defect), (0.0, 0.0));
        assert!(r.both_hold());

        let z = HermitianOperator::pauli_z();
        let r = check_conditions(&pauli_model(z.kron(&z)), 1e-10).unwrap();
        assert!(r.both_hold());

        let x = HermitianOperator::pauli_x();
        let r = check_conditions(&pauli_model(x.kron(&x)), 1e-10).unwrap();
        assert!(!r.eq4_holds && !r.eq5_holds);
        // ‖2iσy ⊗ σx‖_F / (‖σz ⊗ I‖_F ‖σx ⊗ σx‖_F) = 4 / 4.
        assert!((r.eq4_defect - 1.0).abs() < 1e-15);
        assert!((r.eq5_defect - 1.0).abs() < 1e-15);

        assert!(check_conditions(&BipartiteModel::free(2, 2), 0.0).is_err());
    }

    #[test]
    fn eigenbasis_preparation() {
        let z = HermitianOperator::pauli_z();
        let m = pauli_model(z.kron(&z));
        let pointer = spectral(&z);
        let w = prepare_initial(&m, &Preparation::Eigenbasis { system: 0, apparatus: 0 }, &pointer).unwrap();
        // Index 0 of σz's ascending eigenbasis is |1⟩, so the joint vector is |1⟩|1⟩.
        let want = ComplexMatrix::from_real_diagonal(&[0.0, 0.0, 0.0, 1.0]);
        assert!(w.matrix().approx_eq(&want, 1e-15));
        assert!((w.purity() - 1.0).abs() < 1e-14);

        let err = prepare_initial(&m, &Preparation::Eigenbasis { system: 2, apparatus: 0 }, &pointer);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
        let err = prepare_initial(&m, &Preparation::Eigenbasis { system: 0, apparatus: 5 }, &pointer);
        assert!(matches!(err, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn product_preparation() {
        let m = BipartiteModel::free(2, 2);
        let prep = Preparation::Product { rho: DensityOperator::maximally_mixed(2), mu: DensityOperator::maximally_mixed(2) };
        let w = prepare_initial(&m, &prep, &spectral(&HermitianOperator::pauli_z())).unwrap();
        assert!(w.matrix().approx_eq(&ComplexMatrix::identity(4).scale_real(0.25), 1e-15));
        assert!((w.matrix().trace().re - 1.0).abs() < 1e-15);
        let bad = Preparation::Product { rho: DensityOperator::maximally_mixed(3), mu: DensityOperator::maximally_mixed(2) };
        assert!(prepare_initial(&m, &bad, &spectral(&HermitianOperator::pauli_z())).is_err());
    }

    #[test]
    fn qnd_family_satisfies_both_conditions() {
        for seed in 0..100 {
            for (d_s, d_m) in [(2, 2), (2, 3), (3, 2)] {
                let m = random_model(d_s, d_m, ModelFamily::Qnd, seed).unwrap();
                let r = check_conditions(&m, DEFAULT_CONDITION_THRESHOLD).unwrap();
                assert!(r.eq4_defect <= tol::COMMUTATION, "seed {seed}: {r:?}");
                assert!(r.eq5_defect <= tol::COMMUTATION, "seed {seed}: {r:?}");
            }
        }
    }

    #[test]
    fn violating_family_breaks_conditions() {
        for seed in 0..20 {
            let m = random_model(2, 2, ModelFamily::Violating, seed).unwrap();
            let r = check_conditions(&m, DEFAULT_CONDITION_THRESHOLD).unwrap();
            assert!(r.eq4_defect > 1e-3 && r.eq5_defect > 1e-3, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn interpolation_endpoints() {
        let qnd = random_model(2, 3, ModelFamily::Qnd, 9).unwrap();
        let zero = random_model(2, 3, ModelFamily::Interpolated(0.0), 9).unwrap();
        let one = random_model(2, 3, ModelFamily::Interpolated(1.0), 9).unwrap();
        let dense = random_model(2, 3, ModelFamily::Violating, 9).unwrap();
        assert!(zero.h_c().matrix().approx_eq(qnd.h_c().matrix(), 0.0));
        assert!(one.h_c().matrix().approx_eq(dense.h_c().matrix(), 0.0));
        assert!(zero.h_s().matrix().approx_eq(dense.h_s().matrix(), 0.0));
        assert!(random_model(2, 2, ModelFamily::Interpolated(1.5), 0).is_err());
        assert!(random_model(1, 2, ModelFamily::Qnd, 0).is_err());
    }

    #[test]
    fn defect_scales_within_guarded_bounds() {
        for seed in 0..10 {
            let m = random_model(2, 2, ModelFamily::Violating, seed).unwrap();
            let base = check_conditions(&m, 1e-10).unwrap().eq4_defect;
            for s in [0.1, 0.5, 2.0, 10.0] {
                let scaled = BipartiteModel::new(m.h_s().clone(), m.h_m().clone(), m.h_c().scaled(s)).unwrap();
                let d = check_conditions(&scaled, 1e-10).unwrap().eq4_defect;
                // The max(1, ·) guard caps shrinkage: the defect moves by a
                // factor between min(s, 1) and max(s, 1).
                let (lo, hi) = (s.min(1.0), s.max(1.0));
                assert!(d <= hi * base * (1.0 + 1e-12) + 1e-15, "s={s}: {d} vs {base}");
                assert!(d >= lo * base * (1.0 - 1e-12) - 1e-15, "s={s}: {d} vs {base}");
            }
            let q = random_model(2, 2, ModelFamily::Qnd, seed).unwrap();
            for s in [0.1, 10.0] {
                let scaled = BipartiteModel::new(q.h_s().clone(), q.h_m().clone(), q.h_c().scaled(s)).unwrap();
                assert!(check_conditions(&scaled, 1e-10).unwrap().both_hold());
            }
        }
    }

    #[test]
    fn total_hamiltonian_is_linear_in_each_term() {
        let mut rng = model_rng(3);
        let (a, b) = (random_hermitian(2, &mut rng), random_hermitian(2, &mut rng));
        let h_m = random_hermitian(3, &mut rng);
        let h_c = random_hermitian(6, &mut rng);
        let (alpha, beta) = (0.7, -1.3);
        let mix = a.scaled(alpha).plus(&b.scaled(beta)).unwrap();
        let h =
            |h_s: &HermitianOperator| BipartiteModel::new(h_s.clone(), h_m.clone(), h_c.clone()).unwrap().total_hamiltonian().into_matrix();
        // H(αa + βb) = αH(a) + βH(b) + (1 − α − β)·(I ⊗ h_m + h_c).
        let rest = &tensor(&ComplexMatrix::identity(2), h_m.matrix()) + h_c.matrix();
        let want = &(&h(&a).scale_real(alpha) + &h(&b).scale_real(beta)) + &rest.scale_real(1.0 - alpha - beta);
        assert!(h(&mix).approx_eq(&want, 1e-13));
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = model_rng(1);
        for n in 1..6 {
            let w = random_density(n, &mut rng);
            assert!((w.matrix().trace().re - 1.0).abs() < 1e-12);
        }
    }
}
