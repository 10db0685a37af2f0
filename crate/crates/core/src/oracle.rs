//! Independent recomputation of the main numerical paths.
//!
//! Nothing here goes through the matrix type of [`crate::linalg`]: all
//! quantities are explicit index loops over row-major `Vec`s.
//!
//! * the propagator is a 30-term Taylor series with scaling and squaring,
//! * the Born weights are traced element by element,
//! * the equation-of-motion right-hand side is assembled from its
//!   component sums over `(i, k, λ, ν)`.
//!
//! The joint index layout is a parameter so that a deliberately wrong
//! layout can be shown to be caught.

use rand::Rng;

use crate::dynamics::{evolve_exact, rhs_component_form};
use crate::error::Result;
use crate::linalg::{DensityOperator, C64};
use crate::measurement::{outcome_distribution, PointerObservable};
use crate::model::{prepare_initial, random_density, random_model, BipartiteModel, ModelFamily};
use crate::rng::model_rng;
use crate::scenario::ResolvedScenario;

/// Agreement threshold between oracle and implementation.
pub const ORACLE_TOLERANCE: f64 = 1e-7;

const TAYLOR_TERMS: usize = 30;

/// Joint index layout used by the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexConvention {
    /// `(i, λ) ↦ i·d_M + λ`, the crate-wide layout.
    SystemMajor,
    /// `(i, λ) ↦ λ·d_S + i`.
    ApparatusMajor,
}

impl IndexConvention {
    fn joint(self, i: usize, lambda: usize, d_s: usize, d_m: usize) -> usize {
        match self {
            IndexConvention::SystemMajor => i * d_m + lambda,
            IndexConvention::ApparatusMajor => lambda * d_s + i,
        }
    }
}

/// Largest absolute entry-wise discrepancy of each checked quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub propagation: f64,
    pub distribution: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl OracleReport {
    fn new(propagation: f64, distribution: f64, rhs: f64) -> Self {
        let passed = [propagation, distribution, rhs].iter().all(|d| *d <= ORACLE_TOLERANCE);
        Self { propagation, distribution, rhs, passed }
    }

    fn merge(self, other: OracleReport) -> Self {
        Self::new(self.propagation.max(other.propagation), self.distribution.max(other.distribution), self.rhs.max(other.rhs))
    }

    pub fn diff_report(&self) -> String {
        format!(
            "propagation {:.3e}, distribution {:.3e}, rhs {:.3e} (tolerance {ORACLE_TOLERANCE:.0e})",
            self.propagation, self.distribution, self.rhs
        )
    }
}

type Dense = Vec<C64>;

fn get(m: &crate::linalg::ComplexMatrix) -> Dense {
    m.to_row_major()
}

fn matmul(a: &[C64], b: &[C64], n: usize) -> Dense {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for k in 0..n {
            let x = a[r * n + k];
            for c in 0..n {
                out[r * n + c] += x * b[k * n + c];
            }
        }
    }
    out
}

fn adjoint(a: &[C64], n: usize) -> Dense {
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = a[r * n + c].conj();
        }
    }
    out
}

fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Total Hamiltonian assembled entry by entry.
fn total_hamiltonian(m: &BipartiteModel, conv: IndexConvention) -> Dense {
    let (d_s, d_m) = (m.d_s(), m.d_m());
    let n = d_s * d_m;
    let (h_s, h_m, h_c) = (get(m.h_s().matrix()), get(m.h_m().matrix()), get(m.h_c().matrix()));
    let mut h = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..d_s {
        for l in 0..d_m {
            for j in 0..d_s {
                for mu in 0..d_m {
                    let row = conv.joint(i, l, d_s, d_m);
                    let col = conv.joint(j, mu, d_s, d_m);
                    let mut x = h_c[row * n + col];
                    if l == mu {
                        x += h_s[i * d_s + j];
                    }
                    if i == j {
                        x += h_m[l * d_m + mu];
                    }
                    h[row * n + col] = x;
                }
            }
        }
    }
    h
}

/// `exp(−iHt)` by scaling, a truncated Taylor series and squaring.
pub fn taylor_propagator(h: &[C64], n: usize, t: f64) -> Dense {
    let a: Dense = h.iter().map(|z| z * C64::new(0.0, -t)).collect();
    let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) > 0.5 {
        squarings += 1;
    }
    let scale = 2f64.powi(-squarings);
    let a: Dense = a.iter().map(|z| z * scale).collect();
    let mut sum = vec![C64::new(0.0, 0.0); n * n];
    let mut term = vec![C64::new(0.0, 0.0); n * n];
    for k in 0..n {
        sum[k * n + k] = C64::new(1.0, 0.0);
        term[k * n + k] = C64::new(1.0, 0.0);
    }
    for k in 1..=TAYLOR_TERMS {
        term = matmul(&term, &a, n).into_iter().map(|z| z / k as f64).collect();
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
    }
    for _ in 0..squarings {
        sum = matmul(&sum, &sum, n);
    }
    sum
}

/// `dω/dt` from the component sums
/// `Σ_j [H_S^{ij} ⊗ I, ω^{jk}] + Σ_{jμ} [H_C^{ij}_{λμ}, ω^{jk}_{μν}] + Σ_μ [I ⊗ H_M^{λμ}, ω^{ik}_{μν}]`,
/// each commutator expanded into its left and right products.
pub fn component_rhs(m: &BipartiteModel, w: &[C64], conv: IndexConvention) -> Dense {
    let (d_s, d_m) = (m.d_s(), m.d_m());
    let n = d_s * d_m;
    let (h_s, h_m, h_c) = (get(m.h_s().matrix()), get(m.h_m().matrix()), get(m.h_c().matrix()));
    let idx = |i: usize, l: usize| conv.joint(i, l, d_s, d_m);
    let om = |i: usize, l: usize, k: usize, v: usize| w[idx(i, l) * n + idx(k, v)];
    let hc = |i: usize, l: usize, j: usize, mu: usize| h_c[idx(i, l) * n + idx(j, mu)];
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..d_s {
        for k in 0..d_s {
            for l in 0..d_m {
                for v in 0..d_m {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..d_s {
                        acc += h_s[i * d_s + j] * om(j, l, k, v) - om(i, l, j, v) * h_s[j * d_s + k];
                    }
                    for j in 0..d_s {
                        for mu in 0..d_m {
                            acc += hc(i, l, j, mu) * om(j, mu, k, v) - om(i, l, j, mu) * hc(j, mu, k, v);
                        }
                    }
                    for mu in 0..d_m {
                        acc += h_m[l * d_m + mu] * om(i, mu, k, v) - om(i, l, k, mu) * h_m[mu * d_m + v];
                    }
                    out[idx(i, l) * n + idx(k, v)] = acc * C64::new(0.0, -1.0);
                }
            }
        }
    }
    out
}

/// `p_λ = Σ_i Σ_{μν} ⟨m_λ|μ⟩ ω_{(i,μ),(i,ν)} ⟨ν|m_λ⟩`.
pub fn born_weights(w: &[C64], pointer: &PointerObservable, d_s: usize, d_m: usize, conv: IndexConvention) -> Vec<f64> {
    let n = d_s * d_m;
    (0..d_m)
        .map(|lambda| {
            let v = pointer.basis().vector(lambda);
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d_s {
                for mu in 0..d_m {
                    for nu in 0..d_m {
                        acc += v[mu].conj() * w[conv.joint(i, mu, d_s, d_m) * n + conv.joint(i, nu, d_s, d_m)] * v[nu];
                    }
                }
            }
            acc.re
        })
        .collect()
}

/// Compares exact evolution, Born weights at `t` and the right-hand side
/// at `w0` against the oracle.
pub fn oracle_compare(
    m: &BipartiteModel,
    w0: &DensityOperator,
    pointer: &PointerObservable,
    t: f64,
    conv: IndexConvention,
) -> Result<OracleReport> {
    let (d_s, d_m) = (m.d_s(), m.d_m());
    let n = d_s * d_m;
    let w0_dense = get(w0.matrix());

    let u = taylor_propagator(&total_hamiltonian(m, conv), n, t);
    let wt_oracle = matmul(&matmul(&u, &w0_dense, n), &adjoint(&u, n), n);
    let wt = evolve_exact(m, w0, t)?;
    let propagation = max_abs_diff(&wt_oracle, &get(wt.matrix()));

    let p_oracle = born_weights(&wt_oracle, pointer, d_s, d_m, conv);
    let p = outcome_distribution(&wt, pointer, d_s, d_m)?;
    let distribution = p.iter().zip(&p_oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let rhs = max_abs_diff(&component_rhs(m, &w0_dense, conv), &get(&rhs_component_form(m, w0)?));
    Ok(OracleReport::new(propagation, distribution, rhs))
}

/// Random dense-coupling model, random mixed state and random time in
/// `[0, 3)`, all drawn from `seed`.
pub fn oracle_check(d_s: usize, d_m: usize, seed: u64) -> Result<OracleReport> {
    oracle_check_with(d_s, d_m, seed, IndexConvention::SystemMajor)
}

pub fn oracle_check_with(d_s: usize, d_m: usize, seed: u64, conv: IndexConvention) -> Result<OracleReport> {
    let m = random_model(d_s, d_m, ModelFamily::Violating, seed)?;
    let mut rng = model_rng(seed ^ 0x5eed_0ac1e);
    let w0 = random_density(d_s * d_m, &mut rng);
    let t = rng.random_range(0.0..3.0);
    let pointer = PointerObservable::new(m.h_m().clone());
    oracle_compare(&m, &w0, &pointer, t, conv)
}

/// Checks a scenario at its first readout time, from both its prepared
/// state and a seeded random mixed state.
pub fn oracle_check_scenario(s: &ResolvedScenario) -> Result<OracleReport> {
    let w0 = prepare_initial(&s.model, &s.preparation, s.pointer.basis())?;
    let prepared = oracle_compare(&s.model, &w0, &s.pointer, s.schedule.tau, IndexConvention::SystemMajor)?;
    let mixed = random_density(s.model.dim(), &mut model_rng(s.schedule.seed));
    let random = oracle_compare(&s.model, &mixed, &s.pointer, s.schedule.tau, IndexConvention::SystemMajor)?;
    Ok(prepared.merge(random))
}
