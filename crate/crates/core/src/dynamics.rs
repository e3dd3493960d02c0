//! Exact resonant Jaynes-Cummings evolution in the interaction picture.
//!
//! The propagator `U(gt) = exp(-i t V)` with `V = i g (a σ₊ - a† σ₋)` is block
//! diagonal in the excitation number: every pair `{|e,n⟩, |g,n+1⟩}` is rotated
//! by the angle `gt√(n+1)` and `|g,0⟩` is left untouched. States are always
//! evolved from `t = 0` with the closed-form blocks, so there is no
//! time-stepping error and distinct grid points are independent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{
    self, displaced_fock_columns, thermal_populations, thermal_tail, DensityOperator, SpaceConfig,
    C64, EXCITED, GROUND,
};

/// Default cumulative weight discarded by [`decompose_thermal_branches`].
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// One pure component of a low-rank joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub weight: f64,
    pub vector: DVector<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// Full `2n_ph × 2n_ph` density matrix.
    Dense(DMatrix<C64>),
    /// `ρ = Σ_b w_b |ψ_b⟩⟨ψ_b|`.
    Branches(Vec<Branch>),
}

/// Joint qubit⊗cavity state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    repr: Representation,
    cfg: SpaceConfig,
    trace_deficit: f64,
}

impl JointState {
    pub fn from_dense(matrix: DMatrix<C64>, cfg: SpaceConfig) -> Self {
        let trace_deficit = 1.0 - matrix.trace().re;
        Self { repr: Representation::Dense(matrix), cfg, trace_deficit }
    }

    pub fn from_branches(branches: Vec<Branch>, cfg: SpaceConfig) -> Result<Self> {
        for b in &branches {
            if b.vector.len() != cfg.joint_dim() {
                return Err(Error::DimensionMismatch { expected: cfg.joint_dim(), found: b.vector.len() });
            }
            if !(b.weight > 0.0) {
                return Err(Error::Domain(format!("branch weight must be positive, got {}", b.weight)));
            }
        }
        let total: f64 = branches.iter().map(|b| b.weight * b.vector.norm_squared()).sum();
        Ok(Self { repr: Representation::Branches(branches), cfg, trace_deficit: 1.0 - total })
    }

    #[inline]
    pub fn cfg(&self) -> &SpaceConfig {
        &self.cfg
    }

    #[inline]
    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    #[inline]
    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Representation::Dense(m) => m.trace().re,
            Representation::Branches(bs) => bs.iter().map(|b| b.weight * b.vector.norm_squared()).sum(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.repr, Representation::Dense(_))
    }

    pub fn branch_count(&self) -> usize {
        match &self.repr {
            Representation::Dense(_) => 0,
            Representation::Branches(bs) => bs.len(),
        }
    }

    /// Dense density matrix, materialized from branches when needed.
    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.repr {
            Representation::Dense(m) => m.clone(),
            Representation::Branches(bs) => {
                let d = self.cfg.joint_dim();
                let mut m = DMatrix::zeros(d, d);
                for b in bs {
                    m.gerc(C64::from(b.weight), &b.vector, &b.vector, C64::from(1.0));
                }
                m
            }
        }
    }

    /// Population of the highest retained cavity level, summed over the qubit.
    pub fn top_band_population(&self) -> f64 {
        let n = self.cfg.n_ph();
        let top = n - 1;
        match &self.repr {
            Representation::Dense(m) => m[(top, top)].re + m[(n + top, n + top)].re,
            Representation::Branches(bs) => bs
                .iter()
                .map(|b| b.weight * (b.vector[top].norm_sqr() + b.vector[n + top].norm_sqr()))
                .sum(),
        }
    }
}

/// Closed-form interaction-picture propagator at a fixed `g·t`.
///
/// `blocks[n] = (cos(gt√(n+1)), sin(gt√(n+1)))` acts on `(|e,n⟩, |g,n+1⟩)` as
/// `[[c, s], [-s, c]]`. The pair `|e,n_ph-1⟩ ↔ |g,n_ph⟩` falls outside the
/// truncation, so `|e,n_ph-1⟩` is kept fixed, as is `|g,0⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    gt: f64,
    blocks: Vec<(f64, f64)>,
    n_ph: usize,
}

impl Propagator {
    #[inline]
    pub fn gt(&self) -> f64 {
        self.gt
    }

    #[inline]
    pub fn blocks(&self) -> &[(f64, f64)] {
        &self.blocks
    }

    /// Dense matrix of the propagator (for checks and small spaces).
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.n_ph;
        let mut u = DMatrix::identity(2 * n, 2 * n);
        for (k, &(c, s)) in self.blocks.iter().enumerate() {
            let (ie, ig) = (EXCITED * n + k, GROUND * n + k + 1);
            u[(ie, ie)] = C64::from(c);
            u[(ie, ig)] = C64::from(s);
            u[(ig, ie)] = C64::from(-s);
            u[(ig, ig)] = C64::from(c);
        }
        u
    }

    /// `U ψ`.
    pub fn apply(&self, psi: &DVector<C64>) -> DVector<C64> {
        let n = self.n_ph;
        let mut out = psi.clone();
        for (k, &(c, s)) in self.blocks.iter().enumerate() {
            let (ie, ig) = (EXCITED * n + k, GROUND * n + k + 1);
            let (xe, xg) = (psi[ie], psi[ig]);
            out[ie] = xe * c + xg * s;
            out[ig] = xg * c - xe * s;
        }
        out
    }

    /// `U ρ U†`, exploiting the 2×2 block structure on both sides.
    pub fn conjugate(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let n = self.n_ph;
        let mut m = rho.clone();
        // rows: U ρ
        for (k, &(c, s)) in self.blocks.iter().enumerate() {
            let (ie, ig) = (EXCITED * n + k, GROUND * n + k + 1);
            for col in 0..2 * n {
                let (xe, xg) = (m[(ie, col)], m[(ig, col)]);
                m[(ie, col)] = xe * c + xg * s;
                m[(ig, col)] = xg * c - xe * s;
            }
        }
        // columns: (U ρ) U†; U is real so U† = Uᵀ
        for (k, &(c, s)) in self.blocks.iter().enumerate() {
            let (ie, ig) = (EXCITED * n + k, GROUND * n + k + 1);
            for row in 0..2 * n {
                let (xe, xg) = (m[(row, ie)], m[(row, ig)]);
                m[(row, ie)] = xe * c + xg * s;
                m[(row, ig)] = xg * c - xe * s;
            }
        }
        m
    }
}

/// Builds the block propagator `U(gt)`.
pub fn build_propagator(gt: f64, cfg: &SpaceConfig) -> Propagator {
    let n = cfg.n_ph();
    let blocks = (0..n - 1)
        .map(|k| {
            let w = gt * ((k + 1) as f64).sqrt();
            (w.cos(), w.sin())
        })
        .collect();
    Propagator { gt, blocks, n_ph: n }
}

/// Evolves `state0` (taken at `t = 0`) to `g·t = gt`.
pub fn evolve(state0: &JointState, gt: f64) -> Result<JointState> {
    let cfg = *state0.cfg();
    check_top_band(state0)?;
    let u = build_propagator(gt, &cfg);
    let repr = match state0.representation() {
        Representation::Dense(m) => Representation::Dense(u.conjugate(m)),
        Representation::Branches(bs) => Representation::Branches(
            bs.iter().map(|b| Branch { weight: b.weight, vector: u.apply(&b.vector) }).collect(),
        ),
    };
    let out = JointState { repr, cfg, trace_deficit: state0.trace_deficit };
    check_top_band(&out)?;
    Ok(out)
}

fn check_top_band(state: &JointState) -> Result<()> {
    let top = state.top_band_population();
    if top > state.cfg().tail_tol() {
        return Err(Error::Truncation(format!(
            "top Fock level holds population {top:.3e} > tail_tol {:.1e} (n_ph = {})",
            state.cfg().tail_tol(),
            state.cfg().n_ph()
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a 2×2 Hermitian matrix, eigenvalues descending.
pub(crate) fn qubit_eigen(rho_q: &DMatrix<C64>) -> [(f64, [C64; 2]); 2] {
    let a = rho_q[(0, 0)].re;
    let d = rho_q[(1, 1)].re;
    let b = rho_q[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = (half * half + b.norm_sqr()).sqrt();
    let (l1, l2) = (mean + r, mean - r);
    if b.norm() <= 1e-300 {
        let e = [C64::from(1.0), C64::from(0.0)];
        let g = [C64::from(0.0), C64::from(1.0)];
        return if a >= d { [(a, e), (d, g)] } else { [(d, g), (a, e)] };
    }
    // (A - λ) v = 0 with v = (b, λ - a)
    let vec_for = |l: f64| {
        let v = [b, C64::from(l - a)];
        let nrm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / nrm, v[1] / nrm]
    };
    [(l1, vec_for(l1)), (l2, vec_for(l2))]
}

/// Low-rank factorization of `ρ_Q(0) ⊗ D(α) w(n̄) D†(α)` into pure branches
/// `(q_k p_n, |k⟩ ⊗ D(α)|n⟩)`.
///
/// Each qubit eigenvector with weight `q_k` keeps the smallest number of
/// Fock levels whose untruncated thermal tail satisfies
/// `q_k · tail ≤ rank_tol / 2`, so at most `rank_tol` is discarded overall.
pub fn decompose_thermal_branches(
    rho_q0: &DensityOperator,
    alpha: Complex64,
    nbar: f64,
    rank_tol: f64,
    cfg: &SpaceConfig,
) -> Result<JointState> {
    if rho_q0.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: rho_q0.dim() });
    }
    if !(rank_tol > 0.0) {
        return Err(Error::Domain(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let n = cfg.n_ph();
    let eig = qubit_eigen(rho_q0.matrix());
    let budget = 0.5 * rank_tol;
    let levels_for = |q: f64| -> usize {
        if nbar <= 0.0 {
            return 1;
        }
        let mut k = 1;
        while k < n && q * thermal_tail(nbar, k) > budget {
            k += 1;
        }
        k
    };
    let max_levels = eig.iter().filter(|(q, _)| *q > 0.0).map(|(q, _)| levels_for(*q)).max().unwrap_or(0);
    let cols = displaced_fock_columns(alpha, max_levels, cfg);
    let p = thermal_populations(nbar, max_levels);

    let mut leak = 0.0;
    for (k, col) in cols.column_iter().enumerate() {
        leak += p[k] * (1.0 - col.norm_squared()).max(0.0);
    }
    if leak > cfg.tail_tol() {
        return Err(Error::Truncation(format!(
            "displaced thermal branches lose {leak:.3e} > tail_tol {:.1e} (n_ph = {n})",
            cfg.tail_tol()
        )));
    }

    let mut branches = Vec::new();
    for (q, qv) in eig.iter() {
        if *q <= 1e-15 {
            continue;
        }
        for k in 0..levels_for(*q) {
            let w = q * p[k];
            if w <= 0.0 {
                continue;
            }
            let col = cols.column(k);
            let mut v = DVector::zeros(2 * n);
            for (qi, amp) in qv.iter().enumerate() {
                v.rows_mut(qi * n, n).copy_from(&(col * *amp));
            }
            branches.push(Branch { weight: w, vector: v });
        }
    }
    JointState::from_branches(branches, *cfg)
}

/// Dense product initial state `ρ_Q(0) ⊗ D(α) w(n̄) D†(α)`.
pub fn dense_initial_state(
    rho_q0: &DensityOperator,
    alpha: Complex64,
    nbar: f64,
    cfg: &SpaceConfig,
) -> Result<JointState> {
    let rc = fock::displaced_thermal(alpha, nbar, cfg)?;
    fock::tensor(rho_q0, &rc)
}

/// Total excitation number `⟨a†a⟩ + P_e`.
pub fn conserved_excitation(state: &JointState) -> f64 {
    let n = state.cfg().n_ph();
    match state.representation() {
        Representation::Dense(m) => {
            let mut acc = 0.0;
            for k in 0..n {
                acc += (k as f64 + 1.0) * m[(EXCITED * n + k, EXCITED * n + k)].re;
                acc += k as f64 * m[(GROUND * n + k, GROUND * n + k)].re;
            }
            acc
        }
        Representation::Branches(bs) => bs
            .iter()
            .map(|b| {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += (k as f64 + 1.0) * b.vector[EXCITED * n + k].norm_sqr();
                    acc += k as f64 * b.vector[GROUND * n + k].norm_sqr();
                }
                b.weight * acc
            })
            .sum(),
    }
}
