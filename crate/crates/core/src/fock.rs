//! Truncated Fock-space linear algebra for a single cavity mode and a qubit.
//!
//! Units: ħ = ω₀ = 1. Energies come out in units of ħω₀ and time only ever
//! enters through the dimensionless product `g·t`.
//!
//! Joint qubit⊗cavity vectors and matrices are ordered with the qubit index
//! outermost, `index = q * n_ph + n`, where `q = 0` is `|e⟩` and `q = 1` is
//! `|g⟩`. This matches the `[[P_e, C_eg], [C_eg*, 1 - P_e]]` layout of the
//! reduced qubit state.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::{JointState, Representation};
use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Index of `|e⟩` in the qubit basis.
pub const EXCITED: usize = 0;
/// Index of `|g⟩` in the qubit basis.
pub const GROUND: usize = 1;

/// Default bound on probability lost to truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Truncation of the cavity Hilbert space to `|0⟩..|n_ph-1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceConfig {
    n_ph: usize,
    tail_tol: f64,
}

impl SpaceConfig {
    pub fn new(n_ph: usize) -> Result<Self> {
        Self::with_tail_tol(n_ph, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(n_ph: usize, tail_tol: f64) -> Result<Self> {
        if n_ph < 2 {
            return Err(Error::Config(format!("n_ph must be at least 2, got {n_ph}")));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::Config(format!("tail_tol must lie in (0, 1), got {tail_tol}")));
        }
        Ok(Self { n_ph, tail_tol })
    }

    /// Truncation sized by [`required_nph`].
    pub fn auto(n0: f64, nbar: f64) -> Result<Self> {
        Self::new(required_nph(n0, nbar))
    }

    #[inline]
    pub fn n_ph(&self) -> usize {
        self.n_ph
    }

    #[inline]
    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Dimension of the joint qubit⊗cavity space.
    #[inline]
    pub fn joint_dim(&self) -> usize {
        2 * self.n_ph
    }
}

/// Truncation adequacy rule: `n_ph = ceil(n0 + 12 sqrt(n0 (2 nbar + 1)) + 20)`,
/// raised for weak fields so the thermal tail beyond `n0 + 4σ` stays below 1e-12.
pub fn required_nph(n0: f64, nbar: f64) -> usize {
    let n0 = n0.max(0.0);
    let nbar = nbar.max(0.0);
    let spread = (n0 * (2.0 * nbar + 1.0)).sqrt();
    let rule = n0 + 12.0 * spread + 20.0;
    let thermal_levels = if nbar > 0.0 { 12.0 * std::f64::consts::LN_10 / (1.0 + 1.0 / nbar).ln() } else { 0.0 };
    rule.max(n0 + thermal_levels + 4.0 * spread + 20.0).ceil() as usize
}

/// Dense complex operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: DMatrix::identity(dim, dim) }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint() }
    }

    pub fn compose(&self, other: &Operator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { matrix: &self.matrix * &other.matrix })
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = &self.matrix * self.matrix.adjoint();
        max_abs_diff(&prod, &DMatrix::identity(self.dim(), self.dim())) <= tol
    }
}

/// Density operator together with the probability lost to truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<C64>,
    trace_deficit: f64,
}

impl DensityOperator {
    /// Wraps a Hermitian, positive matrix; the deficit is `1 - Re tr`.
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let trace_deficit = 1.0 - matrix.trace().re;
        Ok(Self { matrix, trace_deficit })
    }

    pub(crate) fn from_parts(matrix: DMatrix<C64>, trace_deficit: f64) -> Self {
        Self { matrix, trace_deficit }
    }

    /// Pure state `|ψ⟩⟨ψ|`, normalizing `ψ`.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Domain("cannot build a pure state from the zero vector".into()));
        }
        let v = psi / C64::from(norm);
        Ok(Self { matrix: &v * v.adjoint(), trace_deficit: 0.0 })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    #[inline]
    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ.
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.dim() });
        }
        Ok((&self.matrix * op.matrix()).trace())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs_diff(&self.matrix, &self.matrix.adjoint()) <= tol
    }
}

/// First and second moments of the cavity field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityMoments {
    pub mean_a: C64,
    pub mean_a2: C64,
    pub mean_n: f64,
}

/// Symmetrized quadrature covariance matrix with `q = (a + a†)/√2`,
/// `p = (a - a†)/(i√2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceMatrix {
    pub var_q: f64,
    pub var_p: f64,
    pub cov_qp: f64,
}

impl CovarianceMatrix {
    pub fn det(&self) -> f64 {
        self.var_q * self.var_p - self.cov_qp * self.cov_qp
    }

    pub fn sqrt_det(&self) -> f64 {
        self.det().max(0.0).sqrt()
    }

    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.var_q, self.cov_qp], [self.cov_qp, self.var_p]]
    }
}

/// Ladder operator with `⟨n-1|a|n⟩ = √n`.
pub fn annihilation(cfg: &SpaceConfig) -> Operator {
    let n = cfg.n_ph();
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = C64::from((k as f64).sqrt());
    }
    Operator { matrix: m }
}

/// Number operator `a†a`.
pub fn number(cfg: &SpaceConfig) -> Operator {
    let n = cfg.n_ph();
    Operator {
        matrix: DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| C64::from(k as f64))),
    }
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Real amplitudes `f[k][j] = sqrt(j!/(j+k)!) x^{k/2} e^{-x/2} L_j^{(k)}(x)`
/// for `k < n_ph` and `j < min(n_cols, n_ph - k)`.
///
/// The three-term Laguerre recurrence is run on the normalized amplitudes
/// with a running logarithmic scale, so neither the factorials nor the
/// polynomials are ever formed explicitly.
fn laguerre_amplitudes(x: f64, n_ph: usize, n_cols: usize) -> Vec<Vec<f64>> {
    let lf = log_factorials(n_ph);
    let mut table = Vec::with_capacity(n_ph);
    for k in 0..n_ph {
        let len = n_cols.min(n_ph - k);
        let mut row = Vec::with_capacity(len);
        if len == 0 {
            table.push(row);
            continue;
        }
        let kf = k as f64;
        let mut scale = -0.5 * x + 0.5 * kf * x.ln() - 0.5 * lf[k];
        let mut prev = 1.0_f64;
        row.push(scale.exp());
        if len == 1 {
            table.push(row);
            continue;
        }
        let mut cur = (1.0 + kf - x) / (kf + 1.0).sqrt();
        row.push(cur * scale.exp());
        for j in 1..len - 1 {
            let jf = j as f64;
            let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf * (jf + kf)).sqrt() * prev)
                / ((jf + 1.0) * (jf + 1.0 + kf)).sqrt();
            prev = cur;
            cur = next;
            let big = cur.abs().max(prev.abs());
            if big > 1e150 || (big < 1e-150 && big > 0.0) {
                prev /= big;
                cur /= big;
                scale += big.ln();
            }
            row.push(cur * scale.exp());
        }
        table.push(row);
    }
    table
}

/// First `n_cols` columns of `D(α)` on the truncated space, i.e. the displaced
/// Fock states `D(α)|n⟩` for `n < n_cols`, restricted to `|0⟩..|n_ph-1⟩`.
pub fn displaced_fock_columns(alpha: C64, n_cols: usize, cfg: &SpaceConfig) -> DMatrix<C64> {
    let n_ph = cfg.n_ph();
    let n_cols = n_cols.min(n_ph);
    let x = alpha.norm_sqr();
    if x == 0.0 {
        return DMatrix::identity(n_ph, n_cols);
    }
    let amps = laguerre_amplitudes(x, n_ph, n_cols);
    let phase = C64::from_polar(1.0, alpha.arg());
    // powers of e^{iφ} and of -e^{-iφ}
    let mut up = Vec::with_capacity(n_ph);
    let mut down = Vec::with_capacity(n_ph);
    let mut pu = ONE;
    let mut pd = ONE;
    let minus_conj = -phase.conj();
    for _ in 0..n_ph {
        up.push(pu);
        down.push(pd);
        pu *= phase;
        pd *= minus_conj;
    }
    DMatrix::from_fn(n_ph, n_cols, |m, n| {
        if m >= n {
            up[m - n] * amps[m - n][n]
        } else {
            down[n - m] * amps[n - m][m]
        }
    })
}

/// Displacement operator `D(α) = exp(α a† - α* a)` on the truncated space,
/// from closed-form associated-Laguerre matrix elements.
pub fn displacement(alpha: C64, cfg: &SpaceConfig) -> Result<Operator> {
    let matrix = displaced_fock_columns(alpha, cfg.n_ph(), cfg);
    let leak = 1.0 - matrix.column(0).norm_squared();
    if leak.abs() > cfg.tail_tol() {
        return Err(Error::Truncation(format!(
            "|⟨0|D†D|0⟩ - 1| = {leak:.3e} exceeds tail_tol {:.1e} (|α|² = {:.3}, n_ph = {})",
            cfg.tail_tol(),
            alpha.norm_sqr(),
            cfg.n_ph()
        )));
    }
    Ok(Operator { matrix })
}

/// Bose-Einstein populations `p_n = n̄ⁿ/(1+n̄)^{n+1}` for `n < len`.
pub fn thermal_populations(nbar: f64, len: usize) -> Vec<f64> {
    if nbar <= 0.0 {
        let mut p = vec![0.0; len];
        if len > 0 {
            p[0] = 1.0;
        }
        return p;
    }
    let ln_ratio = (nbar / (1.0 + nbar)).ln();
    let norm = 1.0 / (1.0 + nbar);
    (0..len).map(|n| norm * (n as f64 * ln_ratio).exp()).collect()
}

/// Probability of levels `n >= start` in the untruncated thermal distribution.
pub fn thermal_tail(nbar: f64, start: usize) -> f64 {
    if nbar <= 0.0 {
        return if start == 0 { 1.0 } else { 0.0 };
    }
    (start as f64 * (nbar / (1.0 + nbar)).ln()).exp()
}

/// Thermal state with mean occupation `nbar`; populations are not
/// renormalized, and the lost tail is kept as `trace_deficit`.
pub fn thermal_state(nbar: f64, cfg: &SpaceConfig) -> DensityOperator {
    let n = cfg.n_ph();
    let p = thermal_populations(nbar, n);
    let matrix = DMatrix::from_diagonal(&DVector::from_fn(n, |k, _| C64::from(p[k])));
    DensityOperator { matrix, trace_deficit: thermal_tail(nbar, n) }
}

/// Coherently displaced thermal state `D(α) w(n̄) D†(α)`.
pub fn displaced_thermal(alpha: C64, nbar: f64, cfg: &SpaceConfig) -> Result<DensityOperator> {
    let n = cfg.n_ph();
    let p = thermal_populations(nbar, n);
    let d = displaced_fock_columns(alpha, n, cfg);
    let mut weighted = d.clone();
    let mut leak = 0.0;
    for (k, mut col) in weighted.column_iter_mut().enumerate() {
        leak += p[k] * (1.0 - col.norm_squared()).max(0.0);
        col *= C64::from(p[k]);
    }
    if leak > cfg.tail_tol() {
        return Err(Error::Truncation(format!(
            "displaced thermal state loses {leak:.3e} > tail_tol {:.1e} to truncation (n0 = {:.3}, nbar = {nbar}, n_ph = {n})",
            cfg.tail_tol(),
            alpha.norm_sqr()
        )));
    }
    let matrix = weighted * d.adjoint();
    let trace_deficit = 1.0 - matrix.trace().re;
    Ok(DensityOperator { matrix, trace_deficit })
}

/// Qubit state `(I + r·σ)/2` from a Bloch vector in the `{|e⟩, |g⟩}` basis,
/// with `σ_z = |e⟩⟨e| - |g⟩⟨g|`.
pub fn qubit_from_bloch(r: [f64; 3]) -> Result<DensityOperator> {
    let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if len > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("Bloch vector length {len} exceeds 1")));
    }
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.5 * (1.0 + r[2]), 0.0),
            C64::new(0.5 * r[0], -0.5 * r[1]),
            C64::new(0.5 * r[0], 0.5 * r[1]),
            C64::new(0.5 * (1.0 - r[2]), 0.0),
        ],
    );
    Ok(DensityOperator { matrix: m, trace_deficit: 0.0 })
}

/// Bloch vector of a qubit density operator.
pub fn bloch_vector(rho_q: &DensityOperator) -> [f64; 3] {
    let c = rho_q.get(EXCITED, GROUND);
    [2.0 * c.re, -2.0 * c.im, (rho_q.get(EXCITED, EXCITED) - rho_q.get(GROUND, GROUND)).re]
}

/// Product state `ρ_Q ⊗ ρ_C` as a dense joint state.
pub fn tensor(q: &DensityOperator, c: &DensityOperator) -> Result<JointState> {
    if q.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: q.dim() });
    }
    let cfg = SpaceConfig::new(c.dim())?;
    let n = c.dim();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..2 {
        for b in 0..2 {
            let qab = q.get(a, b);
            if qab == ZERO {
                continue;
            }
            m.view_mut((a * n, b * n), (n, n)).copy_from(&(c.matrix() * qab));
        }
    }
    Ok(JointState::from_dense(m, cfg))
}

/// Reduced qubit state `Tr_C ρ`.
pub fn partial_trace_cavity(state: &JointState) -> DensityOperator {
    let n = state.cfg().n_ph();
    let mut out = DMatrix::zeros(2, 2);
    match state.representation() {
        Representation::Dense(m) => {
            for a in 0..2 {
                for b in 0..2 {
                    let mut acc = ZERO;
                    for k in 0..n {
                        acc += m[(a * n + k, b * n + k)];
                    }
                    out[(a, b)] = acc;
                }
            }
        }
        Representation::Branches(branches) => {
            for br in branches {
                let v = &br.vector;
                for a in 0..2 {
                    for b in a..2 {
                        let va = v.rows(a * n, n);
                        let vb = v.rows(b * n, n);
                        // ⟨b-part|a-part⟩ gives ρ_ab
                        let z = vb.dotc(&va) * br.weight;
                        out[(a, b)] += z;
                        if a != b {
                            out[(b, a)] += z.conj();
                        }
                    }
                }
            }
        }
    }
    DensityOperator::from_parts(out, state.trace_deficit())
}

/// Reduced cavity state `Tr_Q ρ`.
pub fn partial_trace_qubit(state: &JointState) -> DensityOperator {
    let n = state.cfg().n_ph();
    let out = match state.representation() {
        Representation::Dense(m) => m.view((0, 0), (n, n)) + m.view((n, n), (n, n)),
        Representation::Branches(branches) => {
            let mut acc = DMatrix::zeros(n, n);
            for br in branches {
                for q in 0..2 {
                    let v = br.vector.rows(q * n, n);
                    acc.gerc(C64::from(br.weight), &v, &v, ONE);
                }
            }
            acc
        }
    };
    DensityOperator::from_parts(out, state.trace_deficit())
}

/// `⟨a⟩`, `⟨a²⟩` and `⟨a†a⟩` of a cavity state.
pub fn cavity_moments(rho_c: &DensityOperator) -> CavityMoments {
    let m = rho_c.matrix();
    let n = rho_c.dim();
    let mut mean_a = ZERO;
    let mut mean_a2 = ZERO;
    let mut mean_n = 0.0;
    for k in 0..n {
        let kf = k as f64;
        mean_n += kf * m[(k, k)].re;
        if k >= 1 {
            mean_a += m[(k, k - 1)] * kf.sqrt();
        }
        if k >= 2 {
            mean_a2 += m[(k, k - 2)] * (kf * (kf - 1.0)).sqrt();
        }
    }
    CavityMoments { mean_a, mean_a2, mean_n }
}

/// Quadrature covariance matrix from the first and second moments.
pub fn covariance(mo: &CavityMoments) -> CovarianceMatrix {
    let (ar, ai) = (mo.mean_a.re, mo.mean_a.im);
    CovarianceMatrix {
        var_q: mo.mean_a2.re + mo.mean_n + 0.5 - 2.0 * ar * ar,
        var_p: -mo.mean_a2.re + mo.mean_n + 0.5 - 2.0 * ai * ai,
        cov_qp: mo.mean_a2.im - 2.0 * ar * ai,
    }
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
