//! Thermodynamic bookkeeping for autonomous machines.
//!
//! Heat is the negative variation of the *thermal energy*, the energy of the
//! unique thermal state with the same von Neumann entropy as the actual
//! reduced state; work is the remaining, isoentropic part of the energy
//! change. With `ħ = ω₀ = 1` the thermal energy of the qubit is its effective
//! excited population and the thermal energy of the cavity is its effective
//! mean occupation.
//!
//! Sign convention: `Q_j > 0` (`W_j > 0`) means subsystem `j` provided heat
//! (work) to the rest, so `W_j + Q_j + ΔE_j = 0`.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

use crate::dynamics::{JointState, Representation};
use crate::error::{Error, Result};
use crate::fock::{self, hermitian_eigenvalues, CovarianceMatrix, DensityOperator, C64, EXCITED, GROUND};

/// Eigenvalues in `[-NEG_EIG_TOL, 0)` count as zero in entropy sums.
pub const NEG_EIG_TOL: f64 = 1e-10;

/// `-Σ λ ln λ` with the clipping rule of [`NEG_EIG_TOL`].
pub fn entropy_from_eigenvalues(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -NEG_EIG_TOL {
            return Err(Error::Domain(format!("negative eigenvalue {l:.3e} in density operator")));
        }
        let l = l.min(1.0);
        if l > 0.0 {
            s -= l * l.ln();
        }
    }
    Ok(s)
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    if rho.dim() == 2 {
        return entropy_from_eigenvalues(&qubit_eigenvalues(rho.matrix()));
    }
    entropy_from_eigenvalues(&rho.eigenvalues())
}

fn qubit_eigenvalues(m: &DMatrix<C64>) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let half = 0.5 * (a - d);
    let r = (half * half + m[(0, 1)].norm_sqr()).sqrt();
    let mean = 0.5 * (a + d);
    [mean + r, mean - r]
}

/// Entropy of `ρ = V V†` from the spectrum of the Gram matrix `V† V`.
pub fn gram_entropy(factor: &DMatrix<C64>) -> Result<f64> {
    let gram = factor.ad_mul(factor);
    entropy_from_eigenvalues(&hermitian_eigenvalues(&gram))
}

/// Binary entropy `-p ln p - (1-p) ln(1-p)`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Entropy of a thermal oscillator with mean occupation `x`:
/// `(1+x) ln(1+x) - x ln x`.
pub fn bose_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    // same as (1+x) ln(1+x) - x ln x without the cancellation at large x
    x.ln_1p() + x * x.recip().ln_1p()
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, target: f64) -> f64 {
    // f increasing on [lo, hi]
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Excited population `p ≤ 1/2` of the qubit thermal state with entropy `s`.
pub fn qubit_effective_occupation(s: f64) -> Result<f64> {
    if s > LN_2 + 1e-9 {
        return Err(Error::Domain(format!("qubit entropy {s} exceeds ln 2")));
    }
    if s <= 0.0 {
        return Ok(0.0);
    }
    if s >= LN_2 {
        return Ok(0.5);
    }
    Ok(bisect(0.0, 0.5, binary_entropy, s))
}

/// Mean occupation of the oscillator thermal state with entropy `s`.
pub fn cavity_effective_occupation(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    bisect(0.0, s.exp().max(1.0), bose_entropy, s)
}

/// `β(n̄) = ln(1 + 1/n̄)` in units of `1/ħω₀`; infinite for `n̄ = 0`.
pub fn inverse_temperature(nbar: f64) -> f64 {
    if nbar <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 + 1.0 / nbar).ln()
    }
}

/// `h(x) = (x + 1/2) ln(x + 1/2) - (x - 1/2) ln(x - 1/2)`, `h(1/2) = 0`.
pub fn symplectic_entropy(x: f64) -> f64 {
    bose_entropy(x - 0.5)
}

/// Entropy of a single-mode Gaussian state, `h(√det V)`.
pub fn gaussian_entropy(v: &CovarianceMatrix) -> Result<f64> {
    let det = v.det();
    if det < 0.25 - 1e-6 {
        return Err(Error::Domain(format!("covariance determinant {det} violates the uncertainty bound")));
    }
    Ok(symplectic_entropy(det.max(0.25).sqrt()))
}

/// `I = S_C + S_Q - S_QC`.
pub fn mutual_information(s_q: f64, s_c: f64, s_qc: f64) -> f64 {
    s_c + s_q - s_qc
}

/// Raw observables of a joint state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub gt: f64,
    pub rho_q: DensityOperator,
    pub mean_n: f64,
    pub mean_a: C64,
    pub mean_a2: C64,
    pub s_q: f64,
    pub s_c: f64,
    pub excitation: f64,
}

impl Snapshot {
    pub fn p_e(&self) -> f64 {
        self.rho_q.get(EXCITED, EXCITED).re
    }

    pub fn c_eg(&self) -> C64 {
        self.rho_q.get(EXCITED, GROUND)
    }

    pub fn covariance(&self) -> CovarianceMatrix {
        fock::covariance(&fock::CavityMoments { mean_a: self.mean_a, mean_a2: self.mean_a2, mean_n: self.mean_n })
    }
}

/// Measures the reduced states, moments and entropies of `state`.
pub fn observe(state: &JointState, gt: f64) -> Result<Snapshot> {
    let rho_q = fock::partial_trace_cavity(state);
    let s_q = von_neumann_entropy(&rho_q)?;
    let excitation = crate::dynamics::conserved_excitation(state);
    let n = state.cfg().n_ph();
    let (mean_n, mean_a, mean_a2, s_c) = match state.representation() {
        Representation::Dense(_) => {
            let rho_c = fock::partial_trace_qubit(state);
            let mo = fock::cavity_moments(&rho_c);
            (mo.mean_n, mo.mean_a, mo.mean_a2, von_neumann_entropy(&rho_c)?)
        }
        Representation::Branches(bs) => {
            let mut factor = DMatrix::<C64>::zeros(n, 2 * bs.len());
            let (mut mean_n, mut mean_a, mut mean_a2) = (0.0, C64::from(0.0), C64::from(0.0));
            for (i, b) in bs.iter().enumerate() {
                let sw = b.weight.sqrt();
                for q in 0..2 {
                    let v = b.vector.rows(q * n, n);
                    factor.column_mut(2 * i + q).copy_from(&(v * C64::from(sw)));
                    for k in 1..n {
                        let kf = k as f64;
                        let vk = v[k];
                        mean_n += b.weight * kf * vk.norm_sqr();
                        mean_a += v[k - 1].conj() * vk * (b.weight * kf.sqrt());
                        if k >= 2 {
                            mean_a2 += v[k - 2].conj() * vk * (b.weight * (kf * (kf - 1.0)).sqrt());
                        }
                    }
                }
            }
            (mean_n, mean_a, mean_a2, gram_entropy(&factor)?)
        }
    };
    Ok(Snapshot { gt, rho_q, mean_n, mean_a, mean_a2, s_q, s_c, excitation })
}

/// Entropy of the full joint state.
pub fn joint_entropy(state: &JointState) -> Result<f64> {
    match state.representation() {
        Representation::Dense(m) => entropy_from_eigenvalues(&hermitian_eigenvalues(m)),
        Representation::Branches(bs) => {
            let d = state.cfg().joint_dim();
            let mut factor = DMatrix::<C64>::zeros(d, bs.len());
            for (i, b) in bs.iter().enumerate() {
                factor.column_mut(i).copy_from(&(&b.vector * C64::from(b.weight.sqrt())));
            }
            gram_entropy(&factor)
        }
    }
}

/// Heat and work provided by each subsystem over `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatWork {
    pub q_q: f64,
    pub w_q: f64,
    pub q_c: f64,
    pub w_c: f64,
}

/// One row of the thermodynamic ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoRecord {
    pub gt: f64,
    pub theta: f64,
    pub p_e: f64,
    pub c_eg: C64,
    pub e_q: f64,
    pub e_c: f64,
    pub s_q: f64,
    pub s_c: f64,
    pub s_qc: f64,
    pub i_qc: f64,
    pub p_eff_q: f64,
    pub nbar_eff_c: f64,
    pub eth_q: f64,
    pub eth_c: f64,
    pub q_q: f64,
    pub q_c: f64,
    pub w_q: f64,
    pub w_c: f64,
    pub sigma_q: f64,
    pub demon_lhs: f64,
    pub demon_rhs: f64,
    pub mean_a: C64,
    pub cross_trace: C64,
    pub branch_overlap: f64,
    pub sqrt_det_v: f64,
    pub excitation: f64,
    pub rho_q: [[C64; 2]; 2],
}

impl ThermoRecord {
    pub fn qubit_state(&self) -> DensityOperator {
        let m = DMatrix::from_row_slice(2, 2, &[self.rho_q[0][0], self.rho_q[0][1], self.rho_q[1][0], self.rho_q[1][1]]);
        DensityOperator::from_parts(m, 0.0)
    }
}

/// `W_j = -ΔE_j - Q_j` with `Q_j = -ΔE_j^th`, relative to `start`.
pub fn heat_and_work(start: &ThermoRecord, now: &ThermoRecord) -> HeatWork {
    let q_q = -(now.eth_q - start.eth_q);
    let q_c = -(now.eth_c - start.eth_c);
    HeatWork { q_q, w_q: -(now.e_q - start.e_q) - q_q, q_c, w_c: -(now.e_c - start.e_c) - q_c }
}

/// Entropy production `σ_Q = ΔS_Q - β_C(0) Q_C`; NaN when `β_C(0)` is infinite.
pub fn clausius_check(start: &ThermoRecord, now: &ThermoRecord, beta_c0: f64) -> f64 {
    let q_c = -(now.eth_c - start.eth_c);
    if !beta_c0.is_finite() {
        return if q_c == 0.0 { now.s_q - start.s_q } else { f64::NAN };
    }
    now.s_q - start.s_q - beta_c0 * q_c
}

/// Modified Clausius inequality with the information held at `reference`:
/// returns `(ΔS_Q - β_C(t₀) Q_C(t₀→t), ΔI(t₀→t))`.
pub fn demon_check(reference: &ThermoRecord, now: &ThermoRecord) -> (f64, f64) {
    let beta_ref = inverse_temperature(reference.nbar_eff_c);
    let q_c = -(now.eth_c - reference.eth_c);
    let lhs = now.s_q - reference.s_q - if q_c == 0.0 { 0.0 } else { beta_ref * q_c };
    (lhs, now.i_qc - reference.i_qc)
}

fn base_record(n0: f64, s_qc: f64, snap: &Snapshot, cross_trace: C64, branch_overlap: f64) -> Result<ThermoRecord> {
    let p_eff_q = qubit_effective_occupation(snap.s_q.min(LN_2))?;
    let nbar_eff_c = cavity_effective_occupation(snap.s_c);
    let rq = snap.rho_q.matrix();
    Ok(ThermoRecord {
        gt: snap.gt,
        theta: 2.0 * snap.gt * n0.sqrt(),
        p_e: snap.p_e(),
        c_eg: snap.c_eg(),
        e_q: snap.p_e(),
        e_c: snap.mean_n,
        s_q: snap.s_q,
        s_c: snap.s_c,
        s_qc: s_qc,
        i_qc: mutual_information(snap.s_q, snap.s_c, s_qc),
        p_eff_q,
        nbar_eff_c,
        eth_q: p_eff_q,
        eth_c: nbar_eff_c,
        q_q: 0.0,
        q_c: 0.0,
        w_q: 0.0,
        w_c: 0.0,
        sigma_q: 0.0,
        demon_lhs: 0.0,
        demon_rhs: 0.0,
        mean_a: snap.mean_a,
        cross_trace,
        branch_overlap,
        sqrt_det_v: snap.covariance().sqrt_det(),
        excitation: snap.excitation,
        rho_q: [[rq[(0, 0)], rq[(0, 1)]], [rq[(1, 0)], rq[(1, 1)]]],
    })
}

/// Turns snapshots into ledger rows relative to the `t = 0` snapshot.
#[derive(Debug, Clone)]
pub struct Ledger {
    n0: f64,
    beta_c0: f64,
    s_qc: f64,
    initial: ThermoRecord,
}

impl Ledger {
    /// `s_qc` is the (conserved) joint entropy of the initial product state.
    pub fn new(n0: f64, nbar: f64, s_qc: f64, initial: &Snapshot, cross_trace: C64, branch_overlap: f64) -> Result<Self> {
        let initial = base_record(n0, s_qc, initial, cross_trace, branch_overlap)?;
        Ok(Self { n0, beta_c0: inverse_temperature(nbar), s_qc, initial })
    }

    pub fn beta_c0(&self) -> f64 {
        self.beta_c0
    }

    pub fn s_qc(&self) -> f64 {
        self.s_qc
    }

    pub fn initial(&self) -> &ThermoRecord {
        &self.initial
    }

    /// Full row with heat, work and entropy production counted from `t = 0`.
    pub fn record(&self, snap: &Snapshot, cross_trace: C64, branch_overlap: f64) -> Result<ThermoRecord> {
        let mut rec = base_record(self.n0, self.s_qc, snap, cross_trace, branch_overlap)?;
        let hw = heat_and_work(&self.initial, &rec);
        rec.q_q = hw.q_q;
        rec.w_q = hw.w_q;
        rec.q_c = hw.q_c;
        rec.w_c = hw.w_c;
        rec.sigma_q = clausius_check(&self.initial, &rec, self.beta_c0);
        Ok(rec)
    }

    /// Fills the demon-inequality columns relative to `reference` (taken at `t_c`).
    pub fn attach_demon(records: &mut [ThermoRecord], reference: &ThermoRecord) {
        for r in records.iter_mut() {
            let (lhs, rhs) = demon_check(reference, r);
            r.demon_lhs = lhs;
            r.demon_rhs = rhs;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    use crate::fock::{thermal_state, SpaceConfig};

    #[test]
    fn entropy_of_reference_states() {
        let psi = DVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        assert_abs_diff_eq!(von_neumann_entropy(&DensityOperator::pure(&psi).unwrap()).unwrap(), 0.0, epsilon = 1e-9);

        let mixed = fock::qubit_from_bloch([0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&mixed).unwrap(), LN_2, epsilon = 1e-15);

        let th = thermal_state(1.0, &SpaceConfig::new(80).unwrap());
        assert_abs_diff_eq!(von_neumann_entropy(&th).unwrap(), 2.0 * LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(bose_entropy(1.0), 1.38629, epsilon = 1e-5);
    }

    #[test]
    fn negative_eigenvalues() {
        assert_eq!(entropy_from_eigenvalues(&[1.0, -5e-11]).unwrap(), 0.0);
        assert!(matches!(entropy_from_eigenvalues(&[1.0, -1e-6]), Err(Error::Domain(_))));
    }

    #[test]
    fn qubit_inversion_endpoints() {
        assert_eq!(qubit_effective_occupation(0.0).unwrap(), 0.0);
        assert_eq!(qubit_effective_occupation(LN_2).unwrap(), 0.5);
        assert!(qubit_effective_occupation(LN_2 + 1e-6).is_err());
        assert_eq!(qubit_effective_occupation(LN_2 + 1e-10).unwrap(), 0.5);
    }

    #[test]
    fn cavity_inversion_reference_values() {
        assert_eq!(cavity_effective_occupation(0.0), 0.0);
        assert_abs_diff_eq!(cavity_effective_occupation(2.0 * LN_2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn symplectic_entropy_limits() {
        assert_eq!(symplectic_entropy(0.5), 0.0);
        let v = CovarianceMatrix { var_q: 1.5, var_p: 1.5, cov_qp: 0.0 };
        assert_abs_diff_eq!(gaussian_entropy(&v).unwrap(), 2.0 * LN_2, epsilon = 1e-14);
        let bad = CovarianceMatrix { var_q: 0.2, var_p: 0.2, cov_qp: 0.0 };
        assert!(gaussian_entropy(&bad).is_err());
    }

    #[test]
    fn gram_entropy_matches_dense() {
        // three random-ish vectors in dimension 6
        let f = DMatrix::from_fn(6, 3, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 * 0.1, ((i + 2 * j) % 3) as f64 * 0.05));
        let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let f = f / C64::from(norm);
        let rho = &f * f.adjoint();
        let dense = entropy_from_eigenvalues(&hermitian_eigenvalues(&rho)).unwrap();
        assert_abs_diff_eq!(gram_entropy(&f).unwrap(), dense, epsilon = 1e-12);
    }

    #[test]
    fn product_state_has_no_mutual_information() {
        let cfg = SpaceConfig::new(30).unwrap();
        let q = fock::qubit_from_bloch([0.3, 0.0, 0.2]).unwrap();
        let c = fock::displaced_thermal(C64::new(1.0, 0.5), 0.4, &cfg).unwrap();
        let joint = fock::tensor(&q, &c).unwrap();
        let snap = observe(&joint, 0.0).unwrap();
        let sqc = joint_entropy(&joint).unwrap();
        assert_abs_diff_eq!(mutual_information(snap.s_q, snap.s_c, sqc), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn first_record_is_reference() {
        let cfg = SpaceConfig::new(60).unwrap();
        let q = fock::qubit_from_bloch([0.0, 0.0, 1.0]).unwrap();
        let c = fock::displaced_thermal(C64::new(1.0, 0.0), 1.0, &cfg).unwrap();
        let joint = fock::tensor(&q, &c).unwrap();
        let snap = observe(&joint, 0.0).unwrap();
        let ledger = Ledger::new(1.0, 1.0, snap.s_q + snap.s_c, &snap, C64::from(1.0), 1.0 / 3.0).unwrap();
        let r = ledger.record(&snap, C64::from(1.0), 1.0 / 3.0).unwrap();
        assert_eq!(&r, ledger.initial());
        assert_eq!((r.q_c, r.w_c, r.q_q, r.w_q, r.sigma_q), (0.0, 0.0, 0.0, 0.0, 0.0));
    }
}
