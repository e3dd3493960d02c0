//! Closed-form large-`n₀` predictions for the three dynamical regimes.
//!
//! `θ = 2gt√n₀` is the Bloch rotation angle of the unitary regime. All
//! formulas are written for `φ₀ = 0` and rotated to a general field phase
//! with the symmetry `e^{iφ₀(a†a + σ₊σ₋)}` of the resonant coupling.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::fock::C64;
use crate::thermo::{bose_entropy, inverse_temperature};

/// Leading-order predictions of the unitary (work-source) regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionPrediction {
    pub theta: f64,
    pub n0: f64,
    pub nbar: f64,
    pub phi0: f64,
    pub p_e0: f64,
    /// First-order coefficient: `P_e ≈ p_e0 + dp_e / n₀`.
    pub dp_e: f64,
    /// Second-order coefficient of `P_e`.
    pub dp_e2: f64,
    pub c_eg0: C64,
    /// First-order coefficient: `C_eg ≈ c_eg0 + dc_eg / n₀`.
    pub dc_eg: C64,
    pub s_q_pred: f64,
    pub mean_a_pred: C64,
    pub mean_a2_pred: C64,
    pub mean_n_pred: f64,
    pub sqrt_det_v_pred: f64,
    /// First-order heat `-X/(16 n₀)`.
    pub q_c_pred: f64,
    /// Heat from the Gaussian determinant, `(n̄+½)(1 - √(1 + X/(4n₀(2n̄+1))))`.
    pub q_c_resummed: f64,
    pub de_c_pred: f64,
    pub w_c_pred: f64,
    pub sigma_q_pred: f64,
    /// False once `θ/√n₀ > 1`, where the unitary regime no longer applies.
    pub valid: bool,
}

impl ExpansionPrediction {
    pub fn p_e(&self) -> f64 {
        self.p_e0 + self.dp_e / self.n0
    }

    pub fn c_eg(&self) -> C64 {
        self.c_eg0 + self.dc_eg / self.n0
    }
}

/// `δP_e(θ, n̄) = -θ((1+2n̄)θ cos θ + (3+2n̄) sin θ)/16`.
pub fn delta_p_e(theta: f64, nbar: f64) -> f64 {
    -theta / 16.0 * ((1.0 + 2.0 * nbar) * theta * theta.cos() + (3.0 + 2.0 * nbar) * theta.sin())
}

/// `δC_eg(θ, n̄)`, the bracketed first-order term so that
/// `C_eg = -e^{iφ₀}(sin θ / 2 + δC_eg / n₀)`.
pub fn delta_c_eg(theta: f64, nbar: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    (-2.0 * theta + (3.0 + 2.0 * nbar) * theta * c - (1.0 + 2.0 * nbar) * (1.0 + theta * theta) * s) / 16.0
}

/// `ε_Q(θ, n̄)`, the first-order qubit impurity.
pub fn epsilon_q(theta: f64, nbar: f64) -> f64 {
    ((1.0 + 2.0 * nbar) * (1.0 + 2.0 * theta * theta - (2.0 * theta).cos()) + 4.0 * theta * theta.sin()) / 32.0
}

/// `X = θ² + sin²θ + 2(1+2n̄) θ sin θ`.
fn heat_kernel(theta: f64, nbar: f64) -> f64 {
    let s = theta.sin();
    theta * theta + s * s + 2.0 * (1.0 + 2.0 * nbar) * theta * s
}

fn mean_a_series(theta: f64, n0: f64, nbar: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let s_half2 = (0.5 * theta).sin().powi(2);
    let t2 = theta * theta;
    let second = -2.0 * s_half2 * (1.0 + t2 / 2.0) + theta / 2.0 * s + nbar * theta * (theta * c - s);
    let third = 13.0 + 5.0 * t2 / 4.0 + 8.0 * nbar * (7.0 + 6.0 * nbar + t2 / 4.0)
        + (-13.0 + 9.0 * t2 / 4.0 + 8.0 * nbar * (-7.0 - 6.0 * nbar + (4.0 + 3.0 * nbar) * t2 / 4.0)) * c
        - 2.0 * (5.0 + nbar * (19.0 + 15.0 * nbar)) * theta * s;
    n0.sqrt() * (1.0 + s_half2 / (2.0 * n0) + second / (16.0 * n0 * n0) + third / (32.0 * n0.powi(3)))
}

fn mean_a2_series(theta: f64, n0: f64, nbar: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let s_half2 = (0.5 * theta).sin().powi(2);
    let t2 = theta * theta;
    let second = (1.0 + 2.0 * nbar) * ((1.0 + t2 / 4.0) * c - 1.0) + (3.0 + 2.0 * nbar) * theta / 4.0 * s - t2 / 2.0;
    let third = 5.0 + 3.0 * t2 / 4.0 + 6.0 * nbar * (4.0 + 4.0 * nbar + t2 / 4.0)
        + (-5.0 + t2 + 3.0 * nbar * (-8.0 * (1.0 + nbar) + (5.0 + 4.0 * nbar) * t2 / 4.0)) * c
        - (17.0 + 69.0 * nbar + 60.0 * nbar * nbar) * theta / 4.0 * s;
    n0 * (1.0 + s_half2 / n0 + second / (4.0 * n0 * n0) + third / (4.0 * n0.powi(3)))
}

/// Expansion of the unitary regime for an initially excited qubit.
pub fn unitary_expansion(theta: f64, n0: f64, nbar: f64, phi0: f64) -> ExpansionPrediction {
    let (s, c) = theta.sin_cos();
    let phase = Complex64::from_polar(1.0, phi0);
    let p_e0 = (0.5 * theta).cos().powi(2);
    let dp_e = delta_p_e(theta, nbar);
    let dp_e2 = -theta * (1.0 + nbar) * (1.0 + 2.0 * nbar) * (theta * c - s) / 16.0;
    let c_eg0 = -phase * (0.5 * s);
    let dc_eg = -phase * delta_c_eg(theta, nbar);

    let eps = epsilon_q(theta, nbar);
    let s_q_pred = if eps > 0.0 { eps / n0 * (1.0 - eps.ln() + n0.ln()) } else { 0.0 };

    let x = heat_kernel(theta, nbar);
    let root = (1.0 + x / (4.0 * n0 * (2.0 * nbar + 1.0))).sqrt();
    let sqrt_det_v_pred = (nbar + 0.5) * root;
    let q_c_pred = -x / (16.0 * n0);
    let q_c_resummed = (nbar + 0.5) * (1.0 - root);

    let p_e1 = p_e0 + dp_e / n0;
    let mean_n_pred = nbar + n0 + 1.0 - (p_e1 + dp_e2 / (n0 * n0));
    let de_c_pred = 1.0 - p_e1;
    let w_c_pred = -de_c_pred - q_c_pred;
    let beta = inverse_temperature(nbar);
    let sigma_q_pred = if beta.is_finite() { s_q_pred - beta * q_c_pred } else { f64::NAN };

    ExpansionPrediction {
        theta,
        n0,
        nbar,
        phi0,
        p_e0,
        dp_e,
        dp_e2,
        c_eg0,
        dc_eg,
        s_q_pred,
        mean_a_pred: phase * mean_a_series(theta, n0, nbar),
        mean_a2_pred: phase * phase * mean_a2_series(theta, n0, nbar),
        mean_n_pred,
        sqrt_det_v_pred,
        q_c_pred,
        q_c_resummed,
        de_c_pred,
        w_c_pred,
        sigma_q_pred,
        valid: theta / n0.sqrt() <= 1.0,
    }
}

/// Qubit state vector in the `(e, g)` basis.
pub type QubitVector = [C64; 2];

/// Eigenbasis of the initial effective drive `i(α₀σ₊ - α₀*σ₋)`, ordered so
/// that `φ₀ = 0` gives `(|+_y⟩, |-_y⟩)`.
pub fn measurement_basis(phi0: f64) -> [QubitVector; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let w = Complex64::new(0.0, 1.0) * Complex64::from_polar(h, -phi0);
    [[C64::from(h), w], [C64::from(h), -w]]
}

/// Basis of the measurement branches at time `gt`: `(e^{iφ₀}, ±i e^{∓iε})/√2`
/// with `ε = gt/(2√n₀)`.
pub fn moving_basis(gt: f64, n0: f64, phi0: f64) -> [QubitVector; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let eps = gt / (2.0 * n0.sqrt());
    let top = Complex64::from_polar(h, phi0);
    let i = Complex64::new(0.0, 1.0);
    [[top, i * Complex64::from_polar(h, -eps)], [top, -i * Complex64::from_polar(h, eps)]]
}

/// Conditional field amplitudes `α_± = √n₀ e^{iφ₀} e^{±i gt/(2√n₀)}`.
pub fn conditional_amplitudes(gt: f64, n0: f64, phi0: f64) -> (C64, C64) {
    let r = n0.sqrt();
    let eps = gt / (2.0 * r);
    (Complex64::from_polar(r, phi0 + eps), Complex64::from_polar(r, phi0 - eps))
}

/// Phase `χ = gt(√n₀ + 1/√n₀)` of the diagonal conditional operators.
pub fn chi(gt: f64, n0: f64) -> f64 {
    gt * (n0.sqrt() + 1.0 / n0.sqrt())
}

/// `Tr ρ_C^{+-}(t)` in its finite-`n₀` form, with the thermal factor
/// `exp(-4n₀ n̄ sin²(gt/2√n₀)/(1+n̄)²)`.
pub fn cross_trace_pred(gt: f64, n0: f64, nbar: f64) -> C64 {
    let s2 = (gt / (2.0 * n0.sqrt())).sin().powi(2);
    let phase = chi(gt, n0) + n0 * (gt / n0.sqrt()).sin();
    let decay = -2.0 * n0 * s2 - 4.0 * n0 * nbar / (1.0 + nbar).powi(2) * s2;
    Complex64::from_polar(decay.exp(), phase)
}

/// Same trace evaluated with the thermal characteristic function
/// `Tr[w D(β)] = exp(-|β|²(n̄ + ½))`, i.e. decay `exp(-2n₀(2n̄+1) sin²(gt/2√n₀))`.
pub fn cross_trace_characteristic(gt: f64, n0: f64, nbar: f64) -> C64 {
    let s2 = (gt / (2.0 * n0.sqrt())).sin().powi(2);
    let phase = chi(gt, n0) + n0 * (gt / n0.sqrt()).sin();
    Complex64::from_polar((-2.0 * n0 * (2.0 * nbar + 1.0) * s2).exp(), phase)
}

/// Large-`n₀` limit of [`cross_trace_pred`].
pub fn cross_trace_limit(gt: f64, n0: f64, nbar: f64) -> C64 {
    let g2 = gt * gt;
    let k = nbar / (1.0 + nbar).powi(2);
    let decay = -g2 / 2.0 - g2 * k + k * g2 * g2 / (12.0 * n0);
    Complex64::from_polar(decay.exp(), 2.0 * gt * n0.sqrt())
}

/// `Tr[ρ_C^{++} ρ_C^{--}] = exp(-4n₀ sin²(gt/2√n₀)/(2n̄+1))/(2n̄+1)`.
pub fn branch_overlap_pred(gt: f64, n0: f64, nbar: f64) -> f64 {
    let s2 = (gt / (2.0 * n0.sqrt())).sin().powi(2);
    (-4.0 * n0 * s2 / (2.0 * nbar + 1.0)).exp() / (2.0 * nbar + 1.0)
}

/// Effective qubit Hamiltonian `i(α_ν σ₊ - α_ν* σ₋)` in branch `ν = ±1`,
/// as a row-major 2×2 matrix in the `(e, g)` basis.
pub fn feedback_drive(gt: f64, n0: f64, phi0: f64, branch: i8) -> [[C64; 2]; 2] {
    let (ap, am) = conditional_amplitudes(gt, n0, phi0);
    let a = if branch >= 0 { ap } else { am };
    let i = Complex64::new(0.0, 1.0);
    [[C64::from(0.0), i * a], [-i * a.conj(), C64::from(0.0)]]
}

/// Characteristic times of the feedback and the state both branches reach.
#[derive(Debug, Clone, PartialEq)]
pub struct PurificationSchedule {
    /// Collapse time in units of `1/g`.
    pub t_c: f64,
    /// First purification time `π√n₀`.
    pub t_min: f64,
    /// Entropy minima `(2k-1)π√n₀`, `k = 1..`.
    pub t_k: Vec<f64>,
    /// `(e^{iφ₀}|e⟩ + |g⟩)/√2`.
    pub target_state: QubitVector,
}

pub fn purification_schedule(n0: f64, phi0: f64, count: usize) -> PurificationSchedule {
    let base = PI * n0.sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    PurificationSchedule {
        t_c: 1.0,
        t_min: base,
        t_k: (1..=count).map(|k| (2 * k - 1) as f64 * base).collect(),
        target_state: [Complex64::from_polar(h, phi0), C64::from(h)],
    }
}

/// Targets of the demon analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemonPrediction {
    /// `S_C(t_c) = ln 2 + g(n̄)`.
    pub s_c_tc: f64,
    /// Solution of `g(x) = ln 2 + g(n̄)`.
    pub nbar_tc: f64,
    /// `Q_C = n̄ - n̄(t_c)` on the plateau `t_c ≤ t ≤ t_min`.
    pub q_c_plateau: f64,
    /// Mutual information at `(0, t_c, t_min)`.
    pub i_targets: [f64; 3],
}

pub fn demon_predictions(nbar: f64) -> DemonPrediction {
    let s_c_tc = LN_2 + bose_entropy(nbar);
    let nbar_tc = crate::thermo::cavity_effective_occupation(s_c_tc);
    DemonPrediction { s_c_tc, nbar_tc, q_c_plateau: nbar - nbar_tc, i_targets: [0.0, LN_2, 0.0] }
}

/// Measurement and feedback quantities at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePrediction {
    pub alpha_plus: C64,
    pub alpha_minus: C64,
    pub chi: f64,
    pub cross_trace_pred: C64,
    pub cross_trace_limit: C64,
    pub branch_overlap_pred: f64,
    pub measurement_basis: [QubitVector; 2],
    pub h_eff_plus: [[C64; 2]; 2],
    pub h_eff_minus: [[C64; 2]; 2],
    pub schedule: PurificationSchedule,
    pub demon: DemonPrediction,
}

pub fn regime_prediction(gt: f64, n0: f64, nbar: f64, phi0: f64) -> RegimePrediction {
    let (alpha_plus, alpha_minus) = conditional_amplitudes(gt, n0, phi0);
    RegimePrediction {
        alpha_plus,
        alpha_minus,
        chi: chi(gt, n0),
        cross_trace_pred: cross_trace_pred(gt, n0, nbar),
        cross_trace_limit: cross_trace_limit(gt, n0, nbar),
        branch_overlap_pred: branch_overlap_pred(gt, n0, nbar),
        measurement_basis: measurement_basis(phi0),
        h_eff_plus: feedback_drive(gt, n0, phi0, 1),
        h_eff_minus: feedback_drive(gt, n0, phi0, -1),
        schedule: purification_schedule(n0, phi0, 3),
        demon: demon_predictions(nbar),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dot(a: &QubitVector, b: &QubitVector) -> C64 {
        a[0].conj() * b[0] + a[1].conj() * b[1]
    }

    #[test]
    fn expansion_at_zero_angle() {
        let p = unitary_expansion(0.0, 100.0, 1.0, 0.0);
        assert_eq!(p.p_e(), 1.0);
        assert_eq!(p.c_eg(), C64::from(0.0));
        assert_eq!(p.q_c_pred, 0.0);
        assert_eq!(p.sqrt_det_v_pred, 1.5);
        assert_abs_diff_eq!(p.mean_a_pred.re, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean_a2_pred.re, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean_n_pred, 101.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_at_half_turn() {
        assert_abs_diff_eq!(delta_p_e(PI, 1.0), 3.0 * PI * PI / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(delta_p_e(PI, 1.0), 1.8506, epsilon = 1e-4);
        assert_abs_diff_eq!(delta_c_eg(PI, 1.0), -7.0 * PI / 16.0, epsilon = 1e-12);
        let p = unitary_expansion(PI, 500.0, 1.0, 0.0);
        assert_abs_diff_eq!(p.q_c_pred, -PI * PI / 8000.0, epsilon = 1e-15);
        assert!((p.q_c_pred + 1.234e-3).abs() < 1e-6);
        assert_abs_diff_eq!(p.w_c_pred, -p.de_c_pred - p.q_c_pred, epsilon = 1e-15);
    }

    #[test]
    fn validity_flag() {
        assert!(unitary_expansion(2.0 * PI, 100.0, 1.0, 0.0).valid);
        assert!(!unitary_expansion(12.0, 100.0, 1.0, 0.0).valid);
    }

    #[test]
    fn field_phase_rotates_coherence() {
        let a = unitary_expansion(1.3, 50.0, 0.5, 0.0);
        let b = unitary_expansion(1.3, 50.0, 0.5, 0.7);
        let ph = Complex64::from_polar(1.0, 0.7);
        assert_abs_diff_eq!((b.c_eg() - a.c_eg() * ph).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((b.mean_a2_pred - a.mean_a2_pred * ph * ph).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(a.p_e(), b.p_e());
    }

    #[test]
    fn measurement_basis_diagonalizes_initial_drive() {
        for phi in [0.0, 0.4, PI / 2.0, PI, 2.5] {
            let basis = measurement_basis(phi);
            assert_abs_diff_eq!(dot(&basis[0], &basis[1]).norm(), 0.0, epsilon = 1e-15);
            let h = feedback_drive(0.0, 9.0, phi, 1);
            for v in &basis {
                let hv = [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]];
                let lam = dot(v, &hv);
                let resid = [hv[0] - lam * v[0], hv[1] - lam * v[1]];
                assert!(resid[0].norm() + resid[1].norm() < 1e-10);
                assert_abs_diff_eq!(lam.re.abs(), 3.0, epsilon = 1e-12);
            }
        }
        let b0 = measurement_basis(0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!((b0[0][1] - Complex64::new(0.0, h)).norm(), 0.0, epsilon = 1e-15);
        // half-turn swaps the pair up to phases
        let bp = measurement_basis(PI);
        assert_abs_diff_eq!(dot(&bp[0], &b0[1]).norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dot(&bp[1], &b0[0]).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn regime_values_at_origin() {
        let (ap, am) = conditional_amplitudes(0.0, 100.0, 0.0);
        assert_eq!((ap, am), (C64::from(10.0), C64::from(10.0)));
        assert_abs_diff_eq!(cross_trace_pred(0.0, 100.0, 1.0).norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(branch_overlap_pred(0.0, 100.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cross_trace_limit(1.0, 1e12, 1.0).norm(), 0.472367, epsilon = 1e-6);
    }

    #[test]
    fn amplitudes_stay_on_circle_and_meet() {
        let n0 = 64.0;
        let s = purification_schedule(n0, 0.0, 3);
        for gt in [0.0, 1.0, 7.3, s.t_min] {
            let (ap, am) = conditional_amplitudes(gt, n0, 0.3);
            assert_abs_diff_eq!(ap.norm(), 8.0, epsilon = 1e-12);
            assert_abs_diff_eq!(am.norm(), 8.0, epsilon = 1e-12);
        }
        // at t_min the branch qubit states meet while the fields are opposite
        let (ap, am) = conditional_amplitudes(s.t_min, n0, 0.0);
        assert_abs_diff_eq!((ap + am).norm(), 0.0, epsilon = 1e-12);
        let mb = moving_basis(s.t_min, n0, 0.0);
        assert_abs_diff_eq!(dot(&mb[0], &mb[1]).norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!((mb[0][1] - mb[0][0]).norm(), 0.0, epsilon = 1e-12);
        let (ap, am) = conditional_amplitudes(2.0 * s.t_min, n0, 0.0);
        assert_abs_diff_eq!((ap - am).norm(), 0.0, epsilon = 1e-12);
        assert_eq!(s.t_k.len(), 3);
        assert_abs_diff_eq!(s.t_k[2], 5.0 * PI * 8.0, epsilon = 1e-12);
    }

    #[test]
    fn target_state_for_zero_phase_is_plus_x() {
        let s = purification_schedule(100.0, 0.0, 1);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(s.target_state, [C64::from(h), C64::from(h)]);
        assert_eq!(s.t_c, 1.0);
    }

    #[test]
    fn demon_targets() {
        let d = demon_predictions(1.0);
        assert_abs_diff_eq!(d.s_c_tc, 3.0 * LN_2, epsilon = 1e-14);
        assert_abs_diff_eq!(d.nbar_tc, 2.457213781448022, epsilon = 1e-10);
        assert_abs_diff_eq!(demon_predictions(0.0).nbar_tc, 0.2938153733404155, epsilon = 1e-10);
        assert!(d.nbar_tc >= 1.0 && d.nbar_tc <= 2.5);
        assert_abs_diff_eq!(d.q_c_plateau, 1.0 - d.nbar_tc, epsilon = 1e-15);
        for nbar in [0.0, 0.1, 0.5, 2.0, 10.0] {
            let d = demon_predictions(nbar);
            assert!(d.nbar_tc >= nbar && d.nbar_tc <= 2.0 * nbar + 0.5, "{nbar}: {}", d.nbar_tc);
        }
    }

    #[test]
    fn cross_trace_forms_agree_at_zero_temperature() {
        for gt in [0.3, 1.0, 2.5] {
            let a = cross_trace_pred(gt, 100.0, 0.0);
            let b = cross_trace_characteristic(gt, 100.0, 0.0);
            assert_abs_diff_eq!((a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn cross_trace_decays_monotonically() {
        for nbar in [0.0, 0.5, 1.0, 3.0] {
            let mut prev = f64::INFINITY;
            for i in 0..=300 {
                let v = cross_trace_pred(i as f64 * 0.01, 100.0, nbar).norm();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }
}
