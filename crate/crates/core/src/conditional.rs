//! Exact conditional cavity operators of the measurement branches.
//!
//! For the measurement basis `{|+⟩, |-⟩}` the joint evolution of
//! `|ν⟩⟨μ| ⊗ ρ_C(0)` defines the operators whose traces quantify the
//! autonomous measurement: the cross trace `⟨+(t)| Tr_C[U(|+⟩⟨-|⊗ρ_C)U†] |-(t)⟩`
//! and the overlap `Tr[ρ_C^{++} ρ_C^{--}]` of the two conditional cavity
//! states. Neither depends on the initial qubit state.

use nalgebra::{DMatrix, DVector};

use crate::asymptotics::{measurement_basis, moving_basis, QubitVector};
use crate::dynamics::{build_propagator, Propagator};
use crate::error::{Error, Result};
use crate::fock::{displaced_fock_columns, displaced_thermal, thermal_populations, thermal_tail, SpaceConfig, C64};

#[derive(Debug, Clone)]
enum Cavity {
    Dense(DMatrix<C64>),
    /// Columns `D(α)|n⟩` and their thermal weights.
    Branches { columns: DMatrix<C64>, weights: Vec<f64> },
}

/// Evaluates cross trace and branch overlap at arbitrary times.
#[derive(Debug, Clone)]
pub struct ConditionalProbe {
    cfg: SpaceConfig,
    n0: f64,
    phi0: f64,
    basis: [QubitVector; 2],
    cavity: Cavity,
}

/// Exact measurement diagnostics at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalValues {
    pub cross_trace: C64,
    pub branch_overlap: f64,
}

impl ConditionalProbe {
    /// Probe backed by the dense `ρ_C(0)`.
    pub fn dense(alpha: C64, nbar: f64, cfg: &SpaceConfig) -> Result<Self> {
        let rho = displaced_thermal(alpha, nbar, cfg)?;
        Ok(Self::with_cavity(alpha, cfg, Cavity::Dense(rho.matrix().clone())))
    }

    /// Probe backed by the spectral branches of `ρ_C(0)`, truncated at
    /// thermal tail `rank_tol / 2`.
    pub fn branches(alpha: C64, nbar: f64, rank_tol: f64, cfg: &SpaceConfig) -> Result<Self> {
        if !(rank_tol > 0.0) {
            return Err(Error::Domain(format!("rank_tol must be positive, got {rank_tol}")));
        }
        let n = cfg.n_ph();
        let mut levels = 1;
        if nbar > 0.0 {
            while levels < n && thermal_tail(nbar, levels) > 0.5 * rank_tol {
                levels += 1;
            }
        }
        let columns = displaced_fock_columns(alpha, levels, cfg);
        let weights = thermal_populations(nbar, levels);
        let leak: f64 = columns.column_iter().zip(&weights).map(|(c, p)| p * (1.0 - c.norm_squared()).max(0.0)).sum();
        if leak > cfg.tail_tol() {
            return Err(Error::Truncation(format!(
                "conditional branches lose {leak:.3e} > tail_tol {:.1e} (n_ph = {n})",
                cfg.tail_tol()
            )));
        }
        Ok(Self::with_cavity(alpha, cfg, Cavity::Branches { columns, weights }))
    }

    fn with_cavity(alpha: C64, cfg: &SpaceConfig, cavity: Cavity) -> Self {
        let phi0 = if alpha.norm() > 0.0 { alpha.arg() } else { 0.0 };
        Self { cfg: *cfg, n0: alpha.norm_sqr(), phi0, basis: measurement_basis(phi0), cavity }
    }

    pub fn measurement_basis(&self) -> &[QubitVector; 2] {
        &self.basis
    }

    pub fn evaluate(&self, gt: f64) -> ConditionalValues {
        let prop = build_propagator(gt, &self.cfg);
        let (m, overlap) = match &self.cavity {
            Cavity::Dense(rho) => self.dense_values(&prop, rho),
            Cavity::Branches { columns, weights } => self.branch_values(&prop, columns, weights),
        };
        let mb = moving_basis(gt, self.n0.max(f64::MIN_POSITIVE), self.phi0);
        let (p, q) = (&mb[0], &mb[1]);
        let mut cross = C64::from(0.0);
        for a in 0..2 {
            for b in 0..2 {
                cross += p[a].conj() * m[a][b] * q[b];
            }
        }
        ConditionalValues { cross_trace: cross, branch_overlap: overlap }
    }

    fn dense_values(&self, prop: &Propagator, rho: &DMatrix<C64>) -> ([[C64; 2]; 2], f64) {
        let n = self.cfg.n_ph();
        let lift = |u: &QubitVector, v: &QubitVector| {
            let mut x = DMatrix::zeros(2 * n, 2 * n);
            for a in 0..2 {
                for b in 0..2 {
                    let w = u[a] * v[b].conj();
                    x.view_mut((a * n, b * n), (n, n)).copy_from(&(rho * w));
                }
            }
            prop.conjugate(&x)
        };
        let [plus, minus] = &self.basis;
        let cross = lift(plus, minus);
        let mut m = [[C64::from(0.0); 2]; 2];
        for (a, row) in m.iter_mut().enumerate() {
            for (b, e) in row.iter_mut().enumerate() {
                *e = (0..n).map(|k| cross[(a * n + k, b * n + k)]).sum();
            }
        }
        let reduce = |x: DMatrix<C64>| x.view((0, 0), (n, n)) + x.view((n, n), (n, n));
        let rpp = reduce(lift(plus, plus));
        let rmm = reduce(lift(minus, minus));
        // Tr[A B] for Hermitian A, B
        let overlap = rpp.iter().zip(rmm.transpose().iter()).map(|(a, b)| (a * b).re).sum();
        (m, overlap)
    }

    fn branch_values(&self, prop: &Propagator, columns: &DMatrix<C64>, weights: &[f64]) -> ([[C64; 2]; 2], f64) {
        let n = self.cfg.n_ph();
        let levels = weights.len();
        let mut fp = DMatrix::<C64>::zeros(n, 2 * levels);
        let mut fm = DMatrix::<C64>::zeros(n, 2 * levels);
        let mut m = [[C64::from(0.0); 2]; 2];
        let [plus, minus] = &self.basis;
        for (k, &w) in weights.iter().enumerate() {
            let col = columns.column(k);
            let mut ve = DVector::zeros(2 * n);
            ve.rows_mut(0, n).copy_from(&col);
            let mut vg = DVector::zeros(2 * n);
            vg.rows_mut(n, n).copy_from(&col);
            let (ue, ug) = (prop.apply(&ve), prop.apply(&vg));
            let up = &ue * plus[0] + &ug * plus[1];
            let um = &ue * minus[0] + &ug * minus[1];
            let sw = C64::from(w.sqrt());
            for a in 0..2 {
                let pa = up.rows(a * n, n);
                fp.column_mut(2 * k + a).copy_from(&(pa * sw));
                fm.column_mut(2 * k + a).copy_from(&(um.rows(a * n, n) * sw));
                for b in 0..2 {
                    m[a][b] += um.rows(b * n, n).dotc(&pa) * w;
                }
            }
        }
        let g = fp.ad_mul(&fm);
        let overlap = g.iter().map(|z| z.norm_sqr()).sum();
        (m, overlap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{branch_overlap_pred, cross_trace_characteristic};
    use approx::assert_abs_diff_eq;

    #[test]
    fn values_at_origin() {
        let cfg = SpaceConfig::auto(16.0, 1.0).unwrap();
        let probe = ConditionalProbe::branches(C64::new(4.0, 0.0), 1.0, 1e-12, &cfg).unwrap();
        let v = probe.evaluate(0.0);
        assert_abs_diff_eq!(v.cross_trace.norm(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v.branch_overlap, 1.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn dense_and_branch_probes_agree() {
        let cfg = SpaceConfig::auto(9.0, 0.8).unwrap();
        let alpha = C64::from_polar(3.0, 0.6);
        let d = ConditionalProbe::dense(alpha, 0.8, &cfg).unwrap();
        let b = ConditionalProbe::branches(alpha, 0.8, 1e-13, &cfg).unwrap();
        for gt in [0.0, 0.4, 1.1, 2.7] {
            let (x, y) = (d.evaluate(gt), b.evaluate(gt));
            assert!((x.cross_trace - y.cross_trace).norm() < 1e-10, "{gt}");
            assert_abs_diff_eq!(x.branch_overlap, y.branch_overlap, epsilon = 1e-10);
        }
    }

    #[test]
    fn field_phase_leaves_magnitudes_unchanged() {
        let cfg = SpaceConfig::auto(25.0, 0.5).unwrap();
        let a = ConditionalProbe::branches(C64::new(5.0, 0.0), 0.5, 1e-12, &cfg).unwrap();
        let b = ConditionalProbe::branches(C64::from_polar(5.0, 1.9), 0.5, 1e-12, &cfg).unwrap();
        for gt in [0.5, 1.5] {
            assert_abs_diff_eq!(a.evaluate(gt).cross_trace.norm(), b.evaluate(gt).cross_trace.norm(), epsilon = 1e-10);
            assert_abs_diff_eq!(a.evaluate(gt).branch_overlap, b.evaluate(gt).branch_overlap, epsilon = 1e-10);
        }
    }

    #[test]
    fn large_field_follows_characteristic_function() {
        let n0 = 400.0;
        let cfg = SpaceConfig::auto(n0, 1.0).unwrap();
        let probe = ConditionalProbe::branches(C64::new(20.0, 0.0), 1.0, 1e-12, &cfg).unwrap();
        for gt in [0.25, 0.5, 1.0] {
            let v = probe.evaluate(gt);
            assert_abs_diff_eq!(v.cross_trace.norm(), cross_trace_characteristic(gt, n0, 1.0).norm(), epsilon = 0.03);
            assert_abs_diff_eq!(v.branch_overlap, branch_overlap_pred(gt, n0, 1.0), epsilon = 0.03);
        }
    }
}
