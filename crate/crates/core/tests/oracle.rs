use std::f64::consts::{LN_2, PI};

use jcdemon_core::asymptotics::purification_schedule;
use jcdemon_core::scenario::{compare, Method, Scenario, ScenarioConfig, Simulation};
use jcdemon_core::{ThermoRecord, C64};

fn custom(f: impl FnOnce(&mut ScenarioConfig)) -> ScenarioConfig {
    let mut c = ScenarioConfig::preset(Scenario::Custom);
    c.method = Method::Branches;
    f(&mut c);
    c
}

fn fidelity_pure(rho: &[[C64; 2]; 2], psi: &[C64; 2]) -> f64 {
    let mut f = C64::from(0.0);
    for a in 0..2 {
        for b in 0..2 {
            f += psi[a].conj() * rho[a][b] * psi[b];
        }
    }
    f.re
}

/// Uhlmann fidelity of two qubit states.
fn fidelity(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> f64 {
    let det = |m: &[[C64; 2]; 2]| (m[0][0] * m[1][1] - m[0][1] * m[1][0]).re.max(0.0);
    let tr: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (a[i][j] * b[j][i]).re)).sum();
    tr + 2.0 * (det(a) * det(b)).sqrt()
}

#[test]
fn expansion_residuals_shrink_with_field_strength() {
    let cfg = custom(|c| c.steps = 121);
    let (_, rows) = compare(&cfg, &[25.0, 100.0, 400.0]).unwrap();
    for col in ["Pe", "Ceg", "Q_C", "sqrt_det_V"] {
        for r in rows.iter().filter(|r| r.column == col && r.n0 > 25.0) {
            let ratio = r.ratio_vs_prev.unwrap();
            assert!(ratio >= 8.0, "{col} at n0 = {}: ratio {ratio}", r.n0);
        }
    }
}

#[test]
fn oracle_matches_at_origin() {
    let cfg = custom(|c| {
        c.n0 = 36.0;
        c.steps = 5;
        c.gt_max = Some(0.2);
    });
    let rep = Simulation::new(&cfg).unwrap().run().unwrap();
    let (r, o) = (&rep.records[0], &rep.oracle[0]);
    assert!((r.p_e - o.expansion.p_e()).abs() < 1e-12);
    assert!((r.c_eg - o.expansion.c_eg()).norm() < 1e-12);
    assert!((r.q_c - o.expansion.q_c_pred).abs() < 1e-12);
    assert!((r.sqrt_det_v - o.expansion.sqrt_det_v_pred).abs() < 1e-9);
    assert!((r.cross_trace - o.cross_trace_pred).norm() < 1e-10);
    assert!((r.branch_overlap - o.branch_overlap_pred).abs() < 1e-10);
}

#[test]
fn pointer_state_does_not_oscillate() {
    let n0 = 100.0;
    let cfg = custom(|c| {
        c.n0 = n0;
        c.steps = 41;
        c.gt_max = Some(1.0);
        c.init_qubit = [0.0, 1.0, 0.0];
    });
    let rep = Simulation::new(&cfg).unwrap().run().unwrap();
    let worst = rep.records.iter().map(|r| (r.p_e - 0.5).abs()).fold(0.0, f64::max);
    assert!(worst < 1.0 / n0, "{worst}");
}

#[test]
fn mixing_bounds_cavity_entropy() {
    // I/2 = (|+y><+y| + |-y><-y|)/2, so the cavity state is an equal mixture
    // of the two pointer-conditioned cavity states
    let run = |r: [f64; 3]| {
        let cfg = custom(|c| {
            c.n0 = 25.0;
            c.steps = 30;
            c.gt_max = Some(2.0 * PI * 5.0);
            c.init_qubit = r;
        });
        Simulation::new(&cfg).unwrap().run().unwrap().records
    };
    let (mix, up, down) = (run([0.0; 3]), run([0.0, 1.0, 0.0]), run([0.0, -1.0, 0.0]));
    for ((m, u), d) in mix.iter().zip(&up).zip(&down) {
        let avg = 0.5 * (u.s_c + d.s_c);
        assert!(m.s_c >= avg - 1e-9, "gt = {}: {} < {avg}", m.gt, m.s_c);
        assert!(m.s_c <= avg + LN_2 + 1e-9, "gt = {}", m.gt);
    }
}

#[test]
fn purified_states_do_not_remember_the_start() {
    let n0: f64 = 100.0;
    let t_min = PI * n0.sqrt();
    let target = purification_schedule(n0, 0.0, 1).target_state;
    let q = PI / 4.0;
    let mut finals: Vec<ThermoRecord> = Vec::new();
    for init in [[0.0, 0.0, 1.0], [q.cos(), q.sin(), 0.0], [0.0, 1.0, 0.0]] {
        let sim = Simulation::new(&custom(|c| {
            c.n0 = n0;
            c.init_qubit = init;
        }))
        .unwrap();
        // entropy minimum near t_min; the pointer state has none and is taken at t_min
        let chosen = if init == [0.0, 1.0, 0.0] {
            sim.record_at(t_min).unwrap()
        } else {
            (0..=60)
                .map(|k| sim.record_at(t_min * (0.94 + 0.002 * k as f64)).unwrap())
                .min_by(|a, b| a.s_q.total_cmp(&b.s_q))
                .unwrap()
        };
        assert!(fidelity_pure(&chosen.rho_q, &target) >= 1.0 - 10.0 / n0);
        finals.push(chosen);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let f = fidelity(&finals[i].rho_q, &finals[j].rho_q);
            assert!(f >= 1.0 - 10.0 / n0, "{i} {j}: {f}");
        }
    }
}
