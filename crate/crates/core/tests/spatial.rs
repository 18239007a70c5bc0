use gapsol::cme::{CmeParams, Soliton};
use gapsol::hamiltonian::{from_normal, reverse, to_normal, CanonicalState, NormalState};
use gapsol::potential::{build_potential, PotentialSpec};
use gapsol::spatial::*;
use gapsol::spectral::roots;
use gapsol::Error;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn system(c: f64, m_max: i32, eps: f64) -> SpatialSystem {
    let p = CmeParams::new(1, c, 0.0, -1, 1.0).unwrap();
    build_system(&p, &PotentialSpec::cosine(), m_max, eps).unwrap()
}

fn rich_system(m_max: i32, eps: f64) -> SpatialSystem {
    let pot = build_potential(&[(1, 1.0), (2, 0.3), (3, -0.2)], 1.0).unwrap();
    let p = CmeParams::new(1, 0.5, 0.1, -1, 1.0).unwrap();
    build_system(&p, &pot, m_max, eps).unwrap()
}

fn random_state(sys: &SpatialSystem, rng: &mut ChaCha8Rng, norm: f64) -> CanonicalState {
    let mut z = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let mut st =
        CanonicalState { psi: (0..sys.len()).map(|_| z()).collect(), phi: (0..sys.len()).map(|_| z()).collect() };
    let s = norm / st.norm();
    st.psi.iter_mut().chain(st.phi.iter_mut()).for_each(|v| *v *= s);
    st
}

fn random_center_state(sys: &SpatialSystem, rng: &mut ChaCha8Rng, norm: f64) -> CanonicalState {
    let mut ns = NormalState::zeros(sys.len());
    for i in 0..sys.len() {
        if sys.model.is_center(i) {
            ns.cp[i] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            ns.cm[i] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let mut st = from_normal(&sys.model, &ns);
    let s = norm / st.norm();
    st.psi.iter_mut().chain(st.phi.iter_mut()).for_each(|v| *v *= s);
    st
}

/// Single-mode eigen-solution `psi_m = amp e^{kappa y}` in canonical variables.
fn eigen_state(sys: &SpatialSystem, m: i32, kappa: C64, amp: C64) -> CanonicalState {
    let i = sys.model.idx(m).unwrap();
    let c = sys.model.params.c;
    let mut st = CanonicalState::zeros(sys.len());
    st.psi[i] = amp;
    st.phi[i] = (kappa - 0.5 * I * (c - m as f64)) * amp;
    st
}

/// S-restricted soliton at `y = 0` on the reversibility section.
fn soliton_init(sys: &SpatialSystem) -> NormalState {
    let model = &sys.model;
    let sol = Soliton::new(&model.params).unwrap();
    let g = UniformGrid::new(0.0, 0.01, 2).unwrap();
    let full = to_normal(model, &leading_order_ansatz(sys, &sol, &g).unwrap()[0]);
    let (ip, im) = model.resonant();
    let mut ns = NormalState::zeros(model.len());
    ns.cp[ip] = full.cp[ip];
    ns.cm[im] = full.cm[im];
    project_to_section(model, &ns)
}

#[test]
fn rhs_vanishes_at_zero() {
    let sys = rich_system(21, 0.1);
    let r = sys.rhs(&CanonicalState::zeros(sys.len()));
    assert!(r.psi.iter().chain(&r.phi).all(|z| z.norm() == 0.0));
}

#[test]
fn build_rejects_window_without_resonant_modes() {
    let p = CmeParams::new(3, 0.5, 0.0, -1, 1.0).unwrap();
    let pot = build_potential(&[(3, 1.0)], 1.0).unwrap();
    assert!(build_system(&p, &pot, 1, 0.1).is_err());
}

#[test]
fn linear_flow_reproduces_eigen_solutions() {
    let sys = system(0.5, 7, 0.0);
    for m in [-5, -3, 3, 5] {
        let (kp, km) = roots(1, 0.5, m).unwrap();
        for kappa in [kp, km] {
            let amp = C64::new(1.0, 0.0);
            let st = eigen_state(&sys, m, kappa, amp);
            let tr = integrate_spatial(&sys, (0.0, 5.0), &st, 1e-12, 51).unwrap();
            let i = sys.model.idx(m).unwrap();
            for (y, s) in tr.ys.iter().zip(&tr.states) {
                let want = amp * (kappa * y).exp();
                assert!((s.psi[i] - want).norm() < 1e-9 * want.norm().max(1.0), "m = {m}, y = {y}");
            }
        }
    }
}

#[test]
fn zero_state_stays_zero() {
    let sys = rich_system(21, 0.1);
    let tr = integrate_spatial(&sys, (0.0, 5.0), &CanonicalState::zeros(sys.len()), 1e-10, 11).unwrap();
    assert!(tr.states.iter().all(|s| s.norm() == 0.0));
}

#[test]
fn hamiltonian_and_charge_are_conserved() {
    let sys = system(0.2, 21, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..2 {
        let st = random_center_state(&sys, &mut rng, 0.1);
        let tr = integrate_spatial(&sys, (0.0, 10.0), &st, 1e-10, 11).unwrap();
        assert!(tr.h_drift() < 1e-8, "H drift {}", tr.h_drift());
        assert!(tr.q_drift() < 1e-8, "Q drift {}", tr.q_drift());
    }
}

#[test]
fn center_amplitudes_are_constant_without_eps() {
    let sys = system(0.5, 21, 0.0);
    let model = &sys.model;
    for i in 0..sys.len() {
        let m = model.m(i);
        if !model.is_center(i) {
            continue;
        }
        let (kp, _) = roots(1, 0.5, m).unwrap();
        let st = eigen_state(&sys, m, kp, C64::new(0.6, 0.8));
        let tr = integrate_spatial(&sys, (0.0, 10.0), &st, 1e-12, 21).unwrap();
        let a0 = st.psi[i].norm();
        for s in &tr.states {
            assert!((s.psi[i].norm() - a0).abs() < 1e-9 * a0, "m = {m}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let st = random_center_state(&sys, &mut rng, 1.0);
    let n0 = to_normal(model, &st);
    let tr = integrate_spatial(&sys, (0.0, 10.0), &st, 1e-12, 21).unwrap();
    for s in &tr.states {
        let ns = to_normal(model, s);
        for i in 0..sys.len() {
            assert!((ns.cp[i].norm() - n0.cp[i].norm()).abs() < 1e-9);
            assert!((ns.cm[i].norm() - n0.cm[i].norm()).abs() < 1e-9);
        }
    }
}

#[test]
fn blow_up_is_reported_with_location() {
    let sys = system(0.5, 21, 0.0);
    let (kp, _) = roots(1, 0.5, 21).unwrap();
    let st = eigen_state(&sys, 21, kp, C64::new(1.0, 0.0));
    match integrate_spatial(&sys, (0.0, 100.0), &st, 1e-8, 11) {
        Err(Error::Integration { at, .. }) => assert!(at > 0.0 && at < 100.0),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn green_constant_forcing() {
    let g = UniformGrid::span(-60.0, 60.0, 0.05).unwrap();
    let f0 = C64::new(0.3, 1.1);
    for (beta, alpha) in [(1.0, 0.0), (0.66, -1.25), (2.5, 3.0)] {
        let sol = green_invert(beta, alpha, &vec![f0; g.n], &g).unwrap();
        let want = f0 / (alpha * alpha + beta * beta);
        for j in 0..g.n {
            if g.y(j).abs() < 10.0 {
                assert!((sol.psi[j] - want).norm() < 1e-10, "beta {beta} alpha {alpha}");
            }
        }
    }
}

#[test]
fn green_gaussian_residual() {
    let h = 5e-4;
    let g = UniformGrid::span(-20.0, 20.0, h).unwrap();
    let f: Vec<C64> = g.points().iter().map(|y| C64::new((-y * y).exp(), 0.0)).collect();
    let sol = green_invert(1.0, 0.0, &f, &g).unwrap();
    let p = &sol.psi;
    let mut worst: f64 = 0.0;
    for j in 1..g.n - 1 {
        if g.y(j).abs() > 10.0 {
            continue;
        }
        let d2 = (p[j + 1] - 2.0 * p[j] + p[j - 1]) / (h * h);
        worst = worst.max((p[j] - d2 - f[j]).norm());
    }
    assert!(worst < 1e-6, "residual {worst}");
}

#[test]
fn green_solves_the_shifted_operator() {
    let h = 2e-3;
    let g = UniformGrid::span(-30.0, 30.0, h).unwrap();
    let (beta, alpha) = (0.8, 0.7);
    let f: Vec<C64> = g.points().iter().map(|y| C64::new(0.0, 1.0) * (-(y - 1.0).powi(2) / 2.0).exp()).collect();
    let sol = green_invert(beta, alpha, &f, &g).unwrap();
    let p = &sol.psi;
    for j in 2..g.n - 2 {
        if g.y(j).abs() > 10.0 {
            continue;
        }
        let d1 = (p[j + 1] - p[j - 1]) / (2.0 * h);
        let d2 = (p[j + 1] - 2.0 * p[j] + p[j - 1]) / (h * h);
        let res = d2 + 2.0 * I * alpha * d1 - (alpha * alpha + beta * beta) * p[j] + f[j];
        assert!(res.norm() < 1e-5, "y = {}: {}", g.y(j), res.norm());
        assert!((sol.dpsi[j] - d1).norm() < 1e-5);
    }
}

#[test]
fn green_respects_the_sup_bound() {
    let g = UniformGrid::span(-30.0, 30.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..16 {
        let beta = rng.gen_range(0.3..3.0);
        let nodes: Vec<C64> = (0..61).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let f: Vec<C64> = g
            .points()
            .iter()
            .map(|y| {
                let s = y + 30.0;
                let k = (s.floor() as usize).min(59);
                let t = s - k as f64;
                nodes[k] * (1.0 - t) + nodes[k + 1] * t
            })
            .collect();
        let fmax = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sol = green_invert(beta, 0.0, &f, &g).unwrap();
        let pmax = sol.psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(pmax <= fmax / (beta * beta) * (1.0 + 1e-6), "beta {beta}: {pmax} > {}", fmax / (beta * beta));
    }
}

#[test]
fn green_rejects_center_modes() {
    let g = UniformGrid::span(0.0, 1.0, 0.1).unwrap();
    let f = vec![C64::new(1.0, 0.0); g.n];
    assert!(green_invert(-1.0, 0.0, &f, &g).unwrap_err().is_validation());
    assert!(green_invert(1.0, 0.0, &f[1..], &g).is_err());
}

#[test]
fn ansatz_resonant_amplitude_at_rest() {
    let sys = system(0.0, 7, 0.1);
    let sol = Soliton::new(&sys.model.params).unwrap();
    let g = UniformGrid::span(-5.0, 5.0, 0.05).unwrap();
    let st = leading_order_ansatz(&sys, &sol, &g).unwrap();
    let (ip, im) = sys.model.resonant();
    let j0 = g.n / 2;
    assert!(g.y(j0).abs() < 1e-12);
    let want = (2.0f64 / 3.0).sqrt();
    assert!((st[j0].psi[ip].norm() - want).abs() < 1e-12);
    assert!((st[j0].psi[im].norm() - want).abs() < 1e-12);
}

#[test]
fn ansatz_corrections_scale_with_eps() {
    let sup_nonresonant = |eps: f64| {
        let sys = system(0.5, 11, eps);
        let sol = Soliton::new(&sys.model.params).unwrap();
        let g = UniformGrid::span(-10.0 / eps, 10.0 / eps, 0.05).unwrap();
        let st = leading_order_ansatz(&sys, &sol, &g).unwrap();
        let (ip, im) = sys.model.resonant();
        st.iter()
            .flat_map(|s| s.psi.iter().enumerate().filter(|(i, _)| *i != ip && *i != im).map(|(_, z)| z.norm()))
            .fold(0.0, f64::max)
    };
    let ratio = sup_nonresonant(0.05) / sup_nonresonant(0.1);
    assert!((0.35..=0.65).contains(&ratio), "ratio {ratio}");
}

#[test]
fn ansatz_rejects_foreign_soliton() {
    let sys = system(0.5, 7, 0.1);
    let other = Soliton::new(&CmeParams::new(1, 0.3, 0.0, -1, 1.0).unwrap()).unwrap();
    let g = UniformGrid::span(0.0, 1.0, 0.1).unwrap();
    assert!(leading_order_ansatz(&sys, &other, &g).is_err());
}

#[test]
fn residual_of_zero_field_is_zero() {
    let sys = system(0.5, 7, 0.1);
    let g = UniformGrid::span(0.0, 1.0, 0.1).unwrap();
    let f = field_from_modes(&sys.model, &vec![CanonicalState::zeros(sys.len()); g.n], &g, 32).unwrap();
    let r = pde_residual(&f, &sys.model.params, &sys.model.potential, 0.1).unwrap();
    assert_eq!(r, 0.0);
}

fn linear_mode_field(m: i32, kappa: C64, amp: f64, g: &UniformGrid, nx: usize) -> FieldGrid {
    let mut values = Vec::with_capacity(nx * g.n);
    for j in 0..g.n {
        for ix in 0..nx {
            let x = 4.0 * std::f64::consts::PI * ix as f64 / nx as f64;
            values.push(amp * (I * m as f64 * x / 2.0 + kappa * g.y(j)).exp());
        }
    }
    FieldGrid { nx, y: *g, values }
}

#[test]
fn residual_of_linear_mode() {
    let p = CmeParams::new(1, 0.5, 0.0, -1, 1.0).unwrap();
    let pot = PotentialSpec::cosine();
    let g = UniformGrid::span(0.0, 2.0, 0.005).unwrap();
    for m in [-3, 3, 5] {
        let (kappa, _) = roots(1, 0.5, m).unwrap();
        let f = linear_mode_field(m, kappa, 1e-4, &g, 32);
        let r = pde_residual(&f, &p, &pot, 0.0).unwrap();
        assert!(r < 1e-8, "m = {m}: {r}");
        let wrong = linear_mode_field(m, kappa + 0.01, 1e-4, &g, 32);
        assert!(pde_residual(&wrong, &p, &pot, 0.0).unwrap() > 1e-7);
    }
}

#[test]
fn residual_rejects_coarse_x_grid() {
    let p = CmeParams::new(1, 0.5, 0.0, -1, 1.0).unwrap();
    let g = UniformGrid::span(0.0, 1.0, 0.1).unwrap();
    let (kappa, _) = roots(1, 0.5, 5).unwrap();
    let f = linear_mode_field(5, kappa, 1.0, &g, 8);
    assert!(pde_residual(&f, &p, &PotentialSpec::cosine(), 0.0).is_err());
}

#[test]
fn ansatz_residual_is_second_order() {
    let residual = |eps: f64| {
        let sys = system(0.5, 11, eps);
        let sol = Soliton::new(&sys.model.params).unwrap();
        let g = UniformGrid::span(-4.0 / eps, 4.0 / eps, 0.02).unwrap();
        let st = leading_order_ansatz(&sys, &sol, &g).unwrap();
        let f = field_from_modes(&sys.model, &st, &g, 64).unwrap();
        pde_residual(&f, &sys.model.params, &sys.model.potential, eps).unwrap() / eps.sqrt()
    };
    let ratio = residual(0.1) / residual(0.05);
    assert!((2.0..=8.0).contains(&ratio), "ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rhs_is_gauge_equivariant(seed in 0u64..1000, alpha in -3.2f64..3.2) {
        let sys = rich_system(11, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&sys, &mut rng, 0.5);
        let e = C64::from_polar(1.0, alpha);
        let rot = CanonicalState { psi: st.psi.iter().map(|z| z * e).collect(), phi: st.phi.iter().map(|z| z * e).collect() };
        let a = sys.rhs(&rot);
        let b = sys.rhs(&st);
        for (x, y) in a.psi.iter().chain(&a.phi).zip(b.psi.iter().chain(&b.phi)) {
            prop_assert!((x - y * e).norm() < 1e-13);
        }
    }

    #[test]
    fn rhs_is_reversible(seed in 0u64..1000) {
        let sys = rich_system(11, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = random_state(&sys, &mut rng, 0.5);
        let a = sys.rhs(&reverse(&st));
        let b = reverse(&sys.rhs(&st));
        for (x, y) in a.psi.iter().chain(&a.phi).zip(b.psi.iter().chain(&b.phi)) {
            prop_assert!((x + y).norm() < 1e-13);
        }
    }

    #[test]
    fn section_projection_is_idempotent(seed in 0u64..1000) {
        let sys = rich_system(11, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ns = to_normal(&sys.model, &random_state(&sys, &mut rng, 1.0));
        let p = project_to_section(&sys.model, &ns);
        prop_assert!(section_defect(&sys.model, &p) < 1e-15);
        let pp = project_to_section(&sys.model, &p);
        prop_assert_eq!(p, pp);
    }
}

#[test]
fn reflected_path_solves_the_system() {
    let sys = system(0.5, 11, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ns = project_to_section(&sys.model, &to_normal(&sys.model, &random_center_state(&sys, &mut rng, 0.2)));
    let st = from_normal(&sys.model, &ns);
    let fwd = integrate_spatial(&sys, (0.0, 3.0), &st, 1e-12, 31).unwrap();
    let back = integrate_spatial(&sys, (0.0, -3.0), &st, 1e-12, 31).unwrap();
    let full = fwd.reflected().unwrap();
    assert_eq!(full.ys.len(), 61);
    assert_eq!(full.ys[0], -3.0);
    for j in 0..=30 {
        assert_eq!(full.ys[30 - j], back.ys[j]);
        let (a, b) = (&full.states[30 - j], &back.states[j]);
        for i in 0..sys.len() {
            assert!((a.psi[i] - b.psi[i]).norm() < 1e-9 && (a.phi[i] - b.phi[i]).norm() < 1e-9, "y = {}", back.ys[j]);
            assert_eq!(full.states[30 - j].psi[i], full.states[30 + j].psi[i].conj());
        }
    }
}

#[test]
fn reflection_needs_origin() {
    let sys = system(0.5, 7, 0.1);
    let tr = integrate_spatial(&sys, (1.0, 2.0), &CanonicalState::zeros(sys.len()), 1e-8, 3).unwrap();
    assert!(tr.reflected().is_err());
}

#[test]
fn trajectory_csv_has_header_and_rows() {
    let sys = system(0.5, 7, 0.1);
    let tr = integrate_spatial(&sys, (0.0, 1.0), &CanonicalState::zeros(sys.len()), 1e-8, 5).unwrap();
    let csv = tr.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("y,abs_psi_-7,"));
    assert!(lines[0].ends_with(",H,Q"));
}

#[test]
fn shoot_rejects_off_section_data() {
    let sys = system(0.5, 7, 0.1);
    let mut ns = soliton_init(&sys);
    let h = (0..sys.len()).find(|&i| !sys.model.is_center(i)).unwrap();
    ns.cp[h] = C64::new(1e-3, 0.0);
    ns.cm[h] = C64::new(-1e-3, 0.0);
    let err = reversible_shoot(&sys, &ns, 50.0, &ShootOptions::default()).unwrap_err();
    assert!(err.is_validation(), "{err}");
    let mut ns = soliton_init(&sys);
    let (ip, _) = sys.model.resonant();
    ns.cp[ip].im = 1e-3;
    assert!(reversible_shoot(&sys, &ns, 50.0, &ShootOptions::default()).unwrap_err().is_validation());
}

#[test]
fn tail_of_exact_prediction_is_zero() {
    let sys = system(0.5, 7, 0.1);
    let sol = Soliton::new(&sys.model.params).unwrap();
    let (ip, im) = sys.model.resonant();
    let ys: Vec<f64> = (0..=1000).map(|j| j as f64 * 0.1).collect();
    let states: Vec<CanonicalState> = ys
        .iter()
        .map(|y| {
            let pt = sol.profile(0.1 * y).unwrap();
            let mut st = CanonicalState::zeros(sys.len());
            st.psi[ip] = pt.a;
            st.psi[im] = pt.b;
            st
        })
        .collect();
    let tr = SpatialTrajectory {
        model: sys.model.clone(),
        monitor_y: ys.clone(),
        monitor_h: vec![0.0; ys.len()],
        monitor_q: vec![0.0; ys.len()],
        ys,
        states,
    };
    let rep = tail_measure(&tr, 0.1, 1, 1.0).unwrap();
    assert!((rep.window[1] - 100.0).abs() < 1e-9);
    assert!(rep.modes.iter().all(|m| m.sup == 0.0));
    assert_eq!(rep.resonant_deviation, 0.0);
    assert_eq!(rep.field_deviation, 0.0);
    assert_eq!(rep.growth_factor, Some(1.0));
    assert!(tail_measure(&tr, 0.1, 1, 2.0).is_err());
    assert!(tail_measure(&tr, 0.1, 2, 1.0).is_err());
    let json: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    assert_eq!(json["modes"].as_array().unwrap().len(), sys.len());
}

#[test]
fn tail_growth_is_one_for_linear_center_flow() {
    let sys = system(0.5, 7, 0.0);
    let sol = Soliton::new(&sys.model.params).unwrap();
    let pt = sol.profile(0.0).unwrap();
    let (ip, im) = sys.model.resonant();
    let m = -3;
    let i = sys.model.idx(m).unwrap();
    let (kp, _) = roots(1, 0.5, m).unwrap();
    let ys: Vec<f64> = (0..=2000).map(|j| j as f64 * 0.01).collect();
    let states: Vec<CanonicalState> = ys
        .iter()
        .map(|y| {
            let mut st = CanonicalState::zeros(sys.len());
            st.psi[ip] = pt.a;
            st.psi[im] = pt.b;
            st.psi[i] = C64::new(1e-3, 0.0) * (kp * y).exp();
            st
        })
        .collect();
    let tr = SpatialTrajectory {
        model: sys.model.clone(),
        monitor_y: ys.clone(),
        monitor_h: vec![0.0; ys.len()],
        monitor_q: vec![0.0; ys.len()],
        ys,
        states,
    };
    let rep = tail_measure(&tr, 0.0, 1, 1.0).unwrap();
    assert_eq!(rep.window, [0.0, 20.0]);
    assert!((rep.growth_factor.unwrap() - 1.0).abs() < 1e-6);
    assert!((rep.modes[i].sup - 1e-3).abs() < 1e-15);
}

fn soliton_shot(m_max: i32, eps: f64) -> (SpatialSystem, ShootResult) {
    let sys = system(0.5, m_max, eps);
    let init = soliton_init(&sys);
    let shot = reversible_shoot(&sys, &init, 1.0 / (eps * eps), &ShootOptions::default()).unwrap();
    (sys, shot)
}

fn resonant_path(sys: &SpatialSystem, shot: &ShootResult, y_end: f64) -> Vec<(C64, C64)> {
    let (ip, im) = sys.model.resonant();
    let tr = &shot.trajectory;
    tr.ys.iter().zip(&tr.states).take_while(|(y, _)| **y <= y_end + 1e-9).map(|(_, s)| (s.psi[ip], s.psi[im])).collect()
}

#[test]
fn soliton_shoot_is_bounded_and_truncation_robust() {
    let (sys, shot) = soliton_shot(21, 0.1);
    let s = &shot.summary;
    assert!(s.sup_norm <= 5.0 * s.soliton_sup, "{s:?}");
    assert!(s.symmetry_defect < 1e-8, "{s:?}");
    assert!(s.change < ShootOptions::default().tol, "{s:?}");
    let full = shot.trajectory.reflected().unwrap();
    let mid = full.ys.iter().position(|y| *y == 0.0).unwrap();
    for j in 1..mid {
        let (a, b) = (&full.states[mid - j], &full.states[mid + j]);
        assert!(a.psi.iter().zip(&b.psi).all(|(x, y)| *x == y.conj()));
    }

    let (wide, wide_shot) = soliton_shot(41, 0.1);
    let a = resonant_path(&sys, &shot, 20.0);
    let b = resonant_path(&wide, &wide_shot, 20.0);
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(&b).map(|(x, y)| (x.0 - y.0).norm().max((x.1 - y.1).norm())).fold(0.0, f64::max);
    assert!(diff < 1e-6, "resonant modes differ by {diff}");
}
