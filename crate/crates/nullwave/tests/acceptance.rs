//! End-to-end acceptance suite.  Each criterion prints one
//! `ACCEPTANCE <n> (<name>): PASS/FAIL` line before asserting, so a red run
//! still reports every verdict it reached.

use nullwave::analysis::{
    dyadic_extract, fit_decay, gronwall_check, pointwise_decay_scan, weighted_time_identity_check,
    Quantity,
};
use nullwave::background::verify_weak_wave;
use nullwave::background::SampleGrid;
use nullwave::coeffs::{decompose_null, reconstruct, verify_null_on_cone, CoeffTensor};
use nullwave::config::{Preset, RunConfig};
use nullwave::energetics::{
    build_series, energy, hardy_checks, identity_residual_energy, identity_residual_pweighted,
    multiplier_coefficients, t_slice_energy, trunc_flux, EnergySeries, Multiplier,
};
use nullwave::grid::{CharField, CharGrid, FieldStatus};
use nullwave::runner::{self, RunStatus};
use nullwave::solver::{
    detect_blowup_time, evolve, picard_solve, BlowupVerdict, InitialData, ProblemSpec,
    RadialProfile, SchemeOptions, SolverError,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {n} ({name}): {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

#[test]
fn acceptance_01_null_form_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pass = true;
    let mut detail = String::new();
    for trial in 0..1000 {
        let mut t = CoeffTensor::q0().scale(rng.gen_range(-2.0..2.0));
        for a in 0..4usize {
            for b in (a + 1)..4usize {
                t = t.add(&CoeffTensor::qab(a, b).scale(rng.gen_range(-2.0..2.0)));
            }
        }
        let d = decompose_null(&t, 1e-10);
        let mut recon_err = 0.0f64;
        let r = reconstruct(&d);
        for i in 0..4 {
            for j in 0..4 {
                recon_err = recon_err.max((r.entries[i][j] - t.entries[i][j]).abs());
            }
        }
        if !d.is_null || d.residual_norm > 1e-10 || recon_err > 1e-12 {
            pass = false;
            detail = format!(
                "trial {trial}: is_null {} residual {} recon {recon_err}",
                d.is_null, d.residual_norm
            );
            break;
        }
    }
    let cone_max = verify_null_on_cone(&CoeffTensor::e00(), 32);
    if cone_max != 1.0 {
        pass = false;
        detail = format!("e00 cone max {cone_max} != 1.0");
    }
    if decompose_null(&CoeffTensor::e00(), 1e-10).is_null {
        pass = false;
        detail = "e00 misclassified as null".into();
    }
    verdict(1, "null-form algebra", pass, &detail);
}

#[test]
fn acceptance_02_morawetz_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = 1e-4;
    let diff = |g: &dyn Fn(f64) -> f64, r: f64| {
        (g(r - 2.0 * d) - 8.0 * g(r - d) + 8.0 * g(r + d) - g(r + 2.0 * d)) / (12.0 * d)
    };
    let mut pass = true;
    let mut detail = String::new();
    for trial in 0..1000 {
        let alpha = rng.gen_range(0.05..=0.25);
        let r = rng.gen_range(0.05..=50.0f64);
        let m = Multiplier::Morawetz { alpha };
        let c = multiplier_coefficients(&m, r).unwrap();
        let closed = (1.0 + r).powf(-1.0 - alpha);
        let fp_fd = diff(&|x| m.f(x), r);
        let e1 = (m.f(r) / r + 0.5 * fp_fd - m.chi(r) - closed).abs();
        let box_chi_fd = diff(&|x| m.chip(x), r) + 2.0 * m.chip(r) / r;
        let e2 = (-0.5 * box_chi_fd - (alpha + 1.0) / (r * (1.0 + r).powf(2.0 + alpha))).abs();
        let coercive = c.c_ang >= closed - 1e-12;
        if e1 > 1e-8 || e2 > 1e-8 || !coercive {
            pass = false;
            detail = format!("trial {trial} (alpha {alpha}, r {r}): e1 {e1} e2 {e2} coercive {coercive}");
            break;
        }
    }
    // coercivity on a dense sweep beyond the random draws
    for k in 1..=5000 {
        let r = 0.01 * k as f64;
        for alpha in [0.05, 0.15, 0.25] {
            let c = multiplier_coefficients(&Multiplier::Morawetz { alpha }, r).unwrap();
            if c.c_ang < (1.0 + r).powf(-1.0 - alpha) - 1e-12 {
                pass = false;
                detail = format!("coercivity fails at alpha {alpha}, r {r}");
            }
        }
    }
    verdict(2, "morawetz closed forms", pass, &detail);
}

/// L∞ error of the solved ψ against the translated-in-time d'Alembert
/// solution ψ = a(u + t_off/2) − a(v + t_off/2), a(s) = s·e^{−s²}.  The
/// time shift keeps the Taylor start genuinely second order (symmetric
/// data make the scheme superconvergent and the ratio degenerate).
fn manufactured_linf(h: f64) -> f64 {
    let t_off = 0.5;
    let grid = CharGrid::new(h, 12.0, 4.0, 0).unwrap();
    let problem = ProblemSpec::linear(
        InitialData {
            phi0: RadialProfile::FreeWaveField { amp: 1.0, t_off },
            phi1: RadialProfile::FreeWaveVelocity { amp: 1.0, t_off },
            r0: 12.0,
        },
        1.0,
    );
    let field = evolve(&problem, grid, &SchemeOptions::default()).unwrap();
    assert_eq!(field.status, FieldStatus::Completed);
    let a = |s: f64| s * (-s * s).exp();
    let mut worst = 0.0f64;
    for i in grid.iu_min..=grid.iu_max {
        for j in i.abs()..=grid.iv_max {
            let exact = a(grid.u_of(i) + 0.5 * t_off) - a(grid.v_of(j) + 0.5 * t_off);
            worst = worst.max((field.psi(i, j) - exact).abs());
        }
    }
    worst
}

#[test]
fn acceptance_03_solver_convergence() {
    let e1 = manufactured_linf(0.04);
    let e2 = manufactured_linf(0.02);
    let ratio = e1 / e2;
    verdict(
        3,
        "solver convergence",
        (3.4..=4.6).contains(&ratio),
        &format!("errors {e1}, {e2}, ratio {ratio}"),
    );
}

#[test]
fn acceptance_04_free_wave_exactness() {
    let c = RunConfig::for_preset(Preset::Freewave);
    let h = 0.05;
    let r_match = c.r_match(); // t0 + R0 = 12
    // T = 100 keeps the outgoing pulse inside the lattice through t = 50,
    // so the full-slice energies below are genuinely comparable
    let grid = CharGrid::new(h, r_match, 100.0, 0).unwrap();
    let field = evolve(&c.problem, grid, &SchemeOptions::default()).unwrap();
    assert_eq!(field.status, FieldStatus::Completed);

    let step = (1.0 / (2.0 * h)).round() as i64; // τ stride 1
    let e0 = energy(&field.slice(0).unwrap());
    let tol = 10.0 * h * h * e0;
    let mut pass = true;
    let mut detail = String::new();
    let tau_quiet = r_match + c.problem.data.r0 + 1.0; // R + R0 + 1
    for k2 in (0..=(grid.iu_max - 2)).step_by(step as usize) {
        let slice = field.slice(k2).unwrap();
        if slice.tau >= tau_quiet {
            let e = energy(&slice);
            if e > tol {
                pass = false;
                detail = format!("E({}) = {e} > {tol}", slice.tau);
                break;
            }
        }
    }
    let mut worst_dev = 0.0f64;
    let t0 = t_slice_energy(&field, 0).unwrap();
    let k2_50 = (50.0 / (2.0 * h)).round() as i64; // conservation window [0, 50]
    for k2 in (0..=k2_50).step_by(step as usize) {
        let e = t_slice_energy(&field, k2).unwrap();
        worst_dev = worst_dev.max((e - t0).abs() / t0);
    }
    if worst_dev > 10.0 * h * h {
        pass = false;
        detail = format!("t-slice conservation deviation {worst_dev}");
    }
    verdict(4, "free-wave exactness", pass, &detail);
}

#[test]
fn acceptance_05_identity_residuals() {
    let presets = [Preset::Freewave, Preset::Nullform];
    let hs = [0.04, 0.02, 0.01];
    let mut pass = true;
    let mut detail = String::new();
    for preset in presets {
        let c = RunConfig::for_preset(preset);
        // four residual series per preset: X = T, X = morawetz(α),
        // p-weighted at p = 1 and p = 1 + 2α
        let mut residuals = [[0.0f64; 3]; 4];
        for (hi, &h) in hs.iter().enumerate() {
            let grid = CharGrid::new(h, 12.0, 16.0, 0).unwrap();
            let field = evolve(&c.problem, grid, &SchemeOptions::default()).unwrap();
            assert_eq!(field.status, FieldStatus::Completed);
            // window τ ∈ [10, 14]: the outgoing pulse has crossed r = R,
            // so the exterior terms of the p-weighted identity are live
            let (k2_1, k2_2) = ((10.0 / (2.0 * h)) as i64, (14.0 / (2.0 * h)) as i64);
            let et = identity_residual_energy(&field, k2_1, k2_2, &Multiplier::T).unwrap();
            let em =
                identity_residual_energy(&field, k2_1, k2_2, &Multiplier::Morawetz { alpha: 0.25 })
                    .unwrap();
            let p1 = identity_residual_pweighted(&field, k2_1, k2_2, 1.0).unwrap();
            let p2 = identity_residual_pweighted(&field, k2_1, k2_2, 1.5).unwrap();
            // the nonlinear preset must exercise the exterior terms for
            // real; the linear one satisfies the identity exactly (the
            // scheme transports the sourceless exterior without error)
            if preset == Preset::Nullform {
                assert!(p1.terms[2].abs() > 1e-30, "vacuous exterior at h {h}");
            }
            residuals[0][hi] = et.residual.abs();
            residuals[1][hi] = em.residual.abs();
            residuals[2][hi] = p1.residual.abs();
            residuals[3][hi] = p2.residual.abs();
        }
        for (which, series) in residuals.iter().enumerate() {
            // an identically-zero residual at every h is exact satisfaction
            // (stronger than any convergence order), not a vacuous pass
            if series.iter().all(|&r| r == 0.0) {
                continue;
            }
            for w in 0..2 {
                let order = (series[w] / series[w + 1]).log2();
                if !(order >= 1.0) {
                    pass = false;
                    detail = format!(
                        "{} residual series {which}: {series:?}, order {order}",
                        c.preset.name()
                    );
                }
            }
        }
    }
    verdict(5, "identity residuals", pass, &detail);
}

#[test]
fn acceptance_06_lemma_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut detail = String::new();
    // completing presets at desk scale; checks run at every diagnostic time
    let mut configs = Vec::new();
    let mut fw = RunConfig::for_preset(Preset::Freewave);
    fw.grid.h = 0.05;
    configs.push(fw);
    let mut nf = RunConfig::for_preset(Preset::Nullform);
    nf.grid.t_max = 30.0;
    nf.grid.h = 0.04;
    configs.push(nf);
    let mut st = RunConfig::for_preset(Preset::Stability);
    st.grid.t_max = 30.0;
    st.grid.h = 0.04;
    configs.push(st);
    for mut c in configs {
        c.output_dir = tmp.path().display().to_string();
        c.diagnostics.checks = true;
        let o = runner::run(&c).unwrap();
        if o.checks_passed != Some(true) {
            pass = false;
            detail = format!("{} checks_passed = {:?}", c.preset.name(), o.checks_passed);
        }
    }
    // adversarial negative control: understate Ẽ and the suite must report
    // a failure rather than rubber-stamping the bounds
    let c = RunConfig::for_preset(Preset::Freewave);
    let grid = CharGrid::new(0.05, c.r_match(), 20.0, 0).unwrap();
    let field = evolve(&c.problem, grid, &SchemeOptions::default()).unwrap();
    let k2 = (4.0 / (2.0 * 0.05)) as i64;
    let slice = field.slice(k2).unwrap();
    let etilde = energy(&slice) + trunc_flux(&field, k2, grid.iu_max - 2).unwrap();
    let honest = hardy_checks(&slice, etilde, 0.25, 10.0 * 0.05 * 0.05 * etilde);
    let rigged = hardy_checks(&slice, etilde * 1e-3, 0.25, 0.0);
    if !honest.pass || rigged.pass {
        pass = false;
        detail = format!("honest {} rigged {}", honest.pass, rigged.pass);
    }
    verdict(6, "lemma suite", pass, &detail);
}

#[test]
fn acceptance_07_nullform_global_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::for_preset(Preset::Nullform);
    c.output_dir = tmp.path().display().to_string();
    c.diagnostics.checks = false; // criterion 6 covers the lemma suite
    let o = runner::run(&c).unwrap();
    let mut pass = o.status == RunStatus::Completed;
    let mut detail = format!("status {:?}", o.status);
    let series = o.series.as_ref().unwrap();
    match fit_decay(series, Quantity::E, (10.0, 180.0)) {
        Ok(fit) => {
            if !(fit.exponent <= -1.0) {
                pass = false;
                detail = format!("E exponent {}", fit.exponent);
            }
            println!("nullform E decay exponent {:.3} (r^2 {:.4})", fit.exponent, fit.r_squared);
        }
        Err(e) => {
            pass = false;
            detail = format!("fit failed: {e}");
        }
    }
    // pointwise constants under h -> h/2
    let pw_coarse = pointwise_decay_scan(&o.field, c.diagnostics.alpha);
    let grid = CharGrid::new(c.grid.h / 2.0, c.r_match(), c.grid.t_max, 0).unwrap();
    let fine = evolve(&c.problem, grid, &SchemeOptions::default()).unwrap();
    assert_eq!(fine.status, FieldStatus::Completed);
    let pw_fine = pointwise_decay_scan(&fine, c.diagnostics.alpha);
    let rel = (pw_coarse.c_phi - pw_fine.c_phi).abs() / pw_fine.c_phi;
    println!(
        "sup |phi|(1+r): {} (h) vs {} (h/2), rel drift {rel:.4}",
        pw_coarse.c_phi, pw_fine.c_phi
    );
    if rel > 0.2 {
        pass = false;
        detail = format!("pointwise constant drift {rel}");
    }
    verdict(7, "nullform global decay", pass, &detail);
}

fn e_amplitude(problem: &ProblemSpec, h: f64, t_max: f64) -> f64 {
    let grid = CharGrid::new(h, 12.0, t_max, 0).unwrap();
    let field = evolve(problem, grid, &SchemeOptions::default()).unwrap();
    assert_eq!(field.status, FieldStatus::Completed);
    let step = (2.0 / (2.0 * h)).round() as i64;
    let k2s: Vec<i64> = (0..=(grid.iu_max - 2)).step_by(step as usize).collect();
    let s = build_series(problem, &field, &k2s, 0.25).unwrap();
    s.e.iter().cloned().fold(0.0f64, f64::max)
}

#[test]
fn acceptance_08_epsilon_scaling() {
    let c = RunConfig::for_preset(Preset::Nullform);
    let mut p1 = c.problem.clone();
    p1.epsilon = 1e-3;
    let mut p2 = c.problem.clone();
    p2.epsilon = 2e-3;
    let a1 = e_amplitude(&p1, 0.04, 50.0);
    let a2 = e_amplitude(&p2, 0.04, 50.0);
    let ratio = a2 / a1;
    verdict(
        8,
        "epsilon scaling",
        (3.4..=4.6).contains(&ratio),
        &format!("amplitudes {a1}, {a2}, ratio {ratio}"),
    );
}

#[test]
fn acceptance_09_blowup_contrast() {
    let c = RunConfig::for_preset(Preset::JohnBlowup);
    let study = detect_blowup_time(&c.problem, 2.0, 4.0, &[0.04, 0.02, 0.01]).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    match study.verdict {
        BlowupVerdict::Genuine { t_star } => {
            println!("blowup t* = {t_star:.4}, per-grid estimates {:?}", study.t_stars);
            if !(t_star > 0.0 && t_star < 4.0) {
                pass = false;
                detail = format!("implausible t* {t_star}");
            }
            // the criterion's 10% agreement, checked explicitly on the
            // refinement estimates of the two finest grid pairs
            if let [Some(a), Some(b), Some(c)] = study.t_stars[..] {
                let (r1, r2) = (2.0 * b - a, 2.0 * c - b);
                if (r1 - r2).abs() > 0.1 * r2.abs().max(r1.abs()) {
                    pass = false;
                    detail = format!("refined estimates {r1} vs {r2} differ beyond 10%");
                }
            } else {
                pass = false;
                detail = format!("not all grids blew up: {:?}", study.t_stars);
            }
        }
        BlowupVerdict::Artifact => {
            pass = false;
            detail = format!("verdict artifact, estimates {:?}", study.t_stars);
        }
    }
    // identical data driven by the null form instead: global existence
    let mut null_problem = c.problem.clone();
    null_problem.a = nullwave::coeffs::CoeffTensor::q0();
    let grid = CharGrid::new(0.02, 2.0, 200.0, 0).unwrap();
    match evolve(&null_problem, grid, &SchemeOptions::default()) {
        Ok(f) if f.status == FieldStatus::Completed => {}
        Ok(f) => {
            pass = false;
            detail = format!("null-form twin ended as {:?}", f.status);
        }
        Err(e) => {
            pass = false;
            detail = format!("null-form twin errored: {e}");
        }
    }
    verdict(9, "blowup contrast", pass, &detail);
}

#[test]
fn acceptance_10_stability_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = RunConfig::for_preset(Preset::Stability);
    c.output_dir = tmp.path().display().to_string();
    c.diagnostics.checks = false;
    let ww = verify_weak_wave(
        &c.problem.background,
        &SampleGrid { t_max: 60.0, r_max: 60.0, nt: 120, nr: 120 },
    );
    let mut pass = ww.pass;
    let mut detail = if ww.pass { String::new() } else { "background fails weak-wave".into() };

    let o = runner::run(&c).unwrap();
    if o.status != RunStatus::Completed {
        pass = false;
        detail = format!("status {:?}", o.status);
    }
    let s = o.series.as_ref().unwrap();
    match fit_decay(s, Quantity::E, (10.0, 180.0)) {
        Ok(fit) => {
            println!("stability E decay exponent {:.3}", fit.exponent);
            if !(fit.exponent <= -1.0) {
                pass = false;
                detail = format!("E exponent {}", fit.exponent);
            }
        }
        Err(e) => {
            pass = false;
            detail = format!("E fit failed: {e}");
        }
    }
    // cumulative weighted source increments per unit τ, fitted like a
    // decaying series at the window midpoints
    let mut inc = EnergySeries::default();
    for k in 1..s.taus.len() {
        let d = (s.d2a_f_cum[k] - s.d2a_f_cum[k - 1]) / (s.taus[k] - s.taus[k - 1]);
        inc.taus.push(0.5 * (s.taus[k] + s.taus[k - 1]));
        inc.e.push(d.max(0.0));
    }
    match fit_decay(&inc, Quantity::E, (10.0, 180.0)) {
        Ok(fit) => {
            println!("D^2a[F] increment decay exponent {:.3}", fit.exponent);
            let target = -(1.0 + c.diagnostics.alpha) + 0.3;
            if !(fit.exponent <= target || fit.floored) {
                pass = false;
                detail = format!("increment exponent {} > {target}", fit.exponent);
            }
        }
        Err(e) => {
            pass = false;
            detail = format!("increment fit failed: {e}");
        }
    }
    verdict(10, "stability run", pass, &detail);
}

#[test]
fn acceptance_11_picard_mode() {
    let c = RunConfig::for_preset(Preset::Picard);
    let grid = CharGrid::new(c.grid.h, c.r_match(), c.grid.t_max, 0).unwrap();
    let diffs = match picard_solve(&c.problem, grid, 10, 1e-13) {
        Ok(rep) => rep.diffs,
        Err(SolverError::NotConverged { diffs }) => diffs,
        Err(e) => panic!("picard failed outright: {e}"),
    };
    println!("picard sup-differences: {diffs:?}");
    let mut pass = diffs.len() >= 4;
    let mut detail = format!("{} iterations recorded", diffs.len());
    if pass {
        // iterations 2..4: each sup-difference at most a fifth of its
        // predecessor
        for k in 1..4 {
            if !(diffs[k] <= diffs[k - 1] / 5.0) {
                pass = false;
                detail = format!("d_{} = {} vs d_{} = {}", k + 1, diffs[k], k, diffs[k - 1]);
            }
        }
    }
    verdict(11, "picard mode", pass, &detail);
}

#[test]
fn acceptance_12_analysis_utilities() {
    let mut pass = true;
    let mut detail = String::new();

    // weighted-time identity is exact on polynomial inputs
    let taus: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
    // degrees chosen so every integrand (s^beta f and tau^(beta-1) times
    // the cumulative) stays cubic, where the quadrature is exact
    for (beta, f) in [
        (2.0, taus.iter().map(|&t| 2.0 * t - 1.0).collect::<Vec<_>>()),
        (1.0, taus.iter().map(|&t| 3.0 * t * t - t + 1.0).collect::<Vec<_>>()),
    ] {
        let r = weighted_time_identity_check(&taus, &f, beta, 1.0, 2.0).unwrap();
        if r > 1e-12 {
            pass = false;
            detail = format!("identity residual {r} at beta {beta}");
        }
    }

    // Gronwall on the two trivial examples
    let ones = vec![1.0; taus.len()];
    let rep = gronwall_check(&taus, &ones, &ones, 3.0, 1.0, 1e-9).unwrap();
    if !(rep.hypothesis_holds && rep.conclusion_holds) {
        pass = false;
        detail = "gronwall constant example".into();
    }
    let lin: Vec<f64> = taus.iter().map(|&t| 1.0 + t).collect();
    let rep = gronwall_check(&taus, &lin, &lin, 1.0, 1.0, 1e-9).unwrap();
    if !(rep.hypothesis_holds && rep.conclusion_holds) {
        pass = false;
        detail = "gronwall linear example".into();
    }

    // dyadic certificates on (1+τ)^{-1.5} with γ = 2
    let mut s = EnergySeries::default();
    for k in 0..=1000 {
        let t = k as f64 * 0.5;
        s.taus.push(t);
        s.e.push((1.0 + t).powf(-1.5));
    }
    match dyadic_extract(&s, Quantity::E, 2.0, 2.0) {
        Ok(pts) => {
            if pts.is_empty() || pts.iter().any(|p| !p.pass) {
                pass = false;
                detail = format!("dyadic certificates: {pts:?}");
            }
        }
        Err(e) => {
            pass = false;
            detail = format!("dyadic extraction failed: {e}");
        }
    }
    verdict(12, "analysis utilities", pass, &detail);
}
