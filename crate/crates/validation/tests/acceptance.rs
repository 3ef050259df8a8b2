//! One PASS/FAIL line per acceptance criterion. Exits non-zero when any fails.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use nmqfi::bath::{moments, DiscreteBath};
use nmqfi::correlation::bath_correlation;
use nmqfi::metrology::{
    angle_distance_mod_pi, best_state, markov_qfi, markov_third_order_coefficient, qfi_aligned, qfi_best_state,
    short_time_qfi, Setup,
};
use nmqfi::probe::{displacement_d, snapshot_from, Evolution, GaussianProbeInit, Window};
use nmqfi::quadrature::{fit_slope, golden_section_max};
use nmqfi::response::{max_abs_g, solve_response, solve_response_with, Scheme, TimeGrid};
use nmqfi_validation::{scenario, scenarios_dir, Outcome, Report};
use nmqfi_cli::{execute, Command, Scenario, Table};

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_slope(&lx, &ly)
}

fn grid_end(sc: &Scenario) -> f64 {
    sc.config.grid.as_ref().and_then(|g| g.t_end).expect("scenario sets grid.t_end")
}

fn narrow_band() -> Outcome {
    let sc = scenario("narrow_band.toml");
    let k = sc.bath.k_squared().sqrt();
    let r = sc.response(grid_end(&sc)).unwrap();
    let n = r.grid().n_steps;
    let err = r
        .g_samples()
        .iter()
        .enumerate()
        .map(|(j, g)| (g - Complex64::new((k * r.grid().point(j)).cos(), 0.0)).norm())
        .fold(0.0, f64::max);
    Outcome::check(n == 4096 && (k - 0.5).abs() < 1e-15 && err <= 1e-6, format!("max|G - cos(0.5 tau)| = {err:.3e} over {n} steps (tol 1e-6)"))
}

fn markov_limit() -> Outcome {
    let sc = scenario("markov_flat_band.toml");
    let gamma = sc.markov.expect("continuum gives gamma").gamma;
    let half_width = 1.0;
    let r = sc.response(grid_end(&sc)).unwrap();
    let (lo, hi) = (5.0 / half_width, 2.0 / gamma);
    let mut err: f64 = 0.0;
    for (j, g) in r.g_samples().iter().enumerate() {
        let t = r.grid().point(j);
        if t >= lo && t <= hi {
            err = err.max((g.norm() - (-gamma * t / 2.0).exp()).abs());
        }
    }
    let modes = sc.bath.modes().len();
    Outcome::check(
        modes >= 512 && (gamma / half_width - 0.02).abs() < 1e-12 && err <= 0.03,
        format!("gamma/W = {:.4}, {modes} modes, max ||G| - exp(-gamma tau/2)| = {err:.4} on [{lo}, {hi}] (tol 0.03)", gamma / half_width),
    )
}

/// `G' = -sum |K|^2 y_n`, `y_n' = i Delta_n y_n + G`: the memory equation as an
/// ordinary linear system, integrated with classical RK4.
fn ode_oracle(bath: &DiscreteBath, t_end: f64, samples: usize, substeps: usize) -> Vec<Complex64> {
    let w0 = bath.probe_frequency();
    let k2: Vec<f64> = bath.modes().iter().map(|m| m.coupling_magnitude_sq).collect();
    let det: Vec<f64> = bath.modes().iter().map(|m| m.detuning(w0)).collect();
    let n = k2.len();
    let rhs = |s: &[Complex64]| -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); n + 1];
        for i in 0..n {
            d[0] -= s[i + 1] * k2[i];
            d[i + 1] = Complex64::new(0.0, det[i]) * s[i + 1] + s[0];
        }
        d
    };
    let h = t_end / (samples * substeps) as f64;
    let mut s = vec![Complex64::new(0.0, 0.0); n + 1];
    s[0] = Complex64::new(1.0, 0.0);
    let mut out = vec![s[0]];
    let axpy = |a: &[Complex64], b: &[Complex64], c: f64| a.iter().zip(b).map(|(x, y)| x + y * c).collect::<Vec<_>>();
    for _ in 0..samples {
        for _ in 0..substeps {
            let k1 = rhs(&s);
            let k2v = rhs(&axpy(&s, &k1, h / 2.0));
            let k3 = rhs(&axpy(&s, &k2v, h / 2.0));
            let k4 = rhs(&axpy(&s, &k3, h));
            for i in 0..=n {
                s[i] += (k1[i] + k2v[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
        }
        out.push(s[0]);
    }
    out
}

fn solver_order() -> Outcome {
    let mut parts = Vec::new();
    for name in ["solver_order_a.toml", "solver_order_b.toml", "solver_order_c.toml"] {
        let sc = scenario(name);
        let t_end = grid_end(&sc);
        let n = sc.config.grid.as_ref().unwrap().n_steps.unwrap();
        let reference = ode_oracle(&sc.bath, t_end, n, 64);
        let err = |steps: usize| {
            let r = solve_response_with(&sc.bath, TimeGrid::new(0.0, t_end, steps).unwrap(), Scheme::Trapezoid).unwrap();
            let stride = steps / n;
            (0..=n).map(|j| (r.g_samples()[j * stride] - reference[j]).norm()).fold(0.0, f64::max)
        };
        let ratio = err(n) / err(2 * n);
        parts.push(Outcome::check((3.5..=4.5).contains(&ratio), format!("{name}: ratio {ratio:.3}")));
    }
    let mut o = Outcome::all(parts);
    o.detail.push_str(" (band [3.5, 4.5])");
    o
}

fn short_time() -> Outcome {
    let sc = scenario("short_time.toml");
    let init = sc.init.unwrap();
    let omega2 = sc.bath.k_squared().sqrt();
    let taus: Vec<f64> = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1].iter().map(|x| x / omega2).collect();
    let residuals: Vec<f64> = taus
        .iter()
        .map(|&tau| {
            let r = solve_response(&sc.bath, TimeGrid::new(0.0, tau, 256).unwrap()).unwrap();
            let w = Window::new(0.0, tau).unwrap();
            let exact = qfi_aligned(&init, &r, &sc.force, w).unwrap().value;
            (exact - short_time_qfi(&init, &sc.force, sc.omega0(), 0.0, tau)).abs()
        })
        .collect();
    let slope = log_slope(&taus, &residuals);
    Outcome::check((3.6..=4.4).contains(&slope), format!("log-log slope of residual = {slope:.3} (band [3.6, 4.4])"))
}

fn markov_third_order() -> Outcome {
    let sc = scenario("markov_third_order.toml");
    let init = sc.init.unwrap();
    let m = sc.markov.unwrap();
    let w0 = sc.omega0();
    let t0 = sc.window.unwrap().start;
    let (z, zd) = (sc.force.zeta(t0), sc.force.zeta_dot(t0));
    let v0 = init.variance_at(0.0);
    // c(tau) = (F V0 / (omega0^2 tau^2) - zeta^2) / tau, then one Richardson step
    let c = |tau: f64| {
        let q = markov_qfi(&init, m.gamma, m.occupation, &sc.force, w0, Window::new(t0, t0 + tau).unwrap()).unwrap().value;
        (q * v0 / (w0 * w0 * tau * tau) - z * z) / tau
    };
    let tau = 0.02;
    let extracted = 2.0 * c(tau / 2.0) - c(tau);
    let expected = z * zd + z * z * (m.gamma / 2.0 - m.gamma * (m.occupation + 0.5) / v0);
    let formula = markov_third_order_coefficient(z, zd, m.gamma, m.occupation, v0);
    let rel = (extracted - expected).abs() / expected.abs();
    Outcome::check(
        rel <= 0.05 && (formula - expected).abs() <= 1e-12 * expected.abs(),
        format!("extracted {extracted:.6}, formula {expected:.6}, relative gap {rel:.2e} (tol 5%)"),
    )
}

fn sweep_table() -> (Scenario, Table) {
    let sc = scenario("sequential_sweep.toml");
    let out = execute(Command::Sweep, &sc).expect("sweep runs");
    (sc, out.table.expect("sweep emits a table"))
}

fn tau_opt_law(sc: &Scenario, t: &Table) -> Outcome {
    let se = t.column("script_e").unwrap();
    let tau = t.column("tau_opt").unwrap();
    let asym = t.column("tau_opt_asymptotic").unwrap();
    let stat = t.column("tau_opt_stationary").unwrap();
    let bounds = t.column("at_boundary").unwrap();
    let n = moments(&sc.bath, 2).unwrap().script_n;
    let slope = log_slope(&se, &tau);
    let last = se.len() - 1;
    let rel = (tau[last] - asym[last]).abs() / asym[last];
    let first_rel = (tau[0] - asym[0]).abs() / asym[0];
    let stat_rel = (tau[last] - stat[last]).abs() / stat[last];
    Outcome::all(vec![
        Outcome::check((n - 1.0).abs() < 1e-12, format!("N = {n}")),
        Outcome::check(bounds.iter().all(|&b| b == 0.0), "optimum interior".to_string()),
        Outcome::check((-0.55..=-0.45).contains(&slope), format!("slope {slope:.4} (band [-0.55, -0.45])")),
        Outcome::check(
            rel <= 0.02,
            format!("at script_e = 1e4: numeric {:.6e} vs asymptotic {:.6e}, relative gap {rel:.3} (tol 0.02)", tau[last], asym[last]),
        ),
        Outcome::check(first_rel <= 0.05, format!("at script_e = 1e2: relative gap {first_rel:.3} (tol 0.05)")),
        Outcome::check(true, format!("diagnostic: stationary point of the expansion {:.6e}, gap {stat_rel:.2e}", stat[last])),
    ])
}

fn scaling_dichotomy(sc: &Scenario, t: &Table) -> Outcome {
    let se = t.column("script_e").unwrap();
    let total = t.column("total_qfi").unwrap();
    let bound = t.column("markov_bound").unwrap();
    let slope = log_slope(&se, &total);
    let m = sc.markov.unwrap();
    // xi of exp(-(t-1)^2/(2 0.2^2)) on [0, 2] is 0.2 sqrt(pi) erf(5); erf(5) = 1 - 1.5e-12
    let xi = 0.2 * PI.sqrt();
    let expected = xi / (3.0 * m.gamma * (m.occupation + 0.5));
    let spread = bound.iter().map(|b| (b - bound[0]).abs()).fold(0.0, f64::max);
    let gap = (bound[0] - expected).abs();
    Outcome::check(
        (0.4..=0.6).contains(&slope) && spread <= 1e-9 && gap <= 1e-9,
        format!("total QFI slope {slope:.4} (band [0.4, 0.6]); Markov bound {:.12} spread {spread:.1e}, gap to xi/(3A) {gap:.1e}", bound[0]),
    )
}

fn heisenberg() -> Outcome {
    let sc = scenario("heisenberg.toml");
    let w = sc.window.unwrap();
    let r = sc.response(w.end).unwrap();
    let ratios: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&se: &f64| {
            let e = nmqfi_cli::commands::energy_for_script_e(se);
            qfi_best_state(e, &r, &sc.force, w).unwrap().value / se
        })
        .collect();
    let spread = ratios.iter().map(|x| (x / ratios[0] - 1.0).abs()).fold(0.0, f64::max);
    Outcome::check(sc.bath.is_empty() && spread <= 1e-9, format!("QFI/script_e = {:.12}, relative spread {spread:.1e} (tol 1e-9)", ratios[0]))
}

fn best_measurement() -> Outcome {
    let sc = scenario("best_measurement.toml");
    let w = sc.window.unwrap();
    let r = sc.response(w.end).unwrap();
    let d = displacement_d(&r, &sc.force, w).unwrap();
    let init = best_state(sc.energy().unwrap(), &d, &r).unwrap().to_init();
    let setup = Setup::compute(&r, &sc.force, w).unwrap();
    let n = 720;
    let step = PI / n as f64;
    let (i_best, _) = (0..n)
        .map(|i| (i, setup.fisher_quadrature(&init, i as f64 * step)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let theta_grid = i_best as f64 * step;
    let predicted = d.phase - sc.omega0() * w.length();
    let offset = angle_distance_mod_pi(theta_grid, predicted);
    let (_, peak) = golden_section_max(|t| setup.fisher_quadrature(&init, t), theta_grid - step, theta_grid + step, 1e-12, 200);
    let aligned = qfi_aligned(&init, &r, &sc.force, w).unwrap().value;
    let rel = (peak - aligned).abs() / aligned;
    Outcome::check(
        offset <= step && rel <= 1e-6,
        format!("argmax off predicted angle by {offset:.2e} (grid step {step:.2e}); peak {peak:.10} vs aligned {aligned:.10}, relative {rel:.1e}"),
    )
}

fn cramer_rao() -> Outcome {
    let sc = scenario("cramer_rao.toml");
    let out = execute(Command::Estimate, &sc).unwrap().record.unwrap();
    let ratio = out["cramer_rao_ratio"].as_f64().unwrap();
    let qfi = out["qfi"].as_f64().unwrap();
    Outcome::check(
        (0.9..=1.1).contains(&ratio) && sc.options().nu == 100 && sc.options().replications == 2000,
        format!("MSE nu F_Q = {ratio:.4} with F_Q = {qfi:.9} (band [0.9, 1.1])"),
    )
}

fn invariants_for(sc: &Scenario, init: &GaussianProbeInit) -> Result<(), String> {
    let w = sc.window.unwrap();
    let r = sc.response(w.end).map_err(|e| e.to_string())?;
    if max_abs_g(&r) > 1.0 + 1e-9 {
        return Err(format!("|G| reaches {}", max_abs_g(&r)));
    }
    for tau in [0.25 * w.length(), 0.5 * w.length(), w.length()] {
        let ev = Evolution::compute(&r, Window::new(w.start, w.start + tau).unwrap()).map_err(|e| e.to_string())?;
        let sum0 = ev.g.norm_sqr() * init.trace() + 2.0 * ev.noise;
        let mut dets = Vec::new();
        for k in 0..8 {
            let theta = k as f64 * PI / 8.0 + 0.1;
            let s = snapshot_from(&ev, init, theta).map_err(|e| e.to_string())?;
            dets.push(s.var_x_theta * s.var_p_theta - s.cross * s.cross);
            let sum = ev.variance(init, theta) + ev.variance(init, theta + FRAC_PI_2);
            if (sum - sum0).abs() > 1e-10 * sum0 {
                return Err(format!("theta-sum rule broken at tau={tau}: {sum} vs {sum0}"));
            }
        }
        let spread = dets.iter().map(|d| (d - dets[0]).abs()).fold(0.0, f64::max);
        if spread > 1e-10 * dets[0] {
            return Err(format!("det depends on theta at tau={tau}: spread {spread:e}"));
        }
        if dets[0] < 0.25 - 1e-12 {
            return Err(format!("det {} below 1/4", dets[0]));
        }
    }
    Ok(())
}

fn invariant_suite() -> Outcome {
    let dir = scenarios_dir().join("invariants");
    let mut files: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut failures = Vec::new();
    for f in &files {
        let sc = nmqfi_cli::load(f).unwrap();
        if let Err(e) = invariants_for(&sc, &sc.init.unwrap()) {
            failures.push(format!("{}: {e}", f.file_name().unwrap().to_string_lossy()));
        }
    }
    // pure state without a bath keeps the minimum determinant
    let pure = scenario("pure_state_noiseless.toml");
    let w = pure.window.unwrap();
    let ev = Evolution::compute(&pure.response(w.end).unwrap(), w).unwrap();
    let init = pure.init.unwrap();
    let pure_gap = (0..8)
        .map(|k| {
            let s = snapshot_from(&ev, &init, k as f64 * 0.4).unwrap();
            (s.var_x_theta * s.var_p_theta - s.cross * s.cross - 0.25).abs()
        })
        .fold(0.0, f64::max);
    if pure_gap > 1e-12 {
        failures.push(format!("pure-state det off 1/4 by {pure_gap:e}"));
    }
    // vacuum probe and vacuum resonant mode: every variance stays 1/2
    let vac = scenario("vacuum_resonant_mode.toml");
    let w = vac.window.unwrap();
    let r = vac.response(w.end).unwrap();
    let mut vac_gap: f64 = 0.0;
    for i in 1..=12 {
        let tau = w.length() * i as f64 / 12.0;
        let ev = Evolution::compute(&r, Window::new(w.start, w.start + tau).unwrap()).unwrap();
        for k in 0..4 {
            vac_gap = vac_gap.max((ev.variance(&vac.init.unwrap(), k as f64 * 0.7) - 0.5).abs());
        }
    }
    if vac_gap > 1e-8 {
        failures.push(format!("vacuum variance off 1/2 by {vac_gap:e}"));
    }
    Outcome::check(
        files.len() >= 12 && failures.is_empty(),
        format!(
            "{} grid scenarios, pure-state det gap {pure_gap:.1e}, vacuum variance gap {vac_gap:.1e}{}",
            files.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(" | ")) }
        ),
    )
}

fn correlation() -> Outcome {
    let sc = scenario("correlation.toml");
    let t_end = grid_end(&sc);
    let r = sc.response(t_end).unwrap();
    let mut worst: f64 = 0.0;
    for (t, tp) in [(0.5, 0.0), (2.0, 1.2), (1.2, 3.5), (4.0, 4.0)] {
        let c = bath_correlation(&r, 0.5, t, tp, 0.0).unwrap();
        worst = worst.max((c.total - c.born - c.interaction).norm());
    }
    let ratio = |k: f64| {
        let bath = sc.bath.scaled_coupling(k);
        let r = solve_response(&bath, TimeGrid::new(0.0, t_end, 1024).unwrap()).unwrap();
        let c = bath_correlation(&r, 0.5, 2.0, 1.2, 0.0).unwrap();
        c.interaction.norm() / c.born.norm()
    };
    let ks = [1e-3, 3e-3, 1e-2];
    let ratios: Vec<f64> = ks.iter().map(|&k| ratio(k)).collect();
    let slope = log_slope(&ks, &ratios);
    Outcome::check(
        worst <= 1e-10 && (1.8..=2.2).contains(&slope),
        format!("max|total - born - interaction| = {worst:.1e} (tol 1e-10); |C_I|/|C_b| slope {slope:.4} (band [1.8, 2.2])"),
    )
}

fn main() {
    let mut report = Report::default();
    report.record(1, "narrow-band limit", narrow_band);
    report.record(2, "Markov limit", markov_limit);
    report.record(3, "solver order", solver_order);
    report.record(4, "short-time QFI", short_time);
    report.record(5, "Markov third-order contrast", markov_third_order);
    let (sc, table) = sweep_table();
    report.record(6, "optimal interval law", || tau_opt_law(&sc, &table));
    report.record(7, "scaling dichotomy", || scaling_dichotomy(&sc, &table));
    report.record(8, "noiseless Heisenberg limit", heisenberg);
    report.record(9, "best-measurement optimality", best_measurement);
    report.record(10, "Cramer-Rao saturation", cramer_rao);
    report.record(11, "invariant suite", invariant_suite);
    report.record(12, "correlation decomposition", correlation);
    let failed = report.failures();
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
