//! One function per subcommand, each turning a scenario into an [`Output`].

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use nmqfi::bath::{moments, BathMoments, DEFAULT_P_MAX};
use nmqfi::correlation::{bath_correlation, correlation_timescale_check};
use nmqfi::metrology::{best_state, markov_qfi, script_e, short_time_qfi, simulate_estimation, Setup};
use nmqfi::probe::{displacement_d, GaussianProbeInit, Window};
use nmqfi::response::{inverse_omega2, ResponseFunction};
use nmqfi::sequential::{
    markov_seq, optimize_tau, seq_qfi, seq_qfi_asymptotic, seq_qfi_expansion, tau_opt_asymptotic, tau_opt_stationary,
    within_short_time_regime, Bound, SequentialScheme,
};
use nmqfi::Error;

use crate::config::{Scenario, SequentialConfig};
use crate::output::{Format, Output, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Response,
    Moments,
    Qfi,
    Estimate,
    Sequential,
    Sweep,
    Correlation,
    Limits,
}

impl Command {
    pub fn parse(name: &str) -> Option<Self> {
        <Self as clap::ValueEnum>::from_str(name, false).ok()
    }

    pub fn default_format(self) -> Format {
        match self {
            Command::Response | Command::Sweep | Command::Correlation | Command::Limits => Format::Csv,
            _ => Format::Json,
        }
    }
}

pub fn execute(cmd: Command, sc: &Scenario) -> Result<Output, CliError> {
    let numerical = |e: Error| CliError::Numerical { scenario: sc.name.clone(), source: e };
    match cmd {
        Command::Response => response(sc),
        Command::Moments => Ok(moments_record(sc)),
        Command::Qfi => qfi(sc),
        Command::Estimate => estimate(sc),
        Command::Sequential => sequential(sc),
        Command::Sweep => sweep(sc),
        Command::Correlation => correlation(sc),
        Command::Limits => limits(sc),
    }
    .map_err(|e| match e {
        Failure::Config(msg) => CliError::Config { origin: sc.name.clone(), message: msg },
        Failure::Numerical(e) => numerical(e),
    })
}

enum Failure {
    Config(String),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e)
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn need<T>(x: Option<T>, what: &str) -> Res<T> {
    x.ok_or_else(|| Failure::Config(format!("this command needs {what}")))
}

fn grid_end(sc: &Scenario) -> Option<f64> {
    sc.config.grid.as_ref().and_then(|g| g.t_end)
}

fn f(x: f64) -> Value {
    Value::from(x)
}

fn response(sc: &Scenario) -> Res<Output> {
    let r = sc.response(need(grid_end(sc), "[grid] t_end")?)?;
    let mut t = Table::new(&["tau", "re_g", "im_g", "abs_g", "re_g_dot", "im_g_dot"]);
    for (j, (g, gd)) in r.g_samples().iter().zip(r.g_dot_samples()).enumerate() {
        t.rows.push(vec![r.grid().point(j), g.re, g.im, g.norm(), gd.re, gd.im]);
    }
    Ok(Output::table(t))
}

fn moments_map(m: &BathMoments) -> Map<String, Value> {
    let mut out = Map::new();
    out.insert("k_squared".into(), f(m.k_squared));
    out.insert("script_n".into(), f(m.script_n));
    out.insert("chi_absent".into(), Value::Bool(m.chi_absent));
    for p in 2..=DEFAULT_P_MAX {
        out.insert(format!("omega_{p}"), m.omega(p).map_or(Value::Null, f));
    }
    for q in 1..=DEFAULT_P_MAX {
        out.insert(format!("chi_{q}"), m.chi(q).map_or(Value::Null, f));
    }
    out
}

fn moments_record(sc: &Scenario) -> Output {
    let m = moments(&sc.bath, DEFAULT_P_MAX).expect("default order is valid");
    Output::record(moments_map(&m))
}

fn qfi(sc: &Scenario) -> Res<Output> {
    let window = need(sc.window, "[window]")?;
    let r = sc.response(window.end)?;
    let setup = Setup::compute(&r, &sc.force, window)?;
    let mut out = Map::new();
    out.insert("abs_d".into(), f(setup.d.abs()));
    out.insert("phase_d".into(), f(setup.d.phase));
    out.insert("optimal_theta".into(), f(setup.optimal_theta()));
    out.insert("window_start".into(), f(window.start));
    out.insert("window_end".into(), f(window.end));
    let primary = match (&sc.init, sc.energy()) {
        (Some(init), energy) => {
            let general = setup.general(init);
            if let Ok(a) = setup.aligned(init) {
                out.insert("aligned_value".into(), f(a.value));
            }
            if let Some(e) = energy {
                out.insert("best_state_value".into(), f(setup.best(e)?.value));
            }
            out.insert("short_time_value".into(), f(short_time_qfi(init, &sc.force, sc.omega0(), window.start, window.length())));
            if let Some(m) = sc.markov {
                out.insert("markov_value".into(), f(markov_qfi(init, m.gamma, m.occupation, &sc.force, sc.omega0(), window)?.value));
            }
            general
        }
        (None, Some(e)) => setup.best(e)?,
        (None, None) => return Err(Failure::Config("[probe] needs init or energy".into())),
    };
    out.insert("value".into(), f(primary.value));
    out.insert("form".into(), Value::from(primary.form.name()));
    out.insert("numerator_abs_d_sq".into(), f(primary.numerator_abs_d_sq));
    out.insert("denominator".into(), f(primary.denominator));
    Ok(Output::record(out))
}

/// The configured initial state, or the best state of the configured energy.
fn init_state(sc: &Scenario, r: &ResponseFunction, window: Window) -> Res<GaussianProbeInit> {
    match (&sc.init, sc.energy()) {
        (Some(init), _) => Ok(*init),
        (None, Some(e)) => {
            let d = displacement_d(r, &sc.force, window)?;
            Ok(best_state(e, &d, r)?.to_init())
        }
        (None, None) => Err(Failure::Config("[probe] needs init or energy".into())),
    }
}

fn estimate(sc: &Scenario) -> Res<Output> {
    let window = need(sc.window, "[window]")?;
    let r = sc.response(window.end)?;
    let init = init_state(sc, &r, window)?;
    let o = sc.options();
    let e = simulate_estimation(&init, &r, &sc.force, window, o.f_true, o.nu, o.replications, o.seed)?;
    let v = json!({
        "estimate": e.estimate,
        "empirical_mse": e.empirical_mse,
        "qfi": e.qfi,
        "nu": e.nu,
        "replications": e.replications,
        "cramer_rao_ratio": e.cramer_rao_ratio,
        "f_true": o.f_true,
        "seed": o.seed,
    });
    Ok(Output::record(v.as_object().cloned().expect("object literal")))
}

fn seq_horizon(sc: &Scenario, s: &SequentialConfig) -> f64 {
    match (s.tau, s.tau_max) {
        (Some(t), _) => t,
        (None, Some(t)) => t,
        (None, None) => s.total.min(5.0 * inverse_omega2(&sc.bath)),
    }
}

fn prefactor(sc: &Scenario) -> f64 {
    if sc.options().omega0_prefactor {
        sc.omega0() * sc.omega0()
    } else {
        1.0
    }
}

/// Asymptotic values, NaN when the bath carries no noise.
fn or_nan(x: nmqfi::Result<f64>) -> Res<f64> {
    match x {
        Ok(v) => Ok(v),
        Err(Error::NoiselessBath) => Ok(f64::NAN),
        Err(Error::InvalidParameter(_)) => Ok(f64::NAN),
        Err(e) => Err(e.into()),
    }
}

struct SeqPoint {
    energy: f64,
    tau_opt: f64,
    total_qfi: f64,
    tau_asym: f64,
    qfi_asym: f64,
    tau_stat: f64,
    qfi_stat: f64,
    markov_bound: Option<f64>,
    markov_tau: Option<f64>,
    at_boundary: Option<Bound>,
    regime: bool,
    xi: f64,
    c: f64,
    scan: Vec<(f64, f64)>,
}

fn optimize_point(sc: &Scenario, r: &ResponseFunction, s: &SequentialConfig, energy: f64) -> Res<SeqPoint> {
    let bounds = match (s.tau_min, s.tau_max) {
        (None, None) => None,
        (lo, hi) => {
            let (dlo, dhi) = nmqfi::sequential::default_tau_bounds(r, s.total);
            Some((lo.unwrap_or(dlo), hi.unwrap_or(dhi)))
        }
    };
    let opt = optimize_tau(s.total, energy, r, &sc.force, s.start, bounds)?;
    let m = moments(&sc.bath, DEFAULT_P_MAX)?;
    let (xi, c) = (opt.seq.xi, opt.seq.c_coeff);
    let pf = prefactor(sc);
    let tau_stat = or_nan(tau_opt_stationary(energy, &m, xi, c))?;
    let markov = match sc.markov {
        Some(mk) => match markov_seq(energy, mk.gamma, mk.occupation, xi) {
            Ok(v) => Some(v),
            Err(Error::NoiselessBath) => None,
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    Ok(SeqPoint {
        energy,
        tau_opt: opt.tau_opt,
        total_qfi: opt.seq.total_qfi,
        tau_asym: or_nan(tau_opt_asymptotic(energy, &m, xi, c))?,
        qfi_asym: or_nan(seq_qfi_asymptotic(energy, &m, xi, c, pf))?,
        qfi_stat: if tau_stat.is_nan() { f64::NAN } else { seq_qfi_expansion(energy, &m, xi, c, tau_stat, pf)? },
        tau_stat,
        markov_bound: markov.map(|v| v.total_qfi_bound),
        markov_tau: markov.map(|v| v.tau_opt),
        at_boundary: opt.at_boundary,
        regime: within_short_time_regime(opt.tau_opt, &m, sc.omega0()),
        xi,
        c,
        scan: opt.scan,
    })
}

fn opt_f(x: Option<f64>) -> Value {
    x.map_or(Value::Null, f)
}

fn sequential(sc: &Scenario) -> Res<Output> {
    let s = need(sc.config.sequential.clone(), "[sequential]")?;
    let energy = need(sc.energy(), "[probe] energy")?;
    let r = sc.response(seq_horizon(sc, &s))?;
    let mut out = Map::new();
    if let Some(tau) = s.tau {
        let scheme = SequentialScheme::new(s.total, tau, s.start)?;
        let res = seq_qfi(&scheme, energy, &r, &sc.force)?;
        out.insert("tau".into(), f(tau));
        out.insert("repetitions".into(), Value::from(scheme.repetitions));
        out.insert("total_qfi".into(), f(res.total_qfi));
        out.insert("per_step_qfi".into(), Value::from(res.per_step_qfi.clone()));
        out.insert("denominator".into(), f(res.denominator));
        out.insert("xi".into(), f(res.xi));
        out.insert("c_coeff".into(), f(res.c_coeff));
        return Ok(Output::record(out));
    }
    let p = optimize_point(sc, &r, &s, energy)?;
    out.insert("tau_opt_numeric".into(), f(p.tau_opt));
    out.insert("tau_opt_asymptotic".into(), f(p.tau_asym));
    out.insert("tau_opt_stationary".into(), f(p.tau_stat));
    out.insert("total_qfi".into(), f(p.total_qfi));
    out.insert("qfi_asymptotic".into(), f(p.qfi_asym));
    out.insert("qfi_stationary".into(), f(p.qfi_stat));
    out.insert("markov_bound".into(), opt_f(p.markov_bound));
    out.insert("markov_tau_opt".into(), opt_f(p.markov_tau));
    out.insert("xi".into(), f(p.xi));
    out.insert("c_coeff".into(), f(p.c));
    out.insert("script_e".into(), f(script_e(energy)?));
    let mut flags = Map::new();
    flags.insert("at_boundary".into(), boundary_value(p.at_boundary));
    flags.insert("short_time_regime".into(), Value::Bool(p.regime));
    out.insert("regime_flags".into(), Value::Object(flags));
    let mut t = Table::new(&["tau", "total_qfi"]);
    t.rows = p.scan.iter().map(|&(a, b)| vec![a, b]).collect();
    Ok(Output { record: Some(out), table: Some(t) })
}

fn boundary_value(b: Option<Bound>) -> Value {
    match b {
        None => Value::Null,
        Some(Bound::Lower) => Value::from("lower"),
        Some(Bound::Upper) => Value::from("upper"),
    }
}

/// Energy whose `script_e` equals `se`.
pub fn energy_for_script_e(se: f64) -> f64 {
    0.5 * (se + 0.25 / se)
}

fn sweep(sc: &Scenario) -> Res<Output> {
    let s = need(sc.config.sequential.clone(), "[sequential]")?;
    let sw = need(sc.config.sweep.clone(), "[sweep]")?;
    let energies: Vec<f64> = match (&sw.energies, &sw.script_e) {
        (Some(e), _) => e.clone(),
        (None, Some(se)) => se.iter().map(|&x| energy_for_script_e(x)).collect(),
        (None, None) => unreachable!("validated"),
    };
    let r = sc.response(seq_horizon(sc, &s))?;
    let points = energies.par_iter().map(|&e| optimize_point(sc, &r, &s, e)).collect::<Res<Vec<_>>>()?;
    let mut t = Table::new(&[
        "energy",
        "script_e",
        "tau_opt",
        "total_qfi",
        "tau_opt_asymptotic",
        "qfi_asymptotic",
        "tau_opt_stationary",
        "qfi_stationary",
        "markov_bound",
        "at_boundary",
    ]);
    for p in points {
        let b = match p.at_boundary {
            None => 0.0,
            Some(Bound::Lower) => -1.0,
            Some(Bound::Upper) => 1.0,
        };
        t.rows.push(vec![
            p.energy,
            script_e(p.energy)?,
            p.tau_opt,
            p.total_qfi,
            p.tau_asym,
            p.qfi_asym,
            p.tau_stat,
            p.qfi_stat,
            p.markov_bound.unwrap_or(f64::NAN),
            b,
        ]);
    }
    Ok(Output::table(t))
}

fn correlation(sc: &Scenario) -> Res<Output> {
    let t_end = need(grid_end(sc), "[grid] t_end")?;
    let cfg = sc.config.correlation.clone().unwrap_or(crate::config::CorrelationConfig { t_prime: None, probe_second_moment: None, n_points: 200 });
    let t0 = sc.window.map_or(0.0, |w| w.start);
    let tp = cfg.t_prime.unwrap_or(t0);
    let second = cfg.probe_second_moment.unwrap_or_else(|| sc.init.map_or(0.5, |i| 0.5 * i.trace()));
    if !(tp >= t0 && tp < t0 + t_end) || cfg.n_points < 2 {
        return Err(Failure::Config("[correlation] needs t0 <= t_prime < t0 + t_end and n_points >= 2".into()));
    }
    let r = sc.response(t_end)?;
    let span = t0 + t_end - tp;
    let rows = (0..cfg.n_points)
        .into_par_iter()
        .map(|i| {
            let dt = span * i as f64 / (cfg.n_points - 1) as f64;
            let c = bath_correlation(&r, second, tp + dt, tp, t0)?;
            Ok(vec![dt, c.total.re, c.total.im, c.born.re, c.born.im, c.interaction.norm()])
        })
        .collect::<Res<Vec<_>>>()?;
    let mut t = Table::new(&["t_minus_tprime", "re_total", "im_total", "re_born", "im_born", "abs_interaction"]);
    t.rows = rows;
    let mut rec = Map::new();
    if sc.bath.script_n() > 0.0 {
        let ts = correlation_timescale_check(&r)?;
        rec.insert("decay_scale".into(), f(ts.decay_scale));
        rec.insert("never_decayed".into(), Value::Bool(ts.never_decayed));
        rec.insert("born_decay_scale".into(), f(ts.born_decay_scale));
        rec.insert("born_never_decayed".into(), Value::Bool(ts.born_never_decayed));
        rec.insert("predicted".into(), f(ts.predicted));
        rec.insert("ratio".into(), f(ts.ratio));
    }
    Ok(Output { record: Some(rec), table: Some(t) })
}

fn limits(sc: &Scenario) -> Res<Output> {
    let t_end = need(grid_end(sc), "[grid] t_end")?;
    let n = sc.config.limits.as_ref().map_or(200, |l| l.n_points);
    if n < 2 {
        return Err(Failure::Config("[limits] n_points must be >= 2".into()));
    }
    let r = sc.response(t_end)?;
    let k = sc.bath.k_squared().sqrt();
    let gamma = sc.markov.map_or(0.0, |m| m.gamma);
    let mut t = Table::new(&["tau", "exact", "narrow_band", "markov"]);
    for i in 0..n {
        let tau = t_end * i as f64 / (n - 1) as f64;
        t.rows.push(vec![tau, r.g_at(tau)?.re, (k * tau).cos(), (-gamma * tau / 2.0).exp()]);
    }
    Ok(Output::table(t))
}
