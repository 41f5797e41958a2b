//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use axiga::bessel::{bessel_j, bessel_j_prime, bessel_root, CavityKind, RootKind};
use axiga::derham::{eta, eta_inverse};
use axiga::geometry::{BoundaryKind, BoundaryLabels, FormDegree, NurbsGeometry};
use axiga::quadrature::GaussLegendre;
use axiga::spline::{KnotVector, SplineSpace1D};
use axiga::study::{run_study, StudyConfig, StudyKind, StudyReport, Target};

const SEED: u64 = 0x5eed_acce;
const CASES: usize = 1000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn max_value(report: &StudyReport, quantity: &str) -> f64 {
    report.rows_where(quantity).map(|r| r.value).fold(0.0, f64::max)
}

fn study(config: StudyConfig) -> Result<StudyReport, String> {
    run_study(&config).map_err(|e| format!("study failed: {e}"))
}

fn exactness() -> Result<Outcome, String> {
    let report = study(StudyConfig::defaults(StudyKind::Exactness))?;
    let cg = max_value(&report, "cg_max");
    let dc = max_value(&report, "dc_max");
    let ranks = report.rows_where("rank_equalities").all(|r| r.value == 4.0);
    let cells = report.rows_where("exact").count();
    Ok(outcome(
        cg <= 1e-12 && dc <= 1e-12 && ranks && cells == 27,
        format!("{cells} cells, max |CG| = {cg:.1e}, max |DC| = {dc:.1e}, rank equalities {}", if ranks { "hold" } else { "violated" }),
    ))
}

fn pillbox_m26() -> Result<Outcome, String> {
    let mut cfg = StudyConfig::defaults(StudyKind::Pillbox);
    cfg.degrees = vec![3];
    cfg.subdivisions = vec![32];
    cfg.modes = vec![26];
    let report = study(cfg)?;
    let errs: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.quantity.starts_with("omega_"))
        .map(|r| r.rel_error.unwrap_or(f64::NAN))
        .collect();
    let worst = errs.iter().copied().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let spurious = max_value(&report, "spurious_count");
    Ok(outcome(
        errs.len() == 10 && worst <= 1e-4 && spurious == 0.0,
        format!("{} modes, max relative error {worst:.2e}, {spurious} spurious", errs.len()),
    ))
}

fn te134_rates() -> Result<Outcome, String> {
    let mut cfg = StudyConfig::defaults(StudyKind::Pillbox);
    cfg.degrees = vec![2, 3];
    cfg.subdivisions = vec![4, 8, 16, 32];
    cfg.modes = vec![1];
    cfg.targets = vec![Target { kind: CavityKind::Te, n: 3, q: 4 }];
    let report = study(cfg)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [2, 3] {
        let need = 2.0 * p as f64 - 0.3;
        match report.rate(p, 1, "target_TE134") {
            Some(r) => {
                ok &= r >= need;
                parts.push(format!("p={p} rate {r:.2} (need {need:.1})"));
            }
            None => {
                ok = false;
                parts.push(format!("p={p} no rate (mode unmatched on some level)"));
            }
        }
    }
    Ok(outcome(ok, parts.join(", ")))
}

fn source_rates() -> Result<Outcome, String> {
    let mut rates = Vec::new();
    let mut gauge: f64 = 0.0;
    for gamma in [2.0, 0.5] {
        let mut cfg = StudyConfig::defaults(StudyKind::Source);
        cfg.gamma = gamma;
        let report = study(cfg)?;
        gauge = gauge.max(max_value(&report, "gauge_raw"));
        for p in [2, 3] {
            rates.push(report.rate(p, 0, "b_error").unwrap_or(f64::NAN));
        }
    }
    let [s2, s3, w2, w3] = rates[..] else { unreachable!() };
    let smooth = s2 >= 2.0 - 0.25 && s3 >= 3.0 - 0.25;
    let limited = w3 <= w2 + 0.3;
    Ok(outcome(
        smooth && limited && gauge <= 1e-10,
        format!("gamma=2: p2 {s2:.2}, p3 {s3:.2}; gamma=0.5: p2 {w2:.2}, p3 {w3:.2}; max gauge {gauge:.1e}"),
    ))
}

/// `J_m(x) = (1/pi) int_0^pi cos(m t - x sin t) dt` by the trapezoid rule,
/// spectrally accurate for this periodic integrand.
fn j_integral(m: u32, x: f64, deriv: bool) -> f64 {
    let panels = 2000;
    let h = PI / panels as f64;
    let f = |t: f64| {
        if deriv {
            t.sin() * (m as f64 * t - x * t.sin()).sin()
        } else {
            (m as f64 * t - x * t.sin()).cos()
        }
    };
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..panels {
        s += f(i as f64 * h);
    }
    s * h / PI
}

fn oracle_root(m: u32, n: u32, deriv: bool) -> f64 {
    let f = |x: f64| j_integral(m, x, deriv);
    let step = 0.05;
    let mut a = (m as f64).max(1e-3);
    let mut found = 0;
    loop {
        let b = a + step;
        if f(a) * f(b) < 0.0 {
            found += 1;
            if found == n {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(lo) * f(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return 0.5 * (lo + hi);
            }
        }
        a = b;
    }
}

fn bessel() -> Result<Outcome, String> {
    let mut worst_f: f64 = 0.0;
    let mut worst_root: f64 = 0.0;
    for (m, n, kind) in [(0, 1, RootKind::J), (1, 1, RootKind::JPrime), (1, 3, RootKind::JPrime), (26, 1, RootKind::JPrime)] {
        let root = bessel_root(m, n, kind).map_err(|e| e.to_string())?.value;
        let deriv = kind == RootKind::JPrime;
        let f = if deriv { bessel_j_prime(m, root) } else { bessel_j(m, root) }.map_err(|e| e.to_string())?;
        worst_f = worst_f.max(f.abs());
        worst_root = worst_root.max((root - oracle_root(m, n, deriv)).abs());
    }
    let mut worst_j: f64 = 0.0;
    for m in 0..=30 {
        for k in 0..=240 {
            let x = 0.25 * k as f64;
            let j = bessel_j(m, x).map_err(|e| e.to_string())?;
            worst_j = worst_j.max((j - j_integral(m, x, false)).abs());
        }
    }
    Ok(outcome(
        worst_f <= 1e-12 && worst_root <= 1e-11 && worst_j <= 1e-9,
        format!("max |f(root)| {worst_f:.1e}, max root deviation {worst_root:.1e}, max |J - oracle| {worst_j:.1e}"),
    ))
}

fn properties() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let err = |e: axiga::Error| e.to_string();
    let (mut pu, mut fd, mut gauss, mut pull, mut eta_dev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let annulus = NurbsGeometry::quarter_annulus(1.0, 2.0, BoundaryLabels::axis_and(BoundaryKind::Dirichlet)).map_err(err)?;
    for _ in 0..CASES {
        // partition of unity and derivative against central differences
        let p = rng.random_range(1..=4);
        let s = SplineSpace1D::new(KnotVector::new(&[0.0, 0.13, 0.5, 0.51, 1.0], p, &[p + 1, 1, p, 1, p + 1]).map_err(err)?);
        let x: f64 = rng.random_range(0.0..=1.0);
        let b = s.eval(x).map_err(err)?;
        pu = pu.max((b.values.iter().sum::<f64>() - 1.0).abs());
        let e = s.element_of(x).map_err(err)?;
        let (lo, hi) = s.element(e);
        // Richardson-extrapolated central difference: exact for the degree <= 4
        // polynomial pieces up to roundoff
        let h = 1e-4;
        let y = x.clamp(lo + 2.0 * h, hi - 2.0 * h);
        let jet = s.eval_jet_on_element(e, y);
        let central = |h: f64| {
            let (fp, fm) = (s.eval_on_element(e, y + h), s.eval_on_element(e, y - h));
            fp.values.iter().zip(&fm.values).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>()
        };
        let (d1, d2) = (central(h), central(0.5 * h));
        for a in 0..jet.derivs.len() {
            let d = (4.0 * d2[a] - d1[a]) / 3.0;
            fd = fd.max((d - jet.derivs[a]).abs() / jet.derivs[a].abs().max(1.0));
        }

        // Gauss-Legendre exactness up to degree 2n - 1
        let n = rng.random_range(1..=20);
        let k = rng.random_range(0..2 * n) as i32;
        let rule = GaussLegendre::new(n).map_err(err)?;
        gauss = gauss.max((rule.integrate(0.0, 1.0, |t| t.powi(k)) - 1.0 / (k as f64 + 1.0)).abs());

        // pullback / push-forward round trip
        let xi = [rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)];
        let v = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let map = annulus.eval(xi).map_err(err)?;
        for form in [FormDegree::Zero, FormDegree::One, FormDegree::OneStar, FormDegree::Two] {
            let v = &v[..form.components()];
            let back = map.push_forward(form, &map.pullback(form, v).map_err(err)?).map_err(err)?;
            for (a, b) in back.iter().zip(v) {
                pull = pull.max((a - b).abs() / b.abs().max(1.0));
            }
        }

        // eta round trip
        let k = rng.random_range(0..4);
        let m = rng.random_range(1..=30) as f64 * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let rho = rng.random_range(1e-3..10.0);
        let t = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let back = eta(k, m, rho, &eta_inverse(k, m, rho, &t));
        for (a, b) in back.iter().zip(&t) {
            eta_dev = eta_dev.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    Ok(outcome(
        pu <= 1e-14 && fd <= 1e-7 && gauss <= 1e-13 && pull <= 1e-13 && eta_dev <= 1e-13,
        format!(
            "{CASES} cases: partition {pu:.1e}, derivative {fd:.1e}, gauss {gauss:.1e}, pullback {pull:.1e}, eta {eta_dev:.1e}"
        ),
    ))
}

type Criterion = (&'static str, f64, fn() -> Result<Outcome, String>);

fn main() -> ExitCode {
    let only = std::env::args().nth(1);
    let criteria: [Criterion; 6] = [
        ("exactness", 30.0, exactness),
        ("pillbox_m26", 300.0, pillbox_m26),
        ("te134_rates", 600.0, te134_rates),
        ("source_rates", 900.0, source_rates),
        ("bessel_oracle", f64::INFINITY, bessel),
        ("property_suites", f64::INFINITY, properties),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let secs = t.elapsed().as_secs_f64();
        let (passed, detail) = match result {
            Ok(o) => (o.passed && secs <= budget, o.detail),
            Err(e) => (false, e),
        };
        let limit = if budget.is_finite() { format!(" (limit {budget:.0} s)") } else { String::new() };
        println!("{} {name}: {detail}; {secs:.1} s{limit}", if passed { "PASS" } else { "FAIL" });
        failed += usize::from(!passed);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
