//! Bessel functions of the first kind, their roots, and the analytic
//! eigenfrequencies of a pillbox cavity.
//!
//! `J_m` uses the power series for `x < 1` and Miller's backward recurrence,
//! normalized by `J_0 + 2 sum J_2k = 1`, otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 60;
pub const MAX_ARG: f64 = 200.0;

const SCAN_STEP: f64 = std::f64::consts::PI / 8.0;
const BISECT_TOL: f64 = 1e-13;

fn check_args(m: u32, x: f64) -> Result<()> {
    if m > MAX_ORDER || !(0.0..=MAX_ARG).contains(&x) {
        return Err(Error::OutOfRange(format!(
            "Bessel J_m(x) is validated for m <= {MAX_ORDER}, 0 <= x <= {MAX_ARG} (got m = {m}, x = {x})"
        )));
    }
    Ok(())
}

fn series(m: u32, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=m {
        term *= h / k as f64;
    }
    let mut sum = term;
    let h2 = h * h;
    for k in 1..60 {
        term *= -h2 / (k as f64 * (k + m) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(m: u32, x: f64) -> f64 {
    const BIG: f64 = 1e250;
    let top = (m as f64).max(x);
    let mut n = (top + 30.0 + (50.0 * top).sqrt()) as usize;
    n += n % 2;
    let (mut next, mut cur) = (0.0, 1e-300);
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=n).rev() {
        // cur = J_k, next = J_{k+1} up to a common factor
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        let j = k - 1;
        if j == m as usize {
            result = cur;
        }
        if j % 2 == 0 && j > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > BIG {
            next /= BIG;
            cur /= BIG;
            norm /= BIG;
            result /= BIG;
        }
    }
    norm += cur;
    result / norm
}

/// `J_m(x)` for `m <= 60`, `0 <= x <= 200`.
pub fn bessel_j(m: u32, x: f64) -> Result<f64> {
    check_args(m, x)?;
    if x == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    Ok(if x < 1.0 { series(m, x) } else { miller(m, x) })
}

/// `J'_m(x) = (J_{m-1}(x) - J_{m+1}(x)) / 2`, with `J'_0 = -J_1`.
pub fn bessel_j_prime(m: u32, x: f64) -> Result<f64> {
    check_args(m, x)?;
    let up = if m < MAX_ORDER { bessel_j(m + 1, x)? } else { series_or_miller(m + 1, x) };
    if m == 0 {
        return Ok(-up);
    }
    Ok(0.5 * (bessel_j(m - 1, x)? - up))
}

fn series_or_miller(m: u32, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < 1.0 {
        series(m, x)
    } else {
        miller(m, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RootKind {
    /// Zeros of `J_m`.
    J,
    /// Zeros of `J'_m`.
    JPrime,
}

/// The `index`-th positive root of `J_m` or `J'_m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselRoot {
    pub order: u32,
    pub index: u32,
    pub kind: RootKind,
    pub value: f64,
}

fn eval_kind(kind: RootKind, m: u32, x: f64) -> Result<f64> {
    match kind {
        RootKind::J => bessel_j(m, x),
        RootKind::JPrime => bessel_j_prime(m, x),
    }
}

/// Brackets by scanning with step `pi/8` from `pi/8`, then bisects to `1e-13`.
/// The trivial root of `J'_m` at the origin is never counted.
pub fn bessel_root(m: u32, n: u32, kind: RootKind) -> Result<BesselRoot> {
    if n == 0 {
        return Err(Error::OutOfRange("root index starts at 1".into()));
    }
    check_args(m, 0.0)?;
    let f = |x: f64| eval_kind(kind, m, x);
    let mut a = SCAN_STEP;
    let mut fa = f(a)?;
    let mut found = 0;
    while a + SCAN_STEP <= MAX_ARG {
        let b = a + SCAN_STEP;
        let fb = f(b)?;
        if fa == 0.0 || fa * fb < 0.0 {
            found += 1;
            if found == n {
                let value = if fa == 0.0 { a } else { bisect(&f, a, b, fa)? };
                return Ok(BesselRoot { order: m, index: n, kind, value });
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::RootNotBracketed { order: m, index: n })
}

fn bisect(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64> {
    while b - a > BISECT_TOL {
        let c = 0.5 * (a + b);
        if c <= a || c >= b {
            break;
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fa * fc < 0.0 {
            b = c;
        } else {
            a = c;
            fa = fc;
        }
    }
    Ok(0.5 * (a + b))
}

/// Cavity mode family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CavityKind {
    #[serde(rename = "TM")]
    Tm,
    #[serde(rename = "TE")]
    Te,
}

impl std::fmt::Display for CavityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CavityKind::Tm => "TM",
            CavityKind::Te => "TE",
        })
    }
}

/// Right circular cylinder of radius `R` and length `L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PillboxSpec {
    pub radius: f64,
    pub length: f64,
    pub eps: f64,
    pub mu: f64,
}

impl PillboxSpec {
    pub fn new(radius: f64, length: f64, eps: f64, mu: f64) -> Result<Self> {
        for (name, v) in [("radius", radius), ("length", length), ("eps", eps), ("mu", mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange(format!("pillbox {name} must be positive (got {v})")));
            }
        }
        Ok(Self { radius, length, eps, mu })
    }

    /// The benchmark cavity, `R = 35 mm`, `L = 100 mm`, in vacuum.
    pub fn benchmark() -> Self {
        Self { radius: 0.035, length: 0.1, eps: crate::VACUUM_PERMITTIVITY, mu: crate::VACUUM_PERMEABILITY }
    }

    fn omega(&self, chi: f64, q: u32) -> f64 {
        let a = chi / self.radius;
        let b = q as f64 * std::f64::consts::PI / self.length;
        (a * a + b * b).sqrt() / (self.eps * self.mu).sqrt()
    }
}

/// `omega_mnq` in rad/s; TM uses the roots of `J_m`, TE those of `J'_m`.
pub fn pillbox_frequency(kind: CavityKind, m: u32, n: u32, q: u32, spec: &PillboxSpec) -> Result<f64> {
    if m == 0 {
        return Err(Error::ZeroMode);
    }
    let root = match kind {
        CavityKind::Tm => bessel_root(m, n, RootKind::J)?,
        CavityKind::Te if q == 0 => {
            return Err(Error::OutOfRange("TE cavity modes need q >= 1".into()));
        }
        CavityKind::Te => bessel_root(m, n, RootKind::JPrime)?,
    };
    Ok(spec.omega(root.value, q))
}

/// One analytic cavity mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub kind: CavityKind,
    pub m: u32,
    pub n: u32,
    pub q: u32,
    pub omega: f64,
}

impl CavityMode {
    pub fn label(&self) -> String {
        format!("{}{}{}{}", self.kind, self.m, self.n, self.q)
    }
}

/// The `count` lowest TM/TE frequencies of azimuthal order `m`, ascending.
pub fn oracle_frequencies(m: u32, count: usize, spec: &PillboxSpec) -> Result<Vec<CavityMode>> {
    if m == 0 {
        return Err(Error::ZeroMode);
    }
    let c = 1.0 / (spec.eps * spec.mu).sqrt();
    let mut roots: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut cut = 2.0 * pillbox_frequency(CavityKind::Tm, m, 1, 0, spec)?;
    loop {
        // all roots with chi / R <= cut / c
        let chi_max = cut / c * spec.radius;
        for (slot, kind) in roots.iter_mut().zip([RootKind::J, RootKind::JPrime]) {
            loop {
                let next = slot.len() as u32 + 1;
                let needed = slot.last().is_none_or(|&v| v <= chi_max);
                if !needed {
                    break;
                }
                match bessel_root(m, next, kind) {
                    Ok(r) => slot.push(r.value),
                    Err(Error::RootNotBracketed { .. }) => break,
                    Err(e) => return Err(e),
                }
            }
        }
        let q_max = (cut / c * spec.length / std::f64::consts::PI).floor() as u32;
        let mut modes = Vec::new();
        for (kind, list, q0) in [(CavityKind::Tm, &roots[0], 0), (CavityKind::Te, &roots[1], 1)] {
            for (i, &chi) in list.iter().enumerate() {
                for q in q0..=q_max {
                    let omega = spec.omega(chi, q);
                    if omega <= cut {
                        modes.push(CavityMode { kind, m, n: i as u32 + 1, q, omega });
                    }
                }
            }
        }
        if modes.len() >= count {
            modes.sort_by(|a, b| a.omega.total_cmp(&b.omega).then(a.kind.cmp(&b.kind)));
            modes.truncate(count);
            return Ok(modes);
        }
        let last = roots.iter().filter_map(|r| r.last()).fold(0.0_f64, |a, &b| a.max(b));
        if last >= MAX_ARG - SCAN_STEP {
            return Err(Error::OutOfRange(format!("cannot list {count} cavity modes for m = {m} within the root range")));
        }
        cut *= 1.5;
    }
}
