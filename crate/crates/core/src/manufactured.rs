//! Closed-form manufactured vector potential for the magnetostatic test,
//! with hand-derived induction `B = curl A` and current `J = curl(B / mu)`
//! per Fourier mode.
//!
//! ```text
//! A_rho   = cos(3 theta) (5 - z)^3 rho^(g+1) e^(-rho)
//! A_z     = rho^2 (sin theta - 2 sin^3 theta) (5 - z)^g
//! A_theta = sin(2 theta) (1 - cos(5 - z)) rho^(g+1)
//! ```
//!
//! With `sin t - 2 sin^3 t = (sin 3t - sin t) / 2` the potential lives in the
//! modes `+3`, `+2` (symmetric) and `-1`, `-3` (antisymmetric); modes `+1`
//! and `-2` are identically zero.
//!
//! Every mode component is separable, `A_c = f_c(rho) g_c(z)`, and the
//! derivatives are formed from the one-dimensional factor jets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derham::{Mode, Parity};
use crate::error::{Error, Result};

/// Value, first and second derivative of a one-dimensional factor.
type Jet = [f64; 3];

const ZERO: Jet = [0.0; 3];

/// The manufactured solution for a given regularity parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manufactured {
    pub gamma: f64,
    /// Reluctivity `1 / mu`.
    pub nu: f64,
}

/// Cylindrical components `(rho, z, theta)` of one mode.
pub type Cyl = [f64; 3];

impl Manufactured {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma > 0.0) || !(mu > 0.0) {
            return Err(Error::OutOfRange(format!(
                "manufactured solution needs gamma > 0 and mu > 0 (gamma = {gamma}, mu = {mu})"
            )));
        }
        Ok(Self { gamma, nu: 1.0 / mu })
    }

    /// The modes of the study, `+-1, +-2, +-3`.
    pub fn modes() -> Vec<Mode> {
        [1, -1, 2, -2, 3, -3].into_iter().map(|m| Mode::from_signed(m).unwrap()).collect()
    }

    /// Factor jets `(f, g)` for the `rho`, `z`, `theta` components.
    fn factors(&self, mode: Mode, rho: f64, z: f64) -> ([Jet; 3], [Jet; 3]) {
        let g = self.gamma;
        let s = 5.0 - z;
        let mut f = [ZERO; 3];
        let mut h = [ZERO; 3];
        match mode.signed() {
            3 => {
                let a = g + 1.0;
                let e = (-rho).exp();
                f[0] = [
                    rho.powf(a) * e,
                    (a * rho.powf(a - 1.0) - rho.powf(a)) * e,
                    (a * (a - 1.0) * rho.powf(a - 2.0) - 2.0 * a * rho.powf(a - 1.0) + rho.powf(a)) * e,
                ];
                h[0] = [s.powi(3), -3.0 * s * s, 6.0 * s];
            }
            2 => {
                let a = g + 1.0;
                f[2] = [rho.powf(a), a * rho.powf(a - 1.0), a * (a - 1.0) * rho.powf(a - 2.0)];
                h[2] = [1.0 - s.cos(), -s.sin(), s.cos()];
            }
            -1 | -3 => {
                let c = if mode.signed() == -1 { -0.5 } else { 0.5 };
                f[1] = [c * rho * rho, 2.0 * c * rho, 2.0 * c];
                h[1] = [s.powf(g), -g * s.powf(g - 1.0), g * (g - 1.0) * s.powf(g - 2.0)];
            }
            _ => {}
        }
        (f, h)
    }

    /// Mode coefficient of the potential.
    pub fn potential(&self, mode: Mode, rho: f64, z: f64) -> Cyl {
        let (f, g) = self.factors(mode, rho, z);
        [f[0][0] * g[0][0], f[1][0] * g[1][0], f[2][0] * g[2][0]]
    }

    /// Mode coefficient of `B = curl A` (angular pattern flipped w.r.t. `A`).
    pub fn induction(&self, mode: Mode, rho: f64, z: f64) -> Cyl {
        self.b_and_derivatives(mode, rho, z).0
    }

    /// Mode coefficient of `H = B / mu`.
    pub fn field_strength(&self, mode: Mode, rho: f64, z: f64) -> Cyl {
        self.induction(mode, rho, z).map(|b| self.nu * b)
    }

    /// Mode coefficient of `J = curl(B / mu)` (same angular pattern as `A`).
    pub fn current(&self, mode: Mode, rho: f64, z: f64) -> Cyl {
        let m = mode.m();
        let (b, d) = self.b_and_derivatives(mode, rho, z);
        let [br, bz, bt] = b;
        let [drbz, dzbt, drbt, dzbr] = d;
        [
            self.nu * (m / rho * bz - dzbt),
            self.nu * (bt / rho + drbt - m / rho * br),
            self.nu * (dzbr - drbz),
        ]
    }

    /// `B` and `(d_rho B_z, d_z B_theta, d_rho B_theta, d_z B_rho)`.
    fn b_and_derivatives(&self, mode: Mode, rho: f64, z: f64) -> (Cyl, [f64; 4]) {
        let m = mode.m();
        let (f, g) = self.factors(mode, rho, z);
        let [fr, fz, ft] = f;
        let [gr, gz, gt] = g;
        let r = rho;
        let b = [
            -(m / r) * fz[0] * gz[0] - ft[0] * gt[1],
            (ft[0] / r + ft[1]) * gt[0] + (m / r) * fr[0] * gr[0],
            fr[0] * gr[1] - fz[1] * gz[0],
        ];
        let d = [
            (ft[1] / r - ft[0] / (r * r) + ft[2]) * gt[0] + m * (fr[1] / r - fr[0] / (r * r)) * gr[0],
            fr[0] * gr[2] - fz[1] * gz[1],
            fr[1] * gr[1] - fz[2] * gz[0],
            -(m / r) * fz[0] * gz[1] - ft[0] * gt[2],
        ];
        (b, d)
    }

    /// Full three-dimensional Cartesian field built from mode coefficients.
    /// `flip` selects the curl-image angular pattern.
    fn cartesian(&self, x: [f64; 3], flip: bool, coef: impl Fn(Mode, f64, f64) -> Cyl) -> [f64; 3] {
        let rho = x[0].hypot(x[1]);
        let th = x[1].atan2(x[0]);
        let (c, s) = (th.cos(), th.sin());
        let mut out = [0.0; 3];
        for mode in Self::modes() {
            let [ur, uz, ut] = coef(mode, rho, x[2]);
            let n = mode.order as f64 * th;
            // symmetric potentials: (cos, cos, sin); the curl swaps cos and sin
            let sym = (mode.parity == Parity::Symmetric) != flip;
            let (a, b) = if sym { (n.cos(), n.sin()) } else { (n.sin(), n.cos()) };
            let (vr, vz, vt) = (ur * a, uz * a, ut * b);
            out[0] += vr * c - vt * s;
            out[1] += vr * s + vt * c;
            out[2] += vz;
        }
        out
    }

    /// Checks the hand-derived `B` and `J` against fourth-order central
    /// differences of the Cartesian fields at random interior points.
    /// Returns the largest relative deviation.
    pub fn validate(&self, seed: u64, points: usize) -> Result<f64> {
        const TOL: f64 = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1e-3;
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let rho = rng.random_range(0.2..1.0);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let z = rng.random_range(4.0..4.8);
            let x = [rho * th.cos(), rho * th.sin(), z];
            let a = |p: [f64; 3]| self.cartesian(p, false, |m, r, z| self.potential(m, r, z));
            let b = |p: [f64; 3]| self.cartesian(p, true, |m, r, z| self.field_strength(m, r, z));
            let b_fd = curl_fd(&a, x, h);
            let b_ex = self.cartesian(x, true, |m, r, z| self.induction(m, r, z));
            let j_fd = curl_fd(&b, x, h);
            let j_ex = self.cartesian(x, false, |m, r, z| self.current(m, r, z));
            for (fd, ex, what) in [(b_fd, b_ex, "curl A"), (j_fd, j_ex, "curl(curl A / mu)")] {
                let scale = norm3(ex).max(f64::MIN_POSITIVE);
                let diff = norm3([fd[0] - ex[0], fd[1] - ex[1], fd[2] - ex[2]]);
                let rel = diff / scale;
                worst = worst.max(rel);
                if !(rel <= TOL) {
                    return Err(Error::ManufacturedValidation(format!(
                        "{what} deviates from finite differences by {rel:.3e} at rho = {rho}, theta = {th}, z = {z}"
                    )));
                }
            }
        }
        Ok(worst)
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Fourth-order central-difference curl of a Cartesian vector field.
fn curl_fd(f: &impl Fn([f64; 3]) -> [f64; 3], x: [f64; 3], h: f64) -> [f64; 3] {
    // d[i][j] = d f_i / d x_j
    let mut d = [[0.0; 3]; 3];
    for (j, _) in x.iter().enumerate() {
        let at = |k: f64| {
            let mut p = x;
            p[j] += k * h;
            f(p)
        };
        let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
        for i in 0..3 {
            d[i][j] = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
        }
    }
    [d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]]
}
