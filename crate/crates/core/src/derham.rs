//! The discrete Cartesian complex on the parametric square and the
//! cylindrical mode spaces built from it.
//!
//! Factor spaces, with `a = S^{p1-1,p2}` and `b = S^{p1,p2-1}`:
//!
//! ```text
//! X0 = S^{p1,p2}   X1 = a x b   X1* = b x a   X2 = S^{p1-1,p2-1}
//! ```
//!
//! Mode-space coefficients ("tilde" variables) are laid out as
//!
//! ```text
//! Z0 = X0,  Z1 = [v1 in a | v2 in b | v3 in X0],
//! Z2 = [c1 in b | c2 in a | c3 in X2],  Z3 = X2,
//! ```
//!
//! and the operators act on them through exact, mode-independent matrices
//!
//! ```text
//! G u = (Drho u, Dz u, -u)
//! C v = (-v2 - Dz v3, v1 + Drho v3, Dz' v1 - Drho' v2)
//! D c = Drho' c1 + Dz' c2 - c3
//! ```
//!
//! The Fourier mode only enters through the `eta` maps, which multiply by
//! `rho` but never divide by it.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{MapJet, NurbsGeometry};
use crate::sparse::{self, Csr};
use crate::spline::{tensor_jets, SplineSpace1D, TensorJet, TensorSplineSpace};

/// Cos/sin pairing of a Fourier mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `u_rho, u_z ~ cos(m theta)`, `u_theta ~ sin(m theta)`.
    Symmetric,
    /// `u_rho, u_z ~ sin(m theta)`, `u_theta ~ cos(m theta)`.
    Antisymmetric,
}

/// A nonzero Fourier mode. Swapping cos and sin flips the sign of every
/// `theta`-derivative, so the antisymmetric mode `m` uses the symmetric
/// formulas with `-m`; [`signed`](Mode::signed) returns that value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub order: u32,
    pub parity: Parity,
}

impl Mode {
    pub fn new(order: u32, parity: Parity) -> Result<Self> {
        if order == 0 {
            return Err(Error::ZeroMode);
        }
        Ok(Self { order, parity })
    }

    /// Negative values are antisymmetric.
    pub fn from_signed(m: i64) -> Result<Self> {
        let parity = if m < 0 { Parity::Antisymmetric } else { Parity::Symmetric };
        let order = u32::try_from(m.unsigned_abs()).map_err(|_| Error::OutOfRange(format!("mode {m}")))?;
        Self::new(order, parity)
    }

    pub fn signed(&self) -> i64 {
        match self.parity {
            Parity::Symmetric => self.order as i64,
            Parity::Antisymmetric => -(self.order as i64),
        }
    }

    /// Signed mode number as used in the operator formulas.
    pub fn m(&self) -> f64 {
        self.signed() as f64
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.signed())
    }
}

/// `eta_{m,k}^{-1}`: tilde values to cylindrical components.
///
/// Tilde inputs: `k = 0`: `[u]`; `k = 1`: `[v_rho, v_z, v3]`;
/// `k = 2`: `[c_rho, c_z, c3]`; `k = 3`: `[s]`. Vector outputs are
/// ordered `(u_rho, u_z, u_theta)`.
pub fn eta_inverse(k: usize, m: f64, rho: f64, tilde: &[f64]) -> Vec<f64> {
    match k {
        0 => vec![rho * tilde[0] / m],
        1 => vec![(rho * tilde[0] - tilde[2]) / m, rho * tilde[1] / m, tilde[2]],
        2 => vec![tilde[0], tilde[1], (rho * tilde[2] + tilde[0]) / m],
        3 => vec![tilde[0]],
        _ => panic!("form degree {k} out of range"),
    }
}

/// `eta_{m,k}`: cylindrical components to tilde values (needs `rho > 0`
/// for `k <= 2`).
pub fn eta(k: usize, m: f64, rho: f64, phys: &[f64]) -> Vec<f64> {
    match k {
        0 => vec![m * phys[0] / rho],
        1 => vec![(m * phys[0] + phys[2]) / rho, m * phys[1] / rho, phys[2]],
        2 => vec![phys[0], phys[1], (m * phys[2] - phys[0]) / rho],
        3 => vec![phys[0]],
        _ => panic!("form degree {k} out of range"),
    }
}

/// The discrete complex and its exact operator matrices.
#[derive(Clone, Debug)]
pub struct DeRhamComplex2D {
    pub x0: TensorSplineSpace,
    pub xa: TensorSplineSpace,
    pub xb: TensorSplineSpace,
    pub x2: TensorSplineSpace,
    /// `X0 -> a`
    pub d_rho: Csr,
    /// `X0 -> b`
    pub d_z: Csr,
    /// `b -> X2`
    pub d_rho_b: Csr,
    /// `a -> X2`
    pub d_z_a: Csr,
    pub grad: Csr,
    pub curl: Csr,
    pub div: Csr,
}

/// One basis function of a mode space evaluated at a point: global index
/// and cylindrical components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeBasisValue {
    pub index: usize,
    pub value: [f64; 3],
}

/// A discrete field evaluated at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldEvaluation {
    pub rho_z: [f64; 2],
    /// Tilde values (see [`eta_inverse`] for the layout).
    pub tilde: Vec<f64>,
    /// Cylindrical components; a single entry for `k = 0, 3`.
    pub physical: Vec<f64>,
}

impl DeRhamComplex2D {
    pub fn new(s1: &SplineSpace1D, s2: &SplineSpace1D) -> Result<Self> {
        for s in [s1, s2] {
            if s.degree() < 1 {
                return Err(Error::InvalidDegree {
                    degree: s.degree(),
                    reason: "the complex needs degree >= 1 in each direction",
                });
            }
        }
        let (s1r, d1) = s1.derivative_matrix()?;
        let (s2r, d2) = s2.derivative_matrix()?;
        let (n1, n2, n1r, n2r) = (s1.dim(), s2.dim(), s1r.dim(), s2r.dim());

        // tensor index j * n1 + i: the second direction is the slow index
        let d_rho = sparse::kron(&sparse::identity(n2), &d1);
        let d_z = sparse::kron(&d2, &sparse::identity(n1));
        let d_z_a = sparse::kron(&d2, &sparse::identity(n1r));
        let d_rho_b = sparse::kron(&sparse::identity(n2r), &d1);

        let x0 = TensorSplineSpace::new(s1.clone(), s2.clone());
        let xa = TensorSplineSpace::new(s1r.clone(), s2.clone());
        let xb = TensorSplineSpace::new(s1.clone(), s2r.clone());
        let x2 = TensorSplineSpace::new(s1r, s2r);

        let i0 = sparse::identity(x0.dim());
        let ia = sparse::identity(xa.dim());
        let ib = sparse::identity(xb.dim());
        let i2 = sparse::identity(x2.dim());
        let neg = |m: &Csr| sparse::scale(m, -1.0);

        let grad = sparse::block(&[vec![Some(&d_rho)], vec![Some(&d_z)], vec![Some(&neg(&i0))]]);
        let (nib, nd_z, nd_rho_b) = (neg(&ib), neg(&d_z), neg(&d_rho_b));
        let curl = sparse::block(&[
            vec![None, Some(&nib), Some(&nd_z)],
            vec![Some(&ia), None, Some(&d_rho)],
            vec![Some(&d_z_a), Some(&nd_rho_b), None],
        ]);
        let div = sparse::block(&[vec![Some(&d_rho_b), Some(&d_z_a), Some(&neg(&i2))]]);
        debug_assert_eq!((n1r, n2r), (xa.dims()[0], xb.dims()[1]));

        Ok(Self { x0, xa, xb, x2, d_rho, d_z, d_rho_b, d_z_a, grad, curl, div })
    }

    pub fn from_space(space: &TensorSplineSpace) -> Result<Self> {
        Self::new(&space.dirs[0], &space.dirs[1])
    }

    pub fn degrees(&self) -> [usize; 2] {
        [self.x0.dirs[0].degree(), self.x0.dirs[1].degree()]
    }

    /// Dimensions of `Z0, Z1, Z2, Z3`.
    pub fn dims(&self) -> [usize; 4] {
        let (n0, na, nb, n2) = (self.x0.dim(), self.xa.dim(), self.xb.dim(), self.x2.dim());
        [n0, na + nb + n0, nb + na + n2, n2]
    }

    pub fn num_elements(&self) -> [usize; 2] {
        self.x0.num_elements()
    }

    /// Parametric element `(e1, e2)` as two intervals.
    pub fn element(&self, e: [usize; 2]) -> [(f64, f64); 2] {
        [self.x0.dirs[0].element(e[0]), self.x0.dirs[1].element(e[1])]
    }

    /// Element containing a parametric point.
    pub fn element_of(&self, xi: [f64; 2]) -> Result<[usize; 2]> {
        Ok([self.x0.dirs[0].element_of(xi[0])?, self.x0.dirs[1].element_of(xi[1])?])
    }

    fn jets(&self, space: &TensorSplineSpace, e: [usize; 2], xi: [f64; 2]) -> Vec<TensorJet> {
        let a = space.dirs[0].eval_jet_on_element(e[0], xi[0]);
        let b = space.dirs[1].eval_jet_on_element(e[1], xi[1]);
        tensor_jets(space.dirs[0].dim(), &a, &b)
    }

    /// Local basis of the four factor spaces at a point (values and
    /// parametric gradients), in the order `X0, a, b, X2`.
    pub fn factor_jets(&self, e: [usize; 2], xi: [f64; 2]) -> [Vec<TensorJet>; 4] {
        [
            self.jets(&self.x0, e, xi),
            self.jets(&self.xa, e, xi),
            self.jets(&self.xb, e, xi),
            self.jets(&self.x2, e, xi),
        ]
    }

    /// Physical values of the `Z0` basis functions (`rho b / m`).
    pub fn z0_basis(&self, jets: &[Vec<TensorJet>; 4], map: &MapJet, m: f64) -> Vec<ModeBasisValue> {
        let rho = map.rho();
        jets[0]
            .iter()
            .map(|j| ModeBasisValue { index: j.index, value: [rho * j.value / m, 0.0, 0.0] })
            .collect()
    }

    /// Physical `(u_rho, u_z, u_theta)` of the `Z1` basis functions.
    pub fn z1_basis(&self, jets: &[Vec<TensorJet>; 4], map: &MapJet, m: f64) -> Vec<ModeBasisValue> {
        let rho = map.rho();
        let na = self.xa.dim();
        let nb = self.xb.dim();
        let mut out = Vec::with_capacity(jets[1].len() + jets[2].len() + jets[0].len());
        for j in &jets[1] {
            let v = map.push_one([j.value, 0.0]);
            out.push(ModeBasisValue { index: j.index, value: [rho * v[0] / m, rho * v[1] / m, 0.0] });
        }
        for j in &jets[2] {
            let v = map.push_one([0.0, j.value]);
            out.push(ModeBasisValue { index: na + j.index, value: [rho * v[0] / m, rho * v[1] / m, 0.0] });
        }
        for j in &jets[0] {
            out.push(ModeBasisValue { index: na + nb + j.index, value: [-j.value / m, 0.0, j.value] });
        }
        out
    }

    /// Physical `(u_rho, u_z, u_theta)` of the `Z2` basis functions.
    pub fn z2_basis(&self, jets: &[Vec<TensorJet>; 4], map: &MapJet, m: f64) -> Vec<ModeBasisValue> {
        let rho = map.rho();
        let na = self.xa.dim();
        let nb = self.xb.dim();
        let mut out = Vec::with_capacity(jets[1].len() + jets[2].len() + jets[3].len());
        for j in &jets[2] {
            let w = map.push_one_star([j.value, 0.0]);
            out.push(ModeBasisValue { index: j.index, value: [w[0], w[1], w[0] / m] });
        }
        for j in &jets[1] {
            let w = map.push_one_star([0.0, j.value]);
            out.push(ModeBasisValue { index: nb + j.index, value: [w[0], w[1], w[0] / m] });
        }
        for j in &jets[3] {
            let s = j.value / map.det;
            out.push(ModeBasisValue { index: nb + na + j.index, value: [0.0, 0.0, rho * s / m] });
        }
        out
    }

    /// Physical values of the `Z3` basis functions.
    pub fn z3_basis(&self, jets: &[Vec<TensorJet>; 4], map: &MapJet) -> Vec<ModeBasisValue> {
        jets[3]
            .iter()
            .map(|j| ModeBasisValue { index: j.index, value: [j.value / map.det, 0.0, 0.0] })
            .collect()
    }

    /// Evaluates a discrete field of `Z^k` with the given coefficients at
    /// parametric points.
    pub fn eval_mode_field(
        &self,
        geometry: &NurbsGeometry,
        k: usize,
        mode: Mode,
        coeffs: &[f64],
        points: &[[f64; 2]],
    ) -> Result<Vec<FieldEvaluation>> {
        if k > 3 {
            return Err(Error::OutOfRange(format!("form degree {k}")));
        }
        if coeffs.len() != self.dims()[k] {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for Z{k} of dimension {}",
                coeffs.len(),
                self.dims()[k]
            )));
        }
        let m = mode.m();
        let (na, nb) = (self.xa.dim(), self.xb.dim());
        points
            .iter()
            .map(|&xi| {
                let e = self.element_of(xi)?;
                let map = geometry.eval(xi)?;
                let jets = self.factor_jets(e, xi);
                let sum = |js: &[TensorJet], off: usize| -> f64 {
                    js.iter().map(|j| j.value * coeffs[off + j.index]).sum()
                };
                let tilde = match k {
                    0 => vec![sum(&jets[0], 0)],
                    1 => {
                        let v = map.push_one([sum(&jets[1], 0), sum(&jets[2], na)]);
                        vec![v[0], v[1], sum(&jets[0], na + nb)]
                    }
                    2 => {
                        let w = map.push_one_star([sum(&jets[2], 0), sum(&jets[1], nb)]);
                        vec![w[0], w[1], sum(&jets[3], nb + na) / map.det]
                    }
                    _ => vec![sum(&jets[3], 0) / map.det],
                };
                let physical = eta_inverse(k, m, map.rho(), &tilde);
                Ok(FieldEvaluation { rho_z: map.x, tilde, physical })
            })
            .collect()
    }

    /// Rank and kernel bookkeeping of the complex for mode `m`.
    pub fn exactness_report(&self, mode: Mode) -> Result<ExactnessReport> {
        let dims = self.dims();
        let total: usize = dims.iter().sum();
        if total > EXACTNESS_DIM_CAP {
            return Err(Error::DimensionCap { dim: total, cap: EXACTNESS_DIM_CAP });
        }
        let cg = &self.curl * &self.grad;
        let dc = &self.div * &self.curl;
        let rank_g = numerical_rank(&sparse::to_dense(&self.grad))?;
        let rank_c = numerical_rank(&sparse::to_dense(&self.curl))?;
        let rank_d = numerical_rank(&sparse::to_dense(&self.div))?;
        Ok(ExactnessReport {
            mode: mode.signed(),
            dims,
            cg_max: sparse::max_abs(&cg),
            dc_max: sparse::max_abs(&dc),
            rank_g,
            dim_ker_g: dims[0] - rank_g,
            rank_c,
            dim_ker_c: dims[1] - rank_c,
            rank_d,
            dim_ker_d: dims[2] - rank_d,
        })
    }
}

/// Largest `dim Z0 + ... + dim Z3` accepted by [`DeRhamComplex2D::exactness_report`].
pub const EXACTNESS_DIM_CAP: usize = 4000;

/// Rank from singular values with the cutoff `max(r, c) * eps * sigma_max`.
pub fn numerical_rank(a: &Mat<f64>) -> Result<usize> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(0);
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let tol = s[0] * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    Ok(s.iter().filter(|&&v| v > tol).count())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactnessReport {
    pub mode: i64,
    pub dims: [usize; 4],
    pub cg_max: f64,
    pub dc_max: f64,
    pub rank_g: usize,
    pub dim_ker_g: usize,
    pub rank_c: usize,
    pub dim_ker_c: usize,
    pub rank_d: usize,
    pub dim_ker_d: usize,
}

impl ExactnessReport {
    /// `ker G = 0`, `ker C = im G`, `ker D = im C`, `im D = Z3`.
    pub fn rank_equalities(&self) -> [bool; 4] {
        [
            self.dim_ker_g == 0,
            self.dim_ker_c == self.rank_g,
            self.dim_ker_d == self.rank_c,
            self.rank_d == self.dims[3],
        ]
    }

    pub fn is_exact(&self, tol: f64) -> bool {
        self.cg_max <= tol && self.dc_max <= tol && self.rank_equalities().iter().all(|&b| b)
    }
}
