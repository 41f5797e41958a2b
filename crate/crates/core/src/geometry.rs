//! The cross-section map `F: [0,1]^2 -> S` in the `(rho, z)` half-plane.
//!
//! `F` is a single NURBS patch. Each of the four parametric edges carries a
//! boundary label; an edge mapped onto the symmetry axis `rho = 0` must be
//! labelled [`BoundaryKind::Axis`] and never gets an essential condition.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{Edge, KnotVector, NurbsBasis, SplineSpace1D, TensorSplineSpace};

/// Sampled lower bound for `det J_F`.
pub const MIN_DET: f64 = 1e-10;
/// Tolerance for `rho = 0` on an axis edge.
pub const AXIS_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Part of the symmetry axis; natural for every mode `m != 0`.
    Axis,
    /// Perfect conductor / essential condition: vanishing tangential trace.
    Dirichlet,
    /// Natural condition; may carry surface data.
    Neumann,
}

/// Edge labels, one per parametric edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryLabels {
    pub xi1_min: BoundaryKind,
    pub xi1_max: BoundaryKind,
    pub xi2_min: BoundaryKind,
    pub xi2_max: BoundaryKind,
}

impl BoundaryLabels {
    /// Axis on `xi1 = 0`, the same label everywhere else.
    pub fn axis_and(rest: BoundaryKind) -> Self {
        Self {
            xi1_min: BoundaryKind::Axis,
            xi1_max: rest,
            xi2_min: rest,
            xi2_max: rest,
        }
    }

    pub fn get(&self, edge: Edge) -> BoundaryKind {
        match edge {
            Edge::Xi1Min => self.xi1_min,
            Edge::Xi1Max => self.xi1_max,
            Edge::Xi2Min => self.xi2_min,
            Edge::Xi2Max => self.xi2_max,
        }
    }

    pub fn set(&mut self, edge: Edge, kind: BoundaryKind) {
        match edge {
            Edge::Xi1Min => self.xi1_min = kind,
            Edge::Xi1Max => self.xi1_max = kind,
            Edge::Xi2Min => self.xi2_min = kind,
            Edge::Xi2Max => self.xi2_max = kind,
        }
    }

    pub fn edges_with(&self, kind: BoundaryKind) -> Vec<Edge> {
        Edge::ALL.into_iter().filter(|&e| self.get(e) == kind).collect()
    }
}

/// Point value and first derivatives of `F`.
///
/// `jac[a][b] = d x_a / d xi_b` with `x = (rho, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapJet {
    pub x: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

/// Which space of the complex a field belongs to, for pullbacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormDegree {
    /// `v -> v o F`
    Zero,
    /// `v -> J^T (v o F)`
    One,
    /// `v -> det(J) J^{-1} (v o F)`
    OneStar,
    /// `v -> det(J) (v o F)`
    Two,
}

impl FormDegree {
    pub fn components(self) -> usize {
        match self {
            FormDegree::One | FormDegree::OneStar => 2,
            FormDegree::Zero | FormDegree::Two => 1,
        }
    }
}

impl MapJet {
    pub fn rho(&self) -> f64 {
        self.x[0]
    }

    fn check(&self) -> Result<()> {
        if self.det.abs() <= MIN_DET || !self.det.is_finite() {
            return Err(Error::SingularJacobian {
                det: self.det,
                xi1: f64::NAN,
                xi2: f64::NAN,
            });
        }
        Ok(())
    }

    /// `J^T v`
    pub fn pull_one(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [j[0][0] * v[0] + j[1][0] * v[1], j[0][1] * v[0] + j[1][1] * v[1]]
    }

    /// `J^{-T} v`
    pub fn push_one(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        let d = self.det;
        [
            (j[1][1] * v[0] - j[1][0] * v[1]) / d,
            (-j[0][1] * v[0] + j[0][0] * v[1]) / d,
        ]
    }

    /// `det(J) J^{-1} v = adj(J) v`
    pub fn pull_one_star(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [j[1][1] * v[0] - j[0][1] * v[1], -j[1][0] * v[0] + j[0][0] * v[1]]
    }

    /// `J v / det(J)`
    pub fn push_one_star(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        let d = self.det;
        [
            (j[0][0] * v[0] + j[0][1] * v[1]) / d,
            (j[1][0] * v[0] + j[1][1] * v[1]) / d,
        ]
    }

    /// Pullback of physical values at this point into the parametric space.
    pub fn pullback(&self, form: FormDegree, v: &[f64]) -> Result<Vec<f64>> {
        self.transform(form, v, true)
    }

    /// Inverse of [`pullback`](Self::pullback).
    pub fn push_forward(&self, form: FormDegree, v: &[f64]) -> Result<Vec<f64>> {
        self.transform(form, v, false)
    }

    fn transform(&self, form: FormDegree, v: &[f64], pull: bool) -> Result<Vec<f64>> {
        if v.len() != form.components() {
            return Err(Error::DimensionMismatch(format!(
                "{form:?} field needs {} components, got {}",
                form.components(),
                v.len()
            )));
        }
        if form != FormDegree::Zero {
            self.check()?;
        }
        Ok(match (form, pull) {
            (FormDegree::Zero, _) => vec![v[0]],
            (FormDegree::One, true) => self.pull_one([v[0], v[1]]).to_vec(),
            (FormDegree::One, false) => self.push_one([v[0], v[1]]).to_vec(),
            (FormDegree::OneStar, true) => self.pull_one_star([v[0], v[1]]).to_vec(),
            (FormDegree::OneStar, false) => self.push_one_star([v[0], v[1]]).to_vec(),
            (FormDegree::Two, true) => vec![self.det * v[0]],
            (FormDegree::Two, false) => vec![v[0] / self.det],
        })
    }
}

/// Single-patch NURBS parametrization of the cross-section.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsGeometry {
    basis: NurbsBasis,
    control: Vec<[f64; 2]>,
    labels: BoundaryLabels,
}

impl NurbsGeometry {
    /// Builds and validates a geometry. Control points are `(rho, z)` and
    /// indexed like the tensor space (`j * n1 + i`).
    pub fn new(basis: NurbsBasis, control: Vec<[f64; 2]>, labels: BoundaryLabels) -> Result<Self> {
        if control.len() != basis.space().dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} control points for a basis of dimension {}",
                control.len(),
                basis.space().dim()
            )));
        }
        let g = Self { basis, control, labels };
        g.validate()?;
        Ok(g)
    }

    /// Bilinear map of the rectangle `[rho0, rho1] x [z0, z1]`.
    pub fn rectangle(rho: (f64, f64), z: (f64, f64), labels: BoundaryLabels) -> Result<Self> {
        let lin = SplineSpace1D::new(KnotVector::new(&[0.0, 1.0], 1, &[2, 2])?);
        let space = TensorSplineSpace::new(lin.clone(), lin);
        let basis = NurbsBasis::new(space, vec![1.0; 4])?;
        let control = vec![[rho.0, z.0], [rho.1, z.0], [rho.0, z.1], [rho.1, z.1]];
        Self::new(basis, control, labels)
    }

    /// Meridian section `[0, R] x [0, L]` of a pillbox cavity: axis on
    /// `rho = 0`, perfect conductor elsewhere.
    pub fn pillbox_section(radius: f64, length: f64) -> Result<Self> {
        if !(radius > 0.0 && length > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "pillbox dimensions must be positive (R = {radius}, L = {length})"
            )));
        }
        Self::rectangle(
            (0.0, radius),
            (0.0, length),
            BoundaryLabels::axis_and(BoundaryKind::Dirichlet),
        )
    }

    /// Quarter annulus `r_in <= |x| <= r_out`, `rho, z >= 0`, represented
    /// exactly with quadratic NURBS. `xi1` sweeps the angle from the axis
    /// (`xi1 = 0`, where `rho = 0`) down to `z = 0`; `xi2` is radial.
    pub fn quarter_annulus(r_in: f64, r_out: f64, labels: BoundaryLabels) -> Result<Self> {
        if !(0.0 < r_in && r_in < r_out) {
            return Err(Error::InvalidGeometry(format!(
                "need 0 < r_in < r_out, got {r_in}, {r_out}"
            )));
        }
        let quad = SplineSpace1D::new(KnotVector::new(&[0.0, 1.0], 2, &[3, 3])?);
        let lin = SplineSpace1D::new(KnotVector::new(&[0.0, 1.0], 1, &[2, 2])?);
        let space = TensorSplineSpace::new(quad, lin);
        let mut control = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for r in [r_in, r_out] {
            control.extend([[0.0, r], [r, r], [r, 0.0]]);
            weights.extend([1.0, FRAC_1_SQRT_2, 1.0]);
        }
        let basis = NurbsBasis::new(space, weights)?;
        Self::new(basis, control, labels)
    }

    pub fn basis(&self) -> &NurbsBasis {
        &self.basis
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.control
    }

    pub fn labels(&self) -> &BoundaryLabels {
        &self.labels
    }

    pub fn degrees(&self) -> [usize; 2] {
        let d = &self.basis.space().dirs;
        [d[0].degree(), d[1].degree()]
    }

    /// `(rho, z) = F(xi)`.
    pub fn map_point(&self, xi: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.eval(xi)?.x)
    }

    /// Jacobian matrix and determinant at `xi`; errors if singular.
    pub fn jacobian(&self, xi: [f64; 2]) -> Result<([[f64; 2]; 2], f64)> {
        let j = self.eval(xi)?;
        if j.det.abs() <= MIN_DET {
            return Err(Error::SingularJacobian { det: j.det, xi1: xi[0], xi2: xi[1] });
        }
        Ok((j.jac, j.det))
    }

    /// Map value and Jacobian at `xi`.
    pub fn eval(&self, xi: [f64; 2]) -> Result<MapJet> {
        let jets = self.basis.eval(xi)?;
        let mut x = [0.0; 2];
        let mut jac = [[0.0; 2]; 2];
        for j in &jets {
            let c = self.control[j.index];
            for a in 0..2 {
                x[a] += j.value * c[a];
                for b in 0..2 {
                    jac[a][b] += j.grad[b] * c[a];
                }
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        Ok(MapJet { x, jac, det })
    }

    /// Analysis spline space of degree `degrees` on the geometry breakpoints,
    /// each geometry element split into `subdivisions` parts. Interior
    /// geometry breakpoints keep the geometry's regularity (clamped to
    /// `0..=p-1`); new knots are simple.
    pub fn analysis_space(&self, degrees: [usize; 2], subdivisions: [usize; 2]) -> Result<TensorSplineSpace> {
        let mut dirs = Vec::with_capacity(2);
        for d in 0..2 {
            let p = degrees[d];
            let gk = self.basis.space().dirs[d].knot_vector();
            let pg = gk.degree() as i64;
            let l = gk.breakpoints().len();
            let mult: Vec<usize> = gk
                .multiplicities()
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    if i == 0 || i == l - 1 {
                        p + 1
                    } else {
                        let reg = (pg - r as i64).clamp(0, p as i64 - 1);
                        (p as i64 - reg).max(1) as usize
                    }
                })
                .collect();
            let base = SplineSpace1D::new(KnotVector::new(gk.breakpoints(), p, &mult)?);
            dirs.push(base.refine_uniform(subdivisions[d])?);
        }
        let s2 = dirs.pop().unwrap();
        let s1 = dirs.pop().unwrap();
        Ok(TensorSplineSpace::new(s1, s2))
    }

    /// Outward unit normal on a parametric edge at `xi` (in `(rho, z)`).
    pub fn outward_normal(&self, edge: Edge, jet: &MapJet) -> [f64; 2] {
        let d = edge.fixed_dir();
        let mut e = [0.0; 2];
        e[d] = if edge.fixed_value() == 0.0 { -1.0 } else { 1.0 };
        // parametric outward normal pushed as a covector
        let n = jet.push_one(e);
        let s = if jet.det < 0.0 { -1.0 } else { 1.0 };
        let len = n[0].hypot(n[1]);
        [s * n[0] / len, s * n[1] / len]
    }

    fn sample_points(&self) -> Vec<[f64; 2]> {
        const PER_ELEMENT: usize = 6;
        let axis_samples = |d: usize| -> Vec<f64> {
            let s = &self.basis.space().dirs[d];
            let mut v = Vec::new();
            for (a, b) in s.elements() {
                for k in 0..=PER_ELEMENT {
                    v.push(a + (b - a) * k as f64 / PER_ELEMENT as f64);
                }
            }
            v
        };
        let s1 = axis_samples(0);
        let s2 = axis_samples(1);
        s2.iter().flat_map(|&y| s1.iter().map(move |&x| [x, y])).collect()
    }

    fn validate(&self) -> Result<()> {
        let mut orientation = 0.0f64;
        for xi in self.sample_points() {
            let j = self.eval(xi)?;
            if j.x[0] < -AXIS_TOL {
                return Err(Error::InvalidGeometry(format!(
                    "rho = {} < 0 at xi = ({}, {})",
                    j.x[0], xi[0], xi[1]
                )));
            }
            if j.det.abs() < MIN_DET {
                return Err(Error::SingularJacobian { det: j.det, xi1: xi[0], xi2: xi[1] });
            }
            if orientation == 0.0 {
                orientation = j.det.signum();
            } else if j.det.signum() != orientation {
                return Err(Error::SingularJacobian { det: j.det, xi1: xi[0], xi2: xi[1] });
            }
        }
        if orientation < 0.0 {
            return Err(Error::InvalidGeometry(
                "parametrization must be orientation preserving (det J > 0)".into(),
            ));
        }
        for edge in Edge::ALL {
            let on_axis = (0..=32).all(|k| {
                let p = self.eval(edge.point(k as f64 / 32.0)).map(|j| j.x[0]);
                matches!(p, Ok(r) if r.abs() <= AXIS_TOL)
            });
            match (self.labels.get(edge), on_axis) {
                (BoundaryKind::Axis, false) => {
                    return Err(Error::InvalidGeometry(format!(
                        "edge {edge:?} is labelled axis but does not lie on rho = 0"
                    )))
                }
                (BoundaryKind::Dirichlet | BoundaryKind::Neumann, true) => {
                    return Err(Error::InvalidGeometry(format!(
                        "edge {edge:?} lies on rho = 0 and must be labelled axis"
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: GeometryFile = toml::from_str(text).map_err(|e| Error::Config {
            field: "geometry".into(),
            message: e.to_string(),
        })?;
        file.build()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let dirs = &self.basis.space().dirs;
        let file = GeometryFile {
            degrees: self.degrees(),
            knots: [0, 1].map(|d| KnotSpec {
                breakpoints: dirs[d].knot_vector().breakpoints().to_vec(),
                multiplicities: dirs[d].knot_vector().multiplicities().to_vec(),
            }),
            control_points: self.control.clone(),
            weights: Some(self.basis.weights().to_vec()),
            boundary: self.labels,
        };
        toml::to_string(&file).expect("geometry serializes")
    }
}

/// On-disk geometry description (TOML). See the README for the schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub degrees: [usize; 2],
    pub knots: [KnotSpec; 2],
    /// `(rho, z)` per basis function, first direction fastest.
    pub control_points: Vec<[f64; 2]>,
    /// Defaults to all ones (polynomial B-spline map).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub boundary: BoundaryLabels,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotSpec {
    pub breakpoints: Vec<f64>,
    pub multiplicities: Vec<usize>,
}

impl GeometryFile {
    pub fn build(&self) -> Result<NurbsGeometry> {
        let s = [0, 1].map(|d| {
            KnotVector::new(&self.knots[d].breakpoints, self.degrees[d], &self.knots[d].multiplicities)
                .map(SplineSpace1D::new)
        });
        let [s1, s2] = s;
        let space = TensorSplineSpace::new(s1?, s2?);
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; space.dim()]);
        let basis = NurbsBasis::new(space, weights)?;
        NurbsGeometry::new(basis, self.control_points.clone(), self.boundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn unit_square() -> NurbsGeometry {
        NurbsGeometry::rectangle((0.0, 1.0), (0.0, 1.0), BoundaryLabels::axis_and(BoundaryKind::Neumann)).unwrap()
    }

    fn annulus() -> NurbsGeometry {
        NurbsGeometry::quarter_annulus(1.0, 2.0, BoundaryLabels::axis_and(BoundaryKind::Dirichlet)).unwrap()
    }

    fn fd_jacobian(g: &NurbsGeometry, xi: [f64; 2]) -> [[f64; 2]; 2] {
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for b in 0..2 {
            let mut p = xi;
            let mut m = xi;
            p[b] += h;
            m[b] -= h;
            let fp = g.map_point(p).unwrap();
            let fm = g.map_point(m).unwrap();
            for a in 0..2 {
                jac[a][b] = (fp[a] - fm[a]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn identity_map() {
        let g = unit_square();
        let p = g.map_point([0.3, 0.8]).unwrap();
        assert_abs_diff_eq!(p[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
        let (j, d) = g.jacobian([0.3, 0.8]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_abs_diff_eq!(j[a][b], if a == b { 1.0 } else { 0.0 }, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
        let jet = g.eval([0.2, 0.4]).unwrap();
        for form in [FormDegree::Zero, FormDegree::One, FormDegree::OneStar, FormDegree::Two] {
            let v = &[0.7, -1.3][..form.components()];
            for (x, y) in jet.pullback(form, v).unwrap().iter().zip(v) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn translated_and_scaled_rectangle() {
        let g = NurbsGeometry::rectangle((0.0, 1.0), (4.0, 5.0), BoundaryLabels::axis_and(BoundaryKind::Neumann)).unwrap();
        assert_eq!(g.map_point([0.5, 0.5]).unwrap(), [0.5, 4.5]);
        let s = NurbsGeometry::rectangle((0.0, 2.0), (1.0, 4.0), BoundaryLabels::axis_and(BoundaryKind::Neumann)).unwrap();
        assert_abs_diff_eq!(s.jacobian([0.1, 0.9]).unwrap().1, 6.0, epsilon = 1e-14);
    }

    #[test]
    fn quarter_annulus_is_exact() {
        let g = annulus();
        let p = g.map_point([0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p[0].hypot(p[1]), 1.0, epsilon = 1e-14);
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let q = g.map_point([t, 1.0]).unwrap();
            assert_abs_diff_eq!(q[0].hypot(q[1]), 2.0, epsilon = 1e-14);
        }
        let xi = [0.37, 0.61];
        let (j, d) = g.jacobian(xi).unwrap();
        let fd = fd_jacobian(&g, xi);
        let fd_det = fd[0][0] * fd[1][1] - fd[0][1] * fd[1][0];
        assert!((fd_det - d).abs() <= 1e-6 * d.abs());
        for a in 0..2 {
            for b in 0..2 {
                assert!((fd[a][b] - j[a][b]).abs() <= 1e-6 * j[a][b].abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_commutes_with_pullback() {
        // grad of (v o F) = J^T grad v for v = rho^2 z
        let g = annulus();
        let v = |x: [f64; 2]| x[0] * x[0] * x[1];
        let h = 1e-6;
        for xi in [[0.2, 0.3], [0.71, 0.45], [0.5, 0.9]] {
            let jet = g.eval(xi).unwrap();
            let x = jet.x;
            let grad = [2.0 * x[0] * x[1], x[0] * x[0]];
            let pulled = jet.pullback(FormDegree::One, &grad).unwrap();
            for b in 0..2 {
                let mut p = xi;
                let mut m = xi;
                p[b] += h;
                m[b] -= h;
                let fd = (v(g.map_point(p).unwrap()) - v(g.map_point(m).unwrap())) / (2.0 * h);
                assert!((fd - pulled[b]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn divergence_commutes_with_pullback() {
        // div of the 1*-pullback equals the 2-pullback of div v
        let g = annulus();
        let field = |x: [f64; 2]| [x[0] * x[1], x[0] * x[0] + x[1].powi(3)];
        let div = |x: [f64; 2]| x[1] + 3.0 * x[1] * x[1];
        let h = 1e-5;
        let pulled = |xi: [f64; 2]| {
            let jet = g.eval(xi).unwrap();
            jet.pullback(FormDegree::OneStar, &field(jet.x)).unwrap()
        };
        let xi = [0.33, 0.52];
        let d0 = (pulled([xi[0] + h, xi[1]])[0] - pulled([xi[0] - h, xi[1]])[0]) / (2.0 * h);
        let d1 = (pulled([xi[0], xi[1] + h])[1] - pulled([xi[0], xi[1] - h])[1]) / (2.0 * h);
        let jet = g.eval(xi).unwrap();
        let expect = jet.pullback(FormDegree::Two, &[div(jet.x)]).unwrap()[0];
        assert!((d0 + d1 - expect).abs() <= 1e-6 * expect.abs().max(1.0));
    }

    #[test]
    fn validation_errors() {
        let neumann = BoundaryLabels::axis_and(BoundaryKind::Neumann);
        // axis label on an edge away from the axis
        assert!(NurbsGeometry::rectangle((1.0, 2.0), (0.0, 1.0), neumann).is_err());
        // rho = 0 edge without an axis label
        let all_pec = BoundaryLabels {
            xi1_min: BoundaryKind::Dirichlet,
            ..neumann
        };
        assert!(NurbsGeometry::rectangle((0.0, 2.0), (0.0, 1.0), all_pec).is_err());
        // negative rho
        assert!(NurbsGeometry::rectangle((-1.0, 2.0), (0.0, 1.0), all_pec).is_err());
        // degenerate and reversed maps
        assert!(NurbsGeometry::rectangle((1.0, 1.0), (0.0, 1.0), all_pec).is_err());
        assert!(NurbsGeometry::rectangle((2.0, 1.0), (0.0, 1.0), all_pec).is_err());
        assert!(NurbsGeometry::pillbox_section(0.0, 1.0).is_err());
        assert!(NurbsGeometry::quarter_annulus(2.0, 1.0, neumann).is_err());
        assert!(unit_square().map_point([1.5, 0.0]).is_err());
    }

    #[test]
    fn outward_normals() {
        let g = annulus();
        let jet = g.eval([0.4, 1.0]).unwrap();
        let n = g.outward_normal(Edge::Xi2Max, &jet);
        let r = jet.x[0].hypot(jet.x[1]);
        assert_abs_diff_eq!(n[0], jet.x[0] / r, epsilon = 1e-13);
        assert_abs_diff_eq!(n[1], jet.x[1] / r, epsilon = 1e-13);
        let sq = unit_square();
        let jet = sq.eval([1.0, 0.5]).unwrap();
        assert_eq!(sq.outward_normal(Edge::Xi1Max, &jet), [1.0, 0.0]);
        let jet = sq.eval([0.5, 0.0]).unwrap();
        assert_eq!(sq.outward_normal(Edge::Xi2Min, &jet), [0.0, -1.0]);
    }

    #[test]
    fn toml_round_trip() {
        let g = annulus();
        let text = g.to_toml_string();
        let back = NurbsGeometry::from_toml_str(&text).unwrap();
        assert_eq!(back, g);
        assert!(NurbsGeometry::from_toml_str("degrees = [1, 1]").is_err());
        let missing = NurbsGeometry::load(Path::new("/nonexistent/geometry.toml")).unwrap_err();
        assert!(missing.to_string().contains("/nonexistent/geometry.toml"));
    }

    #[test]
    fn analysis_space_refines_geometry_mesh() {
        let g = annulus();
        let s = g.analysis_space([3, 2], [4, 2]).unwrap();
        assert_eq!(s.num_elements(), [4, 2]);
        assert_eq!(s.dims(), [7, 4]);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, rng_seed: proptest::test_runner::RngSeed::Fixed(0x9e0), ..ProptestConfig::default() })]
        #[test]
        fn pullback_round_trips(x1 in 0.0f64..=1.0, x2 in 0.0f64..=1.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let g = annulus();
            let jet = g.eval([x1, x2]).unwrap();
            for form in [FormDegree::Zero, FormDegree::One, FormDegree::OneStar, FormDegree::Two] {
                let v = &[a, b][..form.components()];
                let back = jet.push_forward(form, &jet.pullback(form, v).unwrap()).unwrap();
                for (x, y) in back.iter().zip(v) {
                    prop_assert!((x - y).abs() <= 1e-13 * y.abs().max(1.0));
                }
            }
            // X^{1*} = P X^1 with the quarter-turn P = [[0, 1], [-1, 0]]
            let rot = |v: [f64; 2]| [v[1], -v[0]];
            let lhs = jet.pull_one_star(rot([a, b]));
            let rhs = rot(jet.pull_one([a, b]));
            for k in 0..2 {
                prop_assert!((lhs[k] - rhs[k]).abs() <= 1e-12 * (a.abs() + b.abs()).max(1.0));
            }
        }
    }
}
