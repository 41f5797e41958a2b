//! Per-mode Galerkin matrices on the weighted space `L^2_rho`.
//!
//! Everything is assembled in tilde variables: the `Z1` / `Z2` basis
//! functions are pushed to physical cylindrical components at quadrature
//! points, and differential operators are applied through the exact
//! matrices of [`DeRhamComplex2D`]:
//!
//! ```text
//! M_m = M1(eps),  A_m = C^T M2(1/mu) C,  B_m = M1(eps) G.
//! ```

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::derham::{DeRhamComplex2D, ModeBasisValue, Mode};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryKind, NurbsGeometry};
use crate::quadrature::{ElementRule2D, GaussLegendre, QuadPoint};
use crate::sparse::{self, Csr};
use crate::spline::{Edge, TensorJet};

/// Permittivity and permeability.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Material {
    pub eps: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(eps: f64, mu: f64) -> Result<Self> {
        if !(eps > 0.0 && mu > 0.0 && eps.is_finite() && mu.is_finite()) {
            return Err(Error::OutOfRange(format!("material constants must be positive (eps = {eps}, mu = {mu})")));
        }
        Ok(Self { eps, mu })
    }

    pub fn vacuum() -> Self {
        Self { eps: crate::VACUUM_PERMITTIVITY, mu: crate::VACUUM_PERMEABILITY }
    }
}

/// Source data for the load vector of one mode.
pub trait ModeSource: Sync {
    /// Current density `(J_rho, J_z, J_theta)` at `(rho, z)`.
    fn current(&self, mode: Mode, x: [f64; 2]) -> [f64; 3];
    /// Surface term `(H x n)` on natural edges; `normal` is the outward
    /// unit normal in the meridian plane.
    fn surface(&self, _mode: Mode, _x: [f64; 2], _normal: [f64; 2]) -> [f64; 3] {
        [0.0; 3]
    }
}

struct PointData {
    q: QuadPoint,
    jets: [Vec<TensorJet>; 4],
}

struct ElementData {
    points: Vec<PointData>,
}

/// Quadrature data of a discrete complex on a geometry, shared by all modes.
pub struct Assembler<'a> {
    pub geometry: &'a NurbsGeometry,
    pub complex: &'a DeRhamComplex2D,
    rule: GaussLegendre,
    elements: Vec<ElementData>,
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl<'a> Assembler<'a> {
    /// `points` Gauss points per direction on every element.
    pub fn new(geometry: &'a NurbsGeometry, complex: &'a DeRhamComplex2D, points: usize) -> Result<Self> {
        let rule = GaussLegendre::new(points)?;
        let [ne1, ne2] = complex.num_elements();
        let cells: Vec<[usize; 2]> = (0..ne2).flat_map(|e2| (0..ne1).map(move |e1| [e1, e2])).collect();
        let elements = cells
            .par_iter()
            .map(|&e| {
                let er = ElementRule2D::new(geometry, complex.element(e), &rule)?;
                let points = er
                    .points
                    .into_iter()
                    .map(|q| PointData { jets: complex.factor_jets(e, q.xi), q })
                    .collect();
                Ok(ElementData { points })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { geometry, complex, rule, elements })
    }

    fn assemble_mass(
        &self,
        n: usize,
        basis: impl Fn(&PointData) -> Vec<ModeBasisValue> + Sync,
        weight: f64,
    ) -> Csr {
        let local: Vec<Vec<(usize, usize, f64)>> = self
            .elements
            .par_iter()
            .map(|el| {
                let mut idx: Vec<usize> = Vec::new();
                let mut mat: Vec<f64> = Vec::new();
                for pd in &el.points {
                    let vals = basis(pd);
                    if idx.is_empty() {
                        idx = vals.iter().map(|v| v.index).collect();
                        mat = vec![0.0; idx.len() * idx.len()];
                    }
                    let w = weight * pd.q.weight;
                    let k = idx.len();
                    for (a, va) in vals.iter().enumerate() {
                        for (b, vb) in vals.iter().enumerate().skip(a) {
                            mat[a * k + b] += w * dot3(&va.value, &vb.value);
                        }
                    }
                }
                let k = idx.len();
                let mut out = Vec::with_capacity(k * k);
                for a in 0..k {
                    for b in a..k {
                        let v = mat[a * k + b];
                        out.push((idx[a], idx[b], v));
                        if a != b {
                            out.push((idx[b], idx[a], v));
                        }
                    }
                }
                out
            })
            .collect();
        let mut coo = CooMatrix::new(n, n);
        for trip in local {
            for (i, j, v) in trip {
                coo.push(i, j, v);
            }
        }
        CsrMatrix::from(&coo)
    }

    /// `int weight u_i . u_j rho` over `Z1` (u = eta_1^{-1} of tilde basis).
    pub fn mass_z1(&self, mode: Mode, weight: f64) -> Csr {
        let m = mode.m();
        self.assemble_mass(self.complex.dims()[1], |pd| self.complex.z1_basis(&pd.jets, &pd.q.map, m), weight)
    }

    /// Like [`Self::mass_z1`] but only over the physical components selected
    /// by `mask` (`rho`, `z`, `theta`).
    pub fn mass_z1_components(&self, mode: Mode, weight: f64, mask: [bool; 3]) -> Csr {
        let m = mode.m();
        self.assemble_mass(
            self.complex.dims()[1],
            |pd| {
                let mut vals = self.complex.z1_basis(&pd.jets, &pd.q.map, m);
                for v in &mut vals {
                    for (c, keep) in mask.iter().enumerate() {
                        if !keep {
                            v.value[c] = 0.0;
                        }
                    }
                }
                vals
            },
            weight,
        )
    }

    /// `int weight w_i . w_j rho` over `Z2`.
    pub fn mass_z2(&self, mode: Mode, weight: f64) -> Csr {
        let m = mode.m();
        self.assemble_mass(self.complex.dims()[2], |pd| self.complex.z2_basis(&pd.jets, &pd.q.map, m), weight)
    }

    /// `int weight u_i u_j rho` over `Z0`.
    pub fn mass_z0(&self, mode: Mode, weight: f64) -> Csr {
        let m = mode.m();
        self.assemble_mass(self.complex.dims()[0], |pd| self.complex.z0_basis(&pd.jets, &pd.q.map, m), weight)
    }

    /// Curl-curl matrix `C^T M2(nu) C`.
    pub fn curl_curl(&self, mode: Mode, nu: f64) -> Csr {
        let c = &self.complex.curl;
        let m2 = self.mass_z2(mode, nu);
        &(&c.transpose() * &m2) * c
    }

    /// Mixed matrix `M1(eps) G`: columns are `Z0` multipliers.
    pub fn mixed(&self, mode: Mode, eps: f64) -> Csr {
        &self.mass_z1(mode, eps) * &self.complex.grad
    }

    /// `f_i = int J . u_i rho + int_{natural edges} (H x n) . u_i rho ds`.
    pub fn load(&self, mode: Mode, source: &dyn ModeSource) -> Result<Vec<f64>> {
        let m = mode.m();
        let n = self.complex.dims()[1];
        let parts: Vec<Vec<(usize, f64)>> = self
            .elements
            .par_iter()
            .map(|el| {
                let mut out = Vec::new();
                for pd in &el.points {
                    let j = source.current(mode, pd.q.map.x);
                    for b in self.complex.z1_basis(&pd.jets, &pd.q.map, m) {
                        out.push((b.index, pd.q.weight * dot3(&j, &b.value)));
                    }
                }
                out
            })
            .collect();
        let mut f = vec![0.0; n];
        for part in parts {
            for (i, v) in part {
                f[i] += v;
            }
        }
        let labels = *self.geometry.labels();
        for edge in labels.edges_with(BoundaryKind::Neumann) {
            for (idx, v) in self.edge_load(edge, mode, source)? {
                f[idx] += v;
            }
        }
        Ok(f)
    }

    fn edge_load(&self, edge: Edge, mode: Mode, source: &dyn ModeSource) -> Result<Vec<(usize, f64)>> {
        let m = mode.m();
        let c = self.complex;
        let fixed = edge.fixed_dir();
        let along = 1 - fixed;
        let ne = c.num_elements();
        let e_fixed = if edge.fixed_value() == 0.0 { 0 } else { ne[fixed] - 1 };
        let mut out = Vec::new();
        for e_along in 0..ne[along] {
            let mut e = [0; 2];
            e[fixed] = e_fixed;
            e[along] = e_along;
            let (a, b) = c.x0.dirs[along].element(e_along);
            for (t, w) in self.rule.on_interval(a, b) {
                let xi = edge.point(t);
                let map = self.geometry.eval(xi)?;
                let ds = map.jac[0][along].hypot(map.jac[1][along]);
                let normal = self.geometry.outward_normal(edge, &map);
                let g = source.surface(mode, map.x, normal);
                let jets = c.factor_jets(e, xi);
                let weight = w * ds * map.x[0];
                for bv in c.z1_basis(&jets, &map, m) {
                    out.push((bv.index, weight * dot3(&g, &bv.value)));
                }
            }
        }
        Ok(out)
    }

    /// `sum_q w_q |u_h - u|^2 rho` for a `Z^k` field (`k = 1, 2`), where
    /// `u_h` has tilde coefficients `coeffs` and `exact` gives `(rho, z, theta)`.
    pub fn error_sq(&self, k: usize, mode: Mode, coeffs: &[f64], exact: &(dyn Fn([f64; 2]) -> [f64; 3] + Sync)) -> Result<f64> {
        if !(k == 1 || k == 2) || coeffs.len() != self.complex.dims()[k] {
            return Err(Error::DimensionMismatch(format!("Z{k} error with {} coefficients", coeffs.len())));
        }
        let m = mode.m();
        let parts: Vec<f64> = self
            .elements
            .par_iter()
            .map(|el| {
                let mut s = 0.0;
                for pd in &el.points {
                    let basis = if k == 1 {
                        self.complex.z1_basis(&pd.jets, &pd.q.map, m)
                    } else {
                        self.complex.z2_basis(&pd.jets, &pd.q.map, m)
                    };
                    let mut uh = [0.0; 3];
                    for b in &basis {
                        for d in 0..3 {
                            uh[d] += coeffs[b.index] * b.value[d];
                        }
                    }
                    let ex = exact(pd.q.map.x);
                    let diff = [uh[0] - ex[0], uh[1] - ex[1], uh[2] - ex[2]];
                    s += pd.q.weight * dot3(&diff, &diff);
                }
                s
            })
            .collect();
        Ok(parts.iter().sum())
    }

    /// `sum_q w_q |u|^2 rho` of an analytic field.
    pub fn norm_sq(&self, exact: &(dyn Fn([f64; 2]) -> [f64; 3] + Sync)) -> f64 {
        self.elements
            .iter()
            .flat_map(|el| el.points.iter())
            .map(|pd| {
                let u = exact(pd.q.map.x);
                pd.q.weight * dot3(&u, &u)
            })
            .sum()
    }
}

/// Free (unconstrained) DoFs of `Z1` and `Z0` under the geometry's labels.
///
/// On an essential edge the tangential trace of a `Z1` field vanishes iff
/// the tilde `v3` (`X0`) coefficients on that edge and the tangential
/// `X1` factor coefficients of the boundary row vanish: `b`-type (`v2`)
/// on `xi1 = const`, `a`-type (`v1`) on `xi2 = const`. Multipliers lose
/// their boundary `X0` coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct EssentialBc {
    pub free_z1: Vec<usize>,
    pub free_z0: Vec<usize>,
    pub removed_z1: usize,
    pub removed_z0: usize,
}

impl EssentialBc {
    pub fn new(complex: &DeRhamComplex2D, geometry: &NurbsGeometry) -> Self {
        let edges = geometry.labels().edges_with(BoundaryKind::Dirichlet);
        Self::for_edges(complex, &edges)
    }

    pub fn for_edges(complex: &DeRhamComplex2D, edges: &[Edge]) -> Self {
        let [n0, n1, _, _] = complex.dims();
        let (na, nb) = (complex.xa.dim(), complex.xb.dim());
        let mut fixed1 = vec![false; n1];
        let mut fixed0 = vec![false; n0];
        for &edge in edges {
            for i in complex.x0.edge_dofs(edge) {
                fixed0[i] = true;
                fixed1[na + nb + i] = true;
            }
            match edge.fixed_dir() {
                0 => complex.xb.edge_dofs(edge).into_iter().for_each(|i| fixed1[na + i] = true),
                _ => complex.xa.edge_dofs(edge).into_iter().for_each(|i| fixed1[i] = true),
            }
        }
        let free = |f: &[bool]| (0..f.len()).filter(|&i| !f[i]).collect::<Vec<_>>();
        let free_z1 = free(&fixed1);
        let free_z0 = free(&fixed0);
        Self { removed_z1: n1 - free_z1.len(), removed_z0: n0 - free_z0.len(), free_z1, free_z0 }
    }

    /// Scatters a reduced `Z1` vector back to full length (zeros on constrained DoFs).
    pub fn expand_z1(&self, n: usize, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; n];
        for (&i, &v) in self.free_z1.iter().zip(reduced) {
            full[i] = v;
        }
        full
    }
}

/// Assembled and reduced per-mode matrices.
#[derive(Clone, Debug)]
pub struct ModeSystem {
    pub mode: Mode,
    pub material: Material,
    /// Curl-curl on free `Z1` DoFs.
    pub a: Csr,
    /// Mass `eps` on free `Z1` DoFs.
    pub m: Csr,
    /// Mixed matrix, free `Z1` rows by free `Z0` columns.
    pub b: Csr,
    /// Load on free `Z1` DoFs, if a source was supplied.
    pub f: Option<Vec<f64>>,
    pub bc: EssentialBc,
}

impl ModeSystem {
    /// Assembles and eliminates essential DoFs.
    pub fn assemble(
        asm: &Assembler<'_>,
        mode: Mode,
        material: Material,
        source: Option<&dyn ModeSource>,
        with_mixed: bool,
    ) -> Result<Self> {
        let bc = EssentialBc::new(asm.complex, asm.geometry);
        let m1 = asm.mass_z1(mode, material.eps);
        let a_full = asm.curl_curl(mode, 1.0 / material.mu);
        let a = sparse::select(&a_full, &bc.free_z1, &bc.free_z1);
        let b = if with_mixed {
            let b_full = &m1 * &asm.complex.grad;
            sparse::select(&b_full, &bc.free_z1, &bc.free_z0)
        } else {
            CsrMatrix::zeros(bc.free_z1.len(), 0)
        };
        let m = sparse::select(&m1, &bc.free_z1, &bc.free_z1);
        let f = match source {
            Some(s) => {
                let full = asm.load(mode, s)?;
                Some(bc.free_z1.iter().map(|&i| full[i]).collect())
            }
            None => None,
        };
        Ok(Self { mode, material, a, m, b, f, bc })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derham::Mode;
    use crate::geometry::BoundaryLabels;
    use crate::quadrature::default_points;
    use crate::sparse::to_dense;
    use crate::spline::{KnotVector, SplineSpace1D};

    fn mode(m: i64) -> Mode {
        Mode::from_signed(m).unwrap()
    }

    fn rect(rho: (f64, f64), z: (f64, f64), labels: BoundaryLabels) -> NurbsGeometry {
        NurbsGeometry::rectangle(rho, z, labels).unwrap()
    }

    fn setup(g: &NurbsGeometry, p: usize, n: usize) -> DeRhamComplex2D {
        DeRhamComplex2D::from_space(&g.analysis_space([p, p], [n, n]).unwrap()).unwrap()
    }

    fn min_eig(a: &Csr) -> f64 {
        let d = to_dense(a);
        d.self_adjoint_eigenvalues(faer::Side::Lower).unwrap()[0]
    }

    fn max_asym(a: &Csr) -> f64 {
        let d = to_dense(a);
        let mut m: f64 = 0.0;
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                m = m.max((d[(i, j)] - d[(j, i)]).abs());
            }
        }
        m
    }

    #[test]
    fn mass_is_spd_and_linear_in_weight() {
        let g = rect((0.0, 1.0), (0.0, 1.0), BoundaryLabels::axis_and(BoundaryKind::Dirichlet));
        let c = setup(&g, 2, 4);
        let asm = Assembler::new(&g, &c, default_points(2)).unwrap();
        let m1 = asm.mass_z1(mode(1), 1.0);
        assert!(min_eig(&m1) > 0.0);
        assert!(max_asym(&m1) <= 1e-14);
        let m2 = asm.mass_z1(mode(1), 2.0);
        let d1 = to_dense(&m1);
        let d2 = to_dense(&m2);
        for i in 0..d1.nrows() {
            for j in 0..d1.ncols() {
                assert_eq!(d2[(i, j)], 2.0 * d1[(i, j)]);
            }
        }
        // parity only flips the sign of m, which the quadratic forms do not see
        let anti = to_dense(&asm.mass_z1(mode(-1), 1.0));
        assert!((&anti - &d1).norm_max() <= 1e-15 * d1.norm_max());
    }

    #[test]
    fn single_element_entry_against_hand_integral() {
        // p = 1 on the identity geometry: the X0 basis function (1-x)(1-y) in
        // the u_theta block gives u = (-b/m, 0, b), so the (v3, v3) entry
        // equals (1 + 1/m^2) int b^2 rho = (1 + 1/m^2) * (1/12) * (1/3).
        let g = rect((0.0, 1.0), (0.0, 1.0), BoundaryLabels::axis_and(BoundaryKind::Neumann));
        let c = setup(&g, 1, 1);
        let asm = Assembler::new(&g, &c, 3).unwrap();
        let m = 2.0;
        let d = to_dense(&asm.mass_z1(mode(2), 1.0));
        let k = c.xa.dim() + c.xb.dim();
        let exact = (1.0 + 1.0 / (m * m)) / 36.0;
        assert!((d[(k, k)] - exact).abs() <= 1e-13);
        // a-type basis (x-independent, (1-y)), u = (rho b / m, 0, 0)
        let exact_a = (1.0 / (m * m)) * 0.25 * (1.0 / 3.0);
        assert!((d[(0, 0)] - exact_a).abs() <= 1e-13);
    }

    #[test]
    fn curl_curl_kills_gradients() {
        let g = NurbsGeometry::quarter_annulus(0.5, 1.5, BoundaryLabels::axis_and(BoundaryKind::Dirichlet)).unwrap();
        let c = setup(&g, 2, 3);
        let asm = Assembler::new(&g, &c, 4).unwrap();
        let a = asm.curl_curl(mode(2), 1.0);
        assert!(max_asym(&a) <= 1e-12 * sparse::max_abs(&a));
        let u: Vec<f64> = (0..c.dims()[0]).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let gu = sparse::matvec(&c.grad, &u);
        let agu = sparse::matvec(&a, &gu);
        let scale = sparse::max_abs(&a) * sparse::norm2(&gu);
        assert!(sparse::norm2(&agu) <= 1e-10 * scale);
        assert!(min_eig(&a) >= -1e-10 * sparse::max_abs(&a));
    }

    /// Direct assembly of the mixed and curl-curl matrices from the
    /// cylindrical operator formulas on an axis-aligned rectangle, where the
    /// push-forwards are constant scalings.
    #[test]
    fn alternative_assembly_paths_agree() {
        let (r0, r1, z0, z1) = (0.0, 0.7, 1.0, 1.5);
        let (hx, hz) = (r1 - r0, z1 - z0);
        let g = rect((r0, r1), (z0, z1), BoundaryLabels::axis_and(BoundaryKind::Neumann));
        let c = setup(&g, 2, 2);
        let asm = Assembler::new(&g, &c, 5).unwrap();
        for md in [mode(3), mode(-2)] {
            let m = md.m();
            let [n0, n1, _, _] = c.dims();
            let (na, nb) = (c.xa.dim(), c.xb.dim());
            let mut bd = faer::Mat::<f64>::zeros(n1, n0);
            let mut ad = faer::Mat::<f64>::zeros(n1, n1);
            for e2 in 0..2 {
                for e1 in 0..2 {
                    let el = ElementRule2D::new(&g, c.element([e1, e2]), &GaussLegendre::new(5).unwrap()).unwrap();
                    for q in &el.points {
                        let rho = q.map.x[0];
                        let jets = c.factor_jets([e1, e2], q.xi);
                        // physical u and curl u of Z1 basis functions
                        let mut u: Vec<(usize, [f64; 3], [f64; 3])> = Vec::new();
                        for j in &jets[1] {
                            let (b, bz) = (j.value, j.grad[1] / hz);
                            let ur = rho * b / (m * hx);
                            u.push((j.index, [ur, 0.0, 0.0], [0.0, (m / rho) * ur, rho * bz / (m * hx)]));
                        }
                        for j in &jets[2] {
                            let (b, br) = (j.value, j.grad[0] / hx);
                            let uz = rho * b / (m * hz);
                            let drho_uz = (b + rho * br) / (m * hz);
                            u.push((na + j.index, [0.0, uz, 0.0], [-(m / rho) * uz, 0.0, -drho_uz]));
                        }
                        for j in &jets[0] {
                            let (b, br, bz) = (j.value, j.grad[0] / hx, j.grad[1] / hz);
                            let (ur, ut) = (-b / m, b);
                            let curl = [-bz, ut / rho + br + (m / rho) * ur, -bz / m];
                            u.push((na + nb + j.index, [ur, 0.0, ut], curl));
                        }
                        let grads: Vec<(usize, [f64; 3])> = jets[0]
                            .iter()
                            .map(|j| {
                                let (b, br, bz) = (j.value, j.grad[0] / hx, j.grad[1] / hz);
                                (j.index, [(b + rho * br) / m, rho * bz / m, -b])
                            })
                            .collect();
                        for (i, ui, ci) in &u {
                            for (k, gk) in &grads {
                                bd[(*i, *k)] += q.weight * dot3(ui, gk);
                            }
                            for (k, _, ck) in &u {
                                ad[(*i, *k)] += q.weight * dot3(ci, ck);
                            }
                        }
                    }
                }
            }
            let b = to_dense(&asm.mixed(md, 1.0));
            let a = to_dense(&asm.curl_curl(md, 1.0));
            assert!((&b - &bd).norm_max() <= 1e-12 * bd.norm_max(), "B mismatch for m = {md}");
            assert!((&a - &ad).norm_max() <= 1e-12 * ad.norm_max(), "A mismatch for m = {md}");
            // constant multiplier: G 1 = (0, 0, -1)
            let ones = vec![1.0; n0];
            let col = sparse::matvec(&asm.mixed(md, 1.0), &ones);
            let mut e3 = vec![0.0; n1];
            e3[na + nb..].iter_mut().for_each(|v| *v = -1.0);
            let mass_e3 = sparse::matvec(&asm.mass_z1(md, 1.0), &e3);
            for (x, y) in col.iter().zip(&mass_e3) {
                assert!((x - y).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn removed_dof_counts() {
        let all_neumann = BoundaryLabels::axis_and(BoundaryKind::Neumann);
        let g = rect((0.0, 1.0), (0.0, 1.0), all_neumann);
        let c = setup(&g, 2, 2);
        let bc = EssentialBc::new(&c, &g);
        assert_eq!((bc.removed_z1, bc.removed_z0), (0, 0));

        // all-PEC rectangle away from the axis, p = 2, 2x2 elements:
        // n = 4, reduced n' = 3. X0 boundary: 4*4 - 2*2 = 12.
        // b-type (4 x 3) rows i = 0, 3: 2*3 = 6; a-type (3 x 4) rows j = 0, 3: 2*3 = 6.
        let pec = BoundaryLabels {
            xi1_min: BoundaryKind::Dirichlet,
            xi1_max: BoundaryKind::Dirichlet,
            xi2_min: BoundaryKind::Dirichlet,
            xi2_max: BoundaryKind::Dirichlet,
        };
        let g = rect((1.0, 2.0), (0.0, 1.0), pec);
        let c = setup(&g, 2, 2);
        let bc = EssentialBc::new(&c, &g);
        assert_eq!(bc.removed_z1, 12 + 6 + 6);
        assert_eq!(bc.removed_z0, 12);
    }

    #[test]
    fn tangential_trace_vanishes_on_constrained_field() {
        let g = NurbsGeometry::pillbox_section(1.0, 2.0).unwrap();
        let c = setup(&g, 2, 3);
        let bc = EssentialBc::new(&c, &g);
        let reduced: Vec<f64> = (0..bc.free_z1.len()).map(|i| ((i * 31) % 17) as f64 / 17.0 - 0.5).collect();
        let full = bc.expand_z1(c.dims()[1], &reduced);
        let md = mode(1);
        for edge in [Edge::Xi1Max, Edge::Xi2Min, Edge::Xi2Max] {
            let pts: Vec<[f64; 2]> = (0..=20).map(|k| edge.point(k as f64 / 20.0)).collect();
            for (xi, f) in pts.iter().zip(c.eval_mode_field(&g, 1, md, &full, &pts).unwrap()) {
                let map = g.eval(*xi).unwrap();
                let n = g.outward_normal(edge, &map);
                let tan = f.physical[0] * (-n[1]) + f.physical[1] * n[0];
                assert!(tan.abs() <= 1e-10 && f.physical[2].abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn pec_kernel_dimension_matches_constrained_gradients() {
        let g = NurbsGeometry::pillbox_section(1.0, 1.0).unwrap();
        let c = setup(&g, 2, 2);
        let asm = Assembler::new(&g, &c, 4).unwrap();
        let sys = ModeSystem::assemble(&asm, mode(1), Material::new(1.0, 1.0).unwrap(), None, false).unwrap();
        let ev = {
            let a = to_dense(&sys.a);
            let m = to_dense(&sys.m);
            let l = m.llt(faer::Side::Lower).unwrap();
            let mut linv = faer::Mat::<f64>::identity(m.nrows(), m.nrows());
            l.L().solve_lower_triangular_in_place(&mut linv);
            let c = &linv * &a * linv.transpose();
            c.self_adjoint_eigenvalues(faer::Side::Lower).unwrap()
        };
        let lmax = ev.last().copied().unwrap();
        let zeros = ev.iter().filter(|&&v| v.abs() <= 1e-8 * lmax).count();
        let bc = EssentialBc::new(&c, &g);
        assert_eq!(zeros, bc.free_z0.len());
    }

    #[test]
    fn load_is_linear_and_zero_for_zero_source() {
        struct Src(f64);
        impl ModeSource for Src {
            fn current(&self, _: Mode, x: [f64; 2]) -> [f64; 3] {
                [self.0 * x[1], 0.0, self.0 * (1.0 + x[0])]
            }
        }
        let g = rect((0.0, 1.0), (0.0, 1.0), BoundaryLabels::axis_and(BoundaryKind::Neumann));
        let c = setup(&g, 2, 2);
        let asm = Assembler::new(&g, &c, 4).unwrap();
        assert!(asm.load(mode(1), &Src(0.0)).unwrap().iter().all(|&v| v == 0.0));
        let f1 = asm.load(mode(1), &Src(1.0)).unwrap();
        let f3 = asm.load(mode(1), &Src(3.0)).unwrap();
        for (a, b) in f1.iter().zip(&f3) {
            assert!((3.0 * a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn material_validation() {
        assert!(Material::new(0.0, 1.0).is_err());
        assert!(Material::new(1.0, f64::INFINITY).is_err());
        let v = Material::vacuum();
        assert!((v.eps * v.mu * 299_792_458f64.powi(2) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn bc_for_univariate_sanity() {
        let s = SplineSpace1D::new(KnotVector::uniform(1, 1).unwrap());
        let c = DeRhamComplex2D::new(&s, &s).unwrap();
        let bc = EssentialBc::for_edges(&c, &[Edge::Xi2Max]);
        // X0 top edge: 2, a-type (1 x 2) top row: 1
        assert_eq!(bc.removed_z1, 3);
    }
}
