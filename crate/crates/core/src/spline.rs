//! Univariate and tensor-product B-spline / NURBS bases.
//!
//! Only open knot vectors on `[0, 1]` are supported. A knot vector is
//! described by its breakpoints and their multiplicities; the regularity at
//! an interior breakpoint is `p - r`.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Open knot vector on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    breakpoints: Vec<f64>,
    multiplicities: Vec<usize>,
    knots: Vec<f64>,
    /// `first_knot[e]` is the index in `knots` of the last copy of
    /// breakpoint `e`, i.e. the knot span of element `e`.
    spans: Vec<usize>,
}

impl KnotVector {
    /// Builds an open knot vector. End multiplicities must be `p + 1` and
    /// interior ones lie in `1..=p` (continuous splines).
    pub fn new(breakpoints: &[f64], degree: usize, multiplicities: &[usize]) -> Result<Self> {
        Self::with_interior_cap(breakpoints, degree, multiplicities, degree)
    }

    /// Open knot vector with all interior multiplicities equal to one.
    pub fn uniform(degree: usize, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidKnots("at least one element is required".into()));
        }
        let breakpoints: Vec<f64> = (0..=elements).map(|i| i as f64 / elements as f64).collect();
        let mut mult = vec![1; elements + 1];
        mult[0] = degree + 1;
        mult[elements] = degree + 1;
        Self::new(&breakpoints, degree, &mult)
    }

    fn with_interior_cap(
        breakpoints: &[f64],
        degree: usize,
        multiplicities: &[usize],
        max_interior: usize,
    ) -> Result<Self> {
        let l = breakpoints.len();
        if l < 2 {
            return Err(Error::InvalidKnots("need at least two breakpoints".into()));
        }
        if multiplicities.len() != l {
            return Err(Error::InvalidKnots(format!(
                "{} breakpoints but {} multiplicities",
                l,
                multiplicities.len()
            )));
        }
        if breakpoints[0] != 0.0 || breakpoints[l - 1] != 1.0 {
            return Err(Error::InvalidKnots("breakpoints must span [0, 1]".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidKnots(format!(
                "breakpoints not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        if multiplicities[0] != degree + 1 || multiplicities[l - 1] != degree + 1 {
            return Err(Error::InvalidKnots(format!(
                "end multiplicities must equal p + 1 = {}",
                degree + 1
            )));
        }
        for (i, &r) in multiplicities.iter().enumerate().take(l - 1).skip(1) {
            if r < 1 || r > max_interior {
                return Err(Error::InvalidKnots(format!(
                    "interior multiplicity {r} at breakpoint {i} outside 1..={max_interior}"
                )));
            }
        }

        let mut knots = Vec::with_capacity(multiplicities.iter().sum());
        let mut spans = Vec::with_capacity(l - 1);
        for (&b, &r) in breakpoints.iter().zip(multiplicities) {
            knots.extend(std::iter::repeat_n(b, r));
            spans.push(knots.len() - 1);
        }
        spans.pop();

        Ok(Self {
            degree,
            breakpoints: breakpoints.to_vec(),
            multiplicities: multiplicities.to_vec(),
            knots,
            spans,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// Expanded knots, length `n + p + 1`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of B-splines, `sum(r) - (p + 1)`.
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Regularity `p - r_i` at each breakpoint (ends included).
    pub fn regularity(&self) -> Vec<i64> {
        self.multiplicities
            .iter()
            .map(|&r| self.degree as i64 - r as i64)
            .collect()
    }

    pub fn num_elements(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn element_sizes(&self) -> Vec<f64> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Local quasi-uniformity constant: the smallest `eta >= 1` with
    /// `1/eta <= h_i / h_{i+1} <= eta` for all neighbouring elements.
    pub fn quasi_uniformity(&self) -> f64 {
        self.element_sizes()
            .windows(2)
            .map(|w| (w[0] / w[1]).max(w[1] / w[0]))
            .fold(1.0, f64::max)
    }
}

/// Result of evaluating the `p + 1` B-splines that may be nonzero at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues {
    /// Global index of the first (leftmost) nonzero basis function.
    pub first: usize,
    pub values: Vec<f64>,
}

/// Values and first derivatives of the local basis at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisJet {
    pub first: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

/// Spline space `S^p_alpha(zeta)` spanned by the B-splines of a knot vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpace1D {
    knots: KnotVector,
}

impl SplineSpace1D {
    pub fn new(knots: KnotVector) -> Self {
        Self { knots }
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn dim(&self) -> usize {
        self.knots.num_basis()
    }

    pub fn num_elements(&self) -> usize {
        self.knots.num_elements()
    }

    /// Element `e` as the interval `[zeta_e, zeta_{e+1}]`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.knots.breakpoints[e], self.knots.breakpoints[e + 1])
    }

    pub fn elements(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    /// Largest element length.
    pub fn mesh_size(&self) -> f64 {
        self.knots.element_sizes().into_iter().fold(0.0, f64::max)
    }

    /// Index of the element containing `x`; `x = 1` belongs to the last one.
    pub fn element_of(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { value: x });
        }
        let bp = &self.knots.breakpoints;
        let ne = bp.len() - 1;
        // partition_point gives the number of breakpoints <= x
        let e = bp.partition_point(|&b| b <= x).saturating_sub(1);
        Ok(e.min(ne - 1))
    }

    /// Index of the first basis function supported on element `e`.
    pub fn first_on_element(&self, e: usize) -> usize {
        self.knots.spans[e] - self.knots.degree
    }

    /// The `p + 1` possibly nonzero basis functions at `x`.
    pub fn eval(&self, x: f64) -> Result<BasisValues> {
        let e = self.element_of(x)?;
        Ok(self.eval_on_element(e, x))
    }

    /// Evaluates on a known element; `x` is assumed to lie in its closure.
    pub fn eval_on_element(&self, e: usize, x: f64) -> BasisValues {
        let span = self.knots.spans[e];
        let p = self.knots.degree;
        BasisValues {
            first: span - p,
            values: basis_funs(&self.knots.knots, span, x, p),
        }
    }

    /// First derivatives of the local basis at `x`.
    pub fn eval_deriv(&self, x: f64, order: usize) -> Result<BasisValues> {
        if order != 1 {
            return Err(Error::InvalidDegree {
                degree: order,
                reason: "only first derivatives are supported",
            });
        }
        let jet = self.eval_jet(x)?;
        Ok(BasisValues {
            first: jet.first,
            values: jet.derivs,
        })
    }

    pub fn eval_jet(&self, x: f64) -> Result<BasisJet> {
        let e = self.element_of(x)?;
        Ok(self.eval_jet_on_element(e, x))
    }

    pub fn eval_jet_on_element(&self, e: usize, x: f64) -> BasisJet {
        let span = self.knots.spans[e];
        let p = self.knots.degree;
        let xi = &self.knots.knots;
        let values = basis_funs(xi, span, x, p);
        let mut derivs = vec![0.0; p + 1];
        if p > 0 {
            // lower[l] is B^{p-1}_{span-p+1+l}
            let lower = basis_funs(xi, span, x, p - 1);
            let pf = p as f64;
            for (k, d) in derivs.iter_mut().enumerate() {
                let i = span - p + k;
                let mut v = 0.0;
                if k >= 1 {
                    v += guarded_div(lower[k - 1], xi[i + p] - xi[i]);
                }
                if k < p {
                    v -= guarded_div(lower[k], xi[i + p + 1] - xi[i + 1]);
                }
                *d = pf * v;
            }
        }
        BasisJet {
            first: span - p,
            values,
            derivs,
        }
    }

    /// The derivative space `S^{p-1}_{alpha-1}` on the same breakpoints.
    pub fn reduce_degree_regularity(&self) -> Result<SplineSpace1D> {
        let p = self.knots.degree;
        if p == 0 {
            return Err(Error::InvalidDegree {
                degree: 0,
                reason: "cannot differentiate a piecewise-constant space",
            });
        }
        let l = self.knots.breakpoints.len();
        // Interior multiplicity r becomes regularity (p-1) - r, which must stay >= -1.
        if let Some(i) = (1..l - 1).find(|&i| self.knots.multiplicities[i] > p) {
            return Err(Error::InvalidKnots(format!(
                "breakpoint {i} is already discontinuous; the derivative space would have regularity below -1"
            )));
        }
        let mut mult = self.knots.multiplicities.clone();
        mult[0] = p;
        mult[l - 1] = p;
        let kv = KnotVector::with_interior_cap(&self.knots.breakpoints, p - 1, &mult, p)?;
        Ok(SplineSpace1D::new(kv))
    }

    /// Splits every element into `k` equal parts with simple (maximally smooth) knots.
    pub fn refine_uniform(&self, k: usize) -> Result<SplineSpace1D> {
        if k == 0 {
            return Err(Error::InvalidRefinement(0));
        }
        let kv = &self.knots;
        let mut bp = Vec::with_capacity(kv.num_elements() * k + 1);
        let mut mult = Vec::with_capacity(bp.capacity());
        for (e, w) in kv.breakpoints.windows(2).enumerate() {
            bp.push(w[0]);
            mult.push(kv.multiplicities[e]);
            for s in 1..k {
                bp.push(w[0] + (w[1] - w[0]) * s as f64 / k as f64);
                mult.push(1);
            }
        }
        bp.push(1.0);
        mult.push(*kv.multiplicities.last().unwrap());
        let cap = kv.multiplicities[1..kv.multiplicities.len() - 1]
            .iter()
            .copied()
            .max()
            .unwrap_or(1)
            .max(kv.degree);
        let refined = KnotVector::with_interior_cap(&bp, kv.degree, &mult, cap)?;
        Ok(SplineSpace1D::new(refined))
    }

    /// Exact differentiation matrix from this space into
    /// [`reduce_degree_regularity`](Self::reduce_degree_regularity):
    /// `d/dx sum_i c_i B_i = sum_j (D c)_j B'_j`.
    pub fn derivative_matrix(&self) -> Result<(SplineSpace1D, CsrMatrix<f64>)> {
        let reduced = self.reduce_degree_regularity()?;
        let p = self.knots.degree;
        let xi = &self.knots.knots;
        let n = self.dim();
        let mut coo = CooMatrix::new(reduced.dim(), n);
        let pf = p as f64;
        for i in 0..n {
            // d/dx B_i = p/(xi_{i+p}-xi_i) B^{p-1}_i - p/(xi_{i+p+1}-xi_{i+1}) B^{p-1}_{i+1};
            // B^{p-1}_{i} on the full knots is reduced function i-1.
            let left = xi[i + p] - xi[i];
            if i >= 1 && left > 0.0 {
                coo.push(i - 1, i, pf / left);
            }
            let right = xi[i + p + 1] - xi[i + 1];
            if i + 1 < n && right > 0.0 {
                coo.push(i, i, -pf / right);
            }
        }
        Ok((reduced, CsrMatrix::from(&coo)))
    }
}

fn guarded_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Triangular Cox-de Boor evaluation of the degree-`p` B-splines
/// `span-p ..= span` at `x`. The span must be non-degenerate for degree `p`
/// or contain `x` in its closure.
fn basis_funs(xi: &[f64], span: usize, x: f64, p: usize) -> Vec<f64> {
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = x - xi[span + 1 - j];
        right[j] = xi[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = guarded_div(n[r], right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Tensor product of two univariate spaces on the parametric square.
///
/// Basis function `(i, j)` has global index `j * n1 + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSplineSpace {
    pub dirs: [SplineSpace1D; 2],
}

/// One of the four edges of the parametric square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    /// `xi1 = 0`
    Xi1Min,
    /// `xi1 = 1`
    Xi1Max,
    /// `xi2 = 0`
    Xi2Min,
    /// `xi2 = 1`
    Xi2Max,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Xi1Min, Edge::Xi1Max, Edge::Xi2Min, Edge::Xi2Max];

    /// Parametric direction that is constant along the edge.
    pub fn fixed_dir(self) -> usize {
        match self {
            Edge::Xi1Min | Edge::Xi1Max => 0,
            Edge::Xi2Min | Edge::Xi2Max => 1,
        }
    }

    pub fn fixed_value(self) -> f64 {
        match self {
            Edge::Xi1Min | Edge::Xi2Min => 0.0,
            Edge::Xi1Max | Edge::Xi2Max => 1.0,
        }
    }

    /// Parametric point at coordinate `t` along the edge.
    pub fn point(self, t: f64) -> [f64; 2] {
        match self.fixed_dir() {
            0 => [self.fixed_value(), t],
            _ => [t, self.fixed_value()],
        }
    }
}

impl TensorSplineSpace {
    pub fn new(s1: SplineSpace1D, s2: SplineSpace1D) -> Self {
        Self { dirs: [s1, s2] }
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.dirs[0].dim(), self.dirs[1].dim()]
    }

    pub fn dim(&self) -> usize {
        self.dirs[0].dim() * self.dirs[1].dim()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.dirs[0].dim() + i
    }

    pub fn num_elements(&self) -> [usize; 2] {
        [self.dirs[0].num_elements(), self.dirs[1].num_elements()]
    }

    /// Global mesh size: largest element diameter of the Bezier mesh.
    pub fn mesh_size(&self) -> f64 {
        let mut h: f64 = 0.0;
        for (a0, a1) in self.dirs[0].elements() {
            for (b0, b1) in self.dirs[1].elements() {
                h = h.max((a1 - a0).hypot(b1 - b0));
            }
        }
        h
    }

    /// Indices of the basis functions whose trace on `edge` is nonzero.
    pub fn edge_dofs(&self, edge: Edge) -> Vec<usize> {
        let [n1, n2] = self.dims();
        match edge {
            Edge::Xi1Min => (0..n2).map(|j| self.index(0, j)).collect(),
            Edge::Xi1Max => (0..n2).map(|j| self.index(n1 - 1, j)).collect(),
            Edge::Xi2Min => (0..n1).map(|i| self.index(i, 0)).collect(),
            Edge::Xi2Max => (0..n1).map(|i| self.index(i, n2 - 1)).collect(),
        }
    }

    /// Values and parametric gradients of the local tensor basis at a point
    /// inside element `(e1, e2)`.
    pub fn local_jets(&self, elem: [usize; 2], xi: [f64; 2]) -> Vec<TensorJet> {
        let a = self.dirs[0].eval_jet_on_element(elem[0], xi[0]);
        let b = self.dirs[1].eval_jet_on_element(elem[1], xi[1]);
        tensor_jets(self.dirs[0].dim(), &a, &b)
    }
}

/// One tensor-product basis function evaluated at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorJet {
    pub index: usize,
    pub value: f64,
    pub grad: [f64; 2],
}

/// Combines two univariate jets into tensor-product jets (`j * n1 + i` numbering).
pub fn tensor_jets(n1: usize, a: &BasisJet, b: &BasisJet) -> Vec<TensorJet> {
    let mut out = Vec::with_capacity(a.values.len() * b.values.len());
    for (kb, (&vb, &db)) in b.values.iter().zip(&b.derivs).enumerate() {
        for (ka, (&va, &da)) in a.values.iter().zip(&a.derivs).enumerate() {
            out.push(TensorJet {
                index: (b.first + kb) * n1 + a.first + ka,
                value: va * vb,
                grad: [da * vb, va * db],
            });
        }
    }
    out
}

/// Rational (NURBS) basis on a tensor spline space.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsBasis {
    space: TensorSplineSpace,
    weights: Vec<f64>,
}

impl NurbsBasis {
    /// Weights are indexed like the tensor space and must be strictly positive.
    pub fn new(space: TensorSplineSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a space of dimension {}",
                weights.len(),
                space.dim()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidGeometry(format!("NURBS weight {w} is not strictly positive")));
        }
        Ok(Self { space, weights })
    }

    pub fn space(&self) -> &TensorSplineSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Rational basis values and parametric gradients (quotient rule) at `xi`.
    pub fn eval(&self, xi: [f64; 2]) -> Result<Vec<TensorJet>> {
        let e1 = self.space.dirs[0].element_of(xi[0])?;
        let e2 = self.space.dirs[1].element_of(xi[1])?;
        Ok(self.eval_on_element([e1, e2], xi))
    }

    pub fn eval_on_element(&self, elem: [usize; 2], xi: [f64; 2]) -> Vec<TensorJet> {
        let mut jets = self.space.local_jets(elem, xi);
        let mut w = 0.0;
        let mut dw = [0.0; 2];
        for j in &jets {
            let wi = self.weights[j.index];
            w += wi * j.value;
            dw[0] += wi * j.grad[0];
            dw[1] += wi * j.grad[1];
        }
        assert!(w > 0.0, "NURBS denominator must be positive");
        for j in &mut jets {
            let wi = self.weights[j.index];
            let v = j.value;
            j.value = wi * v / w;
            for d in 0..2 {
                j.grad[d] = wi * (j.grad[d] * w - v * dw[d]) / (w * w);
            }
        }
        jets
    }
}
