//! Gauss-Legendre quadrature.

use crate::error::{Error, Result};
use crate::geometry::{MapJet, NurbsGeometry, MIN_DET};

/// Largest supported number of points.
pub const MAX_POINTS: usize = 30;

/// Gauss-Legendre rule on `[-1, 1]`; exact for polynomials of degree `2n - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_POINTS {
            return Err(Error::QuadratureOrder(n));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Tensor rule on the rectangle `[a0, a1] x [b0, b1]`.
    pub fn on_rect(&self, a: (f64, f64), b: (f64, f64)) -> Vec<([f64; 2], f64)> {
        let ya: Vec<(f64, f64)> = self.on_interval(a.0, a.1).collect();
        let mut out = Vec::with_capacity(ya.len() * ya.len());
        for (y, wy) in self.on_interval(b.0, b.1) {
            for &(x, wx) in &ya {
                out.push(([x, y], wx * wy));
            }
        }
        out
    }
}

/// One quadrature node of a physical element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub xi: [f64; 2],
    pub map: MapJet,
    /// `w * |det J|`: measure of `d rho dz`.
    pub area: f64,
    /// `w * |det J| * rho`: measure of `rho d rho dz`.
    pub weight: f64,
}

/// Tensor Gauss rule on one Bezier element, composed with the geometry map.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementRule2D {
    /// Parametric element `[a0, a1] x [b0, b1]`.
    pub element: [(f64, f64); 2],
    pub points: Vec<QuadPoint>,
}

impl ElementRule2D {
    /// Builds the rule; errors if `det J` is not positive at some node.
    pub fn new(geometry: &NurbsGeometry, element: [(f64, f64); 2], rule: &GaussLegendre) -> Result<Self> {
        let mut points = Vec::with_capacity(rule.len() * rule.len());
        for (xi, w) in rule.on_rect(element[0], element[1]) {
            let map = geometry.eval(xi)?;
            if !(map.det > MIN_DET) {
                return Err(Error::SingularJacobian { det: map.det, xi1: xi[0], xi2: xi[1] });
            }
            let area = w * map.det;
            points.push(QuadPoint {
                xi,
                map,
                area,
                weight: area * map.x[0].max(0.0),
            });
        }
        Ok(Self { element, points })
    }

    /// `sum f(rho, z) rho dA` over the element.
    pub fn integrate_weighted(&self, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
        self.points.iter().map(|q| q.weight * f(q.map.x)).sum()
    }
}

/// `n` points per direction for rules on `p`-degree analysis spaces.
pub fn default_points(p: usize) -> usize {
    p + 2
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn two_point_rule() {
        let g = GaussLegendre::new(2).unwrap();
        let a = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(g.nodes[0], -a, epsilon = 1e-15);
        assert_abs_diff_eq!(g.nodes[1], a, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn three_point_rule() {
        let g = GaussLegendre::new(3).unwrap();
        assert_abs_diff_eq!(g.nodes[2], 0.6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[1], 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.weights[0], 5.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=MAX_POINTS {
            let g = GaussLegendre::new(n).unwrap();
            assert_abs_diff_eq!(g.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
            assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(GaussLegendre::new(0).is_err());
        assert!(GaussLegendre::new(MAX_POINTS + 1).is_err());
    }

    #[test]
    fn interval_and_rect() {
        let g = GaussLegendre::new(4).unwrap();
        assert_abs_diff_eq!(g.integrate(1.0, 3.0, |x| x.powi(7)), (3f64.powi(8) - 1.0) / 8.0, epsilon = 1e-10);
        let s: f64 = g.on_rect((0.0, 2.0), (1.0, 2.0)).iter().map(|(p, w)| w * p[0] * p[1] * p[1]).sum();
        assert_abs_diff_eq!(s, 2.0 * 7.0 / 3.0, epsilon = 1e-13);
    }

    fn square() -> NurbsGeometry {
        use crate::geometry::{BoundaryKind, BoundaryLabels};
        NurbsGeometry::rectangle((0.0, 1.0), (0.0, 1.0), BoundaryLabels::axis_and(BoundaryKind::Neumann)).unwrap()
    }

    #[test]
    fn single_point_rule() {
        let g = GaussLegendre::new(1).unwrap();
        assert_eq!((g.nodes[0], g.weights[0]), (0.0, 2.0));
    }

    #[test]
    fn degree_two_n_not_exact() {
        for n in 1..=10 {
            let g = GaussLegendre::new(n).unwrap();
            let k = 2 * n as i32;
            let exact = 2.0 / (k as f64 + 1.0);
            assert!((g.integrate(-1.0, 1.0, |x| x.powi(k)) - exact).abs() > 1e-6);
            let low = g.integrate(-1.0, 1.0, |x| x.powi(k - 2));
            assert_abs_diff_eq!(low, 2.0 / (k as f64 - 1.0), epsilon = 1e-14);
            assert_abs_diff_eq!(g.integrate(-1.0, 1.0, |x| x.powi(k - 1)), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn weighted_element_integrals() {
        let geo = square();
        let rule = ElementRule2D::new(&geo, [(0.0, 1.0), (0.0, 1.0)], &GaussLegendre::new(1).unwrap()).unwrap();
        assert_abs_diff_eq!(rule.integrate_weighted(|_| 1.0), 0.5, epsilon = 1e-14);
        let rule = ElementRule2D::new(&geo, [(0.0, 1.0), (0.0, 1.0)], &GaussLegendre::new(3).unwrap()).unwrap();
        assert_abs_diff_eq!(rule.integrate_weighted(|x| x[0].powi(2) * x[1].powi(2)), 1.0 / 12.0, epsilon = 1e-14);
        let axis = ElementRule2D::new(&geo, [(0.0, 0.25), (0.5, 0.75)], &GaussLegendre::new(4).unwrap()).unwrap();
        assert!(axis.points.iter().all(|q| q.weight.is_finite() && q.weight >= 0.0));
    }

    #[test]
    fn weighted_monomials_on_affine_element() {
        use crate::geometry::{BoundaryKind, BoundaryLabels};
        let geo = NurbsGeometry::rectangle((0.0, 2.0), (1.0, 4.0), BoundaryLabels::axis_and(BoundaryKind::Neumann)).unwrap();
        for n in 1..=6usize {
            let g = GaussLegendre::new(n).unwrap();
            let rule = ElementRule2D::new(&geo, [(0.0, 1.0), (0.0, 1.0)], &g).unwrap();
            for a in 0..(2 * n as i32 - 1) {
                for b in 0..(2 * n as i32) {
                    let exact = 2f64.powi(a + 2) / (a as f64 + 2.0) * (4f64.powi(b + 1) - 1.0) / (b as f64 + 1.0);
                    let got = rule.integrate_weighted(|x| x[0].powi(a) * x[1].powi(b));
                    assert!((got - exact).abs() <= 1e-13 * exact.abs(), "n={n} a={a} b={b}");
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 1000, rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed), ..ProptestConfig::default() })]
        #[test]
        fn exact_for_monomials(n in 1usize..=20, frac in 0.0f64..1.0) {
            let g = GaussLegendre::new(n).unwrap();
            let k = ((2 * n - 1) as f64 * frac).floor() as i32;
            let approx = g.integrate(0.0, 1.0, |x| x.powi(k));
            prop_assert!((approx - 1.0 / (k as f64 + 1.0)).abs() <= 1e-13);
        }
    }
}
