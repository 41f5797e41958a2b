//! Dense solvers: the symmetric-definite generalized eigenproblem and the
//! mixed (saddle-point) system, plus least-squares rate fitting.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors, SelfAdjointEvdParams};
use faer::{get_global_parallelism, Auto, Mat, Par, Side, Spec};

use crate::error::{Error, Result};

/// Eigenvalues below `ZERO_FILTER * lambda_max` are treated as the
/// (gradient) kernel.
pub const ZERO_FILTER: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Smallest eigenvalues above the zero threshold, ascending.
    pub values: Vec<f64>,
    /// M-orthonormal eigenvectors, one column per value.
    pub vectors: Mat<f64>,
    /// `|A v - lambda M v| / (|lambda| |M v|)` per pair.
    pub residuals: Vec<f64>,
    /// `max |V^T M V - I|`.
    pub gram_deviation: f64,
    /// Number of eigenvalues filtered as zero.
    pub kernel_dim: usize,
    pub lambda_max: f64,
}

/// `k` smallest nonzero eigenpairs of `A v = lambda M v` with `A` symmetric
/// positive semidefinite and `M` symmetric positive definite.
///
/// The pencil is first scaled symmetrically by `D = diag(M)^{-1/2}` (the
/// axis weight makes the raw mass matrix badly scaled), then reduced to the
/// standard problem `L^{-1} A' L^{-T} y = lambda y` with `D M D = L L^T`.
pub fn solve_generalized_eig(a: &Mat<f64>, m: &Mat<f64>, k: usize) -> Result<EigenResult> {
    let n = a.nrows();
    if a.ncols() != n || m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "pencil of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            m.nrows(),
            m.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { requested: k, available: n });
    }
    let par = get_global_parallelism();
    let mut d = vec![0.0; n];
    for (i, di) in d.iter_mut().enumerate() {
        let mii = m[(i, i)];
        if !(mii > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        *di = 1.0 / mii.sqrt();
    }
    let a_s = Mat::<f64>::from_fn(n, n, |i, j| d[i] * a[(i, j)] * d[j]);
    let m_s = Mat::<f64>::from_fn(n, n, |i, j| d[i] * m[(i, j)] * d[j]);
    let llt = m_s.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
    let l = llt.L();

    // C = L^{-1} (L^{-1} A)^T, symmetrized
    let mut x = a_s;
    solve_lower_triangular_in_place(l, x.as_mut(), par);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), par);
    let c = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));

    let (s, u) = symmetric_eigen(&c, par)?;
    let lambda_max = s[n - 1].abs().max(s[0].abs());
    let tau = ZERO_FILTER * lambda_max;
    let nonzero: Vec<usize> = (0..n).filter(|&i| s[i] > tau).collect();
    let kernel_dim = n - nonzero.len();
    if nonzero.len() < k {
        return Err(Error::TooManyEigenpairs { requested: k, available: nonzero.len() });
    }
    let idx = &nonzero[..k];
    let values: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
    let mut vectors = Mat::<f64>::from_fn(n, k, |r, col| u[(r, idx[col])]);
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), par);
    for r in 0..n {
        for col in 0..k {
            vectors[(r, col)] *= d[r];
        }
    }

    let av = a * &vectors;
    let mv = m * &vectors;
    let residuals = (0..k)
        .map(|j| {
            let lam = values[j];
            let mut r2 = 0.0;
            let mut m2 = 0.0;
            for i in 0..n {
                let d = av[(i, j)] - lam * mv[(i, j)];
                r2 += d * d;
                m2 += mv[(i, j)] * mv[(i, j)];
            }
            r2.sqrt() / (lam.abs() * m2.sqrt())
        })
        .collect();
    let gram = vectors.transpose() * &mv;
    let mut gram_deviation: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            gram_deviation = gram_deviation.max((gram[(i, j)] - target).abs());
        }
    }
    Ok(EigenResult { values, vectors, residuals, gram_deviation, kernel_dim, lambda_max })
}

/// Full symmetric eigendecomposition, ascending. Uses the implicit QR
/// iteration on the tridiagonal form: the divide-and-conquer path loses
/// orthogonality on pencils whose reduced matrix has a large cluster of
/// (near-)zero eigenvalues, which every curl-curl pencil has.
fn symmetric_eigen(c: &Mat<f64>, par: Par) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = c.nrows();
    let params: Spec<SelfAdjointEvdParams, f64> =
        SelfAdjointEvdParams { recursion_threshold: usize::MAX, ..<SelfAdjointEvdParams as Auto<f64>>::auto() }.into();
    let mut u = Mat::<f64>::zeros(n, n);
    let mut s = Diag::<f64>::zeros(n);
    let mut buf = MemBuffer::new(self_adjoint_evd_scratch::<f64>(n, ComputeEigenvectors::Yes, par, params));
    self_adjoint_evd(c.as_ref(), s.as_mut(), Some(u.as_mut()), par, MemStack::new(&mut buf), params)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = s.column_vector();
    Ok(((0..n).map(|i| s[i]).collect(), u))
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    /// `|A u + B p - f| / |f|`.
    pub residual_primal: f64,
    /// `|B^T u| / |u|`.
    pub gauge_raw: f64,
    /// `|B^T u| / (max|B_ij| |u|)`: the gauge residual relative to the scale of `B`.
    pub gauge: f64,
}

/// Solves `[A B; B^T 0] [u; p] = [f; 0]` by a pivoted LU of the scaled KKT
/// matrix, followed by one step of iterative refinement.
pub fn solve_saddle_point(a: &Mat<f64>, b: &Mat<f64>, f: &[f64]) -> Result<SaddleSolution> {
    let n = a.nrows();
    let k = b.ncols();
    if a.ncols() != n || b.nrows() != n || f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "KKT blocks A {}x{}, B {}x{}, f {}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols(),
            f.len()
        )));
    }
    let a_max = a.norm_max();
    let b_max = b.norm_max();
    if !(b_max > 0.0) && k > 0 {
        return Err(Error::SingularSystem("constraint matrix is zero".into()));
    }
    let s = if k > 0 && a_max > 0.0 { a_max / b_max } else { 1.0 };
    let kkt = Mat::<f64>::from_fn(n + k, n + k, |i, j| match (i < n, j < n) {
        (true, true) => a[(i, j)],
        (true, false) => s * b[(i, j - n)],
        (false, true) => s * b[(j, i - n)],
        (false, false) => 0.0,
    });
    let rhs = Mat::<f64>::from_fn(n + k, 1, |i, _| if i < n { f[i] } else { 0.0 });
    let lu = kkt.partial_piv_lu();
    let solve = |r: &Mat<f64>| -> Mat<f64> {
        use faer::linalg::solvers::Solve;
        lu.solve(r)
    };
    let mut x = solve(&rhs);
    let r = &rhs - &kkt * &x;
    x += solve(&r);
    if x.col(0).iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("KKT factorization produced non-finite values".into()));
    }

    let u: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let p: Vec<f64> = (0..k).map(|i| s * x[(n + i, 0)]).collect();
    let uc = Mat::<f64>::from_fn(n, 1, |i, _| u[i]);
    let pc = Mat::<f64>::from_fn(k, 1, |i, _| p[i]);
    let fc = Mat::<f64>::from_fn(n, 1, |i, _| f[i]);
    let r1 = a * &uc + b * &pc - &fc;
    let btu = b.transpose() * &uc;
    let fnorm = fc.norm_l2();
    let unorm = uc.norm_l2();
    let residual_primal = if fnorm > 0.0 { r1.norm_l2() / fnorm } else { r1.norm_l2() };
    let (gauge_raw, gauge) = if unorm > 0.0 && k > 0 {
        (btu.norm_l2() / unorm, btu.norm_l2() / (b_max * unorm))
    } else {
        (0.0, 0.0)
    };
    // a singular KKT matrix shows up as a solve that does not satisfy its own equations
    let kkt_res = (&kkt * &x - &rhs).norm_l2() / (kkt.norm_max() * x.norm_l2()).max(f64::MIN_POSITIVE);
    if !(kkt_res <= 1e-8) {
        return Err(Error::SingularSystem(format!("KKT residual {kkt_res:.3e} after refinement")));
    }
    Ok(SaddleSolution { u, p, residual_primal, gauge_raw, gauge })
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn convergence_rate(hs: &[f64], errors: &[f64]) -> Result<f64> {
    if hs.len() != errors.len() {
        return Err(Error::DimensionMismatch(format!("{} mesh sizes, {} errors", hs.len(), errors.len())));
    }
    if hs.len() < 3 {
        return Err(Error::OutOfRange(format!("need at least 3 levels for a rate, got {}", hs.len())));
    }
    if let Some(v) = hs.iter().chain(errors).find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::OutOfRange(format!("rates need positive finite inputs, got {v}")));
    }
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::OutOfRange("mesh sizes must not all be equal".into()));
    }
    Ok(sxy / sxx)
}
