//! Local non-global minimizer of a trust-region subproblem.
//!
//! With `A = QΛQᵀ` and `wᵢ = (qᵢᵀa)²`, a local non-global minimizer of
//! `min ½xᵀAx + aᵀx, ‖x‖ ≤ δ` can only be `x = −(A + λ*I)⁻¹a` where `λ*` is
//! a root of `φ(λ) = Σ wᵢ/(λᵢ + λ)² = δ²` on `(max(0, −λ₂), −λ₁)` with
//! `φ′(λ*) ≥ 0`. `φ` is strictly convex there, so it has at most two roots
//! and at most one passes the slope test.

use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::{self, SymMatrix};
use crate::trs::{TrsConfig, TrsKernel, TrsProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LngmConfig {
    /// `λ₂ − λ₁ ≤ mult_tol·(1 + |λ₁|)` counts as a multiple smallest eigenvalue.
    pub mult_tol: f64,
    /// `|q₁ᵀa| ≤ orth_tol·‖a‖` counts as orthogonal.
    pub orth_tol: f64,
    /// Roots are accepted once `|φ − δ²| ≤ root_tol·δ²`.
    pub root_tol: f64,
    pub max_iter: usize,
    /// Also verify the projected Hessian on the tangent space at the root.
    pub check_second_order: bool,
}

impl Default for LngmConfig {
    fn default() -> Self {
        LngmConfig {
            mult_tol: 1e-8,
            orth_tol: 1e-10,
            root_tol: 1e-12,
            max_iter: 100,
            check_second_order: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LngmReason {
    NoInterval,
    OrthogonalToCriticalEigenvector,
    NoRoot,
    RootFailsSlopeTest,
    Found,
}

#[derive(Debug, Clone)]
pub struct LngmResult {
    pub exists: bool,
    pub x: Option<DVector<f64>>,
    pub lambda_star: Option<f64>,
    pub reason: LngmReason,
    /// Smallest eigenvalue of the projected Hessian, when requested.
    pub tangent_curvature: Option<f64>,
}

impl LngmResult {
    fn none(reason: LngmReason) -> Self {
        LngmResult {
            exists: false,
            x: None,
            lambda_star: None,
            reason,
            tangent_curvature: None,
        }
    }
}

/// `φ(λ) = Σ wᵢ/(λᵢ + λ)²` restricted to `(max(0, −λ₂), −λ₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecularFunction {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl SecularFunction {
    /// `eigenvalues` ascending. With a single eigenvalue `λ₂ = +∞`.
    pub fn new(eigenvalues: Vec<f64>, weights: Vec<f64>) -> Self {
        let lam1 = eigenvalues[0];
        let lam2 = eigenvalues.get(1).copied().unwrap_or(f64::INFINITY);
        SecularFunction {
            lower: (-lam2).max(0.0),
            upper: -lam1,
            eigenvalues,
            weights,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.lower < self.upper)
    }

    pub fn phi(&self, l: f64) -> f64 {
        self.terms(l, |w, d| w / (d * d))
    }

    pub fn dphi(&self, l: f64) -> f64 {
        -2.0 * self.terms(l, |w, d| w / (d * d * d))
    }

    pub fn d2phi(&self, l: f64) -> f64 {
        6.0 * self.terms(l, |w, d| w / (d * d * d * d))
    }

    fn terms(&self, l: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w != 0.0)
            .map(|(&e, &w)| f(w, e + l))
            .sum()
    }
}

/// All roots of `φ(λ) = t` in the open interval, ascending.
pub fn phi_roots(f: &SecularFunction, t: f64) -> Vec<f64> {
    phi_roots_in(f, t, f.lower, f.upper, &LngmConfig::default())
}

/// [`phi_roots`] on a caller-chosen sub-bracket of the interval.
pub fn phi_roots_in(f: &SecularFunction, t: f64, lo: f64, hi: f64, cfg: &LngmConfig) -> Vec<f64> {
    if !(lo < hi) || !(t > 0.0) {
        return Vec::new();
    }
    let tiny = |a: f64, b: f64| (b - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);

    // minimizer of the convex φ by bisection on φ′
    let d_lo = f.dphi(lo);
    let lm = if d_lo.is_finite() && d_lo >= 0.0 {
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        while !tiny(a, b) {
            let m = 0.5 * (a + b);
            if f.dphi(m) < 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let phi_min = f.phi(lm);
    if phi_min > t {
        return Vec::new();
    }
    if phi_min == t {
        return vec![lm];
    }

    // h(λ) = 1/√φ − 1/√t is nearly linear close to a pole
    let h = |l: f64| 1.0 / f.phi(l).sqrt() - 1.0 / t.sqrt();
    let dh = |l: f64| -0.5 * f.dphi(l) / f.phi(l).powf(1.5);
    let solve = |mut a: f64, mut b: f64, start: f64| -> f64 {
        // h(a) and h(b) have opposite signs; keep the sign at a
        let sa = h(a).signum();
        let mut l = start;
        let mut best = (f64::INFINITY, l);
        for _ in 0..cfg.max_iter.max(1) * 4 {
            let p = f.phi(l);
            let err = (p - t).abs();
            if err < best.0 {
                best = (err, l);
            }
            if err <= cfg.root_tol * t || tiny(a, b) {
                break;
            }
            if h(l).signum() == sa {
                a = l;
            } else {
                b = l;
            }
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let n = l - h(l) / dh(l);
            l = if n.is_finite() && n > lo && n < hi {
                n
            } else {
                0.5 * (a + b)
            };
        }
        best.1
    };

    let mut roots = Vec::with_capacity(2);
    let left_open = {
        let p = f.phi(lo);
        !p.is_finite() || p > t
    };
    if left_open && lm > lo {
        roots.push(solve(lm, lo, 0.5 * (lo + lm)));
    }
    let right_open = {
        let p = f.phi(hi);
        !p.is_finite() || p > t
    };
    if right_open {
        roots.push(solve(lm, hi, 0.5 * (lm + hi)));
    }
    roots
}

/// Local non-global minimizer of `min ½xᵀAx + aᵀx, ‖x‖ ≤ δ₁`.
pub fn lngm(
    a: &SymMatrix,
    lin: &DVector<f64>,
    delta1: f64,
    cfg: &LngmConfig,
) -> Result<LngmResult> {
    let decomp = linalg::spectral(a)?;
    let g = decomp.eigenvectors.tr_mul(lin);
    let mut res = lngm_diag(decomp.eigenvalues.as_slice(), &g, delta1, cfg);
    if let Some(y) = res.x.take() {
        res.x = Some(&decomp.eigenvectors * y);
    }
    Ok(res)
}

/// LNGM of the ellipsoid-constrained subproblem, through the whitening
/// `y = Lᵀ(x − c)` with `B = LLᵀ`. `lambda_star` is the multiplier of the
/// ellipsoid constraint.
pub fn lngm_trs(p: &TrsProblem, cfg: &LngmConfig) -> Result<LngmResult> {
    let kernel = TrsKernel::new(p, TrsConfig::default())?;
    Ok(lngm_in_kernel(&kernel, &p.linear, cfg))
}

pub(crate) fn lngm_in_kernel(
    kernel: &TrsKernel,
    lin: &DVector<f64>,
    cfg: &LngmConfig,
) -> LngmResult {
    let g = kernel.reduced_linear(lin);
    let lam = kernel.reduced_spectrum().eigenvalues.as_slice();
    let mut res = lngm_diag(lam, &g, kernel.radius(), cfg);
    if let Some(y) = res.x.take() {
        res.x = Some(kernel.to_original(&y));
    }
    res
}

/// Works in eigen coordinates; the returned `x` is the eigen-coordinate vector.
fn lngm_diag(lam: &[f64], g: &DVector<f64>, delta: f64, cfg: &LngmConfig) -> LngmResult {
    let n = lam.len();
    let lam1 = lam[0];
    if lam1 >= 0.0 {
        return LngmResult::none(LngmReason::NoInterval);
    }
    if n > 1 && lam[1] - lam1 <= cfg.mult_tol * (1.0 + lam1.abs()) {
        return LngmResult::none(LngmReason::NoInterval);
    }
    let f = SecularFunction::new(lam.to_vec(), g.iter().map(|v| v * v).collect());
    if f.is_empty() {
        return LngmResult::none(LngmReason::NoInterval);
    }
    let gnorm = g.norm();
    if gnorm == 0.0 || g[0].abs() <= cfg.orth_tol * gnorm {
        return LngmResult::none(LngmReason::OrthogonalToCriticalEigenvector);
    }
    let t = delta * delta;
    let roots = phi_roots_in(&f, t, f.lower, f.upper, cfg);
    if roots.is_empty() {
        return LngmResult::none(LngmReason::NoRoot);
    }
    let Some(&l) = roots.iter().rev().find(|&&l| f.dphi(l) >= -1e-10) else {
        return LngmResult::none(LngmReason::RootFailsSlopeTest);
    };
    let y = DVector::from_fn(n, |i, _| -g[i] / (lam[i] + l));
    let tangent_curvature = cfg
        .check_second_order
        .then(|| tangent_min_curvature(lam, &y, l));
    LngmResult {
        exists: true,
        x: Some(y),
        lambda_star: Some(l),
        reason: LngmReason::Found,
        tangent_curvature,
    }
}

/// `λ_min(Vᵀ(Λ + λI)V)` with `V` an orthonormal basis of `y⊥`.
fn tangent_min_curvature(lam: &[f64], y: &DVector<f64>, l: f64) -> f64 {
    let n = lam.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let u = y / y.norm();
    // Householder reflector mapping u to e₁; its last n−1 columns span u⊥
    let mut w = u.clone();
    w[0] += if u[0] >= 0.0 { 1.0 } else { -1.0 };
    let w = &w / w.norm();
    let house = nalgebra::DMatrix::<f64>::identity(n, n) - &w * w.transpose() * 2.0;
    let basis = house.columns(1, n - 1).into_owned();
    let d = nalgebra::DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| lam[i] + l));
    let m = SymMatrix::symmetrized(basis.transpose() * d * &basis);
    linalg::spectral(&m).map(|s| s.min()).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trs::solve_trs;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        m.qr().q()
    }

    /// Indefinite A with a simple λ₁ < min(0, λ₂) and a = −(A + μ₀I)v₁.
    fn planted_instance(
        n: usize,
        rng: &mut ChaCha8Rng,
    ) -> (SymMatrix, DVector<f64>, DVector<f64>, f64) {
        let q = random_orthogonal(n, rng);
        let lam1 = rng.random_range(-10.0..-5.0);
        let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(lam1 + 1.0..10.0)).collect();
        d[0] = lam1;
        d.sort_by(f64::total_cmp);
        let a = SymMatrix::symmetrized(
            &q * DMatrix::from_diagonal(&DVector::from_vec(d.clone())) * q.transpose(),
        );
        let lo = (-d[1]).max(0.0);
        let mu0 = rng.random_range(lo..-lam1);
        let v1 = q.column(0).into_owned() * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lin = -(a.mul_vec(&v1) + &v1 * mu0);
        (a, lin, v1, mu0)
    }

    #[test]
    fn repeated_smallest_eigenvalue() {
        let r = lngm(
            &SymMatrix::from_diagonal(&[-1.0, -1.0, 0.0]),
            &vec(&[1.0, 2.0, 3.0]),
            1.0,
            &LngmConfig::default(),
        )
        .unwrap();
        assert_eq!(r.reason, LngmReason::NoInterval);
        assert!(!r.exists);
    }

    #[test]
    fn orthogonal_linear_term() {
        let r = lngm(
            &SymMatrix::from_diagonal(&[-2.0, -1.0]),
            &vec(&[0.0, 1.0]),
            1.0,
            &LngmConfig::default(),
        )
        .unwrap();
        assert_eq!(r.reason, LngmReason::OrthogonalToCriticalEigenvector);
    }

    #[test]
    fn positive_semidefinite_has_no_interval() {
        let r = lngm(
            &SymMatrix::from_diagonal(&[0.0, 1.0]),
            &vec(&[1.0, 1.0]),
            1.0,
            &LngmConfig::default(),
        )
        .unwrap();
        assert_eq!(r.reason, LngmReason::NoInterval);
    }

    #[test]
    fn constructed_instances_recover_planted_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = LngmConfig {
            check_second_order: true,
            ..Default::default()
        };
        for k in 0..200 {
            let n = 2 + k % 20;
            let (a, lin, v1, mu0) = planted_instance(n, &mut rng);
            let r = lngm(&a, &lin, 1.0, &cfg).unwrap();
            assert_eq!(r.reason, LngmReason::Found, "n={n}");
            let x = r.x.unwrap();
            let l = r.lambda_star.unwrap();
            assert!((l - mu0).abs() < 1e-8 * (1.0 + mu0), "{l} vs {mu0}");
            assert!((&x - &v1).norm() < 1e-7);
            let res = a.mul_vec(&x) + &x * l + &lin;
            assert!(res.norm() <= 1e-8 * (1.0 + lin.norm()));
            assert!((x.norm_squared() - 1.0).abs() <= 1e-8);
            assert!(r.tangent_curvature.unwrap() > 0.0);

            // never better than the global solution of the same subproblem
            let p = TrsProblem::ball(a.clone(), lin.clone(), 1.0).unwrap();
            let global = solve_trs(&p, &TrsConfig::default()).unwrap();
            assert!(global.objective <= p.objective(&x) + 1e-10);
        }
    }

    #[test]
    fn single_term_closed_form() {
        // φ(λ) = w/(λ₁+λ)² on (0, −λ₁) when n = 1
        let f = SecularFunction::new(vec![-3.0], vec![0.25]);
        assert_eq!((f.lower, f.upper), (0.0, 3.0));
        let roots = phi_roots(&f, 1.0);
        assert_eq!(roots.len(), 1);
        // w/(λ−3)² = 1 → λ = 3 − 0.5
        assert!((roots[0] - 2.5).abs() < 1e-12);
    }

    fn bisection_oracle(f: &SecularFunction, t: f64) -> Vec<f64> {
        let m = 1_000_000;
        let (lo, hi) = (f.lower, f.upper);
        let xs: Vec<f64> = (1..m)
            .map(|i| lo + (hi - lo) * i as f64 / m as f64)
            .collect();
        let mut roots = Vec::new();
        for w in xs.windows(2) {
            let (fa, fb) = (f.phi(w[0]) - t, f.phi(w[1]) - t);
            if fa.signum() != fb.signum() {
                let (mut a, mut b) = (w[0], w[1]);
                while b - a > 1e-12 * (1.0 + a.abs()) {
                    let mid = 0.5 * (a + b);
                    if (f.phi(mid) - t).signum() == fa.signum() {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                roots.push(0.5 * (a + b));
            }
        }
        roots
    }

    #[test]
    fn two_terms_against_bisection() {
        let f = SecularFunction::new(vec![-2.0, -0.5], vec![0.5, 0.5]);
        let roots = phi_roots(&f, 3.0);
        let oracle = bisection_oracle(&f, 3.0);
        assert_eq!(roots.len(), oracle.len());
        assert_eq!(roots.len(), 2);
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r - o).abs() < 1e-9, "{r} vs {o}");
        }
        assert!(f.dphi(roots[0]) < 0.0 && f.dphi(roots[1]) > 0.0);

        let g = SecularFunction::new(vec![-2.0, -0.5], vec![0.3, 0.1]);
        let roots = phi_roots(&g, 1.0);
        let oracle = bisection_oracle(&g, 1.0);
        assert_eq!(roots.len(), oracle.len());
        for (r, o) in roots.iter().zip(&oracle) {
            assert!((r - o).abs() < 1e-9);
        }
    }

    #[test]
    fn planted_multiplier_is_a_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (a, lin, _, mu0) = planted_instance(6, &mut rng);
            let d = linalg::spectral(&a).unwrap();
            let g = d.eigenvectors.tr_mul(&lin);
            let f = SecularFunction::new(
                d.eigenvalues.as_slice().to_vec(),
                g.iter().map(|v| v * v).collect(),
            );
            let roots = phi_roots(&f, 1.0);
            assert!(roots.iter().any(|r| (r - mu0).abs() < 1e-8 * (1.0 + mu0)));
        }
    }

    #[test]
    fn perturbed_brackets_give_the_same_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let (a, lin, _, _) = planted_instance(5, &mut rng);
            let r = lngm(&a, &lin, 1.0, &LngmConfig::default()).unwrap();
            let l = r.lambda_star.unwrap();
            let d = linalg::spectral(&a).unwrap();
            let g = d.eigenvectors.tr_mul(&lin);
            let f = SecularFunction::new(
                d.eigenvalues.as_slice().to_vec(),
                g.iter().map(|v| v * v).collect(),
            );
            let width = f.upper - f.lower;
            for (dl, dh) in [(1e-6, 0.0), (0.0, 1e-6), (1e-4, 1e-4)] {
                let lo = f.lower + dl * width;
                let hi = f.upper - dh * width;
                if !(lo < l && l < hi) {
                    continue;
                }
                let roots = phi_roots_in(&f, 1.0, lo, hi, &LngmConfig::default());
                let right = roots
                    .iter()
                    .rev()
                    .find(|&&x| f.dphi(x) >= -1e-10)
                    .copied()
                    .unwrap();
                assert!((right - l).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn no_root_when_phi_stays_above_target() {
        // tiny radius: φ ≥ φ_min > δ²
        let r = lngm(
            &SymMatrix::from_diagonal(&[-2.0, 1.0]),
            &vec(&[1.0, 1.0]),
            0.1,
            &LngmConfig::default(),
        )
        .unwrap();
        assert_eq!(r.reason, LngmReason::NoRoot);
    }

    /// Dense angle sampling of the circle plus golden-section polish.
    fn circle_local_minima(p: &TrsProblem) -> Vec<DVector<f64>> {
        let m = 20_000;
        let r = p.radius;
        let f = |t: f64| p.objective(&vec(&[r * t.cos(), r * t.sin()]));
        let h = std::f64::consts::TAU / m as f64;
        let vals: Vec<f64> = (0..m).map(|i| f(i as f64 * h)).collect();
        let mut out = Vec::new();
        for i in 0..m {
            let (a, b, c) = (vals[(i + m - 1) % m], vals[i], vals[(i + 1) % m]);
            if b < a && b <= c {
                let (mut lo, mut hi) = ((i as f64 - 1.0) * h, (i as f64 + 1.0) * h);
                let gr = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..100 {
                    let x1 = hi - gr * (hi - lo);
                    let x2 = lo + gr * (hi - lo);
                    if f(x1) < f(x2) {
                        hi = x2;
                    } else {
                        lo = x1;
                    }
                }
                let t = 0.5 * (lo + hi);
                out.push(vec(&[r * t.cos(), r * t.sin()]));
            }
        }
        out
    }

    #[test]
    fn matches_circle_parameterization_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut checked = 0;
        for _ in 0..40 {
            let (a, lin, _, _) = planted_instance(2, &mut rng);
            let r = lngm(&a, &lin, 1.0, &LngmConfig::default()).unwrap();
            let x = r.x.unwrap();
            let p = TrsProblem::ball(a, lin, 1.0).unwrap();
            let mins = circle_local_minima(&p);
            assert_eq!(mins.len(), 2);
            let global = mins
                .iter()
                .map(|m| p.objective(m))
                .fold(f64::INFINITY, f64::min);
            let local = mins.iter().find(|m| p.objective(m) > global).unwrap();
            assert!((local - &x).norm() < 1e-5, "{local} vs {x}");
            checked += 1;
        }
        assert_eq!(checked, 40);
    }

    #[test]
    fn ellipsoid_form_via_whitening() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let n = 4;
            let (at, gt, _, mu0) = planted_instance(n, &mut rng);
            // A = L Ã Lᵀ, a = L ã − A c for a random B = LLᵀ, c
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let b = SymMatrix::symmetrized(&m * m.transpose()).shifted(0.5);
            let l = nalgebra::Cholesky::new(b.matrix().clone())
                .unwrap()
                .unpack();
            let a = SymMatrix::symmetrized(&l * at.matrix() * l.transpose());
            let c = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
            let lin = &l * gt - a.mul_vec(&c);
            let p = TrsProblem::new(a.clone(), lin.clone(), b.clone(), c.clone(), 1.0).unwrap();
            let r = lngm_trs(&p, &LngmConfig::default()).unwrap();
            assert_eq!(r.reason, LngmReason::Found);
            let x = r.x.unwrap();
            let mu = r.lambda_star.unwrap();
            assert!((mu - mu0).abs() < 1e-8 * (1.0 + mu0));
            assert!((p.constraint_value(&x) - 1.0).abs() < 1e-8);
            let res = a.mul_vec(&x) + &lin + b.mul_vec(&(&x - &c)) * mu;
            assert!(res.norm() < 1e-8 * (1.0 + lin.norm()));
        }
    }

    #[test]
    fn phi_derivatives_match_finite_differences() {
        let f = SecularFunction::new(vec![-3.0, -1.0, 2.0], vec![0.4, 0.2, 1.0]);
        let l = 2.0;
        let h = 1e-6;
        let fd1 = (f.phi(l + h) - f.phi(l - h)) / (2.0 * h);
        let fd2 = (f.dphi(l + h) - f.dphi(l - h)) / (2.0 * h);
        assert!((fd1 - f.dphi(l)).abs() < 1e-6 * (1.0 + fd1.abs()));
        assert!((fd2 - f.d2phi(l)).abs() < 1e-5 * (1.0 + fd2.abs()));
        assert!(f.d2phi(l) > 0.0);
    }
}
