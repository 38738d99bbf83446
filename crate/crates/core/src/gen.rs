//! Random test problems with planted structure, the two planar worked
//! examples, and a brute-force planar oracle.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hybrid::screen_global_candidates;
use crate::linalg::{self, MetricFactor, SymMatrix};
use crate::problem::TtrsProblem;
use crate::trs::{solve_trs, TrsConfig, TrsKernel, TrsProblem};

const MAX_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemClass {
    /// Planted feasible local non-global minimizer whose relaxation's
    /// global minimizer is infeasible.
    LngmEngineered,
    /// Smallest eigenvalue of multiplicity two, so no local non-global minimizer.
    NoLngmMultiplicity,
    /// Linear term orthogonal to the smallest eigenvector.
    NoLngmOrthogonal,
    /// `a = 0`, `c = 0`.
    Homogeneous,
    Example1,
    Example2,
}

impl ProblemClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemClass::LngmEngineered => "class2",
            ProblemClass::NoLngmMultiplicity => "class3a",
            ProblemClass::NoLngmOrthogonal => "class3b",
            ProblemClass::Homogeneous => "class4",
            ProblemClass::Example1 => "example1",
            ProblemClass::Example2 => "example2",
        }
    }
}

impl std::str::FromStr for ProblemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "class2" => ProblemClass::LngmEngineered,
            "class3a" | "class3" => ProblemClass::NoLngmMultiplicity,
            "class3b" => ProblemClass::NoLngmOrthogonal,
            "class4" => ProblemClass::Homogeneous,
            "example1" => ProblemClass::Example1,
            "example2" => ProblemClass::Example2,
            _ => return Err(Error::Config(format!("unknown problem class {s:?}"))),
        })
    }
}

/// Which relaxation carries the planted local non-global minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LngmSide {
    /// The ball relaxation.
    #[default]
    Ball,
    /// The ellipsoid relaxation.
    Ellipsoid,
}

impl LngmSide {
    pub fn as_str(&self) -> &'static str {
        match self {
            LngmSide::Ball => "ball",
            LngmSide::Ellipsoid => "ellipsoid",
        }
    }
}

impl std::str::FromStr for LngmSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ball" => Ok(LngmSide::Ball),
            "ellipsoid" => Ok(LngmSide::Ellipsoid),
            _ => Err(Error::Config(format!(
                "unknown side {s:?}, expected ball or ellipsoid"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub n: usize,
    pub density: f64,
    pub class: ProblemClass,
    pub seed: u64,
    pub lngm_side: LngmSide,
}

impl GenSpec {
    pub fn new(class: ProblemClass, n: usize, seed: u64) -> Self {
        GenSpec {
            n,
            density: 1.0,
            class,
            seed,
            lngm_side: LngmSide::Ball,
        }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn with_side(mut self, side: LngmSide) -> Self {
        self.lngm_side = side;
        self
    }

    fn validate(&self, min_n: usize) -> Result<()> {
        if self.n < min_n {
            return Err(Error::Gen(format!(
                "{} needs n >= {min_n}, got {}",
                self.class.as_str(),
                self.n
            )));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::Gen(format!(
                "density must lie in (0, 1], got {}",
                self.density
            )));
        }
        Ok(())
    }
}

/// Ground truth known by construction.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Annotations {
    /// The planted local non-global minimizer (feasible).
    pub lngm: Option<DVector<f64>>,
    pub lngm_multiplier: Option<f64>,
    pub lngm_side: Option<LngmSide>,
    /// The relaxation's global minimizer (infeasible).
    pub trs_global: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: TtrsProblem,
    pub annotations: Annotations,
}

pub fn generate(spec: &GenSpec) -> Result<Generated> {
    match spec.class {
        ProblemClass::LngmEngineered => gen_class2(spec),
        ProblemClass::NoLngmMultiplicity | ProblemClass::NoLngmOrthogonal => Ok(Generated {
            problem: gen_class3(spec)?,
            annotations: Annotations::default(),
        }),
        ProblemClass::Homogeneous => Ok(Generated {
            problem: gen_class4(spec)?,
            annotations: Annotations::default(),
        }),
        ProblemClass::Example1 | ProblemClass::Example2 => {
            if spec.n != 2 {
                return Err(Error::Gen("the worked examples are planar (n = 2)".into()));
            }
            let i = usize::from(spec.class == ProblemClass::Example2);
            Ok(Generated {
                problem: worked_examples().swap_remove(i).problem,
                annotations: Annotations::default(),
            })
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| normal(rng));
    m.qr().q()
}

/// Ascending spectrum: `λ₁ ~ U[−10, −5]`, the rest `U(λ₁ + 1, 10]`.
fn spectrum(n: usize, repeated: bool, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lam1 = rng.random_range(-10.0..=-5.0);
    let mut d: Vec<f64> = (0..n)
        .map(|_| 10.0 - rng.random_range(0.0..9.0 - lam1))
        .collect();
    d[0] = lam1;
    if repeated {
        d[1] = lam1;
    }
    d.sort_by(f64::total_cmp);
    d
}

fn from_spectrum(d: &[f64], rng: &mut ChaCha8Rng) -> SymMatrix {
    let q = random_orthogonal(d.len(), rng);
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(d));
    SymMatrix::symmetrized(&q * diag * q.transpose())
}

/// Symmetric Erdős–Rényi pattern with standard normal entries.
fn sparse_symmetric(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            if rng.random::<f64>() < density {
                let v = normal(rng);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    SymMatrix::symmetrized(m)
}

/// Indefinite Hessian: a prescribed spectrum when dense, a rescaled sparse
/// draw otherwise.
fn hessian(n: usize, density: f64, repeated: bool, rng: &mut ChaCha8Rng) -> Result<SymMatrix> {
    if density >= 1.0 || repeated {
        return Ok(from_spectrum(&spectrum(n, repeated, rng), rng));
    }
    for _ in 0..MAX_DRAWS {
        let a = sparse_symmetric(n, density, rng);
        let lam = linalg::spectral(&a)?;
        let (l1, l2) = (
            lam.eigenvalues[0],
            lam.eigenvalues.get(1).copied().unwrap_or(f64::INFINITY),
        );
        if l1 < 0.0 && l2 - l1 > 1e-3 * l1.abs() {
            let target = rng.random_range(-10.0..=-5.0);
            return Ok(a.scaled(target / l1));
        }
    }
    Err(Error::Gen(
        "no sparse draw with a simple negative smallest eigenvalue".into(),
    ))
}

/// `B = MMᵀ + 0.1 I` with `M` masked to the requested density.
fn shape(n: usize, density: f64, rng: &mut ChaCha8Rng) -> SymMatrix {
    let scale = 1.0 / ((n as f64 * density).max(1.0)).sqrt();
    let m = DMatrix::from_fn(n, n, |_, _| {
        if density >= 1.0 || rng.random::<f64>() < density {
            normal(rng) * scale
        } else {
            0.0
        }
    });
    SymMatrix::symmetrized(&m * m.transpose()).shifted(0.1)
}

fn inner_fraction(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.1..0.9)
}

/// Planted local non-global minimizer `v₁` with `a = −(A + μ₀I)v₁` (or its
/// ellipsoid analogue); the relaxation's global minimizer is the reflection
/// through the center and is cut off by the other constraint.
pub fn gen_class2(spec: &GenSpec) -> Result<Generated> {
    spec.validate(2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    for _ in 0..MAX_DRAWS {
        let a = hessian(n, spec.density, false, &mut rng)?;
        let b = shape(n, spec.density, &mut rng);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let t = inner_fraction(&mut rng);
        // the cutting radius stays close to the planted point, so the feasible
        // set is a thin cap around it
        let s = rng.random_range(0.01..0.1);
        let built = match spec.lngm_side {
            LngmSide::Ball => {
                let eig = linalg::spectral(&a)?;
                let Some(mu0) = planted_multiplier(eig.eigenvalues.as_slice(), &mut rng) else {
                    continue;
                };
                let delta1 = 1.0;
                let v1 = eig.eigenvectors.column(0).into_owned() * (sign * delta1);
                let lin = -(a.mul_vec(&v1) + &v1 * mu0);
                let c = &v1 * t;
                let near = b.quad(&(&v1 - &c));
                let far = b.quad(&(-&v1 - &c));
                let delta2 = (near + s * (far - near)).sqrt();
                let global = -&v1;
                (
                    TtrsProblem::new(a, lin, b, c, delta1, delta2)?,
                    v1,
                    mu0,
                    global,
                )
            }
            LngmSide::Ellipsoid => {
                let factor = MetricFactor::new(&b)?;
                let red = linalg::spectral(&factor.congruence(&a))?;
                let Some(mu0) = planted_multiplier(red.eigenvalues.as_slice(), &mut rng) else {
                    continue;
                };
                let delta2 = 1.0;
                // u = L⁻ᵀ q̃₁ δ₂ satisfies uᵀBu = δ₂²
                let u =
                    factor.upper_solve(&red.eigenvectors.column(0).into_owned()) * (sign * delta2);
                let c = -&u * t;
                let lin = -(a.mul_vec(&u) + b.mul_vec(&u) * mu0) - a.mul_vec(&c);
                let x_loc = &c + &u;
                let x_glob = &c - &u;
                let near = x_loc.norm_squared();
                let far = x_glob.norm_squared();
                let delta1 = (near + s * (far - near)).sqrt();
                (
                    TtrsProblem::new(a, lin, b, c, delta1, delta2)?,
                    x_loc,
                    mu0,
                    x_glob,
                )
            }
        };
        let (problem, lngm, mu0, global) = built;
        if !problem.is_feasible(&lngm, 1e-12) || problem.is_feasible(&global, 1e-8) {
            continue;
        }
        return Ok(Generated {
            problem,
            annotations: Annotations {
                lngm: Some(lngm),
                lngm_multiplier: Some(mu0),
                lngm_side: Some(spec.lngm_side),
                trs_global: Some(global),
            },
        });
    }
    Err(Error::Gen(
        "could not separate the planted minimizers".into(),
    ))
}

/// `μ₀` uniform in the open interval `(max(0, −λ₂), −λ₁)`, kept away from
/// the ends so the planted root is well conditioned.
fn planted_multiplier(lam: &[f64], rng: &mut ChaCha8Rng) -> Option<f64> {
    let lo = (-lam[1]).max(0.0);
    let hi = -lam[0];
    if !(hi - lo > 1e-3 * (1.0 + hi.abs())) {
        return None;
    }
    Some(lo + (hi - lo) * rng.random_range(0.05..0.95))
}

/// No local non-global minimizer in the ball relaxation, either through a
/// double smallest eigenvalue or a linear term orthogonal to its
/// eigenvector. Radii and center are redrawn until neither relaxation (nor
/// a hard-case alternate) is feasible.
pub fn gen_class3(spec: &GenSpec) -> Result<TtrsProblem> {
    let multiplicity = match spec.class {
        ProblemClass::NoLngmMultiplicity => true,
        ProblemClass::NoLngmOrthogonal => false,
        other => {
            return Err(Error::Gen(format!(
                "{} is not a class-3 variant",
                other.as_str()
            )))
        }
    };
    spec.validate(if multiplicity { 3 } else { 2 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    for _ in 0..MAX_DRAWS {
        let a = hessian(n, spec.density, multiplicity, &mut rng)?;
        let mut lin = DVector::from_fn(n, |_, _| normal(&mut rng));
        if !multiplicity {
            let q1 = linalg::spectral(&a)?.eigenvectors.column(0).into_owned();
            lin -= &q1 * q1.dot(&lin);
        }
        let b = shape(n, spec.density, &mut rng);
        let delta1 = 1.0;
        let x1 = solve_trs(
            &TrsProblem::ball(a.clone(), lin.clone(), delta1)?,
            &TrsConfig::default(),
        )?
        .x;
        let t = inner_fraction(&mut rng);
        let s = rng.random_range(0.3..0.9);
        let c = -&x1 * t;
        let delta2 = (s * b.quad(&(&x1 - &c))).sqrt();
        let p = TtrsProblem::new(a, lin, b, c, delta1, delta2)?;
        let pool = screen_global_candidates(&p, &TrsConfig::default())?;
        if pool.entries.iter().any(|e| e.feasible) {
            continue;
        }
        if !crate::hybrid::check_feasibility(&p)?.feasible {
            continue;
        }
        return Ok(p);
    }
    Err(Error::Gen(
        "every draw had a feasible relaxation minimizer".into(),
    ))
}

/// `a = 0`, `c = 0`, with the second radius chosen so that the smallest
/// eigenvector of `A` leaves the ellipsoid.
pub fn gen_class4(spec: &GenSpec) -> Result<TtrsProblem> {
    spec.validate(2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let a = hessian(n, spec.density, false, &mut rng)?;
    let b = shape(n, spec.density, &mut rng);
    let q1 = linalg::spectral(&a)?.eigenvectors.column(0).into_owned();
    let s = rng.random_range(0.2..0.9);
    let delta2 = (s * b.quad(&q1)).sqrt();
    TtrsProblem::new(a, DVector::zeros(n), b, DVector::zeros(n), 1.0, delta2)
}

/// A worked planar example with its known solutions.
#[derive(Debug, Clone)]
pub struct WorkedExample {
    pub name: &'static str,
    pub problem: TtrsProblem,
    pub optima: Vec<DVector<f64>>,
    pub optimal_value: f64,
    /// Non-global stationary points.
    pub stationary: Vec<DVector<f64>>,
}

/// The two planar examples, written with the doubled Hessian so that the
/// objective `xᵀA₀x + aᵀx` becomes `½xᵀ(2A₀)x + aᵀx`.
pub fn worked_examples() -> Vec<WorkedExample> {
    let a = SymMatrix::from_row_slice(2, &[-8.0, 2.0, 2.0, -4.0]).expect("symmetric");
    let lin = DVector::from_column_slice(&[1.0, 1.0]);
    let v = |x: f64, y: f64| DVector::from_column_slice(&[x, y]);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (r3, r5, r8) = (3f64.sqrt(), 5f64.sqrt(), 8f64.sqrt());
    let ex2 = TtrsProblem::new(
        a.clone(),
        lin.clone(),
        SymMatrix::from_diagonal(&[2.25, 0.25]),
        DVector::zeros(2),
        1.0,
        1.0,
    )
    .expect("valid");
    let g2 = v(r3 / r8, -r5 / r8);
    let f2 = ex2.objective(&g2);
    vec![
        WorkedExample {
            name: "example1",
            problem: TtrsProblem::new(
                a,
                lin,
                SymMatrix::from_diagonal(&[3.0, 1.0]),
                DVector::zeros(2),
                1.0,
                2f64.sqrt(),
            )
            .expect("valid"),
            optima: vec![v(h, -h), v(-h, h)],
            optimal_value: -4.0,
            stationary: Vec::new(),
        },
        WorkedExample {
            name: "example2",
            problem: ex2,
            optima: vec![g2],
            optimal_value: f2,
            stationary: vec![
                v(-r3 / r8, r5 / r8),
                v(-r3 / r8, -r5 / r8),
                v(r3 / r8, r5 / r8),
            ],
        },
    ]
}

/// Brute force for `n = 2`: grid sampling of the feasible region, then
/// projected gradient from the ten best samples with the exact projection
/// onto the intersection.
pub fn oracle_2d(p: &TtrsProblem, grid: usize) -> Result<(DVector<f64>, f64)> {
    if p.dim() != 2 {
        return Err(Error::InvalidProblem(format!(
            "oracle needs n = 2, got {}",
            p.dim()
        )));
    }
    let d1 = p.delta1;
    let mut best: Vec<(f64, DVector<f64>)> = Vec::with_capacity(11);
    let push = |f: f64, x: DVector<f64>, best: &mut Vec<(f64, DVector<f64>)>| {
        if best.len() < 10 || f < best[best.len() - 1].0 {
            let pos = best.partition_point(|(g, _)| *g <= f);
            best.insert(pos, (f, x));
            best.truncate(10);
        }
    };
    // scalar form of the constraint and objective; this loop runs grid² times
    let (a, b, c, l) = (&p.hessian, &p.shape, &p.center, &p.linear);
    let r1 = d1 * d1;
    let r2 = p.delta2 * p.delta2;
    let step = 2.0 * d1 / grid as f64;
    for i in 0..grid {
        let x0 = -d1 + step * (i as f64 + 0.5);
        for j in 0..grid {
            let x1 = -d1 + step * (j as f64 + 0.5);
            if x0 * x0 + x1 * x1 > r1 {
                continue;
            }
            let (e0, e1) = (x0 - c[0], x1 - c[1]);
            if b[(0, 0)] * e0 * e0 + 2.0 * b[(0, 1)] * e0 * e1 + b[(1, 1)] * e1 * e1 > r2 {
                continue;
            }
            let f = 0.5 * (a[(0, 0)] * x0 * x0 + 2.0 * a[(0, 1)] * x0 * x1 + a[(1, 1)] * x1 * x1)
                + l[0] * x0
                + l[1] * x1;
            if best.len() < 10 || f < best[best.len() - 1].0 {
                push(f, DVector::from_column_slice(&[x0, x1]), &mut best);
            }
        }
    }
    let corners = boundary_intersections(p);
    for x in &corners {
        push(p.objective(x), x.clone(), &mut best);
    }
    if best.is_empty() {
        return Err(Error::EmptyFeasibleSample);
    }

    let ell = TrsKernel::new(
        &TrsProblem {
            hessian: SymMatrix::identity(2),
            linear: DVector::zeros(2),
            shape: p.shape.clone(),
            center: p.center.clone(),
            radius: p.delta2,
        },
        TrsConfig {
            root_tol: 1e-15,
            ..TrsConfig::default()
        },
    )?;
    let project = |y: &DVector<f64>| -> DVector<f64> {
        if p.is_feasible(y, 0.0) {
            return y.clone();
        }
        let pb = if y.norm() > d1 {
            y * (d1 / y.norm())
        } else {
            y.clone()
        };
        if p.ellipsoid_slack(&pb) <= 0.0 {
            return pb;
        }
        let pe = ell.solve(&-y).x;
        if p.ball_slack(&pe) <= 0.0 {
            return pe;
        }
        corners
            .iter()
            .min_by(|a, b| (*a - y).norm().total_cmp(&(*b - y).norm()))
            .cloned()
            .unwrap_or(pe)
    };
    let lip = linalg::spectral(&p.hessian)?
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let alpha = 1.0 / (lip + 1e-3);
    let mut out: Option<(f64, DVector<f64>)> = None;
    for (_, x0) in best {
        let mut x = x0;
        for _ in 0..20_000 {
            let next = project(&(&x - p.gradient(&x) * alpha));
            let moved = (&next - &x).norm();
            x = next;
            if moved <= 1e-15 * (1.0 + x.norm()) {
                break;
            }
        }
        let f = p.objective(&x);
        if out.as_ref().is_none_or(|(g, _)| f < *g) {
            out = Some((f, x));
        }
    }
    let (f, x) = out.expect("nonempty");
    Ok((x, f))
}

/// Points where the circle `‖x‖ = δ₁` meets the ellipse boundary.
fn boundary_intersections(p: &TtrsProblem) -> Vec<DVector<f64>> {
    let r = p.delta1;
    let at = |t: f64| DVector::from_column_slice(&[r * t.cos(), r * t.sin()]);
    let g = |t: f64| p.ellipsoid_slack(&at(t));
    let m = 100_000;
    let h = std::f64::consts::TAU / m as f64;
    let mut out = Vec::new();
    let mut prev = g(0.0);
    for i in 1..=m {
        let t = i as f64 * h;
        let cur = g(t);
        if prev == 0.0 {
            out.push(at(t - h));
        } else if prev.signum() != cur.signum() && cur != 0.0 {
            let (mut a, mut b) = (t - h, t);
            let sa = prev.signum();
            for _ in 0..100 {
                let mid = 0.5 * (a + b);
                if g(mid).signum() == sa {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            // the point on the feasible side of the ellipse
            let x = if g(a) <= 0.0 { at(a) } else { at(b) };
            out.push(x);
        }
        prev = cur;
    }
    out
}
