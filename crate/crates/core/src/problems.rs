//! Test objectives: non-negative finite-sum losses with exact gradients.
//!
//! Every objective is written as `f(x) = (1/n) Σ_i f_i(x)` with `f_i ≥ 0`.
//! Least-squares families use `f_i(x) = (n/2)(a_iᵀx − b_i)²`, so the full
//! objective is `½‖Ax − b‖²` and a batch loss is the mean of its members.
//! The remaining objectives are deterministic (`n = 1`).

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::sampling::{sample_indices, Batch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    LeastSquares,
    RidgeQuadratic,
    Rosenbrock,
    Multimodal1D,
    Polynomial1D,
    LinearRegressionData,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        ProblemKind::LeastSquares,
        ProblemKind::RidgeQuadratic,
        ProblemKind::Rosenbrock,
        ProblemKind::Multimodal1D,
        ProblemKind::Polynomial1D,
        ProblemKind::LinearRegressionData,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::LeastSquares => "least-squares",
            ProblemKind::RidgeQuadratic => "ridge-quadratic",
            ProblemKind::Rosenbrock => "rosenbrock",
            ProblemKind::Multimodal1D => "multimodal",
            ProblemKind::Polynomial1D => "polynomial",
            ProblemKind::LinearRegressionData => "linear-regression",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Ok(match key.as_str() {
            "least-squares" | "leastsquares" => ProblemKind::LeastSquares,
            "ridge-quadratic" | "ridge" | "quadratic" => ProblemKind::RidgeQuadratic,
            "rosenbrock" => ProblemKind::Rosenbrock,
            "multimodal" | "multimodal1d" => ProblemKind::Multimodal1D,
            "polynomial" | "polynomial1d" => ProblemKind::Polynomial1D,
            "linear-regression" | "regression" | "diabetes" => ProblemKind::LinearRegressionData,
            _ => return Err(Error::UnknownKind(s.to_string())),
        })
    }
}

/// Source rows for the data-backed regression problem.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionSource {
    /// Raw feature rows and targets; features are standardized on build.
    Table {
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
    },
    /// Seeded Gaussian design `y = Xw + 0.1·noise` of the given shape.
    Synthetic {
        n_samples: usize,
        dim: usize,
        seed: u64,
    },
}

impl RegressionSource {
    /// Stand-in with the shape of the Diabetes table (442 × 10).
    pub fn diabetes_shaped(seed: u64) -> Self {
        RegressionSource::Synthetic {
            n_samples: 442,
            dim: 10,
            seed,
        }
    }
}

/// Descriptor accepted by [`build_problem`].
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    /// `½‖Ax − b‖²` with `A` given row by row.
    LeastSquares { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `½‖(A + rI)x − y‖²` with `A` (dim × dim) and `y` standard normal.
    RidgeQuadratic { dim: usize, r: f64, seed: u64 },
    Rosenbrock,
    Multimodal1D,
    /// `scale · x²(1 + p(x)²)` with `p` given by ascending coefficients.
    Polynomial1D { scale: f64, coeffs: Vec<f64> },
    LinearRegression(RegressionSource),
}

impl ProblemSpec {
    pub fn kind(&self) -> ProblemKind {
        match self {
            ProblemSpec::LeastSquares { .. } => ProblemKind::LeastSquares,
            ProblemSpec::RidgeQuadratic { .. } => ProblemKind::RidgeQuadratic,
            ProblemSpec::Rosenbrock => ProblemKind::Rosenbrock,
            ProblemSpec::Multimodal1D => ProblemKind::Multimodal1D,
            ProblemSpec::Polynomial1D { .. } => ProblemKind::Polynomial1D,
            ProblemSpec::LinearRegression(_) => ProblemKind::LinearRegressionData,
        }
    }

    /// The `x²(1 + x²)` objective.
    pub fn quartic() -> Self {
        ProblemSpec::Polynomial1D {
            scale: 1.0,
            coeffs: vec![0.0, 1.0],
        }
    }

    /// Random `n × d` least squares with standard normal entries.
    ///
    /// With `interpolating` set, `b = A x♯` for a standard normal `x♯`, so
    /// every consistent batch subsystem is solvable and `f* = 0`.
    pub fn random_least_squares(n: usize, d: usize, seed: u64, interpolating: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let b = if interpolating {
            let target: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            a.iter().map(|row| dot(row, &target)).collect()
        } else {
            (0..n).map(|_| rng.sample(StandardNormal)).collect()
        };
        ProblemSpec::LeastSquares { a, b }
    }
}

/// Analytic facts about an objective, populated where they are known.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjectiveMetadata {
    /// Global smoothness of the full objective (λ_max of the Hessian).
    pub smoothness: Option<f64>,
    /// Per-coordinate smoothness `L_j` (Hessian diagonal).
    pub coord_smoothness: Option<Vec<f64>>,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
    /// PŁ constant (λ_min of `AᵀA` for full-rank least squares).
    pub mu: Option<f64>,
    /// Constant `C` with `C(1 + p²) ≥ x p p'` for the polynomial family.
    pub c_poly: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum Data {
    /// Row-major `n × d` matrix and targets.
    Quadratic { a: Vec<f64>, b: Vec<f64> },
    Rosenbrock,
    Multimodal,
    Polynomial { scale: f64, coeffs: Vec<f64> },
}

/// One evaluation: mean batch loss, its gradient and the batch used.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSample {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub batch: Batch,
}

/// A non-negative finite-sum objective with an exact gradient oracle.
///
/// Immutable after construction; sampling state lives in `(seed, step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticObjective {
    kind: ProblemKind,
    dim: usize,
    n_samples: usize,
    data: Data,
    meta: ObjectiveMetadata,
    x0: Vec<f64>,
}

pub fn build_problem(spec: &ProblemSpec) -> Result<StochasticObjective> {
    match spec {
        ProblemSpec::LeastSquares { a, b } => {
            let (rows, cols, flat) = flatten_rows(a)?;
            if b.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "targets",
                    expected: rows,
                    found: b.len(),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("targets"));
            }
            quadratic(ProblemKind::LeastSquares, rows, cols, flat, b.clone())
        }
        ProblemSpec::RidgeQuadratic { dim, r, seed } => {
            if *dim == 0 {
                return Err(invalid("dim", "must be at least 1"));
            }
            if !(r.is_finite() && *r >= 0.0) {
                return Err(invalid("r", "must be finite and non-negative"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut a: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
            for j in 0..*dim {
                a[j * dim + j] += r;
            }
            let y: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
            quadratic(ProblemKind::RidgeQuadratic, *dim, *dim, a, y)
        }
        ProblemSpec::LinearRegression(source) => {
            let (features, targets) = match source {
                RegressionSource::Table { features, targets } => (features.clone(), targets.clone()),
                RegressionSource::Synthetic {
                    n_samples,
                    dim,
                    seed,
                } => synthetic_regression(*n_samples, *dim, *seed)?,
            };
            let (rows, cols, mut flat) = flatten_rows(&features)?;
            if targets.len() != rows {
                return Err(Error::DimensionMismatch {
                    what: "targets",
                    expected: rows,
                    found: targets.len(),
                });
            }
            if targets.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("targets"));
            }
            standardize_columns(&mut flat, rows, cols)?;
            quadratic(ProblemKind::LinearRegressionData, rows, cols, flat, targets)
        }
        ProblemSpec::Rosenbrock => Ok(StochasticObjective {
            kind: ProblemKind::Rosenbrock,
            dim: 2,
            n_samples: 1,
            data: Data::Rosenbrock,
            meta: ObjectiveMetadata {
                f_star: Some(0.0),
                x_star: Some(vec![1.0, 1.0]),
                ..Default::default()
            },
            x0: vec![-1.2, 1.0],
        }),
        ProblemSpec::Multimodal1D => Ok(StochasticObjective {
            kind: ProblemKind::Multimodal1D,
            dim: 1,
            n_samples: 1,
            data: Data::Multimodal,
            // Both summands vanish at x = 0.
            meta: ObjectiveMetadata {
                f_star: Some(0.0),
                x_star: Some(vec![0.0]),
                ..Default::default()
            },
            x0: vec![2.0],
        }),
        ProblemSpec::Polynomial1D { scale, coeffs } => {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(invalid("scale", "must be finite and positive"));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("polynomial coefficients"));
            }
            Ok(StochasticObjective {
                kind: ProblemKind::Polynomial1D,
                dim: 1,
                n_samples: 1,
                meta: ObjectiveMetadata {
                    f_star: Some(0.0),
                    x_star: Some(vec![0.0]),
                    c_poly: Some(polynomial_constant(coeffs)),
                    ..Default::default()
                },
                data: Data::Polynomial {
                    scale: *scale,
                    coeffs: coeffs.clone(),
                },
                x0: vec![3.0],
            })
        }
    }
}

impl StochasticObjective {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn metadata(&self) -> &ObjectiveMetadata {
        &self.meta
    }

    /// Default starting point (overridable with [`Self::with_initial_point`]).
    pub fn initial_point(&self) -> &[f64] {
        &self.x0
    }

    pub fn with_initial_point(mut self, x0: Vec<f64>) -> Result<Self> {
        self.check_point(&x0)?;
        self.x0 = x0;
        Ok(self)
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.data, Data::Quadratic { .. })
    }

    /// Smoothness constant valid for every batch loss `f_S`:
    /// `n · max_i ‖a_i‖²` for least squares.
    pub fn batch_smoothness_bound(&self) -> Option<f64> {
        match &self.data {
            Data::Quadratic { a, .. } => {
                let n = self.n_samples as f64;
                a.chunks(self.dim)
                    .map(|row| dot(row, row))
                    .reduce(f64::max)
                    .map(|m| n * m)
            }
            _ => None,
        }
    }

    /// Per-coordinate smoothness valid for every batch loss:
    /// `n · max_i a_ij²`.
    pub fn batch_coord_smoothness_bound(&self) -> Option<Vec<f64>> {
        match &self.data {
            Data::Quadratic { a, .. } => {
                let n = self.n_samples as f64;
                let mut out = vec![0.0; self.dim];
                for row in a.chunks(self.dim) {
                    for (o, v) in out.iter_mut().zip(row) {
                        *o = f64::max(*o, v * v);
                    }
                }
                out.iter_mut().for_each(|o| *o *= n);
                Some(out)
            }
            _ => None,
        }
    }

    pub fn full_batch(&self) -> Batch {
        Batch::full(self.n_samples)
    }

    pub fn sample_batch(&self, seed: u64, step: u64, batch_size: usize) -> Result<Batch> {
        sample_indices(self.n_samples, seed, step, batch_size)
    }

    /// Mean batch loss and gradient at `x`.
    pub fn evaluate(&self, x: &[f64], batch: &Batch) -> Result<StepSample> {
        let mut grad = vec![0.0; self.dim];
        let loss = self.eval_into(x, batch, &mut grad)?;
        Ok(StepSample {
            loss,
            grad,
            batch: batch.clone(),
        })
    }

    /// Mean batch loss, writing the gradient into `grad`.
    pub fn eval_into(&self, x: &[f64], batch: &Batch, grad: &mut [f64]) -> Result<f64> {
        self.check_point(x)?;
        self.check_batch(batch)?;
        if grad.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "gradient buffer",
                expected: self.dim,
                found: grad.len(),
            });
        }
        Ok(self.eval_unchecked(x, batch, Some(grad)))
    }

    /// Mean batch loss only.
    pub fn loss(&self, x: &[f64], batch: &Batch) -> Result<f64> {
        self.check_point(x)?;
        self.check_batch(batch)?;
        Ok(self.eval_unchecked(x, batch, None))
    }

    pub fn full_loss(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x, &self.full_batch(), None))
    }

    fn eval_unchecked(&self, x: &[f64], batch: &Batch, grad: Option<&mut [f64]>) -> f64 {
        match &self.data {
            Data::Quadratic { a, b } => {
                let scale = self.n_samples as f64 / batch.len() as f64;
                let mut sq = 0.0;
                match grad {
                    Some(g) => {
                        g.iter_mut().for_each(|v| *v = 0.0);
                        for &i in batch.indices() {
                            let row = &a[i * self.dim..(i + 1) * self.dim];
                            let r = dot(row, x) - b[i];
                            sq += r * r;
                            for (gj, aj) in g.iter_mut().zip(row) {
                                *gj += r * aj;
                            }
                        }
                        g.iter_mut().for_each(|v| *v *= scale);
                    }
                    None => {
                        for &i in batch.indices() {
                            let row = &a[i * self.dim..(i + 1) * self.dim];
                            let r = dot(row, x) - b[i];
                            sq += r * r;
                        }
                    }
                }
                0.5 * scale * sq
            }
            Data::Rosenbrock => {
                let (u, v) = (x[0], x[1]);
                let t = v - u * u;
                if let Some(g) = grad {
                    g[0] = 2.0 * (u - 1.0) - 400.0 * u * t;
                    g[1] = 200.0 * t;
                }
                (u - 1.0) * (u - 1.0) + 100.0 * t * t
            }
            Data::Multimodal => {
                let (value, slope) = multimodal(x[0]);
                if let Some(g) = grad {
                    g[0] = slope;
                }
                value
            }
            Data::Polynomial { scale, coeffs } => {
                let t = x[0];
                let (p, dp) = horner(coeffs, t);
                if let Some(g) = grad {
                    g[0] = scale * (2.0 * t * (1.0 + p * p) + 2.0 * t * t * p * dp);
                }
                scale * t * t * (1.0 + p * p)
            }
        }
    }

    /// Minimum of the batch loss, `f_S*`.
    ///
    /// Least-squares batches are solved with an SVD (minimum-norm solution
    /// for rank-deficient subsystems). Deterministic objectives return `f*`.
    pub fn batch_minimum(&self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        match &self.data {
            Data::Quadratic { a, b } => {
                let rows = batch.len();
                let sub_a = DMatrix::from_fn(rows, self.dim, |r, c| a[batch.indices()[r] * self.dim + c]);
                let sub_b = DVector::from_iterator(rows, batch.indices().iter().map(|&i| b[i]));
                let x = min_norm_solve(&sub_a, &sub_b)?;
                let resid = &sub_a * &x - &sub_b;
                let scale = self.n_samples as f64 / rows as f64;
                Ok(0.5 * scale * resid.norm_squared())
            }
            _ => self.meta.f_star.ok_or(Error::MissingMetadata("f_star")),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "point",
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point"));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        match batch.indices().last() {
            None => Err(Error::MalformedData("empty batch".into())),
            Some(&i) if i >= self.n_samples => Err(Error::MalformedData(alloc::format!(
                "batch index {i} out of range for {} samples",
                self.n_samples
            ))),
            _ => Ok(()),
        }
    }
}

/// Central-difference gradient `(f(x + h e_j) − f(x − h e_j)) / 2h`.
pub fn finite_diff_grad(problem: &StochasticObjective, x: &[f64], batch: &Batch, h: f64) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", "must be finite and positive"));
    }
    problem.check_point(x)?;
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let up = problem.loss(&probe, batch)?;
        probe[j] = x[j] - h;
        let down = problem.loss(&probe, batch)?;
        probe[j] = x[j];
        let d = (up - down) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::NonFinite("finite difference"));
        }
        out.push(d);
    }
    Ok(out)
}

/// Zero-mean, unit-variance (population) scaling of each column in place.
pub fn standardize_columns(flat: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 || flat.len() != rows * cols {
        return Err(Error::MalformedData("empty or ragged feature table".into()));
    }
    let n = rows as f64;
    for c in 0..cols {
        let mean = (0..rows).map(|r| flat[r * cols + c]).sum::<f64>() / n;
        let var = (0..rows).map(|r| (flat[r * cols + c] - mean).powi(2)).sum::<f64>() / n;
        if var.is_nan() || var <= 0.0 {
            return Err(Error::MalformedData(alloc::format!("feature column {c} is constant")));
        }
        let sd = libm::sqrt(var);
        for r in 0..rows {
            flat[r * cols + c] = (flat[r * cols + c] - mean) / sd;
        }
    }
    Ok(())
}

/// Value and derivative of
/// `(sin(1 + cos(−π + x)) − 0.2x)² + (sin(1 + cos(π − x)) + 0.2x)⁴`.
pub fn multimodal(x: f64) -> (f64, f64) {
    use core::f64::consts::PI;
    let inner_a = 1.0 + libm::cos(-PI + x);
    let inner_b = 1.0 + libm::cos(PI - x);
    let a = libm::sin(inner_a) - 0.2 * x;
    let b = libm::sin(inner_b) + 0.2 * x;
    let da = libm::cos(inner_a) * (-libm::sin(-PI + x)) - 0.2;
    let db = libm::cos(inner_b) * libm::sin(PI - x) + 0.2;
    let b2 = b * b;
    (a * a + b2 * b2, 2.0 * a * da + 4.0 * b2 * b * db)
}

fn quadratic(kind: ProblemKind, rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>) -> Result<StochasticObjective> {
    let meta = quadratic_metadata(rows, cols, &a, &b)?;
    Ok(StochasticObjective {
        kind,
        dim: cols,
        n_samples: rows,
        data: Data::Quadratic { a, b },
        meta,
        x0: vec![0.0; cols],
    })
}

fn quadratic_metadata(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Result<ObjectiveMetadata> {
    let mat = DMatrix::from_row_slice(rows, cols, a);
    let hess = mat.transpose() * &mat;
    let eig = hess.clone().symmetric_eigenvalues();
    let l = eig.max();
    let l_min = eig.min();
    let coord = (0..cols).map(|j| hess[(j, j)]).collect();
    let rhs = DVector::from_column_slice(b);
    let x_star = min_norm_solve(&mat, &rhs)?;
    let f_star = 0.5 * (&mat * &x_star - &rhs).norm_squared();
    let mu = (l_min > l * 1e-12 && rows >= cols).then_some(l_min);
    Ok(ObjectiveMetadata {
        smoothness: Some(l),
        coord_smoothness: Some(coord),
        f_star: Some(f_star),
        x_star: Some(x_star.iter().copied().collect()),
        mu,
        c_poly: None,
    })
}

fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = top * (a.nrows().max(a.ncols()) as f64) * f64::EPSILON;
    svd.solve(b, eps)
        .map_err(|e| Error::MalformedData(alloc::format!("least-squares solve failed: {e}")))
}

fn flatten_rows(rows: &[Vec<f64>]) -> Result<(usize, usize, Vec<f64>)> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::MalformedData("empty design matrix".into()));
    }
    let mut flat = Vec::with_capacity(n * d);
    for row in rows {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                what: "design matrix row",
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        flat.extend_from_slice(row);
    }
    Ok((n, d, flat))
}

fn synthetic_regression(n: usize, d: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(invalid("n_samples/dim", "must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let mut features = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let noise: f64 = rng.sample(StandardNormal);
        targets.push(dot(&row, &w) + 0.1 * noise);
        features.push(row);
    }
    Ok((features, targets))
}

/// `sup_x x p(x) p'(x) / (1 + p(x)²)`, taking the `|x| → ∞` limit `deg p`
/// together with a dense scan of `[-100, 100]`.
fn polynomial_constant(coeffs: &[f64]) -> f64 {
    let degree = coeffs.iter().rposition(|c| *c != 0.0).unwrap_or(0);
    let mut best = degree as f64;
    let steps = 200_000;
    for i in 0..=steps {
        let x = -100.0 + 200.0 * i as f64 / steps as f64;
        let (p, dp) = horner(coeffs, x);
        best = best.max(x * p * dp / (1.0 + p * p));
    }
    best
}

/// `(p(x), p'(x))` for ascending coefficients.
fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Dot product with four independent accumulators.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (head, tail) = (n / 4 * 4, n % 4);
    let mut acc = [0.0f64; 4];
    for (x, y) in a[..head].chunks_exact(4).zip(b[..head].chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in head..head + tail {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_ls() -> StochasticObjective {
        build_problem(&ProblemSpec::LeastSquares {
            a: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            b: vec![0.0, 0.0],
        })
        .unwrap()
    }

    #[test]
    fn rosenbrock_metadata_and_start() {
        let p = build_problem(&ProblemSpec::Rosenbrock).unwrap();
        assert_eq!(p.metadata().x_star.as_deref(), Some(&[1.0, 1.0][..]));
        assert_eq!(p.full_loss(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(p.metadata().smoothness.is_none());
        // (-2.2)² + 100·(1 − 1.44)² = 4.84 + 19.36
        let s = p.evaluate(&[-1.2, 1.0], &p.full_batch()).unwrap();
        assert!((s.loss - 24.2).abs() < 1e-12);
    }

    #[test]
    fn quartic_constant_is_one() {
        let p = build_problem(&ProblemSpec::quartic()).unwrap();
        assert_eq!(p.metadata().c_poly, Some(1.0));
        assert_eq!(p.full_loss(&[2.0]).unwrap(), 20.0);
    }

    #[test]
    fn identity_least_squares_metadata() {
        let p = identity_ls();
        let m = p.metadata();
        assert_eq!(m.f_star, Some(0.0));
        assert!((m.smoothness.unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(m.coord_smoothness.as_deref(), Some(&[1.0, 1.0][..]));
        let s = p.evaluate(&[0.0, 0.0], &p.full_batch()).unwrap();
        assert_eq!(s.loss, 0.0);
        assert_eq!(s.grad, vec![0.0, 0.0]);
    }

    #[test]
    fn multimodal_matches_closed_form() {
        use core::f64::consts::PI;
        let p = build_problem(&ProblemSpec::Multimodal1D).unwrap();
        for &x in &[-7.3, -1.0, 0.0, 0.4, 5.5, 19.9] {
            let a = libm::sin(1.0 + libm::cos(-PI + x)) - 0.2 * x;
            let b = libm::sin(1.0 + libm::cos(PI - x)) + 0.2 * x;
            let expect = a * a + libm::pow(b, 4.0);
            assert!((p.full_loss(&[x]).unwrap() - expect).abs() <= 1e-12 * expect.max(1.0));
        }
        assert_eq!(p.full_loss(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn finite_differences_match_known_gradients() {
        let ls = identity_ls();
        let g = finite_diff_grad(&ls, &[1.0, 0.0], &ls.full_batch(), 1e-6).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-6 && g[1].abs() < 1e-6);

        let rb = build_problem(&ProblemSpec::Rosenbrock).unwrap();
        let g = finite_diff_grad(&rb, &[1.0, 1.0], &rb.full_batch(), 1e-6).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-6));

        // f'(x) = 2x + 4x³ = 6 at x = 1
        let q = build_problem(&ProblemSpec::quartic()).unwrap();
        let g = finite_diff_grad(&q, &[1.0], &q.full_batch(), 1e-6).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        assert!(finite_diff_grad(&q, &[1.0], &q.full_batch(), 0.0).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(build_problem(&ProblemSpec::RidgeQuadratic { dim: 0, r: 1.0, seed: 0 }).is_err());
        assert!(build_problem(&ProblemSpec::RidgeQuadratic { dim: 3, r: -1.0, seed: 0 }).is_err());
        assert!(matches!(
            build_problem(&ProblemSpec::LeastSquares {
                a: vec![vec![1.0], vec![2.0]],
                b: vec![1.0],
            }),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(build_problem(&ProblemSpec::LeastSquares {
            a: vec![vec![1.0, 2.0], vec![2.0]],
            b: vec![1.0, 2.0],
        })
        .is_err());
        assert!("sphere".parse::<ProblemKind>().is_err());
        let kinds: Vec<ProblemKind> = ProblemKind::ALL.iter().map(|k| k.name().parse().unwrap()).collect();
        assert_eq!(kinds, ProblemKind::ALL.to_vec());
    }

    #[test]
    fn non_finite_points_are_rejected() {
        let p = identity_ls();
        assert_eq!(p.full_loss(&[f64::NAN, 0.0]), Err(Error::NonFinite("point")));
        assert!(matches!(p.full_loss(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn batch_loss_is_mean_of_members() {
        let p = build_problem(&ProblemSpec::random_least_squares(6, 3, 4, false)).unwrap();
        let x = [0.3, -0.2, 1.1];
        let singles: f64 = (0..6)
            .map(|i| p.loss(&x, &Batch::from_indices(vec![i], 6).unwrap()).unwrap())
            .sum();
        assert!((singles / 6.0 - p.full_loss(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn regression_features_are_standardized() {
        let p = build_problem(&ProblemSpec::LinearRegression(RegressionSource::diabetes_shaped(1))).unwrap();
        assert_eq!((p.n_samples(), p.dim()), (442, 10));
        let Data::Quadratic { a, .. } = &p.data else { unreachable!() };
        for c in 0..10 {
            let col: Vec<f64> = (0..442).map(|r| a[r * 10 + c]).collect();
            let mean = col.iter().sum::<f64>() / 442.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 442.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
        let constant = ProblemSpec::LinearRegression(RegressionSource::Table {
            features: vec![vec![1.0], vec![1.0]],
            targets: vec![0.0, 1.0],
        });
        assert!(matches!(build_problem(&constant), Err(Error::MalformedData(_))));
    }

    #[test]
    fn batch_minimum_of_consistent_rows_is_zero() {
        let p = build_problem(&ProblemSpec::random_least_squares(8, 3, 2, true)).unwrap();
        let b = Batch::from_indices(vec![1, 4, 6], 8).unwrap();
        assert!(p.batch_minimum(&b).unwrap() < 1e-20);
        // A single row of an inconsistent system is always solvable.
        let q = build_problem(&ProblemSpec::random_least_squares(8, 3, 2, false)).unwrap();
        assert!(q.batch_minimum(&Batch::from_indices(vec![5], 8).unwrap()).unwrap() < 1e-20);
        assert!((q.batch_minimum(&q.full_batch()).unwrap() - q.metadata().f_star.unwrap()).abs() < 1e-10);
    }
}
