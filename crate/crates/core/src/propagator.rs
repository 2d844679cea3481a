//! Exact transfer matrices `exp(i·G·z)` for small complex generators.
//!
//! Coupled-mode generators built here are always `H + i·γ·I` with `H`
//! Hermitian (uniform loss only shifts the diagonal), so the exponential is
//! assembled from the eigendecomposition of `H`. Anything else goes through
//! scaling-and-squaring of a truncated Taylor series.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Relative size of the non-scalar anti-Hermitian part below which the
/// eigendecomposition path is used.
const NORMAL_TOLERANCE: f64 = 1e-13;

/// Target accuracy of the series path (relative, in the spectral sense).
pub const SERIES_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Eigen,
    Series,
}

/// Precomputed factorization of a generator for repeated evaluation at
/// different `z`.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: DMatrix<Complex64>,
    eigen: Option<EigenParts>,
}

#[derive(Debug, Clone)]
struct EigenParts {
    vectors: DMatrix<Complex64>,
    values: Vec<f64>,
    damping: f64,
}

impl Propagator {
    pub fn new(generator: DMatrix<Complex64>) -> Self {
        assert!(generator.is_square(), "generator must be square");
        let eigen = hermitian_split(&generator).map(|(h, damping)| {
            let eig = h.symmetric_eigen();
            EigenParts {
                vectors: eig.eigenvectors,
                values: eig.eigenvalues.iter().copied().collect(),
                damping,
            }
        });
        Self { generator, eigen }
    }

    /// Forces the series path even for normal generators.
    pub fn series_only(generator: DMatrix<Complex64>) -> Self {
        Self { generator, eigen: None }
    }

    pub fn method(&self) -> Method {
        if self.eigen.is_some() {
            Method::Eigen
        } else {
            Method::Series
        }
    }

    pub fn generator(&self) -> &DMatrix<Complex64> {
        &self.generator
    }

    /// `exp(i·G·z)`.
    pub fn transfer(&self, z: f64) -> DMatrix<Complex64> {
        match &self.eigen {
            Some(parts) => {
                let n = parts.values.len();
                let decay = (-parts.damping * z).exp();
                let mut scaled = parts.vectors.clone();
                for (j, &lambda) in parts.values.iter().enumerate() {
                    let phase = Complex64::from_polar(decay, lambda * z);
                    for i in 0..n {
                        scaled[(i, j)] *= phase;
                    }
                }
                scaled * parts.vectors.adjoint()
            }
            None => series_exp(&(&self.generator * Complex64::new(0.0, z))),
        }
    }
}

/// Splits `G = H + i·γ·I`; `None` when the anti-Hermitian part is not a
/// multiple of the identity.
fn hermitian_split(g: &DMatrix<Complex64>) -> Option<(DMatrix<Complex64>, f64)> {
    let adj = g.adjoint();
    let h = (g + &adj) * Complex64::new(0.5, 0.0);
    let a = (g - &adj) * Complex64::new(0.0, -0.5);
    let n = g.nrows();
    let gamma = (0..n).map(|i| a[(i, i)].re).sum::<f64>() / n as f64;
    let scale = g.norm().max(1.0);
    let residual = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let shift = if i == j { gamma } else { 0.0 };
            (a[(i, j)] - shift).norm()
        })
        .fold(0.0, f64::max);
    (residual <= NORMAL_TOLERANCE * scale).then_some((h, gamma))
}

/// `exp(A)` by scaling and squaring a Taylor polynomial.
pub fn series_exp(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(squarings as i32), 0.0);

    let mut result = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=30u32 {
        term = &term * &scaled * Complex64::new(1.0 / f64::from(k), 0.0);
        result += &term;
        if one_norm(&term) < SERIES_TOLERANCE * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}
