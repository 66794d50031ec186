use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::cauchy::{cauchy_inverse, cauchy_inverse_exact};
use crate::{Error, Result};

pub const MAX_NMAX: usize = 12;

const ALPHA_GRID: usize = 1_000_000;

/// Least-squares polynomial `f_K(x) = sum_{n=1}^K a_n x^n` approximating
/// `f(x) = -x ln x` on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct EntropyPolynomial {
    coeffs: Vec<f64>,
    exact: Option<Vec<BigRational>>,
}

fn rational(k: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

fn gram(n: usize, k: usize) -> f64 {
    1.0 / (1 + n + k) as f64
}

fn moment(n: usize) -> f64 {
    1.0 / ((2 + n) * (2 + n)) as f64
}

/// `f(x) = -x ln x` with `f(0) = 0`.
pub fn entropy_kernel(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.ln()
    }
}

impl EntropyPolynomial {
    /// Polynomial with arbitrary coefficients `a_1..a_K`.
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Argument("polynomial needs at least one coefficient".into()));
        }
        Ok(Self { coeffs, exact: None })
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len()
    }

    /// `a_1..a_K`; entry `n - 1` holds `a_n`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exact_coefficients(&self) -> Option<&[BigRational]> {
        self.exact.as_deref()
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Horner on x * (a_1 + a_2 x + ...)
        x * self.coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }

    /// `Tr f_K(rho) = sum_lambda f_K(lambda)`.
    pub fn eval_spectrum(&self, spectrum: &[f64]) -> f64 {
        spectrum.iter().map(|&l| self.eval(l)).sum()
    }

    /// `sum_n a_n p_n` for trace moments `p_1..p_K`.
    pub fn eval_moments(&self, moments: &[f64]) -> Result<f64> {
        if moments.len() != self.coeffs.len() {
            return Err(Error::Dimension(format!(
                "{} moments for a degree-{} polynomial",
                moments.len(),
                self.coeffs.len()
            )));
        }
        Ok(self.coeffs.iter().zip(moments).map(|(a, p)| a * p).sum())
    }

    /// Largest residual of the normal equations
    /// `sum_k a_k / (1 + n + k) = 1 / (2 + n)^2`.
    pub fn stationarity_residual(&self) -> f64 {
        let k = self.coeffs.len();
        (1..=k)
            .map(|n| {
                let lhs: f64 = (1..=k).map(|j| gram(n, j) * self.coeffs[j - 1]).sum();
                (lhs - moment(n)).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn check_degree(n_max: usize) -> Result<()> {
    if !(1..=MAX_NMAX).contains(&n_max) {
        return Err(Error::Argument(format!("n_max must be in 1..={MAX_NMAX}, got {n_max}")));
    }
    Ok(())
}

/// Optimal least-squares coefficients for degree `n_max`, solved in exact
/// rational arithmetic.
pub fn entropy_poly_coeffs(n_max: usize) -> Result<EntropyPolynomial> {
    check_degree(n_max)?;
    let x: Vec<BigRational> = (1..=n_max).map(|n| rational(n + 1)).collect();
    let y: Vec<BigRational> = (1..=n_max).map(rational).collect();
    let inv = cauchy_inverse_exact(&x, &y)?;
    let exact: Vec<BigRational> = inv
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, b)| b / rational((k + 3) * (k + 3)))
                .sum()
        })
        .collect();
    let coeffs = exact.iter().map(|a| a.to_f64().unwrap_or(f64::NAN)).collect();
    Ok(EntropyPolynomial {
        coeffs,
        exact: Some(exact),
    })
}

/// Floating-point variant of [`entropy_poly_coeffs`]. Fails when the
/// normal-equation residual exceeds `1e-4`, which happens for the largest
/// degrees because the Cauchy system is badly conditioned.
pub fn entropy_poly_coeffs_float(n_max: usize) -> Result<EntropyPolynomial> {
    check_degree(n_max)?;
    let x: Vec<f64> = (1..=n_max).map(|n| (n + 1) as f64).collect();
    let y: Vec<f64> = (1..=n_max).map(|n| n as f64).collect();
    let inv = cauchy_inverse(&x, &y)?;
    let coeffs = (0..n_max)
        .map(|n| (0..n_max).map(|k| inv[(n, k)] * moment(k + 1)).sum())
        .collect();
    let poly = EntropyPolynomial { coeffs, exact: None };
    let res = poly.stationarity_residual();
    if !(res < 1e-4) {
        return Err(Error::Singular(format!(
            "floating-point coefficients for n_max = {n_max} have residual {res:e}"
        )));
    }
    Ok(poly)
}

/// `I = int_0^1 (f(x) - f_K(x))^2 dx`
/// `  = 2/27 - sum_n 2 a_n/(2+n)^2 + sum_{n,k} a_n a_k/(1+n+k)`.
pub fn least_square_error(poly: &EntropyPolynomial) -> f64 {
    let a = poly.coefficients();
    let k = a.len();
    let mut total = 2.0 / 27.0;
    for n in 1..=k {
        total -= 2.0 * a[n - 1] * moment(n);
        for j in 1..=k {
            total += a[n - 1] * a[j - 1] * gram(n, j);
        }
    }
    total
}

/// `alpha_K = max_{x in [0,1]} |f(x) - f_K(x)|`, from a uniform grid
/// followed by golden-section refinement around the best grid points.
pub fn alpha(poly: &EntropyPolynomial) -> f64 {
    let err = |x: f64| (entropy_kernel(x) - poly.eval(x)).abs();
    let h = 1.0 / ALPHA_GRID as f64;
    let values: Vec<f64> = (0..=ALPHA_GRID).map(|i| err(i as f64 * h)).collect();
    let mut best = values.iter().cloned().fold(0.0, f64::max);
    // refine around every grid local maximum
    for i in 1..ALPHA_GRID {
        if values[i] >= values[i - 1] && values[i] >= values[i + 1] && values[i] > 0.5 * best {
            best = best.max(golden_max(&err, (i - 1) as f64 * h, (i + 1) as f64 * h));
        }
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..60 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    f(0.5 * (a + b))
}

/// `alpha_K * rank`, an upper bound on `|S - S_K|` for states of that rank.
pub fn entropy_error_bound(n_max: usize, rank: usize) -> Result<f64> {
    if rank == 0 {
        return Err(Error::Argument("rank must be >= 1".into()));
    }
    Ok(alpha(&entropy_poly_coeffs(n_max)?) * rank as f64)
}
