use std::ops::{Add, Div, Mul, Sub};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::{Error, Result};

fn check_nodes<T>(x: &[T], y: &[T]) -> Result<()>
where
    T: Clone + Zero + PartialEq + Add<Output = T>,
{
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} x-nodes and {} y-nodes", x.len(), y.len())));
    }
    for (i, a) in x.iter().enumerate() {
        if x[..i].contains(a) {
            return Err(Error::Singular(format!("repeated x-node at position {i}")));
        }
    }
    for (i, b) in y.iter().enumerate() {
        if y[..i].contains(b) {
            return Err(Error::Singular(format!("repeated y-node at position {i}")));
        }
    }
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            if (a.clone() + b.clone()).is_zero() {
                return Err(Error::Singular(format!("x[{i}] + y[{j}] = 0")));
            }
        }
    }
    Ok(())
}

/// Explicit inverse of `A_{ij} = 1/(x_i + y_j)`:
///
/// `B_{ij} = prod_k (x_j + y_k)(x_k + y_i)
///           / [(x_j + y_i) prod_{k != j} (x_j - x_k) prod_{k != i} (y_i - y_k)]`.
fn cauchy_inverse_generic<T>(x: &[T], y: &[T]) -> Result<Vec<Vec<T>>>
where
    T: Clone
        + Zero
        + One
        + PartialEq
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Div<Output = T>,
{
    check_nodes(x, y)?;
    let n = x.len();
    let mut out = vec![vec![T::zero(); n]; n];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let mut num = T::one();
            let mut den = x[j].clone() + y[i].clone();
            for k in 0..n {
                num = num * (x[j].clone() + y[k].clone()) * (x[k].clone() + y[i].clone());
                if k != j {
                    den = den * (x[j].clone() - x[k].clone());
                }
                if k != i {
                    den = den * (y[i].clone() - y[k].clone());
                }
            }
            *entry = num / den;
        }
    }
    Ok(out)
}

/// Inverse of the Cauchy matrix `1/(x_i + y_j)` in floating point.
pub fn cauchy_inverse(x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let rows = cauchy_inverse_generic(x, y)?;
    let n = x.len();
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Inverse of the Cauchy matrix `1/(x_i + y_j)` in exact rational arithmetic.
pub fn cauchy_inverse_exact(x: &[BigRational], y: &[BigRational]) -> Result<Vec<Vec<BigRational>>> {
    cauchy_inverse_generic(x, y)
}

/// The Cauchy matrix itself.
pub fn cauchy_matrix(x: &[f64], y: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), y.len(), |i, j| 1.0 / (x[i] + y[j]))
}
