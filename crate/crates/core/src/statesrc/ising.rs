use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qcore::linalg::{qubit_mask, CVector, C64, MAX_STATE_QUBITS};
use crate::{Error, Result};

/// Largest chain diagonalized densely; longer chains use Lanczos.
const DENSE_MAX_QUBITS: usize = 8;
const KRYLOV_DIM: usize = 60;
const MAX_RESTARTS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

/// Open critical Ising chain `H = -sum_{i<N} Z_i Z_{i+1} - sum_i X_i + sum_i eps_i Z_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingSpec {
    pub n: usize,
    /// Per-site longitudinal fields, all zero for the unperturbed chain.
    pub eps: Vec<f64>,
}

impl IsingSpec {
    pub fn critical(n: usize) -> Self {
        Self { n, eps: vec![0.0; n] }
    }

    /// Companion chain with `eps_i` drawn uniformly from `[0, max_eps]`.
    pub fn perturbed(n: usize, max_eps: f64, seed: u64) -> Result<Self> {
        if !(0.0..=0.02).contains(&max_eps) {
            return Err(Error::Argument(format!("field offsets must lie in [0, 0.02], got {max_eps}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = (0..n).map(|_| rng.random::<f64>() * max_eps).collect();
        Ok(Self { n, eps })
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Argument("chain needs at least one site".into()));
        }
        if self.n > MAX_STATE_QUBITS {
            return Err(Error::Resource(format!(
                "Ising chain of {} sites exceeds the {MAX_STATE_QUBITS}-qubit cap",
                self.n
            )));
        }
        if self.eps.len() != self.n {
            return Err(Error::Dimension(format!("{} field offsets for {} sites", self.eps.len(), self.n)));
        }
        Ok(())
    }

    /// Diagonal (Z-basis) part of `H` at basis index `k`.
    fn diagonal(&self, k: usize) -> f64 {
        let z = |q: usize| if k & qubit_mask(self.n, q) == 0 { 1.0 } else { -1.0 };
        let mut e = 0.0;
        for q in 0..self.n {
            e += self.eps[q] * z(q);
            if q + 1 < self.n {
                e -= z(q) * z(q + 1);
            }
        }
        e
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = self.diagonal(k) * v[k];
            for q in 0..n {
                acc -= v[k ^ qubit_mask(n, q)];
            }
            *o = acc;
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let d = 1usize << self.n;
        let mut h = DMatrix::zeros(d, d);
        for k in 0..d {
            h[(k, k)] = self.diagonal(k);
            for q in 0..self.n {
                h[(k ^ qubit_mask(self.n, q), k)] -= 1.0;
            }
        }
        h
    }

    pub fn energy(&self, v: &[f64]) -> f64 {
        let mut hv = vec![0.0; v.len()];
        self.apply(v, &mut hv);
        let num: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
        num / v.iter().map(|a| a * a).sum::<f64>()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

/// Lowest eigenpair by restarted Lanczos with full reorthogonalization.
fn lanczos_ground(spec: &IsingSpec) -> Result<(f64, Vec<f64>)> {
    let d = 1usize << spec.n;
    // the ground state has positive amplitudes, so the uniform vector
    // overlaps with it
    let mut start = vec![1.0; d];
    normalize(&mut start);
    let mut hv = vec![0.0; d];
    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..KRYLOV_DIM.min(d) {
            spec.apply(&basis[j], &mut hv);
            let a = dot(&basis[j], &hv);
            alpha.push(a);
            let mut w = hv.clone();
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            // second pass keeps the basis orthogonal to working precision
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            let norm = dot(&w, &w).sqrt();
            if norm < 1e-12 || j + 1 == KRYLOV_DIM.min(d) {
                break;
            }
            beta.push(norm);
            w.iter_mut().for_each(|x| *x /= norm);
            basis.push(w);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let low = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[low];
        let y = eig.eigenvectors.column(low);
        let mut x = vec![0.0; d];
        for (coef, b) in y.iter().zip(&basis) {
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += coef * bi);
        }
        normalize(&mut x);
        spec.apply(&x, &mut hv);
        let residual = hv.iter().zip(&x).map(|(h, xi)| (h - theta * xi).powi(2)).sum::<f64>().sqrt();
        if residual < RESIDUAL_TOL {
            return Ok((theta, x));
        }
        start = x;
    }
    Err(Error::Singular(format!("Lanczos did not converge for the {}-site chain", spec.n)))
}

fn dense_ground(spec: &IsingSpec) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(spec.dense());
    let low = eig.eigenvalues.imin();
    (eig.eigenvalues[low], eig.eigenvectors.column(low).iter().cloned().collect())
}

/// Ground energy and state with the sign fixed so the largest-magnitude
/// amplitude is positive.
pub fn ising_ground(spec: &IsingSpec) -> Result<(f64, CVector)> {
    spec.check()?;
    let (e, mut v) = if spec.n <= DENSE_MAX_QUBITS {
        dense_ground(spec)
    } else {
        lanczos_ground(spec)?
    };
    normalize(&mut v);
    let pivot = v.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok((e, DVector::from_iterator(v.len(), v.iter().map(|&x| C64::new(x, 0.0)))))
}

pub fn ising_ground_state(spec: &IsingSpec) -> Result<CVector> {
    Ok(ising_ground(spec)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{exact_entropy, DensityState};

    #[test]
    fn two_sites() {
        let (e, psi) = ising_ground(&IsingSpec::critical(2)).unwrap();
        assert!((e + 5f64.sqrt()).abs() < 1e-10);
        // swap symmetry: amplitudes of |01> and |10> coincide
        assert!((psi[1] - psi[2]).norm() < 1e-10);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        for spec in [IsingSpec::critical(9), IsingSpec::perturbed(10, 0.02, 3).unwrap()] {
            let dense = SymmetricEigen::new(spec.dense()).eigenvalues.min();
            let (e, v) = lanczos_ground(&spec).unwrap();
            assert!((e - dense).abs() < 1e-9);
            assert!((spec.energy(&v) - dense).abs() < 1e-8);
        }
    }

    #[test]
    fn rayleigh_quotient_is_ground_energy() {
        let spec = IsingSpec::critical(12);
        let (e, psi) = ising_ground(&spec).unwrap();
        let v: Vec<f64> = psi.iter().map(|c| c.re).collect();
        assert!((spec.energy(&v) - e).abs() < 1e-8);
    }

    #[test]
    fn half_chain_entropy_grows() {
        let half = |n: usize| {
            let psi = ising_ground_state(&IsingSpec::critical(n)).unwrap();
            let state = DensityState::from_statevector(psi).unwrap();
            exact_entropy(&state.reduced(&(0..n / 2).collect::<Vec<_>>()).unwrap()).unwrap()
        };
        let (s8, s12) = (half(8), half(12));
        assert!(s8 > 0.0 && s12 > s8);
    }

    #[test]
    fn zero_perturbation_is_the_critical_chain() {
        let a = ising_ground_state(&IsingSpec::critical(6)).unwrap();
        let b = ising_ground_state(&IsingSpec::perturbed(6, 0.0, 11).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn caps_and_ranges() {
        assert!(matches!(ising_ground_state(&IsingSpec::critical(17)), Err(Error::Resource(_))));
        assert!(IsingSpec::perturbed(4, 0.05, 1).is_err());
        let p = IsingSpec::perturbed(30, 0.02, 1).unwrap();
        assert!(p.eps.iter().all(|e| (0.0..=0.02).contains(e)));
    }
}
