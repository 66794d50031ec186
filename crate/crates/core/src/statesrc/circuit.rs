use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qcore::linalg::{
    apply_1q_vec, apply_2q_vec, conjugate_1q, conjugate_2q, outer, qubit_mask, CMatrix, CVector,
    Gate1, Gate2, C64, MAX_STATE_QUBITS, ONE, ZERO,
};
use crate::qcore::DensityState;
use crate::{Error, Result};

/// Largest register simulated as a density matrix (noisy circuits).
pub const MAX_NOISY_QUBITS: usize = 10;

/// Brickwork random circuit: every layer applies Haar single-qubit gates on
/// all qubits, then Haar two-qubit gates on pairs `(i, i+1)` with
/// `i = layer mod 2, layer mod 2 + 2, ...`. Each gate is followed by
/// single-qubit depolarizing noise of strength `p` on the qubits it touched.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub n: usize,
    pub depth: usize,
    pub p: f64,
    pub seed: u64,
}

/// Haar-random `d x d` unitary: QR of a complex Ginibre matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / 2f64.sqrt()
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn gate1(m: &CMatrix) -> Gate1 {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

fn gate2(m: &CMatrix) -> Gate2 {
    let mut g = [[ZERO; 4]; 4];
    for (r, row) in g.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            *x = m[(r, c)];
        }
    }
    g
}

enum Op {
    One(usize, Gate1),
    Two(usize, Gate2),
}

impl CircuitSpec {
    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Argument("circuit needs at least one qubit".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Argument(format!("noise strength must lie in [0, 1], got {}", self.p)));
        }
        let cap = if self.p > 0.0 { MAX_NOISY_QUBITS } else { MAX_STATE_QUBITS };
        if self.n > cap {
            return Err(Error::Resource(format!(
                "circuit on {} qubits exceeds the {cap}-qubit cap for p = {}",
                self.n, self.p
            )));
        }
        Ok(())
    }

    /// Gate sequence; depends on `n`, `depth` and `seed` only.
    fn ops(&self) -> Vec<Op> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut ops = Vec::new();
        for layer in 0..self.depth {
            for q in 0..self.n {
                ops.push(Op::One(q, gate1(&haar_unitary(2, &mut rng))));
            }
            let mut q = layer % 2;
            while q + 1 < self.n {
                ops.push(Op::Two(q, gate2(&haar_unitary(4, &mut rng))));
                q += 2;
            }
        }
        ops
    }

    /// Output of the circuit with the noise switched off.
    pub fn noiseless_state(&self) -> Result<CVector> {
        if self.n == 0 || self.n > MAX_STATE_QUBITS {
            return Err(Error::Resource(format!("circuit on {} qubits is not supported", self.n)));
        }
        let mut v = vec![ZERO; 1 << self.n];
        v[0] = ONE;
        for op in self.ops() {
            match op {
                Op::One(q, g) => apply_1q_vec(&mut v, self.n, q, &g),
                Op::Two(q, g) => apply_2q_vec(&mut v, self.n, q, q + 1, &g),
            }
        }
        Ok(CVector::from_vec(v))
    }

    pub fn state(&self) -> Result<DensityState> {
        self.check()?;
        if self.p == 0.0 {
            return DensityState::from_statevector(self.noiseless_state()?);
        }
        let mut zero = CVector::zeros(1 << self.n);
        zero[0] = ONE;
        let mut rho = outer(&zero);
        for op in self.ops() {
            match op {
                Op::One(q, g) => {
                    conjugate_1q(&mut rho, self.n, q, &g);
                    depolarize(&mut rho, self.n, q, self.p);
                }
                Op::Two(q, g) => {
                    conjugate_2q(&mut rho, self.n, q, q + 1, &g);
                    depolarize(&mut rho, self.n, q, self.p);
                    depolarize(&mut rho, self.n, q + 1, self.p);
                }
            }
        }
        // restore exact hermiticity lost to rounding
        let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        DensityState::from_matrix(rho)
    }
}

/// `rho <- (1-p) rho + p (I/2 (x) Tr_q rho)` on qubit `q`.
pub fn depolarize(rho: &mut CMatrix, n: usize, q: usize, p: f64) {
    let mask = qubit_mask(n, q);
    let d = rho.nrows();
    let keep = C64::new(1.0 - p, 0.0);
    for j0 in 0..d {
        if j0 & mask != 0 {
            continue;
        }
        let j1 = j0 | mask;
        for i0 in 0..d {
            if i0 & mask != 0 {
                continue;
            }
            let i1 = i0 | mask;
            let t = (rho[(i0, j0)] + rho[(i1, j1)]) * (p / 2.0);
            rho[(i0, j0)] = rho[(i0, j0)] * keep + t;
            rho[(i1, j1)] = rho[(i1, j1)] * keep + t;
            rho[(i0, j1)] *= keep;
            rho[(i1, j0)] *= keep;
        }
    }
}
