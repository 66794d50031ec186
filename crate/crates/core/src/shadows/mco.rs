use rayon::prelude::*;

use super::BatchShadow;
use crate::observables::observable::{cyclic_trace, MultiCopyObservable, Representation};
use crate::qcore::linalg::{kron_all, partial_trace, trace, trace_of_product, CMatrix, MAX_REDUCED_QUBITS};
use crate::{Error, Result};

/// Ordered tuples of `k` distinct indices from `0..m`. With `min_first`,
/// only tuples whose first entry is their smallest one.
fn ordered_tuples(m: usize, k: usize, min_first: bool) -> Vec<Vec<usize>> {
    fn extend(m: usize, k: usize, lower: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for t in lower..m {
            if !prefix.contains(&t) {
                prefix.push(t);
                extend(m, k, lower, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    for first in 0..m {
        let mut prefix = vec![first];
        // rotations of a tuple have equal cyclic trace: keep the one that
        // starts at its minimum
        let lower = if min_first { first + 1 } else { 0 };
        extend(m, k, lower, &mut prefix, &mut out);
    }
    out
}

/// Batch matrices reduced onto the observable's support.
pub(crate) fn reduced_batches(batches: &[BatchShadow], target: &[usize]) -> Result<Vec<CMatrix>> {
    let support = &batches[0].support;
    if batches.iter().any(|b| &b.support != support) {
        return Err(Error::Argument("batches on different supports".into()));
    }
    if target == support.as_slice() {
        return Ok(batches.iter().map(|b| b.matrix.clone()).collect());
    }
    let local: Vec<usize> = target
        .iter()
        .map(|q| {
            support.iter().position(|s| s == q).ok_or_else(|| {
                Error::Argument(format!("observable qubit {q} outside batch support {support:?}"))
            })
        })
        .collect::<Result<_>>()?;
    batches.iter().map(|b| partial_trace(&b.matrix, &local)).collect()
}

/// U-statistic of `Tr(tau^(n) rho^{(x) n})` over `mats`, together with the
/// first-order projections: entry `t` is the mean kernel value over the
/// tuples that contain batch `t`.
pub(crate) fn shift_u_statistic(mats: &[CMatrix], n: usize) -> (f64, Vec<f64>) {
    let m = mats.len();
    let tuples = ordered_tuples(m, n, true);
    let values: Vec<f64> = tuples
        .par_iter()
        .map(|t| {
            let refs: Vec<&CMatrix> = t.iter().map(|&i| &mats[i]).collect();
            cyclic_trace(&refs).re
        })
        .collect();
    // each canonical tuple stands for its n rotations
    let mean = values.iter().sum::<f64>() / tuples.len() as f64;
    let mut proj = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (t, v) in tuples.iter().zip(&values) {
        for &i in t {
            proj[i] += v;
            counts[i] += 1;
        }
    }
    for (p, c) in proj.iter_mut().zip(counts) {
        *p /= c as f64;
    }
    (mean, proj)
}

/// U-statistic estimate of `Tr(O rho^{(x) n})` over ordered tuples of
/// distinct batches.
pub fn estimate_mco(batches: &[BatchShadow], obs: &MultiCopyObservable) -> Result<f64> {
    let n = obs.copies();
    let m = batches.len();
    if m < n || m == 0 {
        return Err(Error::Argument(format!("{m} batches for a {n}-copy observable")));
    }
    if let Representation::Pauli(g) = obs.representation() {
        // Pauli strings may be evaluated directly on the batch support
        let support = &batches[0].support;
        if g.support().iter().any(|q| !support.contains(q)) {
            return Err(Error::Argument("Pauli support outside batch support".into()));
        }
        if g.len() <= support.last().copied().unwrap_or(0) {
            return Err(Error::Dimension("Pauli string shorter than batch support".into()));
        }
        let local = g.restrict(support);
        let mut acc = 0.0;
        for b in batches {
            acc += local.trace_with(&b.matrix)?.re;
        }
        return Ok(acc / m as f64);
    }
    let mats = reduced_batches(batches, obs.support())?;
    match obs.representation() {
        Representation::Pauli(_) => unreachable!(),
        Representation::Projector(psi) => {
            let mut acc = 0.0;
            for b in &mats {
                acc += (psi.adjoint() * b * psi)[(0, 0)].re;
            }
            Ok(acc / m as f64)
        }
        Representation::Shift => Ok(shift_u_statistic(&mats, n).0),
        Representation::Dense(op) => {
            if n == 1 {
                let mut acc = 0.0;
                for b in &mats {
                    acc += trace_of_product(op, b).re;
                }
                return Ok(acc / m as f64);
            }
            if n * obs.support().len() > MAX_REDUCED_QUBITS {
                return Err(Error::Resource(format!(
                    "dense {n}-copy observable on {} qubits exceeds the {MAX_REDUCED_QUBITS}-qubit cap",
                    obs.support().len()
                )));
            }
            let tuples = ordered_tuples(m, n, false);
            let mut total = 0.0;
            for t in &tuples {
                let factors: Vec<CMatrix> = t.iter().map(|&i| mats[i].clone()).collect();
                total += trace(&(op * kron_all(&factors))).re;
            }
            Ok(total / tuples.len() as f64)
        }
    }
}
