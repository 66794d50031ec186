use rayon::prelude::*;

use super::Snapshot;
use crate::measurement::{settings_hash, MeasurementSetting};
use crate::qcore::linalg::{CMatrix, C64};
use crate::{Error, Result};

/// Mean of a contiguous, disjoint group of `N_U / m` snapshots.
#[derive(Clone, Debug)]
pub struct BatchShadow {
    pub support: Vec<usize>,
    pub matrix: CMatrix,
    /// 1-based batch index.
    pub index: usize,
    pub members: usize,
    /// Hash of the member settings, in order.
    pub settings_hash: String,
}

fn batch_size(nu: usize, m: usize) -> Result<usize> {
    if m == 0 {
        return Err(Error::Argument("number of batches must be >= 1".into()));
    }
    if nu == 0 || nu % m != 0 {
        return Err(Error::Argument(format!(
            "{m} batches do not evenly divide {nu} snapshots"
        )));
    }
    Ok(nu / m)
}

/// Batch `t` averages snapshots `(t-1) N_U/m .. t N_U/m`.
pub fn make_batches(snapshots: &[Snapshot], m: usize) -> Result<Vec<BatchShadow>> {
    let size = batch_size(snapshots.len(), m)?;
    let support = snapshots[0].support.clone();
    if snapshots.iter().any(|s| s.support != support) {
        return Err(Error::Argument("snapshots on different supports".into()));
    }
    Ok(snapshots
        .chunks(size)
        .enumerate()
        .map(|(t, group)| {
            let mut acc = group[0].matrix.clone();
            for s in &group[1..] {
                acc += &s.matrix;
            }
            BatchShadow {
                support: support.clone(),
                matrix: acc / C64::new(size as f64, 0.0),
                index: t + 1,
                members: size,
                settings_hash: settings_hash(group.iter().map(|s| &s.setting)),
            }
        })
        .collect())
}

/// Contiguous ranges of `nu` members split into `m` groups whose sizes
/// differ by at most one, larger groups first.
fn balanced_ranges(nu: usize, m: usize) -> Result<Vec<std::ops::Range<usize>>> {
    if m == 0 || nu < m {
        return Err(Error::Argument(format!("cannot split {nu} snapshots into {m} non-empty batches")));
    }
    let (base, extra) = (nu / m, nu % m);
    let mut start = 0;
    Ok((0..m)
        .map(|t| {
            let len = base + usize::from(t < extra);
            start += len;
            start - len..start
        })
        .collect())
}

/// Streaming variant of [`make_batches`]: `snapshot(i)` yields the matrix
/// of member `i` (0-based) and is called once per member. Members are
/// summed in index order, so the result does not depend on threading.
pub fn batches_from_fn<F>(
    settings: &[MeasurementSetting],
    m: usize,
    support: &[usize],
    snapshot: F,
) -> Result<Vec<BatchShadow>>
where
    F: Fn(usize) -> Result<CMatrix> + Sync,
{
    batch_size(settings.len(), m)?;
    ranged_batches(settings, balanced_ranges(settings.len(), m)?, support, snapshot)
}

/// Like [`batches_from_fn`] but accepts `N_U` not divisible by `m`; batch
/// sizes then differ by one. Each batch stays an unbiased shadow, which is
/// all the independent companion batches need.
pub fn balanced_batches_from_fn<F>(
    settings: &[MeasurementSetting],
    m: usize,
    support: &[usize],
    snapshot: F,
) -> Result<Vec<BatchShadow>>
where
    F: Fn(usize) -> Result<CMatrix> + Sync,
{
    ranged_batches(settings, balanced_ranges(settings.len(), m)?, support, snapshot)
}

fn ranged_batches<F>(
    settings: &[MeasurementSetting],
    ranges: Vec<std::ops::Range<usize>>,
    support: &[usize],
    snapshot: F,
) -> Result<Vec<BatchShadow>>
where
    F: Fn(usize) -> Result<CMatrix> + Sync,
{
    ranges
        .into_par_iter()
        .enumerate()
        .map(|(t, range)| {
            let size = range.len();
            let mut acc = snapshot(range.start)?;
            for i in range.start + 1..range.end {
                acc += snapshot(i)?;
            }
            Ok(BatchShadow {
                support: support.to_vec(),
                matrix: acc / C64::new(size as f64, 0.0),
                index: t + 1,
                members: size,
                settings_hash: settings_hash(settings[range].iter()),
            })
        })
        .collect()
}
