use super::snapshot::rho_weights;
use super::{balanced_batches_from_fn, batches_from_fn, BatchShadow};
use crate::measurement::{Dataset, MeasurementSetting};
use crate::{Error, Result};

/// Combines experiment batches `rho_hat[t]`, companion batches `sigma_hat[t]`
/// taken with the same unitaries, and independent companion batches
/// `sigma_hat'[t]` into `rho_hat[t] - sigma_hat[t] + sigma_hat'[t]`.
pub fn build_companion_batches(
    rho: &[BatchShadow],
    sigma_same: &[BatchShadow],
    sigma_indep: &[BatchShadow],
) -> Result<Vec<BatchShadow>> {
    let m = rho.len();
    if m == 0 || sigma_same.len() != m || sigma_indep.len() != m {
        return Err(Error::Argument(format!(
            "batch counts differ: {} / {} / {}",
            m,
            sigma_same.len(),
            sigma_indep.len()
        )));
    }
    rho.iter()
        .zip(sigma_same)
        .zip(sigma_indep)
        .map(|((r, s), sp)| {
            if r.settings_hash != s.settings_hash {
                return Err(Error::Protocol(format!(
                    "batch {}: companion shadows were not taken with the experiment's unitaries",
                    r.index
                )));
            }
            if r.support != s.support || r.support != sp.support {
                return Err(Error::Argument(format!("batch {}: supports differ", r.index)));
            }
            Ok(BatchShadow {
                support: r.support.clone(),
                matrix: &r.matrix - &s.matrix + &sp.matrix,
                index: r.index,
                members: r.members,
                settings_hash: r.settings_hash.clone(),
            })
        })
        .collect()
}

/// Standard batch shadows of a dataset on `support`.
pub fn standard_batches(ds: &Dataset, support: &[usize], m: usize) -> Result<Vec<BatchShadow>> {
    let settings: Vec<MeasurementSetting> = ds.settings().cloned().collect();
    batches_from_fn(&settings, m, support, |i| Ok(rho_weights(&ds.records[i], support)?.to_matrix()))
}

/// Standard batch shadows allowing `m` not dividing `N_U`.
pub fn balanced_standard_batches(ds: &Dataset, support: &[usize], m: usize) -> Result<Vec<BatchShadow>> {
    let settings: Vec<MeasurementSetting> = ds.settings().cloned().collect();
    balanced_batches_from_fn(&settings, m, support, |i| Ok(rho_weights(&ds.records[i], support)?.to_matrix()))
}

/// Companion batches straight from the three datasets. The independent
/// companion dataset may hold any number `N_U' >= m` of records.
pub fn companion_batches(
    rho: &Dataset,
    sigma_same: &Dataset,
    sigma_indep: &Dataset,
    support: &[usize],
    m: usize,
) -> Result<Vec<BatchShadow>> {
    if rho.settings_hash() != sigma_same.settings_hash() {
        return Err(Error::Protocol(
            "companion dataset does not share the experiment's setting sequence".into(),
        ));
    }
    build_companion_batches(
        &standard_batches(rho, support, m)?,
        &standard_batches(sigma_same, support, m)?,
        &balanced_standard_batches(sigma_indep, support, m)?,
    )
}
