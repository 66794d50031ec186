//! Shadow snapshots (standard, prior, CRM, companion), batching and the
//! multi-copy U-statistic.

mod batch;
mod channel;
mod companion;
mod mco;
mod snapshot;

pub use batch::{balanced_batches_from_fn, batches_from_fn, make_batches, BatchShadow};
pub use channel::{inverse_channel_apply, inverse_channel_diagonal, unrotate_diagonal};
pub use companion::{balanced_standard_batches, build_companion_batches, companion_batches, standard_batches};
pub use mco::estimate_mco;
pub use snapshot::{
    build_crm_snapshot, build_rho_snapshot, build_sigma_snapshot, crm_weights, rho_weights, sigma_weights,
    RotatedShadow, Snapshot, SnapshotKind,
};
pub(crate) use mco::shift_u_statistic;
pub(crate) use snapshot::check_support;

use crate::measurement::{Dataset, MeasurementSetting};
use crate::qcore::PseudoState;
use crate::Result;

/// CRM batch shadows of a dataset; `sigma = None` gives standard batches on
/// `support`.
pub fn crm_batches(ds: &Dataset, sigma: Option<&PseudoState>, support: &[usize], m: usize) -> Result<Vec<BatchShadow>> {
    match sigma {
        None => standard_batches(ds, support, m),
        Some(sigma) => {
            if sigma.support() != support {
                return Err(crate::Error::Argument(format!(
                    "prior support {:?} differs from requested support {support:?}",
                    sigma.support()
                )));
            }
            let settings: Vec<MeasurementSetting> = ds.settings().cloned().collect();
            let mut batches = batches_from_fn(&settings, m, support, |i| {
                Ok(crm_weights(&ds.records[i], sigma)?.to_matrix())
            })?;
            for b in &mut batches {
                b.matrix += sigma.matrix();
            }
            Ok(batches)
        }
    }
}
