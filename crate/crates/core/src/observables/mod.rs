//! Multi-copy observables and the concrete estimators built on batch
//! shadows and per-record contributions.

pub mod cauchy;
pub mod entropy_poly;
pub mod estimators;
pub mod observable;

pub use cauchy::{cauchy_inverse, cauchy_inverse_exact, cauchy_matrix};
pub use entropy_poly::{
    alpha, entropy_error_bound, entropy_kernel, entropy_poly_coeffs, entropy_poly_coeffs_float, least_square_error,
    EntropyPolynomial, MAX_NMAX,
};
pub use estimators::{
    estimate_entropy_poly, estimate_entropy_with, estimate_fidelity, estimate_pauli, estimate_trace_moment,
    fidelity_contributions, pauli_contribution, prior_pauli_value, Budget, EstimateReport,
};
pub use observable::{cyclic_trace, shift_operator, MultiCopyObservable, Representation};
