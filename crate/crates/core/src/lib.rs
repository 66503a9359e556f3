//! Pucci extremal operators on the Heisenberg group Hⁿ.
//!
//! The crate covers the exact group calculus ([`group`]), the Pucci operators
//! ([`pucci`]), radial calculus ([`radial`]), explicit radial solutions
//! ([`fundamental`]), barrier constructions ([`barriers`]), a grid solver for the
//! Dirichlet problem ([`solver`]) and numerical checks of the Hadamard, Liouville and
//! Harnack properties ([`qualitative`]).

// `!(x > 0.0)` rejects NaN as well, which is the intent throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barriers;
pub mod domain;
pub mod error;
pub mod exec;
pub mod fundamental;
pub mod group;
pub mod linalg;
pub mod pucci;
pub mod qualitative;
pub mod radial;
pub mod sampling;
pub mod solver;

pub use barriers::{
    annulus_inner_barrier, annulus_outer_barrier, characteristic_ratio, envelope, exterior_ball_barrier,
    global_supersolution, glue_barrier, noncharacteristic_local_barrier, supersolution_residual, ApproachPath,
    BarrierFunction, BarrierKind, Envelope, FirstOrderBound, RatioProfile, Side, Weight,
};
pub use domain::{DomainKind, DomainSpec, ExteriorBall};
pub use error::{Error, Result};
pub use exec::Execution;
pub use fundamental::{exponents, verify_residual, Exponents, Family, FundamentalSolution};
pub use group::{
    dilate, flow_fd_derivatives, flow_step, gauge_gradient, gauge_hessian, gauge_norm, group_compose, h_distance,
    heisenberg_hessian, horizontal_gradient, sigma_matrix, GroupPoint, HorizontalFrame, SecondOrderData,
};
pub use linalg::{eigen_sym, eigen_sym_checked, Spectrum, SymmetricMatrix};
pub use pucci::{
    check_degenerate_ellipticity, pucci_heisenberg, pucci_minus, pucci_plus, Ellipticity, OperatorKind, OperatorSpec,
    PucciSign,
};
pub use qualitative::{
    dual_max_check, grid_min_profile, hadamard_check, harnack_measure_estimate, harnack_monotonicity,
    liouville_flatness_probe, liouville_witness, min_on_ball_profile, BallSampling, HadamardCase, MinProfile,
};
pub use radial::{
    pucci_radial, radial_eigenvectors, radial_hessian, radial_spectrum, MonotonicityTag, RadialBasis, RadialProfile,
};
pub use solver::{
    comparison_check, perron_solve, perron_solve_detailed, BoundaryMode, Grid, GridFunction, NodeKind, SolveConfig,
    SolveReport,
};
