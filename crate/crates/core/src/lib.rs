//! Variational dynamics of tangent forms: time-dependent 1-forms
//! `omega = omega0 dt + omega_i dx^i + omegabar_i dy^i` on `R x TM`, whose
//! action on curves is that of a second-order Lagrangian affine in the
//! accelerations.
//!
//! The crate provides, in one chart on `R^m`:
//!
//! - a second-order forward-mode jet kernel and a small expression language
//!   for the component functions ([`jet`], [`expr`]);
//! - the tangent-form data model, actions, pointwise classification and
//!   equivalence witnesses ([`form`]);
//! - the Euler-Lagrange residual `E_i = h_ij w^j + f_i`, the adapted
//!   third-order semi-spray, Lagrange top derivatives and the Ostrogradski
//!   pair ([`variational`]);
//! - Legendre inversion and the Hamiltonian reductions on the two phase
//!   spaces, with their symplectic matrices ([`reduction`]);
//! - the one-dimensional standard-Lagrangian theory, first-order semi-spray
//!   families and the builtin example registry ([`special`]);
//! - fixed-step RK4 integration of the three formulations and the
//!   cross-formulation consistency checks ([`dynamics`]).

pub mod checks;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod form;
pub mod jet;
pub mod linalg;
pub mod poly;
pub mod quad;
pub mod reduction;
pub mod sample;
pub mod special;
pub mod variational;

pub use error::{Error, Result};
pub use expr::{parse, Expr, Var};
pub use form::{
    action, classify, equivalence_check, lagrangian, pointed_decompose, ClassificationReport,
    Curve, EquivalenceReport, JetPoint, TangentForm,
};
pub use jet::{fd_check, Jet2, VarSet};
pub use linalg::Matrix;
pub use reduction::{PhaseStateX, PhaseStateY};
pub use variational::{el_residual, el_split, third_order_semispray, OstrogradskiPair};
