//! The Ehrhart engine: exact identities, remainders, regularized constants
//! and asymptotic expansions.

pub mod constant;
pub mod exact;
pub mod expand;
pub mod remainder;

pub use constant::{
    constant_direct, constant_limit, constant_tail, gauged_scan, independence_suite, ConstantEstimate,
    DirectOptions, IndependenceReport, LimitOptions, Method, RemainderTable, Sample, TailOptions, TailPart,
};
pub use expand::{expand, AsymptoticExpansion, ExpandOptions, LadderTerm, Residual};
pub use exact::{ehrhart_fit, kp_verify, remainder_exact, EhrhartFit, KpReport, KpRow};
pub use remainder::{remainder, RemainderParts, RemainderValue};
