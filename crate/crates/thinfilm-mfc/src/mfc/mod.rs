//! (under construction)

pub mod fastdiag;
