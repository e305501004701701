//! Finite-element simulator of scleral growth and remodeling.
//!
//! A homogenized constrained-mixture shell model of the posterior eye wall:
//! a semi-spherical sector under intraocular pressure whose collagen fiber
//! families grow and remodel toward a homeostatic stress, reproducing the
//! mechanics of posterior staphyloma formation.

pub mod config;
pub mod elements;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod oracle;
pub mod output;
pub mod protocol;
pub mod tensor;
