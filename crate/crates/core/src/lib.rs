//! Hessian–Schatten total variation (HTV) toolkit.
//!
//! * [`schatten`]: Schatten norms and spectra of small matrices.
//! * [`radial`]: exact HTV of radial profiles.
//! * [`mesh`], [`delaunay`]: triangulations, audits, Delaunay construction.
//! * [`oriented_grid`]: vertex sets aligned with a cellwise rotation field.
//! * [`cpwl`]: continuous piecewise-linear functions and their HTV.
//! * [`approx`]: adapted interpolation of smooth targets.
//! * [`fit2d`]: HTV-regularised data fitting on a fixed planar mesh.

pub mod approx;
pub mod cli;
pub mod cpwl;
pub mod delaunay;
pub mod error;
pub mod fit2d;
pub mod io;
pub mod lp;
pub mod mesh;
pub mod oriented_grid;
pub mod predicates;
pub mod quadrature;
pub mod radial;
pub mod schatten;

pub use error::{Error, Result};
