//! Prescribed-time leader-following consensus for high-order multi-agent systems.
//!
//! The library simulates networks of perturbed nonlinear agents in normal form
//! that track a leader and reach its state exactly at a user-chosen settling
//! time `t_f`. Three auxiliary control protocols are provided:
//!
//! * a linear protocol that tracks polynomial time-base-generator (TBG)
//!   reference trajectories,
//! * a discontinuous sliding-mode protocol that rejects matched disturbances,
//! * a continuous fixed-time protocol with signed-power surface terms and an
//!   integrated switching action.
//!
//! Modules map onto the pipeline: [`tbg`] synthesizes the reference
//! polynomials, [`topology`] holds the communication graph, [`dynamics`] the
//! agent models, [`protocols`] the control laws, [`engine`] the fixed-step
//! simulator and sweep studies, and [`scenario`] the document format, CSV
//! output and SVG plots.

pub mod dynamics;
pub mod engine;
pub mod error;
pub mod expr;
pub mod plot;
pub mod protocols;
pub mod scenario;
pub mod tbg;
pub mod topology;

pub use error::Error;
