//! Desk-scale simulator for ground-line common-mode injection against sensor
//! front ends.
//!
//! The chain modelled here is: an attack voltage on a ground wire couples
//! through parasitic capacitance into a parallel signal wire ([`coupling`]),
//! the resulting common-mode current is converted into a differential voltage
//! by circuit asymmetry ([`conversion`]), and the differential disturbance then
//! drives amplifier, filter, comparator and ADC models ([`signal`],
//! [`pipeline`]). [`guard`] models detection with a sense-wound common-mode
//! choke and randomized ADC sampling as a countermeasure.

pub mod conversion;
pub mod coupling;
pub mod error;
pub mod grid;
pub mod guard;
pub mod numeric;
pub mod pipeline;
pub mod signal;

pub use error::{Error, Result};
pub use grid::{FrcRow, FrequencyGrid, Spacing};
pub use num_complex::Complex64;
pub use numeric::ImpedanceElement;
