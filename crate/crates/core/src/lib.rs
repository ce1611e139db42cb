//! Link-level simulation and energy-efficient resource allocation for downlink
//! terahertz MIMO-NOMA small-cell networks.
//!
//! The pipeline runs topology and channel generation ([`channel`]), user
//! clustering by channel correlation ([`clustering`]), sub-connected hybrid
//! precoding with zero forcing ([`precoding`]) and Dinkelbach/ADMM power
//! allocation ([`power`]). [`harness`] wires the stages together and runs the
//! experiment families.

pub mod channel;
pub mod clustering;
pub mod harness;
pub mod power;
pub mod precoding;

/// Complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
