//! Simulation kernels for single-shot dispersive readout of a superconducting
//! qubit through a microstrip SQUID amplifier (MSA).
//!
//! The crate is organised by stage of the readout chain:
//!
//! * [`physcore`]: constants, time/frequency series, the rectangular-rule
//!   Fourier component used throughout.
//! * [`cavity_bloch`]: driven resonator dispersively coupled to a decaying
//!   qubit, numerically and in closed form.
//! * [`input_circuit`]: phasor and time-domain model of the MSA input network.
//! * [`squid`]: dc SQUID equations of motion, power gain and operating-point
//!   tuning.
//! * [`johnson_noise`]: quantum Johnson noise sources, Monte-Carlo output PSD
//!   and noise temperature.
//! * [`phase_qubit`]: double-well eigensolver and qubit/resonator coupling
//!   design.
//! * [`readout`]: the end-to-end figure of merit (voltage difference, SNR,
//!   photon scaling).
//!
//! All quantities are SI internally.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod cavity_bloch;
pub mod error;
pub mod input_circuit;
pub mod johnson_noise;
pub mod phase_qubit;
pub mod physcore;
pub mod readout;
pub mod squid;

pub use error::{Error, Result};
