//! Simulation core for three ultra-low-power edge-robotics accelerators.
//!
//! - [`macmodel`]: bit-exact multiply-accumulate models (digital, time-domain
//!   mixed-signal, hybrid-digital mixed-signal) with calibrated energy models.
//! - [`stochsyn`]: LFSR bit source and drop-connect masks for stochastic synapses.
//! - [`qnav`]: Q-learning exploration robot whose network runs on modeled MACs.
//! - [`swarmlab`]: nonlinear function evaluator, linear processing unit and four
//!   swarm workloads.
//! - [`neuroslam`]: pose-cell attractor SLAM pipeline with experience map.

pub mod macmodel;
pub mod neuroslam;
pub mod qnav;
pub mod stochsyn;
pub mod swarmlab;
