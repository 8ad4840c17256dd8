//! Event-camera star tracking evaluated against the Earth's rotation.
//!
//! A camera held static on the ground sees the sky turn with the Earth, whose
//! orientation IERS publishes to milliarcsecond accuracy. This crate renders
//! event streams for that scene, tracks attitude from events with an
//! SO(3) extended Kalman filter and a batch plate solver, rebuilds
//! ground truth by anchoring a camera-to-Earth transform, and scores the
//! estimates as across/about error.

pub mod astrometry;
pub mod attitude;
pub mod catalog;
pub mod earth;
pub mod evaluate;
pub mod geometry;
pub mod groundtruth;
pub mod simulator;
pub mod timesync;
pub mod tracker;
