//! Planar flat-footed biped walking: hybrid rigid-body dynamics, Bézier
//! virtual-constraint gaits, PD tracking and per-step foot-placement
//! regulation with an online-trained single-layer neural compensator.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod dynamics;
pub mod estimation;
pub mod kinematics;
pub mod lateral;
pub mod linalg;
pub mod model;
pub mod bezier;
pub mod control;
pub mod gait;
pub mod hybrid;
pub mod walker;
