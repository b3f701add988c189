#![no_std]
extern crate alloc;

pub mod ctpt;
pub mod error;
pub mod evidence;
pub mod mcmc;
pub mod mediation;
pub mod regression;
pub mod simulation;
pub mod special;

pub use error::{Equation, Error, Result};
