//! Verification workbench for Brascamp-Lieb type and correlation
//! inequalities on finite Markov semigroups.

pub mod bl;
pub mod entropy;
pub mod error;
pub mod geo;
pub mod io;
pub mod lp;
pub mod markov;
pub mod quotient;
pub mod rational;
pub mod rng;
pub mod verify;
pub mod zoo;

pub use error::{Error, Result};
pub use markov::{FiniteMarkovModel, StateLabel};
pub use quotient::FactorMap;
pub use rational::Rational;
