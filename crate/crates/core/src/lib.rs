pub mod charlib;
pub mod cli;
pub mod data;
pub mod explore;
pub mod model;
pub mod rational;
pub mod sim;

pub use rational::Rational;
