//! Nonreciprocal Landau-Zener tunneling driven by Ornstein-Uhlenbeck colored
//! noise, solved four ways: a stochastic-trajectory ensemble, the
//! Wiener-Hermite hierarchy, its `n = 0` closure and closed-form limits.

pub mod analytic;
pub mod cli;
pub mod dynamics;
pub mod hierarchy;
pub mod model;
pub mod noise;
pub mod spectrum;
