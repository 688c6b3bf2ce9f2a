//! Dynamics with a relative-entropy Lyapunov function.
//!
//! This crate simulates three families of dynamical systems and watches the
//! Kullback-Leibler divergence (here called *relative information*) evolve
//! along their trajectories:
//!
//! * replicator / Lotka-Volterra dynamics driven by a fitness model ([`game`]),
//! * continuous-time Markov processes driven by the master equation ([`markov`]),
//! * mass-action reaction networks driven by the rate equation ([`reaction`]).
//!
//! In each family there is a class of reference points (dominant strategies,
//! steady states, complex-balanced equilibria) for which the relative
//! information decreases monotonically. The [`info`] module holds the
//! divergence and entropy functionals, [`ode`] and [`linalg`] the numerical
//! machinery, and [`output`] the trajectory serializers shared by the CLI and
//! the browser demo.

pub mod game;
pub mod info;
pub mod linalg;
pub mod markov;
pub mod ode;
pub mod output;
pub mod parse;
pub mod reaction;

#[cfg(feature = "cli")]
pub mod cli;
