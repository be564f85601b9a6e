//! Worst-case impact of stealthy attacks on control systems.
//!
//! The attack problem is a finite-horizon MDP whose adversary maximizes an
//! expected impact subject to a joint chance constraint on visiting the
//! detector's alarm region. Augmenting the state with the alarm flag (or an
//! alarm counter) turns the constraint into a bound on the terminal
//! marginal, so the problem becomes an occupation-measure linear program
//! whose optimal Markov policy on the augmented space lifts to an optimal
//! history-dependent policy on the original one.
//!
//! ```
//! use ccmdp::{models, pipeline};
//!
//! let solved = pipeline::solve_problem1(&models::counterexample(), 0.5, &Default::default()).unwrap();
//! assert!((solved.optimum - 4.0).abs() < 1e-9);
//! ```

pub mod augment;
pub mod detectors;
pub mod error;
pub mod lp;
pub mod mdp;
pub mod models;
pub mod oracle;
pub mod pipeline;
pub mod policy;
pub mod sim;
pub mod verify;

pub use augment::{augment_binary, augment_counting, AugmentedMdp, IndexMap, Mode};
pub use error::{Error, Result};
pub use mdp::{validate_mdp, Mdp, Path, ValidationReport};
pub use policy::{extract_policy, lift_policy, HistoryPolicy, MarkovPolicy};
