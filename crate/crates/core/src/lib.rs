//! Supervised profile clustering of categorical exposures with an ordinal
//! outcome.
//!
//! An overfitted mixture of global exposure patterns is fitted jointly with
//! an ordinal probit regression of the outcome on subpopulation and cluster
//! membership. In the robust variant each (subject, variable) pair may
//! instead follow a subpopulation-specific local pattern, with the choice
//! governed by per-subpopulation weights ν. Setting every ν to one gives the
//! plain supervised latent class model.
//!
//! Typical use:
//!
//! ```no_run
//! use osrpc::{fit, analyze, ChainRng, Hyperparameters, SamplerConfig};
//! use osrpc::simulate::{simulate_replicate, SimulationConfig};
//!
//! let (data, _truth) = simulate_replicate(&SimulationConfig::default(), 0).unwrap();
//! let config = SamplerConfig::default();
//! let fitted = fit(&data, &config, &Hyperparameters::default(), ChainRng::new(1, 0, 0)).unwrap();
//! let (_relabeled, summary) = analyze(&fitted.trace, &data, fitted.k_active).unwrap();
//! println!("K = {}, DIC = {:.1}", summary.k, summary.dic);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod data;
pub mod error;
pub mod gibbs;
pub mod likelihood;
pub mod model;
pub mod postprocess;
pub mod probit;
pub mod sampler;
pub mod simulate;
pub mod stats;
pub mod study;
pub mod trace;

pub use data::{build_design_matrix, load_csv, CategoricalDataset, CsvSchema, DesignMatrix};
pub use error::{Error, Result};
pub use model::{Hyperparameters, ModelState, Mode, SamplerConfig};
pub use postprocess::{analyze, evaluate, MetricBundle, PosteriorSummary};
pub use sampler::{fit, run_adaptive, run_fixed, Fit, FixedSampler};
pub use stats::ChainRng;
pub use trace::{ChainTrace, Draw};
