//! Exact simulation of Brown-Resnick max-stable random fields at a finite set
//! of sites, with the oracle distributions and estimators used to validate it.
//!
//! The simulator draws Poisson points `V_1 > V_2 > ...` together with anchor
//! sites `T_i` from a discrete measure on the sites, turns every pair into a
//! normalized Gaussian "cluster", and takes coordinatewise suprema. Every
//! cluster is bounded by `V_i - log w_j`, so the loop stops after finitely many
//! clusters without any truncation bias.
//!
//! ```
//! use brsim::{SiteSet, VariogramModel, simulate};
//!
//! let sites = SiteSet::from_points(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
//! let model = VariogramModel::fractional(1.0, 1.0, 1).unwrap();
//! let sample = simulate(&sites, &model, None, 7, 1).unwrap();
//! assert_eq!(sample.values.len(), 3);
//! assert!(sample.num_clusters >= 2);
//! ```

pub mod cli;
pub mod distributions;
pub mod error;
pub mod gauss;
pub mod pointprocess;
pub mod rng;
pub mod simulator;
pub mod sites;
pub mod stats;
pub mod svg;
pub mod validation;
pub mod variogram;

pub use distributions::{
    bivariate_neglog, change_of_measure_check, fdd_cdf_oracle, gumbel_cdf, std_normal_cdf,
    CdfEstimate, MeasureCheck,
};
pub use error::{Error, Result};
pub use gauss::FactorizedGaussian;
pub use pointprocess::{SamplingMeasure, VStream};
pub use rng::RandomStream;
pub use simulator::{
    generate_cluster, simulate, simulate_naive, transform_marginals, ClusterDraw, FieldSample,
    Marginal, SimConfig, Simulator,
};
pub use sites::SiteSet;
pub use stats::{
    cluster_count_stats, extremal_index_estimate, ks_statistic, ks_two_sample, pickands_estimate,
    qq_data, ClusterSummary, EstimateWithError,
};
pub use variogram::VariogramModel;

/// Crate version echoed into every JSON output.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
