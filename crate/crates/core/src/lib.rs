//! Replica deployment planning for geo-replicated state machine replication.
//!
//! Given round-trip times between candidate sites, the crate enumerates every
//! way of placing `n` replicas (and choosing a leader), estimates the latency
//! clients would observe for each placement by tracing the replication
//! protocol's message pattern, and ranks the placements. Rankings can be
//! compared against measured ones by rank RMSE and rank correlation.
//!
//! ```
//! use std::num::NonZeroUsize;
//! use replica_rank::{rank, ClientSet, DeploymentSpace, Mode, ProtocolParams, RttMatrix, SiteCatalog};
//!
//! let catalog = SiteCatalog::from_names(["Tokyo", "Seoul", "Sydney", "Oregon", "Ireland"]).unwrap();
//! let matrix = RttMatrix::new(vec![
//!     vec![0.0, 34.0, 105.0, 97.0, 212.0],
//!     vec![34.0, 0.0, 133.0, 125.0, 232.0],
//!     vec![105.0, 133.0, 0.0, 139.0, 255.0],
//!     vec![97.0, 125.0, 139.0, 0.0, 130.0],
//!     vec![212.0, 232.0, 255.0, 130.0, 0.0],
//! ]).unwrap();
//! let clients = ClientSet::parse("Tokyo:2,Ireland", &catalog).unwrap();
//! let space = DeploymentSpace::all_sites(&catalog, 4, Mode::LeaderBased).unwrap();
//! let ranking = rank(&space, &clients, &matrix, &ProtocolParams::bft(4, 1), NonZeroUsize::MIN).unwrap();
//! assert_eq!(ranking.len(), 20);
//! println!("best: {}", ranking.best().unwrap().deployment.label(&catalog));
//! ```

pub mod enumerate;
pub mod estimator;
pub mod model;
pub mod oracle;
pub mod ranking;
pub mod rtt;

pub use enumerate::{binomial, DeploymentSpace, Deployments, Mode};
pub use estimator::{estimate, estimate_detailed, estimate_simple, kth_smallest, EstimateError, PhaseTimings};
pub use model::{
    validate_inputs, AcceptTiming, ClientSet, Deployment, EstimatorVariant, FaultModel, Issue,
    ProtocolParams, RttMatrix, Site, SiteCatalog, SiteId, ValidationError,
};
pub use oracle::{simulate, SimulationReport};
pub use ranking::{compare, load_reference, rank, Ranking, RankingComparison, RankingEntry, RankingError};
pub use rtt::{aggregate, load_matrix, parse_samples, store_matrix, Aggregation, IngestError, RttSample};
