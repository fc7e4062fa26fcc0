//! Multilevel k-way hypergraph partitioning.
//!
//! The pipeline coarsens the instance by heavy-pair matching, embeds the
//! coarsest clique graph on the row-sphere with a nonmonotone accelerated
//! proximal-gradient solver, cuts minimum spanning trees of the embedding
//! into balanced blocks, and refines during uncoarsening with k-way FM.
//!
//! The objective everywhere is the connectivity-1 cutsize
//! `sum_e w_e * (lambda_e - 1)` under identical per-block weight caps.

pub mod coarsen;
pub mod hypergraph;
pub mod initial;
pub mod operators;
pub mod optimizer;
pub mod pipeline;
pub mod refine;
pub mod synthetic;

pub use coarsen::{coarsen, CoarseLevel, Hierarchy, Matching};
pub use hypergraph::{
    cutsize, epsilon_from_ubfactor, is_feasible, parse_hmetis, read_partition, write_hmetis,
    write_partition, BalanceSpec, Hypergraph, HypergraphError, Partition,
};
pub use operators::{CliqueGraph, CsrMatrix, ObjectiveOperator};
pub use optimizer::{modapg_solve, ApgParams, FeatureMatrix, SolveTrace};
pub use initial::{CandidateConfig, ClusterRule};
pub use pipeline::{
    improve_partition, partition_hypergraph, ImproveResult, PartitionConfig, PhaseTimings, PipelineError,
    PipelineResult,
};
pub use refine::{FmParams, PairwiseParams};
