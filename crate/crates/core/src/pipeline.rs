//! End-to-end multilevel partitioning and improvement of given partitions.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::coarsen::{coarsen, project_partition};
use crate::hypergraph::{is_feasible, BalanceSpec, Hypergraph, HypergraphError, Partition, Weight};
use crate::initial::{generate_candidates, CandidateConfig, InitialError};
use crate::operators::clique_expand;
use crate::refine::{kway_fm, pairwise_improve, pairwise_improve_with, repair_feasibility, FmParams, PairwiseParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hypergraph(#[from] HypergraphError),
    #[error(transparent)]
    Initial(#[from] InitialError),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub k: usize,
    pub epsilon: f64,
    pub candidates: CandidateConfig,
    pub pairwise: PairwiseParams,
    pub fm: FmParams,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Evaluate candidates and pairs on a single thread.
    pub deterministic: bool,
}

impl PartitionConfig {
    pub fn new(k: usize, epsilon: f64) -> Self {
        Self {
            k,
            epsilon,
            candidates: CandidateConfig::default(),
            pairwise: PairwiseParams::default(),
            fm: FmParams::default(),
            threads: None,
            deterministic: false,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
        let threads = if self.deterministic { 1 } else { self.threads.unwrap_or(0) };
        rayon::ThreadPoolBuilder::new().num_threads(threads).build()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimings {
    pub coarsening: Duration,
    pub initial: Duration,
    pub coarse_refinement: Duration,
    pub uncoarsening: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub partition: Partition,
    pub spec: BalanceSpec,
    pub feasible: bool,
    /// Vertex counts per level, original first.
    pub level_sizes: Vec<usize>,
    /// Coarsest-level cutsize of each refined candidate, in generation order.
    pub candidate_cutsizes: Vec<Weight>,
    pub chosen_candidate: Option<usize>,
    pub timings: PhaseTimings,
}

/// Coarsens `h`, builds and refines initial candidates on the coarsest
/// level, keeps the best one, and projects it back with FM at every level.
pub fn partition_hypergraph(h: &Hypergraph, config: &PartitionConfig) -> Result<PipelineResult, PipelineError> {
    let spec = BalanceSpec::for_hypergraph(h, config.k, config.epsilon)?;
    let started = Instant::now();
    if config.k == 1 {
        let partition = Partition::single_block(h, 1)?;
        return Ok(PipelineResult {
            feasible: is_feasible(&partition, &spec),
            partition,
            spec,
            level_sizes: vec![h.num_vertices()],
            candidate_cutsizes: Vec::new(),
            chosen_candidate: None,
            timings: PhaseTimings {
                total: started.elapsed(),
                ..PhaseTimings::default()
            },
        });
    }
    let pool = config.pool()?;
    pool.install(|| run(h, spec, config, started))
}

fn run(h: &Hypergraph, spec: BalanceSpec, config: &PartitionConfig, started: Instant) -> Result<PipelineResult, PipelineError> {
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let hierarchy = coarsen(h, &spec);
    let coarsest = hierarchy.coarsest(h);
    timings.coarsening = t.elapsed();

    let t = Instant::now();
    let candidates = generate_candidates(coarsest, &spec, &config.candidates)?;
    timings.initial = t.elapsed();

    let t = Instant::now();
    let graph = clique_expand(coarsest);
    let refined: Vec<Partition> = candidates
        .into_par_iter()
        .map(|c| {
            let (p, _) = repair_feasibility(coarsest, c.partition, &spec);
            let p = pairwise_improve_with(coarsest, &graph, p, &spec, &config.pairwise);
            kway_fm(coarsest, p, &spec, &config.fm)
        })
        .collect();
    let candidate_cutsizes: Vec<Weight> = refined.iter().map(Partition::cutsize).collect();
    let chosen = (0..refined.len())
        .min_by_key(|&i| (!is_feasible(&refined[i], &spec), refined[i].cutsize(), i))
        .expect("at least one candidate");
    let mut partition = refined.into_iter().nth(chosen).expect("index in range");
    timings.coarse_refinement = t.elapsed();

    let t = Instant::now();
    for i in (0..hierarchy.len()).rev() {
        let fine = if i == 0 { h } else { &hierarchy.levels[i - 1].hypergraph };
        partition = project_partition(fine, &hierarchy.levels[i], &partition);
        if !is_feasible(&partition, &spec) {
            partition = repair_feasibility(fine, partition, &spec).0;
        }
        partition = kway_fm(fine, partition, &spec, &config.fm);
    }
    timings.uncoarsening = t.elapsed();
    timings.total = started.elapsed();

    Ok(PipelineResult {
        feasible: is_feasible(&partition, &spec),
        partition,
        level_sizes: hierarchy.sizes(h),
        spec,
        candidate_cutsizes,
        chosen_candidate: Some(chosen),
        timings,
    })
}

#[derive(Debug, Clone)]
pub struct ImproveResult {
    pub partition: Partition,
    pub input_cutsize: Weight,
    pub input_feasible: bool,
    /// Whether a repair step ran, and whether it succeeded.
    pub repair: Option<bool>,
    pub feasible: bool,
}

impl ImproveResult {
    /// Output over input cutsize; `1.0` when the input cut is zero.
    pub fn ratio(&self) -> f64 {
        if self.input_cutsize == 0 {
            1.0
        } else {
            self.partition.cutsize() as f64 / self.input_cutsize as f64
        }
    }
}

/// Repairs `p` if it violates the caps, then applies pairwise
/// re-optimization and FM on the full hypergraph.
pub fn improve_partition(
    h: &Hypergraph,
    p: Partition,
    spec: &BalanceSpec,
    config: &PartitionConfig,
) -> Result<ImproveResult, PipelineError> {
    let input_cutsize = p.cutsize();
    let input_feasible = is_feasible(&p, spec);
    let pool = config.pool()?;
    let (partition, repair) = pool.install(|| {
        let (p, repair) = if input_feasible {
            (p, None)
        } else {
            let (p, ok) = repair_feasibility(h, p, spec);
            (p, Some(ok))
        };
        let p = pairwise_improve(h, p, spec, &config.pairwise);
        (kway_fm(h, p, spec, &config.fm), repair)
    });
    Ok(ImproveResult {
        feasible: is_feasible(&partition, spec),
        partition,
        input_cutsize,
        input_feasible,
        repair,
    })
}
