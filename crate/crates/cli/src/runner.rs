//! Maps an algorithm name and an instance onto the library solvers.

use bsca_core::applications::anomaly::{run_anomaly_bsca, AnomalyInstance, AnomalyProblem};
use bsca_core::applications::phase_retrieval::{
    run_phase_retrieval, PhaseRetrievalInstance, PhaseRetrievalProblem,
};
use bsca_core::engine::{
    run_bgd, run_bpgd, run_bsca, run_inexact_bsca, run_parallel_sca, BregmanBaselineSpec,
    InexactSpec, SurrogateCatalog,
};
use bsca_core::error::Error;
use bsca_core::io::Instance;
use bsca_core::model::RunTrace;
use bsca_core::surrogates::SurrogateKind;

use crate::options::{Algorithm, Resolved};
use crate::CliError;

fn solver_error(e: Error) -> CliError {
    match e {
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::InvalidPartition(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Runtime(e.to_string()),
    }
}

pub fn run(instance: &Instance, opts: &Resolved) -> Result<RunTrace, CliError> {
    match instance {
        Instance::Pr(inst) => run_pr(inst, opts),
        Instance::Anomaly(inst) => run_anomaly(inst, opts),
    }
}

fn run_pr(inst: &PhaseRetrievalInstance, opts: &Resolved) -> Result<RunTrace, CliError> {
    if opts.algorithm == Algorithm::Bpgd && opts.blocks > 1 {
        return Err(CliError::Usage("bpgd does not support block updates".into()));
    }
    let mut inst = inst.with_blocks(opts.blocks).map_err(solver_error)?;
    if let Some(mu) = opts.mu {
        if !(mu >= 0.0) {
            return Err(CliError::Usage(format!("mu must be nonnegative, got {mu}")));
        }
        inst.mu = mu;
    }
    let config = opts.solver_config();
    let x0 = inst.initial_point(opts.seed);
    let problem = PhaseRetrievalProblem::new(&inst);
    let kind = |default| opts.surrogate.unwrap_or(default);
    let trace = match opts.algorithm {
        Algorithm::Bsca => run_bsca(&problem, &SurrogateCatalog::uniform(kind(SurrogateKind::Hybrid)), &x0, &config),
        Algorithm::InexactBsca => match opts.surrogate {
            None | Some(SurrogateKind::PartialLinearization) => run_phase_retrieval(&inst, &x0, &config),
            Some(k) => run_inexact_bsca(
                &problem,
                &SurrogateCatalog::uniform(k),
                &x0,
                &config,
                &InexactSpec::from_config(&config),
            ),
        },
        Algorithm::ParallelSca => run_parallel_sca(
            &problem,
            &SurrogateCatalog::uniform(kind(SurrogateKind::PartialLinearization)),
            &x0,
            &config,
        ),
        Algorithm::Bgd => run_bgd(&problem, &x0, &config),
        Algorithm::Bpgd => {
            let spec = BregmanBaselineSpec::for_instance(&inst).with_discount(opts.discount);
            run_bpgd(&inst, &spec, &x0, &config)
        }
    };
    trace.map_err(solver_error)
}

fn anomaly_catalog(opts: &Resolved) -> Result<SurrogateCatalog, CliError> {
    match opts.surrogate {
        Some(k) => Ok(SurrogateCatalog::uniform(k)),
        None => SurrogateCatalog::per_block(vec![
            SurrogateKind::BestResponseBlock,
            SurrogateKind::BestResponseBlock,
            SurrogateKind::BestResponseElementwise,
        ])
        .map_err(solver_error),
    }
}

fn run_anomaly(inst: &AnomalyInstance, opts: &Resolved) -> Result<RunTrace, CliError> {
    if opts.algorithm == Algorithm::Bpgd {
        return Err(CliError::Usage("bpgd is only defined for phase retrieval instances".into()));
    }
    if opts.blocks != 1 && opts.blocks != 3 {
        return Err(CliError::Usage("anomaly instances have exactly three blocks (P, Q, S)".into()));
    }
    let mut inst = inst.clone();
    if let Some(mu) = opts.mu {
        inst.mu = mu;
    }
    if let Some(lambda) = opts.lambda {
        inst.lambda = lambda;
    }
    let inst = AnomalyInstance::new(inst.y, inst.d, inst.lambda, inst.mu, inst.rho).map_err(solver_error)?;
    let config = opts.solver_config();
    let start = inst.initial_state(true, opts.seed);
    let problem = AnomalyProblem::new(&inst);
    let x0 = problem.point(&start);
    let trace = match opts.algorithm {
        Algorithm::Bsca if opts.surrogate.is_none() => run_anomaly_bsca(&inst, &start, &config),
        Algorithm::Bsca => run_bsca(&problem, &anomaly_catalog(opts)?, &x0, &config),
        Algorithm::InexactBsca => run_inexact_bsca(
            &problem,
            &anomaly_catalog(opts)?,
            &x0,
            &config,
            &InexactSpec::from_config(&config),
        ),
        Algorithm::ParallelSca => run_parallel_sca(&problem, &anomaly_catalog(opts)?, &x0, &config),
        Algorithm::Bgd => run_bgd(&problem, &x0, &config),
        Algorithm::Bpgd => unreachable!(),
    };
    trace.map_err(solver_error)
}
