//! Trajectory simulation with killing clocks, the stopping time T*, pathwise
//! time averages and the statistics used to test them.

mod averages;
mod engine;
mod exit;
mod record;
mod stats;
mod tstar;

pub use averages::{corteo_experiment, CorteoConfig, CorteoReport};
pub use engine::{
    par_trajectories, run, stream_rng, ChainDynamics, Clocks, Dynamics, LocalTimes, Observer, Segments, Start, StartSampler, Stop,
    Termination, RNG_NAME, THREADS_VAR,
};
pub use exit::{
    exit_law_experiment, local_exit_times_with, sample_local_exit_times, thermalization_experiment, ExitLawReport, SurvivalPoint,
    ThermalizationReport,
};
pub use record::{simulate, simulate_stream, time_average, PathIntegral, TrajectoryRecord};
pub use stats::{bootstrap_tv_se, empirical_tv, exp_cdf, ks_statistic, ks_threshold, mean_sem, proportion, MeanSem};
pub use tstar::{construct_t_star, gheppio_experiment, hitting_alpha, t_star_with, Branch, GheppioReport, TStarOutcome, TvEstimate};
