"""Discrete-time separable network evolution: simulation, closed-form
equilibrium results under temporal dyadic independence, and
equilibrium method-of-moments fitting to cross-sectional and egocentric
data, with network-size-adjusted evolving-population simulation."""

__version__ = "0.1.0"

from .dynamics import (ChainConfig, ModelSpec, dissolution_phase,
                       formation_phase, run_chain, run_replicates, step)
from .egmme import (FitConfig, FitReport, dissolution_shortcut,
                    estimate_gradient, estimate_moments, fit, objective)
from .egodata import (EgoSample, conditioning_demo, ego_census,
                      recover_cross_targets, recover_single_wave_transition,
                      recover_transition_stats, resample_egos)
from .equilibrium import (duration_pmf, edges_model_density, ilogit,
                          isolate_gmme, logit, observed_age_pmf,
                          observed_duration_pmf, offset_mean_degree,
                          offset_mean_degree_limit, stationary_network_logpmf,
                          stationary_tie_odds, stationary_tie_prob)
from .netcore import (ActorTable, DyadSpace, NetworkState, PhaseOutcome,
                      compose_step)
from .popsim import (TieHistoryLog, VitalConfig, km_adjusted_mean_duration,
                     run_popsim)
from .statistics import StatisticTerm, TargetSpec, change_stat, eval_stats, eval_targets
from .construct import anneal_network, seed_tie_ages
