"""Outlier-robust information fusion for networked state estimation.

The package combines a cubature information filter with Beta-Bernoulli
outlier indicators inferred by mean-field sweeps, in one centralized and
two consensus-decentralized variants, plus clairvoyant baselines, a
coordinated-turn tracking scenario and a Monte Carlo harness. See the
``rcif`` command line tool for running experiments.
"""

from . import kernels
from .config import ScenarioConfig, load_scenario, parse_scenario
from .consensus import (CommCounter, ConsensusWeights, NetworkGraph,
                        compute_delta, consensus_rounds, metropolis_weights)
from .errors import (ConfigError, DecompositionError, DimensionError,
                     GeometryError, RcifError, TopologyError)
from .filters import (ALGORITHMS, CentralFilterState, FilterParams,
                      FilterRun, NodeFilterState, ccif_t_step, crcif_step,
                      dcif_t_step, drcif1_step, drcif2_step, plan_consensus,
                      run_filter)
from .gaussinfo import (GaussianBelief, InformationPair, MeasurementModel,
                        correct, from_information, generate_cubature_points,
                        info_contribution, linearize_measurement, predict,
                        to_information)
from .metrics import (MonteCarloResult, RunResult, rmse_over_runs,
                      run_monte_carlo, run_sweep, trmse)
from .outliers import (IndicatorState, digamma, expected_discrepancy,
                       indicator_mean, update_beta, update_indicator)
from .scenario import (Episode, SensorNetwork, SensorSpec, build_network,
                       ct_transition, generate_episode, load_episode,
                       process_noise_cov, save_episode)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "CentralFilterState", "CommCounter", "ConfigError",
    "ConsensusWeights", "DecompositionError", "DimensionError", "Episode",
    "FilterParams", "FilterRun", "GaussianBelief", "GeometryError",
    "IndicatorState", "InformationPair", "MeasurementModel",
    "MonteCarloResult", "NetworkGraph", "NodeFilterState", "RcifError",
    "RunResult", "ScenarioConfig", "SensorNetwork", "SensorSpec",
    "TopologyError", "build_network", "ccif_t_step", "compute_delta",
    "consensus_rounds", "correct", "crcif_step", "ct_transition",
    "dcif_t_step", "digamma", "drcif1_step", "drcif2_step",
    "expected_discrepancy", "from_information", "generate_cubature_points",
    "generate_episode", "indicator_mean", "info_contribution", "kernels",
    "linearize_measurement", "load_episode", "load_scenario",
    "metropolis_weights", "parse_scenario", "plan_consensus", "predict",
    "process_noise_cov", "rmse_over_runs", "run_filter", "run_monte_carlo",
    "run_sweep", "save_episode", "to_information", "trmse",
    "update_beta", "update_indicator",
]
