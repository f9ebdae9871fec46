"""Primal-dual feedback optimization for multi-terminal HVdc grids."""

from .grid import (CableParams, GridTopology, Line, build_conductance_blocks, kron_reduce,
                   linearize_acgfm, full_network_solve, ohmic_loss)
from .optimizer import (OperatingLimits, QuadraticCost, KktPoint, kkt_residual,
                        reference_qp_solve, cost_gradient)
from .controller import ControllerGains, ControllerState, projected_rhs, lyapunov_value, psi
from .comms import TriggerConfig, SampledChannel, trigger_report
from .sim import CaseStudy, ScenarioSchedule, SimConfig, run_case_study
from .scenario import load_scenario, load_topology, bundled

__version__ = "0.1.0"
