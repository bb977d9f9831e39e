"""Audit randomized mechanisms for risk-averse incentive compatibility and
apply the payment transform that makes truthful payoffs deterministic."""

from . import _kernels
from .audit import (AuditReport, TypeSpace, Witness, audit_apx, audit_bic, audit_risk_averse,
                    audit_tie, recheck_witness, verify_transform_claims)
from .core import (EXACT, Enumerable, Exact, Instance, Mechanism, MonteCarlo, Realization,
                   Streamed, expected_payoff, payoff_samples, run)
from .errors import (ConvergenceError, DomainError, InputError, InstanceError, RiskAuditError,
                     UnsupportedMethodError)
from .instance_io import load_fixture, parse_instance, serialize_instance
from .mechanisms import (CoverageAuction, LotteryMenu, coverage_externality_payment,
                         make_coverage_auction, make_lottery, make_second_price)
from .transform import (PayoffTable, TransformedMechanism, estimated_payoff_table,
                        interim_payoff, transform, transform_bayesian)
from .utility import (CARA, Identity, LogShifted, PiecewiseLinear, certify_shape,
                      default_battery, eval_utility)
from .valuations import CoverageValuation, SingleItemValuation, expected_value_product, value
from .welfare import (OptimizerParams, expected_welfare, maximize_expected_welfare,
                      project_to_polytope, welfare_gradient)

__version__ = "0.1.0"

__all__ = sorted(name for name, obj in globals().items()
                 if not name.startswith("_") and not isinstance(obj, type(_kernels)))
