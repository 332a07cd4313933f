"""Power and subcarrier allocation for multi-user OFDMA channels.

Polynomial-time solvers cover the tractable special cases. Exhaustive exact
solvers handle the general case at small sizes, and the reductions module
builds instances from 3-dimensional matching.
"""

from .core import (
    InfeasibleError,
    InvalidInstanceError,
    MinPowerSolution,
    OfdmaInstance,
    OfdmaViolationError,
    PowerAllocation,
    SubcarrierAssignment,
    UtilityKind,
    UtilitySolution,
    is_ofdma,
    rates,
    utility,
    validate_instance,
)
from .waterfill import SingleUserChannel, max_rate_single_user, min_power_single_user
from .assignment import hungarian, min_power_offset, min_power_square
from .transport import max_sum_rate_no_total_budget
from .exact import EnumerationBudgetExceeded, exact_feasibility, exact_max_utility, exact_min_power
from .reductions import ThreeDMInstance, reduce_feasibility, reduce_feasibility_c, reduce_utility

__version__ = "0.1.0"
