"""Carbon-aware permutation flow shop scheduling with a memetic algorithm
whose parameters can be set statically, tuned, or controlled by a PPO policy."""

from ._carbondac import *  # noqa: F401,F403
from ._carbondac import CarbondacError, __doc__  # noqa: F401
