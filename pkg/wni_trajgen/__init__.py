"""
WNI-guided trajectory generation.

Water-filling expert data, an intent-conditioned diffusion generator with
knowledge-base clipping, batch-constrained offline learning on generated data
and paired evaluation against uniform, oracle and DDPG baselines.
"""

__version__ = "0.1.0"

from .config import RunConfig
from .errors import TrajGenError

__all__ = ["RunConfig", "TrajGenError", "__version__"]
