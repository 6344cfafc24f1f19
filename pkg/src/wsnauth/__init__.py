"""Anonymous two-factor smart-card authentication and key exchange for WSNs.

Three parties take part: a user holding a smart card and a password, a
gateway holding two master secrets, and a resource-constrained sensor
that only ever runs symmetric operations.
"""

from .params import SysParams, DEFAULT_PARAMS
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
