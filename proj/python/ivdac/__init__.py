"""Serial DAC control stack and surface-trap simulator."""

from ._ivdac import *  # noqa: F401,F403
from ._ivdac import __version__  # noqa: F401
