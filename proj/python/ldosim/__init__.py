"""Behavioral simulator of a dual-range capacitor-less LDO regulator."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

LOOPS = ("loop1", "loop2", "overall")
