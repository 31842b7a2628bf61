"""Delay-Doppler waveform simulation library.

Modems (plain, windowed, per-block filtered, globally filtered), a
time-varying multipath channel, MMSE detection, measurement kernels, and a
deterministic experiment harness with a CLI (``ddwave``).
"""

__version__ = "0.1.0"

from .transforms import FrameGeometry  # noqa: F401
