"""SC-FDMA implementation of the delay-Doppler modem, with CP handling.

Two equivalent modulation paths exist: the direct Zak path
s_t = (F_N^H kron I_M) d (per-delay inverse DFT across Doppler), and the
SC-FDMA path s_t = F_MN^H Gamma d, which routes through the
frequency-Doppler domain where the filtered modems hook in. Their equality
is the factorization identity checked in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as chan
from .detect import qam_map
from .transforms import (
    DimensionError,
    FrameGeometry,
    add_cp,
    full_dft,
    remove_cp,
    to_delay_doppler,
    to_frequency_doppler,
)


@dataclass(frozen=True)
class DelayDopplerFrame:
    """One frame payload: bits, their QAM symbols d (length M*N), and the geometry.

    d is ordered Doppler-block-major: d[n*M + m] sits at delay m, Doppler n.
    """

    geom: FrameGeometry
    d: np.ndarray
    bits: np.ndarray
    qam_order: int

    @property
    def grid(self) -> np.ndarray:
        """M x N view with grid[m, n] = d[n*M + m]."""
        return self.d.reshape(self.geom.N, self.geom.M).T


def frame_from_bits(geom: FrameGeometry, bits: np.ndarray, qam_order: int) -> DelayDopplerFrame:
    bits = np.asarray(bits, dtype=np.int64)
    k = int(np.log2(qam_order))
    if bits.size != geom.n_sc * k:
        raise DimensionError(f"expected {geom.n_sc * k} bits, got {bits.size}")
    return DelayDopplerFrame(geom=geom, d=qam_map(bits, qam_order), bits=bits,
                             qam_order=qam_order)


def random_frame(geom: FrameGeometry, qam_order: int, rng) -> DelayDopplerFrame:
    bits = rng.integers(0, 2, size=geom.n_sc * int(np.log2(qam_order)))
    return frame_from_bits(geom, bits, qam_order)


def zak_modulate(d, geom: FrameGeometry) -> np.ndarray:
    """Delay-Doppler to delay-time: inverse DFT over the Doppler axis per delay bin."""
    d = np.asarray(d)
    if d.shape[0] != geom.n_sc:
        raise DimensionError(f"expected leading dimension {geom.n_sc}, got {d.shape[0]}")
    rest = d.shape[1:]
    v = d.reshape((geom.N, geom.M) + rest)
    return (np.fft.ifft(v, axis=0) * np.sqrt(geom.N)).reshape(d.shape)


def zak_demodulate(s_t, geom: FrameGeometry) -> np.ndarray:
    """Inverse of :func:`zak_modulate`: forward DFT over the Doppler axis."""
    s_t = np.asarray(s_t)
    if s_t.shape[0] != geom.n_sc:
        raise DimensionError(f"expected leading dimension {geom.n_sc}, got {s_t.shape[0]}")
    rest = s_t.shape[1:]
    v = s_t.reshape((geom.N, geom.M) + rest)
    return (np.fft.fft(v, axis=0) / np.sqrt(geom.N)).reshape(s_t.shape)


@dataclass(frozen=True)
class ModemOutput:
    s_f: np.ndarray   # frequency-Doppler, length M*N
    s_t: np.ndarray   # delay-time, length M*N
    x_t: np.ndarray   # with CP, length M*N + cp_len


def scfdma_modulate(frame: DelayDopplerFrame) -> ModemOutput:
    """Modulate via the frequency-Doppler route and prefix the CP."""
    geom = frame.geom
    s_f = to_frequency_doppler(frame.d, geom)
    s_t = full_dft(s_f, inverse=True)
    return ModemOutput(s_f=s_f, s_t=s_t, x_t=add_cp(s_t, geom.cp_len))


def scfdma_demodulate(r_t, geom: FrameGeometry) -> np.ndarray:
    """CP removal, full DFT, then the inverse frequency-Doppler route.

    Accepts a vector of length M*N + cp_len (or a matrix of such columns).
    """
    kept = remove_cp(r_t, geom.cp_len, geom.n_sc)
    return to_delay_doppler(full_dft(kept), geom)


def effective_dd_channel(h_dt: np.ndarray, geom: FrameGeometry) -> np.ndarray:
    """Delay-Doppler effective channel Gamma^H F_MN H_DT F_MN^H Gamma.

    ``h_dt`` is the CP-stripped delay-time channel (B_cp H A_cp). Columns of
    the result are obtained by pushing basis vectors through the fast kernels.
    """
    h_dt = np.asarray(h_dt)
    if h_dt.shape != (geom.n_sc, geom.n_sc):
        raise DimensionError(f"expected {(geom.n_sc, geom.n_sc)} matrix, got {h_dt.shape}")
    u = full_dft(to_frequency_doppler(np.eye(geom.n_sc, dtype=complex), geom), inverse=True)
    return to_delay_doppler(full_dft(h_dt @ u), geom)


class OtfsModem:
    """Plain CP-OTFS transceiver over the SC-FDMA route."""

    name = "otfs"

    def __init__(self, geom: FrameGeometry):
        self.geom = geom
        self.tx_len = geom.n_sc + geom.cp_len
        self.rx_len = self.tx_len

    def modulate(self, d) -> np.ndarray:
        return add_cp(full_dft(to_frequency_doppler(d, self.geom), inverse=True),
                      self.geom.cp_len)

    def demodulate(self, r) -> np.ndarray:
        return scfdma_demodulate(np.asarray(r)[:self.rx_len], self.geom)

    def effective_channel(self, ch: chan.LtvChannelRealization) -> np.ndarray:
        basis = self.modulate(np.eye(self.geom.n_sc, dtype=complex))
        received = chan.apply_channel(basis, ch, out_len=self.rx_len)
        return self.demodulate(received)
