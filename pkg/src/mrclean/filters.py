"""Zero-phase filtering primitives."""

import numpy as np
from scipy import signal

from .recording import Recording

LOWPASS_ORDER = 4


def lowpass_sos(cutoff_hz: float, rate_hz: float, order: int = LOWPASS_ORDER) -> np.ndarray:
    nyquist = rate_hz / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise ValueError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({nyquist} Hz)"
        )
    return signal.butter(order, cutoff_hz, btype="low", fs=rate_hz, output="sos")


def lowpass_array(x, cutoff_hz: float, rate_hz: float, order: int = LOWPASS_ORDER) -> np.ndarray:
    """Forward-backward Butterworth low-pass along the last axis.

    Edges are handled by even (mirror) extension of ``3 * order`` samples,
    shortened for very short inputs.
    """
    x = np.asarray(x, dtype=np.float64)
    sos = lowpass_sos(cutoff_hz, rate_hz, order)
    padlen = min(3 * order, x.shape[-1] - 1)
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="even", padlen=padlen)


def lowpass(rec: Recording, cutoff_hz: float, channel_selector=None) -> Recording:
    """Zero-phase order-4 low-pass of the selected channels.

    Parameters
    ----------
    rec : Recording
    cutoff_hz : float
        -3 dB point of the single-pass Butterworth response; must be below
        Nyquist. The forward-backward pass squares the magnitude response.
    channel_selector : optional
        Anything accepted by :func:`select_channels`; default all channels.
        Unselected channels are copied through unchanged.
    """
    picks = rec.picks(channel_selector)
    data = np.array(rec.data)
    data[picks] = lowpass_array(rec.data[picks], cutoff_hz, rec.rate_hz)
    return rec.with_data(data)
