"""Reference-based canonical correlation analysis (CCA) denoising.

EEG is decomposed jointly with EMG/EOG reference channels; canonical
components whose correlation with the references exceeds a threshold are
projected out of the EEG.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .recording import Recording
from .validation import check_indices, check_recording

MIN_SAMPLES_PER_CHANNEL = 10


@dataclass(frozen=True)
class CcaParams:
    """``ridge`` is relative: the covariance diagonal is loaded with
    ``ridge * mean(diag(C))`` before whitening."""

    rho_threshold: float = 0.4
    ridge: float = 1e-8
    max_reject: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.rho_threshold <= 1.0:
            raise ValueError(f"rho_threshold must lie in [0, 1], got {self.rho_threshold}")
        if not self.ridge >= 0:
            raise ValueError(f"ridge must be non-negative, got {self.ridge}")
        if self.max_reject is not None and self.max_reject < 0:
            raise ValueError(f"max_reject must be non-negative, got {self.max_reject}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class CcaResult:
    """Joint decomposition of an EEG block against a reference block.

    Attributes
    ----------
    correlations : ndarray, shape (K,)
        Canonical correlations, descending, K = min(n_eeg, n_ref).
    eeg_weights : ndarray, shape (n_eeg, K)
        Component time courses are ``eeg_weights.T @ (X - eeg_means)``.
    ref_weights : ndarray, shape (n_ref, K)
    eeg_mixing : ndarray, shape (n_eeg, K)
        Least-squares reconstruction ``X - eeg_means ~ eeg_mixing @ U``.
    eeg_means, ref_means : ndarray
    """

    correlations: np.ndarray
    eeg_weights: np.ndarray
    ref_weights: np.ndarray
    eeg_mixing: np.ndarray
    eeg_means: np.ndarray
    ref_means: np.ndarray

    @property
    def n_components(self) -> int:
        return self.correlations.size

    def eeg_components(self, eeg) -> np.ndarray:
        X = _as_matrix(eeg)
        return self.eeg_weights.T @ (X - self.eeg_means[:, None])

    def ref_components(self, refs) -> np.ndarray:
        Y = _as_matrix(refs)
        return self.ref_weights.T @ (Y - self.ref_means[:, None])


def _as_matrix(block) -> np.ndarray:
    if isinstance(block, Recording):
        return block.data
    X = np.asarray(block, dtype=np.float64)
    return X[np.newaxis, :] if X.ndim == 1 else X


def _inv_sqrt(C: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(C)
    if np.any(w <= 0):
        raise np.linalg.LinAlgError("covariance is not positive definite; increase ridge")
    return (V / np.sqrt(w)) @ V.T


def _regularized(C: np.ndarray, ridge: float) -> np.ndarray:
    return C + ridge * np.mean(np.diag(C)) * np.eye(C.shape[0])


def compute_cca(eeg, refs, params: CcaParams = CcaParams()) -> CcaResult:
    """Canonical correlation analysis of ``eeg`` against ``refs``.

    Both blocks are centered and whitened by their (ridge-loaded) sample
    covariances; the singular value decomposition of the whitened
    cross-covariance gives the canonical correlations and weights. The
    sign of each component is fixed so that its largest-magnitude EEG
    weight is positive.

    Parameters
    ----------
    eeg, refs : Recording or ndarray, shape (channels, samples)

    Raises
    ------
    ValueError
        Sample counts differ or are below 10 x (n_eeg + n_ref), or a
        channel has zero variance.
    """
    X, Y = _as_matrix(eeg), _as_matrix(refs)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"sample counts differ: {X.shape[1]} vs {Y.shape[1]}")
    p, q = X.shape[0], Y.shape[0]
    n = X.shape[1]
    if n < MIN_SAMPLES_PER_CHANNEL * (p + q):
        raise ValueError(
            f"sample count too small: {n} < {MIN_SAMPLES_PER_CHANNEL} x {p + q} channels"
        )
    mx, my = X.mean(axis=1), Y.mean(axis=1)
    Xc, Yc = X - mx[:, None], Y - my[:, None]
    for name, block in (("EEG", Xc), ("reference", Yc)):
        zero = np.flatnonzero(np.all(block == 0, axis=1))
        if zero.size:
            raise ValueError(f"zero-variance {name} channel at row {int(zero[0])}")

    Cxx = _regularized(Xc @ Xc.T / (n - 1), params.ridge)
    Cyy = _regularized(Yc @ Yc.T / (n - 1), params.ridge)
    Cxy = Xc @ Yc.T / (n - 1)
    Kx, Ky = _inv_sqrt(Cxx), _inv_sqrt(Cyy)
    U, s, Vt = np.linalg.svd(Kx @ Cxy @ Ky)
    k = min(p, q)
    W = Kx @ U[:, :k]
    Wy = Ky @ Vt[:k].T
    rho = np.clip(s[:k], 0.0, 1.0)

    lead = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[lead, np.arange(k)])
    signs[signs == 0] = 1.0
    W, Wy = W * signs, Wy * signs

    comps = W.T @ Xc
    # X ~ A @ comps in the least-squares sense
    A = np.linalg.lstsq(comps.T, Xc.T, rcond=None)[0].T
    return CcaResult(rho, W, Wy, A, mx, my)


def select_artifact_components(result: CcaResult, params: CcaParams = CcaParams()) -> list:
    """Indices of components with correlation strictly above ``rho_threshold``,
    strongest first, capped at ``max_reject`` when set."""
    idx = [int(i) for i in np.flatnonzero(result.correlations > params.rho_threshold)]
    if params.max_reject is not None:
        idx = idx[: params.max_reject]
    return idx


def remove_components(eeg, result: CcaResult, reject: Sequence[int]):
    """Project the rejected components out of the EEG.

    Returns the same type as ``eeg`` (Recording or ndarray) with
    ``X - A[:, reject] @ U[reject]``; the channel means are kept.
    """
    reject = check_indices(reject, result.n_components, "component index")
    X = _as_matrix(eeg)
    if X.shape[0] != result.eeg_weights.shape[0]:
        raise ValueError(
            f"EEG has {X.shape[0]} channels, decomposition expects {result.eeg_weights.shape[0]}"
        )
    if reject.size == 0:
        cleaned = X.copy()
    else:
        comps = result.eeg_weights[:, reject].T @ (X - result.eeg_means[:, None])
        cleaned = X - result.eeg_mixing[:, reject] @ comps
    if isinstance(eeg, Recording):
        return eeg.with_data(cleaned)
    return cleaned


class CCADenoiser(TransformerMixin, BaseEstimator):
    """Remove reference-correlated components from the EEG channels.

    ``fit`` decomposes the EEG channels of a recording against its
    reference channels (EMG and EOG by default) and selects components by
    threshold, or takes the explicit ``reject`` list when given.
    ``transform`` returns the full recording with only the EEG rows
    replaced.

    Parameters
    ----------
    rho_threshold, ridge, max_reject
        See :class:`CcaParams`.
    reject : list of int, optional
        Manual component selection overriding the threshold.
    eeg_channels, ref_channels
        Channel selectors for the two blocks.
    window_s : float, optional
        Decompose and clean non-overlapping windows of this length
        independently instead of the whole recording. A trailing window
        too short to decompose is merged into the previous one.

    Attributes
    ----------
    results_ : list of CcaResult
        One per window (a single entry by default).
    rejected_ : list of list of int
    windows_ : list of (start, stop)
    """

    def __init__(self, rho_threshold=0.4, ridge=1e-8, max_reject=None, reject=None,
                 eeg_channels="EEG", ref_channels=("EMG", "EOG"), window_s=None):
        self.rho_threshold = rho_threshold
        self.ridge = ridge
        self.max_reject = max_reject
        self.reject = reject
        self.eeg_channels = eeg_channels
        self.ref_channels = ref_channels
        self.window_s = window_s

    def _params(self) -> CcaParams:
        return CcaParams(self.rho_threshold, self.ridge, self.max_reject)

    def _windows(self, rec: Recording, n_channels: int) -> list:
        if self.window_s is None:
            return [(0, rec.n_samples)]
        step = int(round(self.window_s * rec.rate_hz))
        if step < MIN_SAMPLES_PER_CHANNEL * n_channels:
            raise ValueError(f"window_s={self.window_s} is too short for {n_channels} channels")
        edges = list(range(0, rec.n_samples, step)) + [rec.n_samples]
        if len(edges) > 2 and edges[-1] - edges[-2] < MIN_SAMPLES_PER_CHANNEL * n_channels:
            del edges[-2]
        return list(zip(edges[:-1], edges[1:]))

    def fit(self, X: Recording, y=None):
        params = self._params()
        check_recording(X)
        eeg_idx, ref_idx = X.picks(self.eeg_channels), X.picks(self.ref_channels)
        self.eeg_index_ = eeg_idx
        self.windows_ = self._windows(X, eeg_idx.size + ref_idx.size)
        self.results_, self.rejected_ = [], []
        for start, stop in self.windows_:
            res = compute_cca(X.data[eeg_idx, start:stop], X.data[ref_idx, start:stop], params)
            if self.reject is not None:
                rej = [int(i) for i in self.reject]
                check_indices(rej, res.n_components, "component index")
            else:
                rej = select_artifact_components(res, params)
            self.results_.append(res)
            self.rejected_.append(rej)
        return self

    def transform(self, X: Recording) -> Recording:
        check_is_fitted(self, "results_")
        if X.n_samples != self.windows_[-1][1]:
            raise ValueError("transform expects the recording the denoiser was fitted on")
        data = np.array(X.data)
        idx = self.eeg_index_
        for (start, stop), res, rej in zip(self.windows_, self.results_, self.rejected_):
            data[idx, start:stop] = remove_components(data[idx, start:stop], res, rej)
        return X.with_data(data)
