"""Average artifact subtraction (AAS) building blocks.

A repeating artifact is cut into fixed-length segments starting at known
sample positions. Each segment's template is the average of the
neighbouring segments inside a centered window, truncated at the edges of
the segment list. Templates are written into a "template stream" with the
same length as the input; the corrected signal is ``x - stream``.
"""

import numpy as np


def extract_segments(x: np.ndarray, starts: np.ndarray, length: int) -> np.ndarray:
    """Segments ``x[s:s+length]`` stacked row-wise, NaN where out of range."""
    idx = starts[:, None] + np.arange(length)[None, :]
    valid = (idx >= 0) & (idx < x.shape[-1])
    seg = x[np.clip(idx, 0, x.shape[-1] - 1)]
    return np.where(valid, seg, np.nan)


def sliding_templates(segments: np.ndarray, window: int, demean: bool = True,
                      method: str = "mean") -> np.ndarray:
    """Per-segment templates from a centered window of neighbouring segments.

    Parameters
    ----------
    segments : ndarray, shape (n_segments, length)
        May contain NaN for samples outside the recording; those samples do
        not contribute to any average.
    window : int
        Odd window size in segments. Near the ends of the list the window
        is truncated one-sided instead of shifted.
    demean : bool
        Remove each segment's own mean before averaging.
    method : {"mean", "median"}

    Returns
    -------
    ndarray, shape (n_segments, length)
        Template samples; 0 where no segment in the window had data.
    """
    seg = np.array(segments, dtype=np.float64)
    n_seg = seg.shape[0]
    if demean:
        with np.errstate(invalid="ignore"):
            counts = np.sum(~np.isnan(seg), axis=1, keepdims=True)
            means = np.nansum(seg, axis=1, keepdims=True) / np.maximum(counts, 1)
        seg = seg - means
    half = window // 2
    lo = np.maximum(np.arange(n_seg) - half, 0)
    hi = np.minimum(np.arange(n_seg) + half + 1, n_seg)

    if method == "mean":
        present = ~np.isnan(seg)
        filled = np.where(present, seg, 0.0)
        csum = np.vstack([np.zeros((1, seg.shape[1])), np.cumsum(filled, axis=0)])
        ccnt = np.vstack([np.zeros((1, seg.shape[1])), np.cumsum(present, axis=0)])
        total = csum[hi] - csum[lo]
        count = ccnt[hi] - ccnt[lo]
        out = np.zeros_like(total)
        np.divide(total, count, out=out, where=count > 0)
        return out
    if method == "median":
        out = np.zeros_like(seg)
        for r in range(n_seg):
            block = seg[lo[r]:hi[r]]
            ok = ~np.all(np.isnan(block), axis=0)
            out[r, ok] = np.nanmedian(block[:, ok], axis=0)
        return out
    raise ValueError(f"unknown template method {method!r}")


def segment_extents(starts: np.ndarray, length: int, n_samples: int) -> np.ndarray:
    """Number of samples each segment may write.

    A segment is cut short where the next segment starts and at the end of
    the recording, so overlapping segments never subtract twice.
    """
    nxt = np.append(starts[1:], np.iinfo(np.int64).max)
    return np.clip(np.minimum(np.minimum(nxt - starts, length), n_samples - starts), 0, length)


def template_stream(templates: np.ndarray, starts: np.ndarray, n_samples: int) -> np.ndarray:
    """Scatter per-segment templates into a length-``n_samples`` stream."""
    length = templates.shape[1]
    extent = segment_extents(starts, length, n_samples)
    idx = starts[:, None] + np.arange(length)[None, :]
    write = (np.arange(length)[None, :] < extent[:, None]) & (idx >= 0)
    stream = np.zeros(n_samples)
    stream[idx[write]] = templates[write]
    return stream


def best_shifts(x: np.ndarray, starts: np.ndarray, length: int, max_shift: int,
                reference: np.ndarray) -> np.ndarray:
    """Integer shift in ``[-max_shift, max_shift]`` per segment maximizing the
    normalized correlation of the shifted segment with ``reference``."""
    if max_shift <= 0:
        return np.zeros(starts.size, dtype=np.int64)
    ref = reference - reference.mean()
    shifts = np.arange(-max_shift, max_shift + 1)
    scores = np.full((shifts.size, starts.size), -np.inf)
    for k, d in enumerate(shifts):
        seg = extract_segments(x, starts + d, length)
        full = ~np.any(np.isnan(seg), axis=1)
        if not np.any(full):
            continue
        s = seg[full] - seg[full].mean(axis=1, keepdims=True)
        norm = np.linalg.norm(s, axis=1)
        sc = np.full(s.shape[0], -np.inf)
        ok = norm > 0
        sc[ok] = (s[ok] @ ref) / norm[ok]
        scores[k, full] = sc
    best = shifts[np.argmax(scores, axis=0)]
    # ties and unusable segments keep their detected position
    zero_score = scores[max_shift]
    best[np.max(scores, axis=0) <= zero_score] = 0
    return best.astype(np.int64)
