"""Per-pixel background models: reference frame differencing and an
adaptive Gaussian mixture (Stauffer-Grimson style, constant learning rate).

Masks are ``(height, width)`` boolean arrays, ``True`` meaning foreground.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .frame_io import Frame
from .parallel import Workers, row_bands


@dataclass(frozen=True)
class GmmParams:
    k: int = 3
    alpha: float = 0.005
    match_sigmas: float = 2.5
    bg_threshold: float = 0.7
    variance_init: float = 225.0
    variance_floor: float = 4.0
    weight_init: float = 0.05

    def __post_init__(self):
        if not 2 <= self.k <= 5:
            raise ValueError("k must be in [2, 5]")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.match_sigmas <= 0:
            raise ValueError("match_sigmas must be positive")
        if not 0 < self.bg_threshold < 1:
            raise ValueError("bg_threshold must be in (0, 1)")
        if self.variance_floor <= 0 or self.variance_init < self.variance_floor:
            raise ValueError("need 0 < variance_floor <= variance_init")
        if not 0 < self.weight_init < 1:
            raise ValueError("weight_init must be in (0, 1)")


def _pixels(frame) -> np.ndarray:
    return frame.pixels if isinstance(frame, Frame) else np.asarray(frame)


def frame_diff(prev, curr, threshold: float) -> np.ndarray:
    """Foreground where ``|curr - prev| > threshold``."""
    a, b = _pixels(prev), _pixels(curr)
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape} vs {b.shape}")
    return np.abs(b.astype(np.int16) - a.astype(np.int16)) > threshold


@numba.njit(nogil=True, cache=True)
def _gmm_rows(x, w, mu, var, out, r0, r1, seed, alpha, match_sigmas, bg_threshold,
              variance_init, variance_floor, weight_init):
    K = w.shape[2]
    ncols = x.shape[1]
    rho = alpha
    key = np.empty(K)
    for i in range(r0, r1):
        for j in range(ncols):
            xv = float(x[i, j])
            if seed:
                mu[i, j, 0] = xv
            m = -1
            for k in range(K):
                sd = np.sqrt(var[i, j, k])
                if abs(xv - mu[i, j, k]) <= match_sigmas * sd:
                    m = k
                    break
            background = False
            if m >= 0:
                cum = 0.0
                for k in range(m):
                    cum += w[i, j, k]
                background = cum <= bg_threshold
            out[i, j] = not background

            for k in range(K):
                ind = 1.0 if k == m else 0.0
                w[i, j, k] = (1.0 - alpha) * w[i, j, k] + alpha * ind
            if m >= 0:
                mnew = (1.0 - rho) * mu[i, j, m] + rho * xv
                d = xv - mnew
                vnew = (1.0 - rho) * var[i, j, m] + rho * d * d
                mu[i, j, m] = mnew
                var[i, j, m] = max(variance_floor, vnew)
            else:
                w[i, j, K - 1] = weight_init
                mu[i, j, K - 1] = xv
                var[i, j, K - 1] = variance_init
            s = 0.0
            for k in range(K):
                s += w[i, j, k]
            for k in range(K):
                w[i, j, k] = w[i, j, k] / s
                key[k] = w[i, j, k] / np.sqrt(var[i, j, k])
            # stable insertion sort, descending w/sigma
            for k in range(1, K):
                q = k
                while q > 0 and key[q - 1] < key[q]:
                    key[q - 1], key[q] = key[q], key[q - 1]
                    w[i, j, q - 1], w[i, j, q] = w[i, j, q], w[i, j, q - 1]
                    mu[i, j, q - 1], mu[i, j, q] = mu[i, j, q], mu[i, j, q - 1]
                    var[i, j, q - 1], var[i, j, q] = var[i, j, q], var[i, j, q - 1]
                    q -= 1


class GmmModel:
    """Adaptive per-pixel mixture of ``k`` Gaussians over intensity.

    State lives in three ``(height, width, k)`` float64 arrays (``weight``,
    ``mean``, ``variance``) kept sorted per pixel by ``weight/sigma``.
    Each :meth:`apply` classifies against the pre-update state, then
    updates.  The first frame seeds the top component's mean.
    """

    def __init__(self, width: int, height: int, params: GmmParams | None = None):
        self.params = params or GmmParams()
        self.width, self.height = width, height
        k = self.params.k
        self.weight = np.zeros((height, width, k))
        self.weight[:, :, 0] = 1.0
        self.mean = np.zeros((height, width, k))
        self.variance = np.full((height, width, k), self.params.variance_init)
        self.frames_seen = 0

    def apply(self, frame, workers: Workers | None = None) -> np.ndarray:
        x = np.ascontiguousarray(_pixels(frame), dtype=np.uint8)
        if x.shape != (self.height, self.width):
            raise ValueError(f"frame size {x.shape[::-1]} does not match model {self.width}x{self.height}")
        p = self.params
        out = np.empty(x.shape, dtype=np.bool_)
        seed = self.frames_seen == 0

        def band(rows):
            _gmm_rows(x, self.weight, self.mean, self.variance, out, rows[0], rows[1], seed,
                      p.alpha, p.match_sigmas, p.bg_threshold, p.variance_init,
                      p.variance_floor, p.weight_init)

        nparts = workers.threads if workers is not None else 1
        bands = row_bands(self.height, nparts)
        if workers is None:
            for b in bands:
                band(b)
        else:
            workers.map(band, bands)
        self.frames_seen += 1
        return out

    def background_image(self) -> Frame:
        if self.frames_seen == 0:
            raise RuntimeError("background_image needs at least one update")
        top = np.floor(self.mean[:, :, 0] + 0.5)
        return Frame(np.clip(top, 0, 255).astype(np.uint8))

    def state(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.weight, self.mean, self.variance


def gmm_new(width: int, height: int, params: GmmParams | None = None) -> GmmModel:
    return GmmModel(width, height, params)


def gmm_apply(model: GmmModel, frame, workers: Workers | None = None) -> np.ndarray:
    return model.apply(frame, workers)


def background_image(model: GmmModel) -> Frame:
    return model.background_image()
