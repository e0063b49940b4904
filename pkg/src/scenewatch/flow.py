"""Dense pyramidal Lucas-Kanade optical flow."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .frame_io import Frame


@dataclass(frozen=True)
class LkParams:
    window_radius: int = 3
    pyramid_levels: int = 3
    iterations_per_level: int = 3
    min_eigenvalue: float = 1e-4
    magnitude_threshold: float = 0.5
    stride: int = 1

    def __post_init__(self):
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        if self.min_eigenvalue < 0:
            raise ValueError("min_eigenvalue must be >= 0")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass(eq=False)
class FlowField:
    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.u * self.u + self.v * self.v)


def _normalized(img) -> np.ndarray:
    if isinstance(img, Frame):
        return img.pixels.astype(np.float64) / 255.0
    a = np.asarray(img)
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    return np.ascontiguousarray(a, dtype=np.float64)


# ---------------------------------------------------------------- kernels

@numba.njit(nogil=True, cache=True)
def _gradients(a, b, ix, iy, it):
    h, w = a.shape
    for i in range(h):
        up = max(i - 1, 0)
        dn = min(i + 1, h - 1)
        for j in range(w):
            lf = max(j - 1, 0)
            rt = min(j + 1, w - 1)
            ix[i, j] = ((a[i, rt] + b[i, rt]) * 0.5 - (a[i, lf] + b[i, lf]) * 0.5) * 0.5
            iy[i, j] = ((a[dn, j] + b[dn, j]) * 0.5 - (a[up, j] + b[up, j]) * 0.5) * 0.5
            it[i, j] = b[i, j] - a[i, j]


@numba.njit(nogil=True, cache=True)
def _warp(img, u, v, out):
    h, w = img.shape
    for i in range(h):
        for j in range(w):
            x = min(max(j + u[i, j], 0.0), w - 1.0)
            y = min(max(i + v[i, j], 0.0), h - 1.0)
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = x - x0
            fy = y - y0
            out[i, j] = ((img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx) * (1.0 - fy)
                         + (img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx) * fy)


@numba.njit(nogil=True, cache=True)
def _box_sum(src, r, tmp, out):
    # separable window sum, border pixels replicated
    h, w = src.shape
    for i in range(h):
        s = 0.0
        for k in range(-r, r + 1):
            s += src[i, min(max(k, 0), w - 1)]
        tmp[i, 0] = s
        for j in range(1, w):
            s += src[i, min(j + r, w - 1)] - src[i, max(j - r - 1, 0)]
            tmp[i, j] = s
    for j in range(w):
        s = 0.0
        for k in range(-r, r + 1):
            s += tmp[min(max(k, 0), h - 1), j]
        out[0, j] = s
        for i in range(1, h):
            s += tmp[min(i + r, h - 1), j] - tmp[max(i - r - 1, 0), j]
            out[i, j] = s


@numba.njit(nogil=True, cache=True, inline="always")
def _sort2(a, b):
    return min(a, b), max(a, b)


@numba.njit(nogil=True, cache=True)
def _median3(src, out):
    # 3x3 median with replicated borders (19-exchange median-of-9 network)
    h, w = src.shape
    for i in range(h):
        up = max(i - 1, 0)
        dn = min(i + 1, h - 1)
        for j in range(w):
            lf = max(j - 1, 0)
            rt = min(j + 1, w - 1)
            p0, p1, p2 = src[up, lf], src[up, j], src[up, rt]
            p3, p4, p5 = src[i, lf], src[i, j], src[i, rt]
            p6, p7, p8 = src[dn, lf], src[dn, j], src[dn, rt]
            p1, p2 = _sort2(p1, p2)
            p4, p5 = _sort2(p4, p5)
            p7, p8 = _sort2(p7, p8)
            p0, p1 = _sort2(p0, p1)
            p3, p4 = _sort2(p3, p4)
            p6, p7 = _sort2(p6, p7)
            p1, p2 = _sort2(p1, p2)
            p4, p5 = _sort2(p4, p5)
            p7, p8 = _sort2(p7, p8)
            p0, p3 = _sort2(p0, p3)
            p5, p8 = _sort2(p5, p8)
            p4, p7 = _sort2(p4, p7)
            p3, p6 = _sort2(p3, p6)
            p1, p4 = _sort2(p1, p4)
            p2, p5 = _sort2(p2, p5)
            p4, p7 = _sort2(p4, p7)
            p4, p2 = _sort2(p4, p2)
            p6, p4 = _sort2(p6, p4)
            p4, p2 = _sort2(p4, p2)
            out[i, j] = p4


@numba.njit(nogil=True, cache=True)
def _lk_level(a, b, u, v, r, iterations, thresh, valid):
    h, w = a.shape
    bw = np.empty((h, w))
    ix = np.empty((h, w))
    iy = np.empty((h, w))
    it = np.empty((h, w))
    prods = np.empty((5, h, w))
    sums = np.empty((5, h, w))
    tmp = np.empty((h, w))
    for _ in range(iterations):
        _warp(b, u, v, bw)
        _gradients(a, bw, ix, iy, it)
        for i in range(h):
            for j in range(w):
                gx = ix[i, j]
                gy = iy[i, j]
                gt = it[i, j]
                prods[0, i, j] = gx * gx
                prods[1, i, j] = gx * gy
                prods[2, i, j] = gy * gy
                prods[3, i, j] = gx * gt
                prods[4, i, j] = gy * gt
        for c in range(5):
            _box_sum(prods[c], r, tmp, sums[c])
        for i in range(h):
            for j in range(w):
                sxx = sums[0, i, j]
                sxy = sums[1, i, j]
                syy = sums[2, i, j]
                sxt = sums[3, i, j]
                syt = sums[4, i, j]
                half = 0.5 * (sxx - syy)
                lam = 0.5 * (sxx + syy) - np.sqrt(half * half + sxy * sxy)
                det = sxx * syy - sxy * sxy
                ok = lam >= thresh and det > 0.0
                valid[i, j] = ok
                if ok:
                    u[i, j] += -(syy * sxt - sxy * syt) / det
                    v[i, j] += -(sxx * syt - sxy * sxt) / det
        # global warping spreads outliers between windows; a 3x3 median
        # after every iteration keeps the field from diverging
        _median3(u, tmp)
        u[:, :] = tmp
        _median3(v, tmp)
        v[:, :] = tmp


@numba.njit(nogil=True, cache=True)
def _down2(a):
    h = a.shape[0] // 2
    w = a.shape[1] // 2
    out = np.empty((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = 0.25 * (a[2 * i, 2 * j] + a[2 * i + 1, 2 * j]
                                + a[2 * i, 2 * j + 1] + a[2 * i + 1, 2 * j + 1])
    return out


# ---------------------------------------------------------------- public API

def gradients(a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spatial and temporal derivatives of a frame pair.

    ``Ix``/``Iy`` are central differences of the mean image ``(a+b)/2``
    with clamped borders; ``It = b - a``.  uint8 inputs (or Frames) are
    scaled to [0, 1] first.
    """
    a, b = _normalized(a), _normalized(b)
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape} vs {b.shape}")
    ix, iy, it = np.empty_like(a), np.empty_like(a), np.empty_like(a)
    _gradients(a, b, ix, iy, it)
    return ix, iy, it


def _box_down(a: np.ndarray, s: int) -> np.ndarray:
    h, w = (a.shape[0] // s) * s, (a.shape[1] // s) * s
    return a[:h, :w].reshape(h // s, s, w // s, s).mean(axis=(1, 3))


def _expand(a: np.ndarray, s: int, shape) -> np.ndarray:
    big = np.repeat(np.repeat(a, s, axis=0), s, axis=1)
    ph, pw = shape[0] - big.shape[0], shape[1] - big.shape[1]
    if ph or pw:
        big = np.pad(big, ((0, ph), (0, pw)), mode="edge")
    return big


def _lk_dense(a: np.ndarray, b: np.ndarray, p: LkParams) -> FlowField:
    r = p.window_radius
    n = 2 * r + 1
    thresh = p.min_eigenvalue * n * n
    pa, pb = [a], [b]
    while len(pa) < p.pyramid_levels and min(pa[-1].shape) // 2 >= n:
        pa.append(_down2(pa[-1]))
        pb.append(_down2(pb[-1]))
    u = np.zeros(pa[-1].shape)
    v = np.zeros(pa[-1].shape)
    valid = np.zeros(pa[-1].shape, dtype=np.bool_)
    for level in range(len(pa) - 1, -1, -1):
        la, lb = pa[level], pb[level]
        if u.shape != la.shape:
            u = _expand(u, 2, la.shape) * 2.0
            v = _expand(v, 2, la.shape) * 2.0
            valid = np.zeros(la.shape, dtype=np.bool_)
        _lk_level(la, lb, u, v, r, p.iterations_per_level, thresh, valid)
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u, v, valid)


def lk_flow(prev, curr, params: LkParams | None = None) -> FlowField:
    """Coarse-to-fine Lucas-Kanade flow from ``prev`` to ``curr``.

    A pixel is valid when the smallest eigenvalue of its window structure
    tensor reaches ``min_eigenvalue * window_area`` at the finest level;
    invalid pixels carry zero flow.  With ``stride > 1`` the flow is solved
    on ``stride``-times box-downsampled frames and expanded back.
    """
    p = params or LkParams()
    a, b = _normalized(prev), _normalized(curr)
    if a.shape != b.shape:
        raise ValueError(f"frame size mismatch: {a.shape} vs {b.shape}")
    n = 2 * p.window_radius + 1
    s = p.stride
    if min(a.shape) // s < n:
        raise ValueError(f"frame {a.shape[1]}x{a.shape[0]} too small for a {n}x{n} window at stride {s}")
    if s == 1:
        return _lk_dense(a, b, p)
    coarse = _lk_dense(_box_down(a, s), _box_down(b, s), p)
    return FlowField(
        _expand(coarse.u, s, a.shape) * s,
        _expand(coarse.v, s, a.shape) * s,
        _expand(coarse.valid, s, a.shape),
    )


def flow_mask(flow: FlowField, threshold: float) -> np.ndarray:
    return flow.valid & (np.sqrt(flow.u * flow.u + flow.v * flow.v) > threshold)


def magnitude_image(flow: FlowField, scale: float = 32.0) -> Frame:
    """Flow magnitude scaled to 8 bits, for debug dumps."""
    return Frame(np.clip(np.floor(flow.magnitude() * scale + 0.5), 0, 255).astype(np.uint8))
