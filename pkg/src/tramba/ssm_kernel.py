"""Diagonal state-space kernels: fixed-parameter recurrence and convolution,
the input-dependent selective scan, and its 2D (multi-order) composition.

All routines are plain float64 numpy. The selective scan exposes an explicit
forward/backward pair so higher layers can differentiate through it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import scan2d

__all__ = [
    "SsmParams",
    "DiscreteSsm",
    "zoh_discretize",
    "ssm_kernel_vector",
    "ssm_recurrent",
    "ssm_recurrent_grad",
    "ssm_convolutional",
    "softplus",
    "zoh_coefficients",
    "selective_scan",
    "selective_scan_backward",
    "S6Params",
    "init_s6",
    "selective_ssm",
    "ss2d",
]

SMALL_STEP = 1e-8


@dataclass(frozen=True)
class SsmParams:
    """Continuous diagonal SSM: dh/dt = a*h + b*x, y = c.h, sampled at step delta."""

    a_diag: np.ndarray
    b: np.ndarray
    c: np.ndarray
    delta: float

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a_diag, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        if not (a.shape == b.shape == c.shape) or a.ndim != 1:
            raise ValueError(f"a_diag, b, c must be equal-length vectors, got {a.shape}, {b.shape}, {c.shape}")
        if not (a < 0).all():
            raise ValueError("a_diag must be strictly negative for a stable system")
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ValueError(f"delta must be a non-negative finite step, got {self.delta}")
        object.__setattr__(self, "a_diag", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def d_state(self) -> int:
        return self.a_diag.size


@dataclass(frozen=True)
class DiscreteSsm:
    a_bar: np.ndarray
    b_bar: np.ndarray
    c: np.ndarray

    @property
    def d_state(self) -> int:
        return np.asarray(self.a_bar).size


def zoh_coefficients(delta, a, exact: bool = True):
    """Zero-order-hold factors ``(exp(delta*a), (exp(delta*a) - 1)/a)``.

    Broadcasts over ``delta`` and ``a``. With ``exact=False`` the input factor
    is the first-order approximation ``delta``. Where ``|delta*a| < 1e-8`` the
    exact factor is replaced by its limit ``delta``.
    """
    da = delta * a
    a_bar = np.exp(da)
    if not exact:
        return a_bar, np.broadcast_to(delta, da.shape).astype(np.float64)
    small = np.abs(da) < SMALL_STEP
    safe_a = np.where(small, 1.0, a)
    coef = np.where(small, delta * np.ones_like(da), np.expm1(da) / safe_a)
    return a_bar, coef


def zoh_discretize(p: SsmParams, exact: bool = True) -> DiscreteSsm:
    a_bar, coef = zoh_coefficients(p.delta, p.a_diag, exact=exact)
    return DiscreteSsm(a_bar, coef * p.b, p.c.copy())


def ssm_kernel_vector(d: DiscreteSsm, length: int) -> np.ndarray:
    """Impulse response K[t] = sum_n c_n a_n^t b_n for t < length."""
    t = np.arange(length)[:, None]
    return (d.c * d.b_bar * np.asarray(d.a_bar, dtype=np.float64) ** t).sum(axis=1)


def ssm_recurrent(d: DiscreteSsm, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    a, b, c = (np.asarray(v, dtype=np.float64) for v in (d.a_bar, d.b_bar, d.c))
    h = np.zeros_like(a)
    y = np.empty_like(x)
    for k in range(x.size):
        h = a * h + b * x[k]
        y[k] = c @ h
    return y


def ssm_recurrent_grad(d: DiscreteSsm, x, grad_y) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of ``ssm_recurrent`` for upstream ``grad_y``.

    Returns a dict with keys ``a_bar``, ``b_bar``, ``c``, ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    gy = np.asarray(grad_y, dtype=np.float64)
    a, b, c = (np.asarray(v, dtype=np.float64) for v in (d.a_bar, d.b_bar, d.c))
    n = x.size
    hs = np.zeros((n + 1, a.size))
    for k in range(n):
        hs[k + 1] = a * hs[k] + b * x[k]
    ga = np.zeros_like(a)
    gb = np.zeros_like(b)
    gc = np.zeros_like(c)
    gx = np.zeros_like(x)
    gh = np.zeros_like(a)
    for k in range(n - 1, -1, -1):
        gc += gy[k] * hs[k + 1]
        gh = gh + gy[k] * c
        ga += gh * hs[k]
        gb += gh * x[k]
        gx[k] = gh @ b
        gh = gh * a
    return {"a_bar": ga, "b_bar": gb, "c": gc, "x": gx}


def ssm_convolutional(d: DiscreteSsm, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    k = ssm_kernel_vector(d, x.size)
    return np.convolve(x, k)[: x.size]


# ----------------------------------------------------------------------------
# selective scan


def softplus(x):
    return np.logaddexp(0.0, x)


def selective_scan(x, delta, a, b, c, d=None, exact: bool = True, return_cache: bool = False):
    """Selective SSM scan with token-varying step and projections.

    Shapes (``...`` is any common batch prefix)::

        x, delta : (..., L, C)
        a        : broadcastable to (..., C, N), strictly negative
        b, c     : (..., L, N)
        d        : broadcastable to (..., C) or None

    Per channel ``ch`` and step ``t``::

        h_t = exp(delta_t*a) * h_{t-1} + zoh(delta_t, a) * b_t * x_t
        y_t = sum_n c_t[n] * h_t[n] + d * x_t
    """
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != delta.shape:
        raise ValueError(f"x {x.shape} and delta {delta.shape} must match")
    if b.shape != c.shape or b.shape[:-1] != x.shape[:-1]:
        raise ValueError(f"b {b.shape} / c {c.shape} inconsistent with x {x.shape}")
    length = x.shape[-2]
    a_e = a[..., None, :, :]  # (..., 1, C, N)
    a_bar, coef = zoh_coefficients(delta[..., None], a_e, exact=exact)  # (..., L, C, N)
    u = coef * b[..., :, None, :] * x[..., None]
    hs = np.empty(np.broadcast_shapes(u.shape, a_bar.shape))
    h = np.zeros(hs.shape[:-3] + hs.shape[-2:])
    for t in range(length):
        h = a_bar[..., t, :, :] * h + u[..., t, :, :]
        hs[..., t, :, :] = h
    y = np.einsum("...lcn,...ln->...lc", hs, c)
    if d is not None:
        y = y + np.asarray(d, dtype=np.float64)[..., None, :] * x
    if not return_cache:
        return y
    cache = dict(x=x, delta=delta, a=a, b=b, c=c, d=d, exact=exact, a_bar=a_bar, coef=coef, hs=hs)
    return y, cache


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def selective_scan_backward(cache: dict, grad_y) -> dict[str, np.ndarray]:
    """Gradients of :func:`selective_scan` w.r.t. x, delta, a, b, c, d."""
    gy = np.asarray(grad_y, dtype=np.float64)
    x, delta, a, b, c, d = (cache[k] for k in ("x", "delta", "a", "b", "c", "d"))
    a_bar, coef, hs = cache["a_bar"], cache["coef"], cache["hs"]
    length = x.shape[-2]

    gc = np.einsum("...lc,...lcn->...ln", gy, hs)
    # dL/dh_t accumulated right to left
    gh_all = np.empty_like(hs)
    gh = np.zeros(hs.shape[:-3] + hs.shape[-2:])
    for t in range(length - 1, -1, -1):
        gh = gh + gy[..., t, :, None] * c[..., t, None, :]
        gh_all[..., t, :, :] = gh
        gh = gh * a_bar[..., t, :, :]
    h_prev = np.zeros_like(hs)
    h_prev[..., 1:, :, :] = hs[..., :-1, :, :]

    g_abar = gh_all * h_prev
    bx = b[..., :, None, :] * x[..., None]
    g_coef = gh_all * bx
    gb = np.einsum("...lcn,...lcn->...ln", gh_all, coef * x[..., None])
    gx = np.einsum("...lcn,...lcn->...lc", gh_all, coef * b[..., :, None, :])

    a_e = a[..., None, :, :]
    dl = delta[..., None]
    # d a_bar/d delta = a*a_bar ; d a_bar/d a = delta*a_bar
    g_delta = (g_abar * a_bar * a_e).sum(-1)
    g_a = g_abar * a_bar * dl
    if cache["exact"]:
        da = dl * a_e
        small = np.abs(da) < SMALL_STEP
        safe_a = np.where(small, 1.0, a_e)
        # coef = expm1(delta*a)/a
        dcoef_ddelta = np.where(small, 1.0, a_bar)
        dcoef_da = np.where(small, 0.5 * dl * dl, (da * a_bar - np.expm1(da)) / (safe_a * safe_a))
        g_delta = g_delta + (g_coef * dcoef_ddelta).sum(-1)
        g_a = g_a + g_coef * dcoef_da
    else:
        g_delta = g_delta + g_coef.sum(-1)
    g_a = _unbroadcast(g_a.sum(axis=-3), a.shape)

    out = {"x": gx, "delta": g_delta, "a": g_a, "b": gb, "c": gc}
    if d is not None:
        d = np.asarray(d)
        out["x"] = gx + d[..., None, :] * gy
        out["d"] = _unbroadcast((gy * x).sum(axis=-2), d.shape)
    return out


@dataclass
class S6Params:
    """Learned projections of one selective SSM over C channels.

    ``x_proj`` maps a token to [dt_low (R) | B (N) | C (N)]; ``dt_proj`` and
    ``dt_bias`` lift dt_low to a per-channel step through softplus.
    """

    x_proj: np.ndarray  # (C, R + 2N)
    dt_proj: np.ndarray  # (R, C)
    dt_bias: np.ndarray  # (C,)
    a_log: np.ndarray  # (C, N); A = -exp(a_log)
    d_skip: np.ndarray = field(default=None)  # (C,)

    def __post_init__(self):
        c, n = self.a_log.shape
        if self.d_skip is None:
            self.d_skip = np.ones(c)
        r = self.dt_proj.shape[0]
        if self.x_proj.shape != (c, r + 2 * n) or self.dt_proj.shape != (r, c) or self.dt_bias.shape != (c,):
            raise ValueError("inconsistent S6 parameter shapes")

    @property
    def channels(self) -> int:
        return self.a_log.shape[0]

    @property
    def d_state(self) -> int:
        return self.a_log.shape[1]

    @property
    def dt_rank(self) -> int:
        return self.dt_proj.shape[0]

    @property
    def a(self) -> np.ndarray:
        return -np.exp(self.a_log)


def inverse_softplus(y):
    return y + np.log(-np.expm1(-y))


def init_s6(channels: int, d_state: int = 8, dt_rank: int | None = None, rng=None,
            dt_min: float = 1e-3, dt_max: float = 1e-1) -> S6Params:
    """Mamba-style initialisation: A = -[1..N], log-uniform initial steps, D = 1."""
    rng = np.random.default_rng(rng)
    r = dt_rank or max(1, -(-channels // 16))
    x_proj = rng.normal(0.0, channels ** -0.5, size=(channels, r + 2 * d_state))
    dt_proj = rng.uniform(-(r ** -0.5), r ** -0.5, size=(r, channels))
    dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=channels))
    a_log = np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (channels, 1)))
    return S6Params(x_proj, dt_proj, inverse_softplus(dt), a_log, np.ones(channels))


def _s6_inputs(x: np.ndarray, p: S6Params):
    r, n = p.dt_rank, p.d_state
    proj = x @ p.x_proj
    dt_low, bm, cm = proj[..., :r], proj[..., r:r + n], proj[..., r + n:]
    delta = softplus(dt_low @ p.dt_proj + p.dt_bias)
    return delta, bm, cm


def selective_ssm(x_seq, p: S6Params, exact: bool = True) -> np.ndarray:
    """Run one selective SSM over sequences ``x_seq`` of shape (..., L, C)."""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.shape[-1] != p.channels:
        raise ValueError(f"sequence has {x_seq.shape[-1]} channels, parameters expect {p.channels}")
    delta, bm, cm = _s6_inputs(x_seq, p)
    return selective_scan(x_seq, delta, p.a, bm, cm, p.d_skip, exact=exact)


def ss2d(x, scans, params: S6Params | Sequence[S6Params], exact: bool = True) -> np.ndarray:
    """Scan a (B, C, H, W) map along every order, run an SSM per order, sum back.

    ``scans`` is a ScanSet or a sequence of ScanOrders. ``params`` is either a
    single S6Params shared by all directions or one per direction.
    """
    x = np.asarray(x, dtype=np.float64)
    orders = list(scans)
    if isinstance(params, S6Params):
        params = [params] * len(orders)
    if len(params) != len(orders):
        raise ValueError(f"{len(params)} parameter sets for {len(orders)} scan directions")
    ys = [selective_ssm(scan2d.gather(x, o), p, exact=exact) for o, p in zip(orders, params)]
    return scan2d.scatter_merge(ys, orders)
