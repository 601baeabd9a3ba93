"""Shared quadrature machinery.

* uniform-grid composite integration (4th order) and its cumulative variant,
* Filon-type oscillatory transforms (error independent of the oscillation
  frequency, needed for Laplace transforms evaluated high up a vertical line),
* the vertical-line (Bromwich) trapezoid engine with asymptotic tail
  corrections obtained by integrating the oscillatory factor by parts.

All reductions use numpy's pairwise summation on fixed shapes, so results are
reproducible run-to-run and independent of worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "integrate_uniform",
    "cumulative_uniform",
    "filon_transform",
    "LineRule",
    "line_values",
    "phi1",
    "phi2",
]


# -- uniform-grid integration ------------------------------------------------


def _simpson_weights(n: int, dt: float) -> np.ndarray:
    """Composite Simpson weights for n samples; odd interval counts get a
    3/8-rule closing panel so the order stays 4 throughout."""
    if n < 2:
        raise ValueError("need at least two samples")
    w = np.zeros(n)
    if n == 2:  # single interval: trapezoid is all there is
        return np.array([0.5, 0.5]) * dt
    if n == 3:
        return np.array([1.0, 4.0, 1.0]) * (dt / 3.0)
    intervals = n - 1
    if intervals % 2 == 0:
        w[0] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w[-1] = 1.0
        w *= dt / 3.0
    else:
        # Simpson on the first n-4 intervals (even count), 3/8 on the last 3
        head = n - 3
        w[:head] = _simpson_weights(head, dt)
        w38 = np.array([1.0, 3.0, 3.0, 1.0]) * (3.0 * dt / 8.0)
        w[head - 1 : n] += w38
    return w


def integrate_uniform(values: np.ndarray, dt: float, axis: int = -1):
    """4th-order composite integration of uniformly sampled values."""
    values = np.asarray(values)
    n = values.shape[axis]
    w = _simpson_weights(n, dt)
    shape = [1] * values.ndim
    shape[axis] = n
    return np.sum(values * w.reshape(shape), axis=axis)


def cumulative_uniform(values: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """Cumulative integral on a uniform grid, composite Simpson (4th order).

    Entry j holds the integral from sample 0 to sample j; entry 0 is zero.
    Backed by scipy's cumulative Simpson rule (pairwise panels, so local
    parabola errors do not accumulate coherently the way a per-step
    Adams-Moulton recursion would).
    """
    from scipy.integrate import cumulative_simpson

    v = np.asarray(values)
    n = v.shape[axis]
    if n == 1:
        return np.zeros_like(v, dtype=np.result_type(v.dtype, float))
    if n == 2:
        out = np.zeros_like(v, dtype=np.result_type(v.dtype, float))
        sl = [slice(None)] * v.ndim
        sl[axis] = 1
        out[tuple(sl)] = 0.5 * dt * np.take(v, 0, axis) + 0.5 * dt * np.take(v, 1, axis)
        return out
    if np.iscomplexobj(v):
        return cumulative_simpson(v.real, dx=dt, axis=axis, initial=0.0) + 1j * \
            cumulative_simpson(v.imag, dx=dt, axis=axis, initial=0.0)
    return cumulative_simpson(v, dx=dt, axis=axis, initial=0.0)


# -- Filon oscillatory transform ---------------------------------------------


def _filon_panel_weights(theta: np.ndarray):
    """Weights (W-, W0, W+) with int_{-1}^{1} q(u) e^{-i theta u} du
    ~= W- q(-1) + W0 q(0) + W+ q(1) exact for parabolic q."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-3
    t2 = theta * theta
    with np.errstate(divide="ignore", invalid="ignore"):
        sin, cos = np.sin(theta), np.cos(theta)
        I0 = np.where(small, 2.0 - t2 / 3.0 + t2 * t2 / 60.0,
                      2.0 * sin / np.where(small, 1.0, theta))
        I1 = np.where(
            small,
            -1j * (2.0 * theta / 3.0 - theta * t2 / 15.0),
            2j * (theta * cos - sin) / np.where(small, 1.0, t2),
        )
        I2 = np.where(
            small,
            2.0 / 3.0 - t2 / 15.0 + t2 * t2 / 210.0,
            2.0 * ((t2 - 2.0) * sin + 2.0 * theta * cos) / np.where(small, 1.0, t2 * theta),
        )
    Wm = 0.5 * (I2 - I1)
    W0 = I0 - I2
    Wp = 0.5 * (I2 + I1)
    return Wm, W0, Wp


def filon_transform(q: np.ndarray, dt: float, omega: np.ndarray,
                    t0: float = 0.0) -> np.ndarray:
    """int q(t) e^{-i omega t} dt over the sample range, frequency-robust.

    ``q`` is sampled uniformly starting at ``t0`` with an odd number of
    samples (panel pairs). The error is O(dt^4 q'''') uniformly in omega,
    unlike plain Simpson whose error grows like (omega dt)^4.
    """
    q = np.asarray(q)
    n = len(q)
    if n % 2 == 0:
        raise ValueError("filon_transform needs an odd number of samples")
    om = np.atleast_1d(np.asarray(omega, dtype=complex))
    # panels [2i, 2i+2]; parabola nodes at u = -1, 0, 1; theta = omega*dt
    theta = om.real * dt  # imaginary part handled via envelope below
    if np.any(np.abs(om.imag) > 0):
        # complex frequencies: fold the decaying part into the samples per
        # panel midpoint to keep the Filon weights real-argument
        raise ValueError("filon_transform expects real frequencies")
    Wm, W0, Wp = _filon_panel_weights(theta)
    qm = q[0:-2:2]
    q0 = q[1:-1:2]
    qp = q[2::2]
    tmid = t0 + dt * (np.arange(1, n - 1, 2))
    out = np.empty(om.shape, dtype=complex)
    block = max(1, 4_000_000 // max(len(tmid), 1))
    for i in range(0, len(om), block):
        phase = np.exp(-1j * np.multiply.outer(om.real[i : i + block], tmid))
        out[i : i + block] = dt * (
            Wm[i : i + block] * (phase @ qm)
            + W0[i : i + block] * (phase @ q0)
            + Wp[i : i + block] * (phase @ qp)
        )
    if np.isscalar(omega) or np.asarray(omega).ndim == 0:
        return out[0]
    return out


# -- vertical-line quadrature -------------------------------------------------


@dataclass(frozen=True)
class LineRule:
    """Nodes and weights for int_{-T}^{T} f(y) dy on the vertical line."""

    y: np.ndarray
    w: np.ndarray
    T: float
    h: float  # mean spacing (exact spacing for the trapezoid rule)

    @classmethod
    def trapezoid(cls, T: float, nodes: int) -> "LineRule":
        if nodes < 3 or nodes % 2 == 0:
            raise ValueError("trapezoid rule wants an odd node count >= 3")
        y = np.linspace(-T, T, nodes)
        h = y[1] - y[0]
        w = np.full(nodes, h)
        w[0] = w[-1] = h / 2.0
        return cls(y=y, w=w, T=T, h=h)

    @classmethod
    def gauss_composite(cls, T: float, nodes: int, panel_points: int = 8) -> "LineRule":
        from scipy.special import roots_legendre

        x, wref = roots_legendre(panel_points)
        npanels = max(1, int(np.ceil(nodes / panel_points)))
        edges = np.linspace(-T, T, npanels + 1)
        ys, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            ys.append(mid + half * x)
            ws.append(half * wref)
        y = np.concatenate(ys)
        w = np.concatenate(ws)
        return cls(y=y, w=w, T=T, h=float(2 * T / len(y)))


def line_values(
    rule: LineRule,
    abar: float,
    F: np.ndarray,
    times: np.ndarray,
    Fp: np.ndarray | None = None,
    t_osc: float = 0.05,
    chunk: int = 1_000_000,
) -> np.ndarray:
    """(1/2pi) int_{-T}^{T} e^{(abar+iy)t} F(y) dy for each t, with two-term
    integration-by-parts corrections for the truncated oscillatory tails.

    ``F`` holds the integrand samples at ``rule.y``; ``Fp`` its y-derivative
    at the two endpoints (array [F'(-T), F'(T)]) when corrections are wanted.
    For |t| < t_osc the corrections are skipped (no oscillation to exploit;
    the plain truncation bound applies there).

    ``F`` may also be shaped (nodes, ...) for vector/matrix-valued
    integrands; the result is then shaped (len(times), ...).
    """
    F = np.asarray(F)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    extra = F.shape[1:]
    out = np.empty((len(times),) + extra, dtype=complex)
    wF = rule.w.reshape((-1,) + (1,) * len(extra)) * F
    # chunk over times to bound the (nt, nodes) phase matrix
    tchunk = max(1, chunk // max(len(rule.y), 1))
    for i in range(0, len(times), tchunk):
        t = times[i : i + tchunk]
        phase = np.exp(1j * np.multiply.outer(t, rule.y))  # (nt, nodes)
        out[i : i + tchunk] = np.tensordot(phase, wF, axes=(1, 0))
    if Fp is not None:
        FT_lo, FT_hi = F[0], F[-1]
        Fp_lo, Fp_hi = Fp[0], Fp[-1]
        osc = np.abs(times) >= t_osc
        if np.any(osc):
            t = times[osc]
            it = (1j * t).reshape((-1,) + (1,) * len(extra))
            eplus = np.exp(1j * rule.T * times[osc]).reshape(it.shape)
            eminus = np.exp(-1j * rule.T * times[osc]).reshape(it.shape)
            # int_T^inf e^{iyt}F dy ~ -e^{iTt}(F(T)/(it) + F'(T)/(it)^2)
            corr = -eplus * (FT_hi / it + Fp_hi / it**2)
            # int_{-inf}^{-T} e^{iyt}F dy ~ e^{-iTt}(F(-T)/(it) - F'(-T)/(it)^2)
            corr = corr + eminus * (FT_lo / it - Fp_lo / it**2)
            out[osc] += corr
    env = np.exp(abar * times).reshape((-1,) + (1,) * len(extra))
    out *= env / (2.0 * np.pi)
    return out


# -- phi-functions of exponential integrators ---------------------------------


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1)/z, stable near zero."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = 1.0 + zs / 2.0 + zs * zs / 6.0 + zs**3 / 24.0
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0) / zb
    return out


def phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z)/z^2, stable near zero."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = 0.5 + zs / 6.0 + zs * zs / 24.0 + zs**3 / 120.0
    zb = z[~small]
    out[~small] = (np.exp(zb) - 1.0 - zb) / (zb * zb)
    return out
