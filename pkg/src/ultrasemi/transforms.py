"""Fourier multipliers for the ultrapolynomial symbol and Bromwich-line
inverse Laplace transforms for the convolution kernel.

The kernel is *defined* by the straight-line integral

    K(t) = (1/2 pi i) int_{abar - i inf}^{abar + i inf} e^{lam t} / P(-i lam) dlam

(no contour deformation: deforming would change the object). The line lies
left of the symbol's real zeros at lam = +/- m_p / L, so the inversion is a
two-sided function whose restriction to t >= 0 is the kernel; the residue
series over the left poles is the validation oracle. Quadrature is composite
trapezoid on the vertical line (spectrally accurate for integrands analytic
in a strip) plus two-term integration-by-parts corrections for the truncated
oscillatory tails, which is what makes low-truncation symbols (decay ~ y^-2)
affordable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._quadrature import LineRule, integrate_uniform, line_values
from .testfn import ResolutionWarning, TestFunction
from .ultrapoly import Ultrapolynomial

__all__ = [
    "BromwichLine",
    "Kernel",
    "CertificateError",
    "apply_P",
    "divide_P",
    "bromwich_kernel",
    "laplace",
    "LaplaceResult",
]


class CertificateError(RuntimeError):
    """A truncation certificate exceeded its tolerance."""


@dataclass(frozen=True)
class BromwichLine:
    """Vertical contour Re lam = abar, truncated at |Im lam| <= height."""

    abar: float
    height: float
    nodes: int
    rule: str = "trapezoid"

    def __post_init__(self):
        if self.abar <= 0:
            raise ValueError("abscissa abar must be > 0")
        if self.height <= 0:
            raise ValueError("height must be > 0")
        if self.nodes < 3:
            raise ValueError("need at least 3 nodes")
        if self.rule not in ("trapezoid", "gauss-composite"):
            raise ValueError(f"unknown rule {self.rule!r}")

    def make_rule(self) -> LineRule:
        if self.rule == "trapezoid":
            n = self.nodes if self.nodes % 2 == 1 else self.nodes + 1
            return LineRule.trapezoid(self.height, n)
        return LineRule.gauss_composite(self.height, self.nodes)

    def check_pairing(self, P: Ultrapolynomial) -> None:
        if P.L * self.abar >= 1.0:
            raise ValueError(
                f"L * abar = {P.L * self.abar:.3g} must be < 1 "
                "(the line must sit inside the admissible strip of the symbol)"
            )


def symbol_tail_bound(P: Ultrapolynomial, T: float, abar: float, tmax: float) -> float:
    """Rigorous bound on the discarded tails of int e^{lam t}/P(-i lam):

    (e^{abar tmax}/pi) * min_p M_p^2 L^{-2p} T^{1-2p} / (2p-1),

    using |P(zeta)| >= max over q <= N of prod_{p<=q} (L|zeta|/m_p)^2 on the
    tail (where Re zeta dominates Im zeta, so the factor-wise chain applies).
    """
    W = P.W
    N = max(P.N, 1)
    p = np.arange(1, min(N, W.pmax) + 1, dtype=float)
    # per side: M_p^2 L^{-2p} T^{1-2p}/(2p-1); the +log(T) below restores the
    # T^{1-2p} = T * (LT)^{-2p} * L^{2p} split
    logs = (
        2.0 * W.logM[1 : len(p) + 1]
        - 2.0 * p * np.log(P.L * T)
        - np.log(2.0 * p - 1.0)
    )
    return float(np.exp(np.min(logs) + abar * tmax + np.log(T) - np.log(np.pi)))


_CTX_CACHE: dict = {}


def _line_context(P: Ultrapolynomial, line: BromwichLine) -> "_LineContext":
    key = (id(P), line.abar, line.height, line.nodes, line.rule)
    ctx = _CTX_CACHE.get(key)
    if ctx is None or ctx.P is not P:
        ctx = _LineContext(P, line)
        _CTX_CACHE[key] = ctx
    return ctx


class _LineContext:
    """Node data for a (symbol, line) pair, shared by kernel and semigroup."""

    def __init__(self, P: Ultrapolynomial, line: BromwichLine):
        line.check_pairing(P)
        self.P = P
        self.line = line
        self.rule = line.make_rule()
        self.lam = line.abar + 1j * self.rule.y
        self.zeta = -1j * self.lam  # P(-i lam) evaluated as P(zeta)
        logP = P.log_eval_many(self.zeta)
        self.invP = np.exp(-logP)
        # derivative of 1/P along the line: d zeta / dy = 1
        ends = np.array([self.zeta[0], self.zeta[-1]])
        g, _ = P.log_derivs(ends)
        self.invP_ends = np.array([self.invP[0], self.invP[-1]])
        self.dinvP_ends = -g * self.invP_ends

    def zero_distance(self) -> float:
        """Distance from the nodes to the real zeros of P(-i lam)."""
        if self.P.N == 0:
            return np.inf
        zeros = self.P.W.m[: self.P.N] / self.P.L
        d_real = np.min(np.abs(self.line.abar - zeros))
        return float(d_real)


@dataclass(frozen=True)
class Kernel:
    """Sampled kernel K and its primitive Theta on [0, t_max]."""

    tgrid: np.ndarray
    K: np.ndarray
    Theta: np.ndarray
    line: BromwichLine
    imag_residual: float                 # symmetry check before discarding Im
    tail_certificate: float              # rigorous truncation bound (plain)
    envelope_C: float                    # fitted C with |K(t)| <= C e^{abar t}
    scale: float = 1.0
    _ctx: _LineContext = field(repr=False, default=None, compare=False)

    @property
    def dt(self) -> float:
        return float(self.tgrid[1] - self.tgrid[0])

    def eval_at(self, times) -> np.ndarray:
        """Re-evaluate K off the stored grid (two-sided: negative times give
        the anticausal branch of the line inversion)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        ctx = self._ctx
        vals = line_values(
            ctx.rule, self.line.abar, self.scale * ctx.invP, times,
            Fp=self.scale * ctx.dinvP_ends,
        )
        return vals.real

    def derivative_at(self, times, order: int = 1) -> np.ndarray:
        """d^order K / dt^order via the contour (lam^order weight)."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        ctx = self._ctx
        F = self.scale * ctx.invP * ctx.lam**order
        lam_ends = np.array([ctx.lam[0], ctx.lam[-1]])
        Fp = self.scale * (
            ctx.dinvP_ends * lam_ends**order
            + ctx.invP_ends * order * lam_ends ** (order - 1) * 1j
        )
        return line_values(ctx.rule, self.line.abar, F, times, Fp=Fp).real

    def to_csv(self, path) -> None:
        np.savetxt(
            path,
            np.column_stack([self.tgrid, self.K, self.Theta]),
            delimiter=",",
            header="t,K,Theta",
            comments="",
        )


def bromwich_kernel(
    P: Ultrapolynomial,
    line: BromwichLine,
    tgrid,
    scale: float = 1.0,
    tol: float = 1e-8,
) -> Kernel:
    """Construct the kernel and its primitive on ``tgrid`` (all t >= 0).

    Fails when the rigorous truncation certificate exceeds ``tol`` (after
    accounting for the oscillatory tail corrections, whose effect is
    certified separately and reported with the plain bound), or when a node
    lands within 1e-8 of a zero of the symbol along the real axis.
    """
    tgrid = np.asarray(tgrid, dtype=float)
    if tgrid.ndim != 1 or len(tgrid) < 2:
        raise ValueError("tgrid must hold at least two times")
    if np.any(tgrid < 0):
        raise ValueError("kernel times must be >= 0")
    if np.any(np.diff(tgrid) <= 0):
        raise ValueError("tgrid must be increasing")
    ctx = _line_context(P, line)
    if ctx.zero_distance() < 1e-8:
        raise CertificateError(
            "a quadrature node is within 1e-8 of a symbol zero on the line"
        )
    tmax = float(tgrid[-1])
    cert = symbol_tail_bound(P, line.height, line.abar, tmax) if P.N >= 1 else 0.0
    # the IBP corrections reduce the oscillatory part of the tail by ~1/t^2;
    # accept when either the plain bound or the corrected estimate clears tol
    t_floor = max(float(tgrid[tgrid > 0][0]) if np.any(tgrid > 0) else 1.0, 1e-2)
    cert_eff = min(cert, cert / (line.height * t_floor) ** 2 * 4.0)
    if cert_eff > tol:
        raise CertificateError(
            f"truncation certificate {cert_eff:.3e} exceeds tolerance {tol:.3e}; "
            "raise the line height or the node count"
        )
    Kc = line_values(
        ctx.rule, line.abar, scale * ctx.invP, tgrid, Fp=scale * ctx.dinvP_ends
    )
    ref = float(np.max(np.abs(Kc))) or 1.0
    imag_rel = float(np.max(np.abs(Kc.imag)) / ref)
    K = Kc.real

    # Theta via the exact primitive of the quadrature kernel:
    # Theta(t) = (1/2pi) int (e^{lam t} - 1) / lam * 1/P dy
    F1 = scale * ctx.invP / ctx.lam
    lam_ends = np.array([ctx.lam[0], ctx.lam[-1]])
    F1p = scale * (ctx.dinvP_ends / lam_ends - ctx.invP_ends * 1j / lam_ends**2)
    part = line_values(ctx.rule, line.abar, F1, tgrid, Fp=F1p)
    const = np.sum(ctx.rule.w * F1) / (2.0 * np.pi)
    Theta = (part - const).real
    Theta -= Theta[0] if tgrid[0] == 0.0 else 0.0

    env = float(np.max(np.abs(K) * np.exp(-line.abar * tgrid)))
    return Kernel(
        tgrid=tgrid, K=K, Theta=Theta, line=line,
        imag_residual=imag_rel, tail_certificate=cert,
        envelope_C=env, scale=scale, _ctx=ctx,
    )


# -- Laplace transform of sampled data ----------------------------------------


from typing import NamedTuple


class LaplaceResult(NamedTuple):
    value: complex
    tail_bound: float


def laplace(tgrid, values, lam: complex, tol: float | None = None) -> LaplaceResult:
    """int_0^{tmax} e^{-lam t} f(t) dt by composite Simpson, with a tail
    estimate from the fitted exponential envelope of |f|.

    Fails (when ``tol`` is given) if the estimated neglected tail beyond
    tmax exceeds the tolerance: Re lam must dominate the function's growth.
    """
    tgrid = np.asarray(tgrid, dtype=float)
    values = np.asarray(values)
    if tgrid.ndim != 1 or values.shape != tgrid.shape:
        raise ValueError("tgrid and values must be matching 1-d arrays")
    dt = tgrid[1] - tgrid[0]
    if np.max(np.abs(np.diff(tgrid) - dt)) > 1e-9 * dt:
        raise ValueError("laplace expects a uniform grid")
    integrand = values * np.exp(-lam * (tgrid - tgrid[0]))
    val = integrate_uniform(integrand, dt) * np.exp(-lam * tgrid[0])

    # envelope fit on the trailing third: |f| <= C e^{omega t}
    absf = np.abs(values)
    mx = absf.max()
    tail_bound = 0.0
    if mx > 0:
        third = len(tgrid) // 3
        tt, ff = tgrid[-third:], absf[-third:]
        pos = ff > 1e-300 * mx
        if np.count_nonzero(pos) >= 2:
            slope = np.polyfit(tt[pos], np.log(ff[pos]), 1)[0]
        else:
            slope = 0.0
        omega = max(float(slope), 0.0) if not np.isfinite(slope) else float(slope)
        Cfit = float(np.max(absf * np.exp(-omega * tgrid)))
        gap = lam.real - omega
        if gap <= 0:
            tail_bound = np.inf
        else:
            tail_bound = Cfit * np.exp((omega - lam.real) * tgrid[-1]) / gap
    if tol is not None and not tail_bound <= tol:
        raise CertificateError(
            f"laplace tail estimate {tail_bound:.3e} exceeds tolerance {tol:.3e}"
        )
    return LaplaceResult(value=complex(val), tail_bound=float(tail_bound))


# -- multipliers ---------------------------------------------------------------


def apply_P(P: Ultrapolynomial, f: TestFunction) -> TestFunction:
    """Multiply the spectrum by P(xi) (real and >= 1 on the real axis).

    Because the symbol is even, the operator equals its transpose as a
    distribution pairing, and the (+i d/dt)/(-i d/dt) distinction is moot.
    Bins below the propagated noise floor are zeroed: their true content is
    unknowable from the samples and the symbol amplifies roundoff there
    catastrophically. A resolution warning fires when the clipped level could
    matter at the 1e-8 scale of the result.
    """
    logP = P.log_on_real_axis(f.xi)
    mult = np.exp(np.minimum(logP, 700.0))
    keep = f.trusted()
    out_spec = np.where(keep, f.spectrum * mult, 0.0)
    floor = f.noise_floor * mult
    mx = float(np.max(np.abs(out_spec)))
    clipped_level = float(np.max(np.where(~keep, 8.0 * floor, 0.0))) if (~keep).any() else 0.0
    if mx > 0 and clipped_level > 1e-8 * mx:
        warnings.warn(
            "apply_P: spectral resolution exhausted (clipped bins could carry "
            f"{clipped_level / mx:.2e} of the result's peak)",
            ResolutionWarning,
            stacklevel=2,
        )
    return f.with_spectrum(out_spec, floor)


def divide_P(P: Ultrapolynomial, f: TestFunction) -> TestFunction:
    """Divide the spectrum by P(xi); always well defined since P >= 1 there."""
    logP = P.log_on_real_axis(f.xi)
    mult = np.exp(-np.minimum(logP, 700.0))
    return f.with_spectrum(f.spectrum * mult, f.noise_floor * mult)


# -- derivative of the reciprocal symbol ---------------------------------------


def reciprocal_derivative(P: Ultrapolynomial, xi: float) -> complex:
    """(1/P)'(xi) analytically: -P'/P^2 through the factored log-derivative."""
    g, _ = P.log_derivs(complex(xi))
    le = P.log_eval(complex(xi))
    return complex(-g * np.exp(-le))


def cauchy_reciprocal_derivative(
    P: Ultrapolynomial, xi: float, r: float | None = None, nodes: int = 512
) -> tuple[complex, float]:
    """(1/P)'(xi) by quadrature of the circle integral (1/2 pi i)
    oint (1/P(z)) / (z - xi)^2 dz, radius r inside the admissible strip.

    Returns (value, r). Trapezoid in the angle is spectrally accurate for the
    periodic integrand. Independent of the factored-derivative formula, so
    the two make an oracle pair.
    """
    if r is None:
        r = min(0.5 / P.L, 0.5)
    th = 2.0 * np.pi * np.arange(nodes) / nodes
    z = xi + r * np.exp(1j * th)
    invP = np.exp(-P.log_eval_many(z))
    # dz = i r e^{i th} d th; (z - xi)^2 = r^2 e^{2 i th}
    vals = invP * np.exp(-1j * th) / r
    return complex(np.mean(vals)), float(r)
