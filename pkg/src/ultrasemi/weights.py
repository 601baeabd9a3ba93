"""Weight sequences (M_p) and their associated function.

A weight sequence grades derivative growth for ultradifferentiable classes.
Everything here is kept in log-space: for the Gevrey family M_p = (p!)^s the
raw values overflow double precision already near p ~ 85 for s = 2.

Conditions checked by :func:`verify_conditions` are the classical ones:

* (M.1)  log-convexity: M_p^2 <= M_{p-1} M_{p+1};
* (M.2)  stability:     M_{p+q} <= A H^{p+q} M_p M_q for some A, H >= 1;
* (M.3)' non-quasianalyticity: sum 1/m_p < infinity, m_p = M_p / M_{p-1}.

(M.2) and (M.3)' are infinite conditions; on a finite table the report records
finite evidence plus a tail extrapolation (exact for the Gevrey family).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WeightSequence",
    "ConditionReport",
    "make_gevrey",
    "from_table",
    "extend",
    "verify_conditions",
    "assoc",
    "assoc_detail",
    "assoc_many",
]


@dataclass(frozen=True)
class WeightSequence:
    """The sequence (M_p), p = 0..pmax, with M_0 = 1, held as log M_p.

    ``m[i]`` is the ratio m_p = M_p / M_{p-1} for p = i + 1 (dimensionless).
    ``gevrey_index`` is set when the sequence was built from M_p = (p!)^s.
    """

    pmax: int
    logM: np.ndarray
    m: np.ndarray
    gevrey_index: float | None = None
    logm: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        logM = np.asarray(self.logM, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if self.pmax < 2:
            raise ValueError("pmax must be >= 2")
        if logM.shape != (self.pmax + 1,) or m.shape != (self.pmax,):
            raise ValueError("inconsistent table lengths")
        if logM[0] != 0.0:
            raise ValueError("M_0 must be 1 (logM[0] = 0)")
        if np.any(m <= 0):
            raise ValueError("ratios m_p must be positive")
        object.__setattr__(self, "logM", logM)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "logm", np.log(m))

    @property
    def is_log_convex(self) -> bool:
        return bool(np.all(np.diff(self.m) >= -1e-12 * np.abs(self.m[1:])))


def make_gevrey(s: float, pmax: int) -> WeightSequence:
    """Gevrey weight sequence M_p = (p!)^s, computed exactly in log-space.

    Rejects s <= 1: the ratio sum Σ 1/m_p = Σ p^{-s} then diverges and the
    class admits no nontrivial compactly supported members.
    """
    if s <= 1:
        raise ValueError(
            f"gevrey index must satisfy s > 1 (got {s}); "
            "for s <= 1 the ratio sum diverges and (M.3)' fails"
        )
    if pmax < 2:
        raise ValueError(f"pmax must be >= 2 (got {pmax})")
    p = np.arange(1, pmax + 1, dtype=float)
    logm = s * np.log(p)
    logM = np.concatenate([[0.0], np.cumsum(logm)])
    return WeightSequence(pmax=pmax, logM=logM, m=p**s, gevrey_index=float(s))


def from_table(M: np.ndarray, require_log_convex: bool = False) -> WeightSequence:
    """Weight sequence from an explicit table of M_p values, M[0] = 1.

    ``require_log_convex=False`` admits non-convex tables so that
    :func:`verify_conditions` can be exercised on deliberate violations.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 1 or len(M) < 3:
        raise ValueError("need M_p for p = 0..pmax with pmax >= 2")
    if M[0] != 1.0:
        raise ValueError("M_0 must be 1")
    if np.any(M <= 0):
        raise ValueError("weights must be positive")
    logM = np.log(M)
    m = M[1:] / M[:-1]
    W = WeightSequence(pmax=len(M) - 1, logM=logM, m=m)
    if require_log_convex and not W.is_log_convex:
        raise ValueError("table is not log-convex (ratios not nondecreasing)")
    return W


def extend(W: WeightSequence, pmax: int) -> WeightSequence:
    """Extend a Gevrey-built sequence to a larger pmax (exact closed form)."""
    if pmax <= W.pmax:
        return W
    if W.gevrey_index is None:
        raise ValueError("only Gevrey-built sequences can be extended exactly")
    return make_gevrey(W.gevrey_index, pmax)


@dataclass(frozen=True)
class ConditionReport:
    """Finite evidence for (M.1), (M.2), (M.3')."""

    m1_ok: bool
    m1_min_slack: float          # min over p of logM[p-1]+logM[p+1]-2 logM[p]
    m1_witness: int | None       # first violating p, when any
    m2_H: float                  # minimal H in the tail sense (see ledger)
    m2_A: float                  # minimal constant at that H
    m3_partial_sum: float        # sum of 1/m_p over the table
    m3_tail_estimate: float      # extrapolated tail (inf when growth <= 1)
    m3_ok: bool                  # tail estimate finite
    pmax: int

    @property
    def all_pass(self) -> bool:
        return self.m1_ok and self.m2_H >= 1.0 and self.m3_ok


def verify_conditions(W: WeightSequence) -> ConditionReport:
    """Check (M.1) on the table and compute finite surrogates for (M.2), (M.3')."""
    logM = W.logM
    # (M.1): 2 logM[p] <= logM[p-1] + logM[p+1], slack >= -1e-12
    slack = logM[:-2] + logM[2:] - 2.0 * logM[1:-1]
    m1_min = float(slack.min())
    bad = np.nonzero(slack < -1e-12)[0]
    m1_ok = bad.size == 0
    witness = int(bad[0] + 1) if not m1_ok else None

    # (M.2): c_t = max_{p+q=t} (logM[t] - logM[p] - logM[q]); H from sup c_t/t.
    pm = W.pmax
    c = np.full(pm + 1, -np.inf)
    for t in range(1, pm + 1):
        p = np.arange(0, t + 1)
        c[t] = np.max(logM[t] - logM[p] - logM[t - p])
    t = np.arange(1, pm + 1, dtype=float)
    logH = float(np.max(c[1:] / t))
    logH = max(logH, 0.0)
    logA = float(np.max(c[1:] - t * logH))
    logA = max(logA, 0.0)

    # (M.3)': partial sum plus a tail assuming the last observed ratio growth
    # continues; exact integral comparison for the Gevrey family.
    partial = float(np.sum(1.0 / W.m))
    if W.gevrey_index is not None:
        s = W.gevrey_index
        tail = pm ** (1.0 - s) / (s - 1.0)
    else:
        # local growth exponent from the last two ratios: m_p ~ m_pmax (p/pmax)^sigma
        sigma = (W.logm[-1] - W.logm[-2]) / np.log(pm / (pm - 1.0))
        tail = pm / (W.m[-1] * (sigma - 1.0)) if sigma > 1.0 else np.inf
    return ConditionReport(
        m1_ok=m1_ok,
        m1_min_slack=m1_min,
        m1_witness=witness,
        m2_H=float(np.exp(logH)),
        m2_A=float(np.exp(logA)),
        m3_partial_sum=partial,
        m3_tail_estimate=float(tail),
        m3_ok=bool(np.isfinite(tail)),
        pmax=pm,
    )


def assoc(W: WeightSequence, rho: float, pcap: int | None = None) -> float:
    """Associated function M(rho) = max_p (p log rho - log M_p), rho >= 0.

    The maximand is concave in p (log-convexity), but at desk scale a full
    vectorized scan is exact and fast; ties break toward smaller p and do not
    affect the value. Returns 0 at rho = 0 (the p = 0 term).
    """
    v, _, _ = assoc_detail(W, rho, pcap)
    return v


def assoc_detail(
    W: WeightSequence, rho: float, pcap: int | None = None
) -> tuple[float, int, bool]:
    """(value, argmax p, saturated) — ``saturated`` flags argmax at the table end,
    meaning pmax is too small to trust the value for this rho."""
    if rho < 0:
        raise ValueError("rho must be >= 0")
    if rho == 0.0:
        return 0.0, 0, False
    cap = W.pmax if pcap is None else min(pcap, W.pmax)
    p = np.arange(cap + 1)
    vals = p * np.log(rho) - W.logM[: cap + 1]
    k = int(np.argmax(vals))  # argmax returns the first (smallest p) maximizer
    return float(vals[k]), k, k == cap


def assoc_many(
    W: WeightSequence, rho: np.ndarray, pcap: int | None = None
) -> np.ndarray:
    """Vectorized associated function over an array of radii (chunked scan)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be >= 0")
    cap = W.pmax if pcap is None else min(pcap, W.pmax)
    logM = W.logM[: cap + 1]
    p = np.arange(cap + 1, dtype=float)
    out = np.zeros(rho.shape, dtype=float)
    flat = rho.ravel()
    res = out.ravel()
    # rho = 0 handled by the final clamp (p = 0 term); the tiny stand-in keeps
    # the outer product free of inf*0
    logr = np.log(np.maximum(flat, 1e-300))
    block = max(1, 2_000_000 // (cap + 1))
    for i in range(0, len(flat), block):
        sl = slice(i, i + block)
        vals = np.multiply.outer(logr[sl], p) - logM  # (block, cap+1)
        res[sl] = np.max(vals, axis=1)
    np.maximum(res, 0.0, out=res)  # p = 0 term
    return out
