"""Scenario-driven verification runner.

A scenario is a flat ``key = value`` text file (documented in
docs/report-schema.md); ``run_scenario`` wires the modules together, executes
the verification battery, and writes a machine-readable report plus CSV plot
data. Exit codes: 0 all enabled checks pass, 1 some check failed (report
still written — failed residuals are the interesting data), 2 configuration
error.

Determinism: all sampling is seeded, Halton sequences are unscrambled, and
array reductions are pairwise, so identical scenarios give byte-identical
report bodies (excluding the timestamp field) across runs and across thread
counts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.special import polygamma

from ._quadrature import integrate_uniform
from . import operators as op
from . import semigroup as sg
from . import testfn as tf
from . import transforms as tr
from . import ultrapoly as up
from . import weights as wt

__all__ = ["Scenario", "parse_scenario", "run_scenario", "emit_report", "main"]


# -- scenario ------------------------------------------------------------------


_DEFAULT_TOLS = {
    "weights_m1": 1e-12,
    "weights_m3": 1e-6,
    "assoc_exact": 1e-12,
    "assoc_monotone": 0.0,
    "lower_bound": 0.0,
    "upper_bound_L1_cap": 2.0,       # multiples of L
    "conjugation_exact": 0.0,
    "conjugation_identity": 1e-9,
    "conjugation_inequalities": 0.0,
    "roundtrip": 1e-10,
    "cauchy_agreement": 1e-8,
    "kernel_oracle": 1e-7,
    "kernel_refinement": 1e-6,
    "kernel_imag": 1e-10,
    "semigroup_oracle": 1e-6,
    "identity": 1e-6,
    "identity_refinement": 4.0,      # minimal decrease factor per halving
    "composition": 1e-5,
    "fundamental_zero": 1e-6,
    "fundamental_nonzero": 1e-5,
    "reconstruction": 1e-6,
    "ramp_independence": 1e-6,
    "nondegeneracy": 1e-8,
    "region_fit_kprime": 1.5,
    "restriction": 1e-7,
}


@dataclass
class Scenario:
    """Parsed scenario with defaults for everything but the weights."""

    name: str = "scenario"
    weights_s: float = 2.0
    weights_pmax: int = 400
    ultra_L: float = 0.5
    ultra_N: int = 2000
    line_abar: float = 1.2
    line_height: float = 150.0
    line_nodes: int = 7681
    line_rule: str = "trapezoid"
    generator_kind: str = "diagonal"
    generator_eigs: tuple = (0.0, -1.0, 1.0 + 2.0j)
    curve_k: float = 1.0
    curve_C: float = 0.0
    curve_n: int = 40
    curve_ystep: float = 1.0
    grid_tmax: float = 2.0
    grid_points: int = 201
    battery_count: int = 6
    battery_s: float = 1.5
    battery_n: int = 4096
    battery_low: float = 0.1
    battery_high: float = 0.9
    recon_lams: tuple = (2.0, 2.0 + 5.0j, 3.0 - 3.0j)
    recon_horizon: float = 40.0
    recon_ramp_s0: float = 0.25
    region_samples: int = 500
    halton_samples: int = 1000
    halton_radius: float = 1000.0
    seed: int = 7
    tol: dict = field(default_factory=dict)

    def tolerance(self, name: str) -> float:
        return float(self.tol.get(name, _DEFAULT_TOLS[name]))

    def validate(self) -> None:
        if self.ultra_L * self.line_abar >= 1.0:
            raise ValueError(
                f"L * abar = {self.ultra_L * self.line_abar:.4g} must be < 1"
            )
        if self.weights_s <= 1.0:
            raise ValueError("weights.s must be > 1")
        if self.grid_tmax <= 0 or self.grid_points < 3:
            raise ValueError("grid.tmax must be > 0 with at least 3 points")
        for k in self.tol:
            if k not in _DEFAULT_TOLS:
                raise ValueError(f"unknown tolerance key tol.{k}")
            if self.tol[k] <= 0 and k not in ("assoc_monotone", "lower_bound",
                                              "conjugation_exact",
                                              "conjugation_inequalities"):
                raise ValueError(f"tolerance tol.{k} must be positive")
        if self.generator_kind not in ("diagonal", "curve"):
            raise ValueError(f"unknown generator kind {self.generator_kind!r}")


def _parse_complex(txt: str) -> complex:
    return complex(txt.strip().replace(" ", "").replace("i", "j"))


def parse_scenario(path) -> Scenario:
    """Parse the flat key-value format; unknown keys are an error."""
    sc = Scenario(name=Path(path).stem)
    setters = {
        "weights.s": ("weights_s", float),
        "weights.pmax": ("weights_pmax", int),
        "ultra.L": ("ultra_L", float),
        "ultra.N": ("ultra_N", int),
        "line.abar": ("line_abar", float),
        "line.height": ("line_height", float),
        "line.nodes": ("line_nodes", int),
        "line.rule": ("line_rule", str),
        "generator.kind": ("generator_kind", str),
        "generator.eigs": ("generator_eigs",
                           lambda s: tuple(_parse_complex(x) for x in s.split(","))),
        "generator.curve.k": ("curve_k", float),
        "generator.curve.C": ("curve_C", float),
        "generator.curve.n": ("curve_n", int),
        "generator.curve.ystep": ("curve_ystep", float),
        "grid.tmax": ("grid_tmax", float),
        "grid.points": ("grid_points", int),
        "battery.count": ("battery_count", int),
        "battery.s": ("battery_s", float),
        "battery.n": ("battery_n", int),
        "battery.low": ("battery_low", float),
        "battery.high": ("battery_high", float),
        "recon.lams": ("recon_lams",
                       lambda s: tuple(_parse_complex(x) for x in s.split(","))),
        "recon.horizon": ("recon_horizon", float),
        "recon.ramp_s0": ("recon_ramp_s0", float),
        "region.samples": ("region_samples", int),
        "halton.samples": ("halton_samples", int),
        "halton.radius": ("halton_radius", float),
        "seed": ("seed", int),
    }
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, val = (part.strip() for part in stripped.split("=", 1))
            if key.startswith("tol."):
                sc.tol[key[4:]] = float(val)
                continue
            if key not in setters:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            attr, conv = setters[key]
            setattr(sc, attr, conv(val))
    sc.validate()
    return sc


# -- checks ---------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    tag: str            # the statement the check verifies (M.1, U.6, ...)
    value: float
    tolerance: float
    passed: bool
    mode: str = "max"   # "max": value <= tolerance; "min": value >= tolerance
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        rel = "<=" if self.mode == "max" else ">="
        return f"[{mark}] {self.name:28s} {self.tag:26s} {self.value:.3e} {rel} {self.tolerance:.3e}"


def _check(name, tag, value, tol, mode="max", **detail) -> CheckResult:
    value = float(value)
    ok = value <= tol if mode == "max" else value >= tol
    return CheckResult(name=name, tag=tag, value=value, tolerance=float(tol),
                       passed=bool(ok), mode=mode, detail=detail)


def _battery(sc: Scenario):
    width = 0.6 * (sc.battery_high - sc.battery_low)
    shift = (sc.battery_high - sc.battery_low - width) / max(sc.battery_count - 1, 1)
    out = []
    for i in range(sc.battery_count):
        a = sc.battery_low + i * shift
        out.append(tf.gevrey_bump(sc.battery_s, (a, a + width), sc.battery_n))
    return out


def run_checks(sc: Scenario, enabled=None) -> tuple[list, dict]:
    """Execute the battery; returns (results, artifacts for plot data)."""
    rng = np.random.default_rng(sc.seed)
    results: list[CheckResult] = []
    artifacts: dict = {}

    def want(name: str) -> bool:
        return enabled is None or name in enabled

    W = wt.make_gevrey(sc.weights_s, sc.weights_pmax)
    P = up.build(W, sc.ultra_L, sc.ultra_N)
    line = tr.BromwichLine(abar=sc.line_abar, height=sc.line_height,
                           nodes=sc.line_nodes, rule=sc.line_rule)
    if sc.generator_kind == "diagonal":
        gen = op.diagonal_generator(np.array(sc.generator_eigs))
    else:
        gen = op.curve_generator(W, sc.curve_k, sc.curve_C, sc.curve_n,
                                 y_step=sc.curve_ystep)
    artifacts["generator"] = gen

    # 1. weight sequence conditions -------------------------------------------
    if want("weights_m1") or want("weights_m3"):
        rep = wt.verify_conditions(W)
        if want("weights_m1"):
            results.append(_check(
                "weights_m1", "M.1", -min(rep.m1_min_slack, 0.0),
                sc.tolerance("weights_m1"),
                witness=rep.m1_witness, m2_H=rep.m2_H, m2_A=rep.m2_A,
            ))
        if want("weights_m3"):
            if abs(sc.weights_s - 2.0) < 1e-12:
                exact = float(np.pi**2 / 6.0 - polygamma(1, sc.weights_pmax + 1))
                err = abs(rep.m3_partial_sum - exact)
            else:
                err = 0.0 if rep.m3_ok else np.inf
            results.append(_check(
                "weights_m3", "M.3'", err, sc.tolerance("weights_m3"),
                partial_sum=rep.m3_partial_sum, tail=rep.m3_tail_estimate,
            ))

    # 2. associated function ---------------------------------------------------
    if want("assoc"):
        v = wt.assoc(W, 4.0)
        brute = max(p * np.log(4.0) - W.logM[p] for p in range(W.pmax + 1))
        results.append(_check(
            "assoc_exact", "assoc-function", abs(v - brute),
            sc.tolerance("assoc_exact"), value_at_4=v,
        ))
        rhos = np.exp(rng.uniform(np.log(1e-3), np.log(1e5), size=(1000, 2)))
        lo, hi = rhos.min(axis=1), rhos.max(axis=1)
        bad = int(np.count_nonzero(wt.assoc_many(W, lo) > wt.assoc_many(W, hi) + 1e-15))
        results.append(_check(
            "assoc_monotone", "assoc-function", bad,
            sc.tolerance("assoc_monotone"), pairs=1000,
        ))

    # 3. two-sided growth bounds ------------------------------------------------
    if want("growth_bounds"):
        zs = up.region_samples(P.L, sc.halton_samples, sc.halton_radius)
        rep = up.verify_growth_bounds(P, zs)
        results.append(_check(
            "lower_bound", "symbol-lower-bound", rep.violations_statement,
            sc.tolerance("lower_bound"),
            samples=int(len(zs)), apex=rep.apex_count,
            display_variant_violations=rep.violations_display_chain,
        ))
        capL1, capC = rep.upper_capped
        ok_cap = np.isfinite(capC) and capL1 <= sc.tolerance("upper_bound_L1_cap") * P.L
        results.append(_check(
            "upper_bound", "symbol-upper-bound",
            capL1 / P.L if np.isfinite(capC) else np.inf,
            sc.tolerance("upper_bound_L1_cap"),
            C_at_cap=capC, stable_fit=rep.upper_stable,
        ))
        artifacts["growth_report"] = rep

    # 4. exponential-conjugation calculus ---------------------------------------
    if want("conjugation"):
        b, fit = up.exp_conjugate([1.0, 0.0, 1.0], 1.0)
        exact_err = float(np.max(np.abs(b - np.array([2.0, -2.0, 1.0]))))
        results.append(_check(
            "conjugation_exact", "exp-conjugation", exact_err,
            sc.tolerance("conjugation_exact"),
        ))
        worst = 0.0
        for _ in range(20):
            deg = int(rng.integers(1, 7))
            g = rng.normal(size=deg + 1)
            a = rng.normal(size=int(rng.integers(1, 6)))
            shiftv = float(rng.choice([-1.0, 0.5, 2.0]))
            worst = max(worst, up.conjugation_identity_residual(
                a, shiftv, g, np.linspace(-1.5, 1.5, 10)))
        results.append(_check(
            "conjugation_identity", "exp-conjugation", worst,
            sc.tolerance("conjugation_identity"), cases=20,
        ))
        viol = 0
        import math as _m
        for j in range(1, 41):
            for k in range(1, 41):
                if _m.comb(j + k, j) > 2.0 ** (k + 1) * float(k) ** k * _m.exp(j):
                    viol += 1
        for j in range(1, 61):
            for k in range(1, 61):
                if float(j) ** k > float(k) ** k * _m.exp(j):
                    viol += 1
        results.append(_check(
            "conjugation_inequalities", "binomial-inequalities", viol,
            sc.tolerance("conjugation_inequalities"),
        ))
        if P.coeffs is not None:
            bb, fit2 = up.exp_conjugate(P.coeffs, 1.0, W=W)
            results.append(_check(
                "conjugation_flagship_fit", "exp-conjugation",
                0.0 if fit2["finite"] else np.inf, 0.0,
                sup=fit2["sup"], Lhat=fit2["Lhat"],
            ))

    # 5. multiplier bijection round trip ----------------------------------------
    if want("roundtrip"):
        worst = 0.0
        for phi in _battery(sc)[:5]:
            back = tr.divide_P(P, tr.apply_P(P, phi))
            num = np.linalg.norm(back.values - phi.values)
            den = np.linalg.norm(phi.values)
            worst = max(worst, float(num / den))
        results.append(_check(
            "roundtrip", "multiplier-bijection", worst, sc.tolerance("roundtrip"),
        ))
        agree = 0.0
        Cfit = 0.0
        for xi in (0.0, 1.0, 10.0):
            quad, r = tr.cauchy_reciprocal_derivative(P, xi)
            ana = tr.reciprocal_derivative(P, xi)
            agree = max(agree, abs(quad - ana))
            env = (1.0 / r) * np.exp(wt.assoc(W, (P.L + 1.0) * abs(xi)))
            Cfit = max(Cfit, abs(ana) / env)
        results.append(_check(
            "cauchy_estimate", "reciprocal-derivative-bound", agree,
            sc.tolerance("cauchy_agreement"), fitted_C=Cfit,
        ))

    # 6. kernel construction ------------------------------------------------------
    if want("kernel"):
        Wk = wt.make_gevrey(2.0, 8)
        P1 = up.build(Wk, 1.0, 1)
        line1 = tr.BromwichLine(abar=0.5, height=1500.0, nodes=60001)
        tg1 = np.linspace(0.1, 3.0, 30)
        k1 = tr.bromwich_kernel(P1, line1, tg1, tol=1e-4)
        oracle = 0.5 * np.exp(-tg1)
        results.append(_check(
            "kernel_oracle", "kernel-inversion",
            float(np.max(np.abs(k1.K - oracle))), sc.tolerance("kernel_oracle"),
        ))
        tg = np.linspace(0.0, sc.grid_tmax, sc.grid_points)
        ker = tr.bromwich_kernel(P, line, tg, tol=1e-7)
        line2 = tr.BromwichLine(abar=sc.line_abar, height=2 * sc.line_height,
                                nodes=2 * sc.line_nodes - 1, rule=sc.line_rule)
        ker2 = tr.bromwich_kernel(P, line2, tg, tol=1e-7)
        rel = float(np.max(np.abs(ker.K - ker2.K)) / np.max(np.abs(ker.K)))
        results.append(_check(
            "kernel_refinement", "kernel-inversion", rel,
            sc.tolerance("kernel_refinement"),
            certificate=ker.tail_certificate,
        ))
        results.append(_check(
            "kernel_imag", "kernel-symmetry", ker.imag_residual,
            sc.tolerance("kernel_imag"),
        ))
        envC = float(np.max(np.abs(ker.K) * np.exp(-tg)))
        results.append(_check(
            "kernel_envelope", "kernel-envelope",
            0.0 if np.isfinite(envC) else np.inf, 0.0, fitted_C=envC,
        ))
        artifacts["kernel"] = ker

    # 7-12. semigroup battery ------------------------------------------------------
    S = None
    if sc.generator_kind == "diagonal" and any(
        want(n) for n in ("semigroup", "identity", "composition",
                          "fundamental", "reconstruction", "nondegeneracy",
                          "restriction")
    ):
        tg = np.linspace(0.0, sc.grid_tmax, sc.grid_points)
        S = sg.construct(gen, P, line, tg)
        artifacts["semigroup"] = S

    if S is not None and want("semigroup"):
        worst = 0.0
        for i in range(gen.dim):
            mu = gen.eigs[i]
            # time-domain Simpson convolution of the kernel with e^{mu u},
            # kernel re-evaluated on a doubled grid for even panel counts
            fine = np.linspace(0.0, sc.grid_tmax, 2 * sc.grid_points - 1)
            Kf = S.kernel.eval_at(fine)
            dtf = fine[1] - fine[0]
            orc = np.zeros(len(S.tgrid), dtype=complex)
            for j, t in enumerate(S.tgrid):
                jj = 2 * j
                if jj == 0:
                    continue
                u = fine[: jj + 1]
                orc[j] = integrate_uniform(Kf[: jj + 1][::-1] * np.exp(mu * u), dtf)
            got = S.S[:, i, i]
            scale = float(np.max(np.abs(orc))) or 1.0
            worst = max(worst, float(np.max(np.abs(got - orc)) / scale))
        results.append(_check(
            "semigroup_oracle", "convoluted-oracle", worst,
            sc.tolerance("semigroup_oracle"),
            normalization="per-eigenvalue grid max",
        ))

    if S is not None and want("identity"):
        worst = 0.0
        basis = np.eye(gen.dim)
        for t in S.tgrid[:: max(len(S.tgrid) // 50, 1)]:
            for x in basis:
                worst = max(worst, sg.identity_residual(S, x, float(t)))
        for x in basis:  # always include the endpoint
            worst = max(worst, sg.identity_residual(S, x, float(S.tgrid[-1])))
        results.append(_check(
            "identity", "convoluted-identity", worst, sc.tolerance("identity"),
            construction_floor=S.construction_floor,
        ))
        # refinement study at t = tmax/2, on a coarse ladder where the
        # cumulative-Simpson term dominates the quadrature floor
        res = []
        steps = []
        for pts in (11, 21, 41, 81):
            tgr = np.linspace(0.0, sc.grid_tmax, pts)
            Sr = sg.construct(gen, P, line, tgr)
            probe = tgr[len(tgr) // 2]
            res.append(max(sg.identity_residual(Sr, x, float(probe))
                           for x in basis))
            steps.append(tgr[1] - tgr[0])
        floor = 2e-8
        ratios = [res[i] / max(res[i + 1], 1e-300) for i in range(len(res) - 1)]
        eff = [r for r, fine_res in zip(ratios, res[1:]) if fine_res > floor]
        value = min(eff) if eff else np.inf
        results.append(_check(
            "identity_refinement", "convoluted-identity", value,
            sc.tolerance("identity_refinement"), mode="min",
            residuals=res, steps=steps, floor=floor,
        ))
        artifacts["refinement"] = {"steps": steps, "residuals": res}

    if S is not None and want("composition"):
        battery = _battery(sc)
        worst = 0.0
        pairs = 0
        for i in range(len(battery)):
            for j in range(i, len(battery)):
                if pairs >= 6:
                    break
                worst = max(worst, sg.composition_residual(S, battery[i], battery[j]))
                pairs += 1
        results.append(_check(
            "composition", "U.6", worst, sc.tolerance("composition"), pairs=pairs,
        ))

    if S is not None and want("fundamental"):
        x = rng.normal(size=gen.dim) + 1j * rng.normal(size=gen.dim)
        worst0 = 0.0
        span = sc.grid_tmax * 0.9
        for i in range(4):
            a = 0.05 * sc.grid_tmax + i * 0.02 * sc.grid_tmax
            phi = tf.gevrey_bump(sc.battery_s, (a, a + 0.8 * span), sc.battery_n)
            worst0 = max(worst0, sg.fundamental_residual(S, phi, x))
        results.append(_check(
            "fundamental_zero", "fundamental-solution", worst0,
            sc.tolerance("fundamental_zero"),
        ))
        worstn = 0.0
        for i in range(4):
            half = 0.15 + 0.08 * i
            phi = tf.gevrey_bump(sc.battery_s, (-half, half + 0.1), sc.battery_n)
            worstn = max(worstn, sg.fundamental_residual(S, phi, x))
        results.append(_check(
            "fundamental_nonzero", "fundamental-solution", worstn,
            sc.tolerance("fundamental_nonzero"),
        ))

    if S is not None and want("reconstruction"):
        s0 = sc.recon_ramp_s0
        pad = 4 * s0
        n = 8192
        w0 = -pad
        w1 = sc.recon_horizon + 0.36  # overhang keeps the ramp clear of the seam
        g = tf.ramp_cutoff(sc.battery_s, s0, n, (w0, w1))
        worst = 0.0
        for lam in sc.recon_lams:
            G = sg.resolvent_reconstruct(S, complex(lam), g, horizon=sc.recon_horizon)
            R = gen.resolvent(complex(lam))
            worst = max(worst, float(np.linalg.norm(G - R, 2)))
        results.append(_check(
            "reconstruction", "resolvent-reconstruction", worst,
            sc.tolerance("reconstruction"), lams=[str(l) for l in sc.recon_lams],
        ))
        g2 = tf.ramp_cutoff(sc.battery_s, 2 * s0, n, (w0 - pad, w1 - pad))
        G1 = sg.resolvent_reconstruct(S, complex(sc.recon_lams[0]), g,
                                      horizon=sc.recon_horizon)
        G2 = sg.resolvent_reconstruct(S, complex(sc.recon_lams[0]), g2,
                                      horizon=sc.recon_horizon)
        results.append(_check(
            "ramp_independence", "resolvent-reconstruction",
            float(np.linalg.norm(G1 - G2, 2)), sc.tolerance("ramp_independence"),
        ))

    if S is not None and want("nondegeneracy"):
        battery = _battery(sc)[:5]
        rep = sg.nondegeneracy(S, np.eye(gen.dim), battery,
                               threshold=sc.tolerance("nondegeneracy"))
        results.append(_check(
            "nondegeneracy", "U.2", float(np.min(rep.margins)),
            sc.tolerance("nondegeneracy"), mode="min",
            margins=rep.margins.tolist(),
        ))

    if S is not None and want("restriction"):
        half_pts = (sc.grid_points - 1) // 2 + 1
        tg_half = np.linspace(0.0, sc.grid_tmax / 2.0, half_pts)
        S_half = sg.construct(gen, P, line, tg_half)
        phi = _battery(sc)[0]
        G1 = sg.udsg_apply(S_half, phi)
        G2 = sg.udsg_apply(S, phi)
        results.append(_check(
            "restriction", "restriction-consistency",
            float(np.linalg.norm(G1 - G2, 2)), sc.tolerance("restriction"),
        ))

    # 13. resolvent growth fits ----------------------------------------------------
    if want("region_fit"):
        Wc = wt.make_gevrey(2.0, 400)
        cg = op.curve_generator(Wc, 1.0, 0.0, 40)
        samples = []
        ymax = 40 * 1.0 + 2.0
        count = sc.region_samples
        offsets = np.array([0.05, 0.1, 0.2, 0.5, 1.0, 2.0])
        ys = rng.uniform(0.2, ymax, size=count)
        for y in ys:
            xb = op.omega_boundary_x(float(y), Wc, 1.0, 0.0)
            samples.append(xb + float(rng.choice(offsets)) + 1j * float(y))
        fit = op.resolvent_bound_fit(cg, np.array(samples), Wc, 1.0, 0.0)
        results.append(_check(
            "region_fit", "resolvent-region-bound", fit.kprime,
            sc.tolerance("region_fit_kprime"),
            C=fit.C, stable=fit.stable, nsamples=fit.nsamples,
        ))
        hs = 2.0 + rng.uniform(0.1, 30.0, 200) + 1j * rng.uniform(-30.0, 30.0, 200)
        fit2 = op.resolvent_bound_fit(cg, hs, Wc, 1.0, 0.0,
                                      mode="half-plane", a=2.0)
        results.append(_check(
            "halfplane_fit", "resolvent-halfplane-bound",
            0.0 if np.isfinite(fit2.C) else np.inf, 0.0,
            kprime=fit2.kprime, C=fit2.C,
        ))
        artifacts["curve_generator"] = cg
        artifacts["omega_weights"] = Wc

    return results, artifacts


# -- reports ---------------------------------------------------------------------


def emit_report(results, artifacts, sc: Scenario, out_dir, runtime: float) -> Path:
    """Write report.json and the CSV plot data; returns the report path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body = {
        "scenario": {k: (str(v) if isinstance(v, (tuple,)) else v)
                     for k, v in asdict(sc).items()},
        "checks": [
            {
                "name": r.name,
                "tag": r.tag,
                "value": r.value,
                "tolerance": r.tolerance,
                "mode": r.mode,
                "passed": r.passed,
                "detail": _jsonable(r.detail),
            }
            for r in results
        ],
        "summary": {
            "total": len(results),
            "passed": int(sum(r.passed for r in results)),
            "failed": int(sum(not r.passed for r in results)),
        },
        "runtime_s": round(runtime, 3),
    }
    payload = dict(body)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    report = out / "report.json"
    with open(report, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    ker = artifacts.get("kernel")
    if ker is not None:
        ker.to_csv(out / "kernel.csv")
    S = artifacts.get("semigroup")
    if S is not None:
        S.norms_to_csv(out / "snorm.csv")
    gen = artifacts.get("generator")
    cg = artifacts.get("curve_generator")
    Wc = artifacts.get("omega_weights")
    if cg is not None and Wc is not None:
        rows = [("eig", mu.real, mu.imag) for mu in cg.eigs]
        for y in np.linspace(0.2, 42.0, 85):
            xb = op.omega_boundary_x(float(y), Wc, 1.0, 0.0)
            rows.append(("boundary", xb, y))
        with open(out / "spectrum.csv", "w") as fh:
            fh.write("kind,re,im\n")
            for kind, re, im in rows:
                fh.write(f"{kind},{re!r},{im!r}\n")
    elif gen is not None:
        gen.spectrum_to_csv(out / "spectrum.csv")
    ref = artifacts.get("refinement")
    if ref is not None:
        with open(out / "refinement.csv", "w") as fh:
            fh.write("dt,identity_residual\n")
            for dt, res in zip(ref["steps"], ref["residuals"]):
                fh.write(f"{dt!r},{res!r}\n")
    return report


def _jsonable(d: dict):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            out[k] = float(v)
        elif isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, (list, tuple)):
            out[k] = [float(x) if isinstance(x, (np.floating, np.integer)) else x
                      for x in v]
        elif isinstance(v, (int, float, str, bool)) or v is None:
            out[k] = v
        else:
            out[k] = str(v)
    return out


# -- entry points ------------------------------------------------------------------


def run_scenario(path, out_dir=None, checks=None, threads=None) -> int:
    """Run a scenario file; returns the process exit code (0 / 1 / 2)."""
    try:
        sc = parse_scenario(path)
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if out_dir is None:
        out_dir = os.environ.get("ULTRASEMI_OUT", f"out-{sc.name}")
    # thread counts do not affect results (pairwise reductions); recorded only
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", tf.ResolutionWarning)
        try:
            results, artifacts = run_checks(sc, enabled=checks)
        except (ValueError, tr.CertificateError) as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return 2
    runtime = time.perf_counter() - t0
    report = emit_report(results, artifacts, sc, out_dir, runtime)
    for r in results:
        print(r.line())
    nfail = sum(not r.passed for r in results)
    print(f"{len(results) - nfail}/{len(results)} checks passed "
          f"in {runtime:.1f}s -> {report}")
    return 0 if nfail == 0 else 1


def bundled_scenario(name: str) -> Path:
    return Path(__file__).parent / "scenarios" / f"{name}.scn"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="ultrasemi",
        description="Scenario-driven verification runner for convoluted "
                    "semigroups over ultrapolynomial symbols",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)
    runp = sub.add_parser("run", help="run a scenario file")
    runp.add_argument("scenario", help="scenario file path or bundled name")
    runp.add_argument("--out", default=None, help="output directory "
                      "(default: out-<name>, or $ULTRASEMI_OUT)")
    runp.add_argument("--threads", type=int, default=None,
                      help="worker threads (results are identical regardless)")
    runp.add_argument("--check", action="append", default=None,
                      help="run only the named checks (repeatable)")
    args = ap.parse_args(argv)
    path = Path(args.scenario)
    if not path.exists():
        cand = bundled_scenario(args.scenario)
        if cand.exists():
            path = cand
        else:
            print(f"configuration error: no scenario {args.scenario!r}",
                  file=sys.stderr)
            return 2
    checks = set(args.check) if args.check else None
    return run_scenario(path, out_dir=args.out, checks=checks,
                        threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
