"""Potential functions of the underlying and coupled ensembles and the potential threshold.

F_un(E) = U_un(E) - S_un(Sigma(E)) where

    U_un(E) = -E Sigma^{-2}(E) / (2 ln 2) + H(E) / R,
    H(E)    = -E_Z sum_y phi(y|Z,E) log2 phi(y|Z,E),
    phi(y|z,E) = int dx P_out(y|x) N(x | z sqrt(1-E), E),

and S_un is the entropy-like term of the equivalent Gaussian channel (shared
with the state-evolution kernel).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import log_ndtr, ndtr

from .channel import ChannelSpec, _transitions, capacity, gauss_hermite, precision
from .code import CouplingSpec
from .errors import QuadratureError
from .se import (SEConfig, ThresholdResult, basin_edge, bisect_threshold, kernel_for,
                 mse_floor, precision_c)
from .se import _composite_legendre

LN2 = np.log(2.0)
V_MAX = 12.0      # h(v) equals its limits to double precision beyond this


def _entropy_bits(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.where(p > 0, p * np.log2(p), 0.0)


def _h_of_v(spec, v):
    """Output entropy (bits) of phi when the input sign is +1 w.p. Phi(v)."""
    ys, wp, wm = _transitions(spec)
    lp, lm = log_ndtr(v), log_ndtr(-v)
    total = np.zeros_like(v)
    for a, b in zip(wp, wm):
        with np.errstate(divide="ignore", invalid="ignore"):
            lphi = np.logaddexp(np.log(a) + lp, np.log(b) + lm)
            phi = np.exp(lphi)
            total = total - np.where(phi > 0, phi * lphi, 0.0) / LN2
    return total


def _h_limits(spec):
    ys, wp, wm = _transitions(spec)
    return float(_entropy_bits(wp).sum()), float(_entropy_bits(wm).sum())


def output_entropy(spec: ChannelSpec, E, nodes: int = 61, panels: int = 48):
    """H(E) = E_Z H(Y | Z) under phi(.|Z, E), in bits; vectorized over E."""
    E = np.asarray(E, dtype=float)
    if spec.kind == "awgn":
        return 0.5 * np.log2(2 * np.pi * np.e * (E + 1.0 / spec.param))
    th = spec.theta
    hp, hm = _h_limits(spec)
    out = np.empty(E.shape)
    flat_E = E.reshape(-1)
    res = out.reshape(-1)
    z, wz = gauss_hermite(nodes)
    vg, wg = _composite_legendre(-V_MAX, V_MAX, panels)
    for i, e in enumerate(flat_E):
        if e == 0.0:
            q = ndtr(-th)                       # P(input = +1)
            res[i] = q * hp + (1 - q) * hm
        elif e >= 0.5:
            v = (z * np.sqrt(1 - e) - th) / np.sqrt(e)
            res[i] = _h_of_v(spec, v) @ wz
        else:
            # v ~ N(-b, a^2) with a large: integrate over v directly
            a = np.sqrt((1 - e) / e)
            b = th / np.sqrt(e)
            dens = np.exp(-0.5 * ((vg + b) / a) ** 2) / (a * np.sqrt(2 * np.pi))
            mid = (_h_of_v(spec, vg) * dens) @ wg
            lo_tail = ndtr((-V_MAX + b) / a)
            hi_tail = ndtr((-V_MAX - b) / a)
            res[i] = mid + lo_tail * hm + hi_tail * hp
    return out


def U_un(E, spec: ChannelSpec, R, cfg: SEConfig = SEConfig(), check: bool = True):
    E = np.asarray(E, dtype=float)
    x = precision(spec, R, E, cfg.gh_nodes)
    with np.errstate(invalid="ignore"):
        ex = np.where(E == 0, 0.0, E * x)
    H = output_entropy(spec, E, cfg.gh_nodes)
    if check and spec.binary:
        H2 = output_entropy(spec, E, 2 * cfg.gh_nodes, panels=96)
        if np.any(np.abs(H2 - H) > 1e-8 * np.maximum(1.0, np.abs(H))):
            raise QuadratureError("output entropy changed under node doubling")
    return -ex / (2 * LN2) + H / R


def S_un(sigma, B: int, cfg: SEConfig = SEConfig()):
    """Entropy term of the equivalent Gaussian channel at noise level sigma (log base B)."""
    sigma = np.asarray(sigma, dtype=float)
    with np.errstate(divide="ignore"):
        x = 1.0 / sigma ** 2
    return kernel_for(B, cfg).entropy(x)


def _S_of_E(E, spec, R, B, cfg):
    return kernel_for(B, cfg).entropy(precision(spec, R, E, cfg.gh_nodes))


def F_un(E, spec, R, B, cfg: SEConfig = SEConfig()):
    return U_un(E, spec, R, cfg, check=False) - _S_of_E(E, spec, R, B, cfg)


@dataclass
class PotentialCurve:
    E: np.ndarray
    U: np.ndarray
    S: np.ndarray
    F: np.ndarray
    meta: dict = field(default_factory=dict)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["E", "U", "S", "F"])
            for row in zip(self.E, self.U, self.S, self.F):
                w.writerow([repr(float(v)) for v in row])


def potential_curve(grid, spec, R, B, cfg: SEConfig = SEConfig()) -> PotentialCurve:
    E = np.asarray(grid, dtype=float)
    if E.ndim != 1 or np.any(np.diff(E) <= 0):
        raise ValueError("grid must be strictly increasing")
    U = U_un(E, spec, R, cfg, check=False)
    S = _S_of_E(E, spec, R, B, cfg)
    meta = {"channel": spec.to_dict(), "R": R, "B": B}
    return PotentialCurve(E, U, S, U - S, meta)


@dataclass
class Gap:
    """Free-energy gap; ``value`` is inf when the floor's basin is all of [0, 1]."""
    value: float
    floor: float
    edge: float | None = None
    argmin: float | None = None

    @property
    def infinite(self) -> bool:
        return self.edge is None

    def to_dict(self):
        if self.infinite:
            return {"kind": "infinite", "floor": self.floor}
        return {"kind": "finite", "value": self.value, "floor": self.floor,
                "edge": self.edge, "argmin": self.argmin}


def _grid_min(f, lo, n):
    E = np.linspace(0.0, 1.0, n)
    E = np.r_[lo, E[E > lo]]
    vals = f(E)
    k = int(np.argmin(vals))
    a, b = E[max(k - 1, 0)], E[min(k + 1, len(E) - 1)]
    best_E, best = E[k], vals[k]
    if b > a:
        r = minimize_scalar(lambda e: float(f(np.array([e]))[0]), bounds=(a, b),
                            method="bounded", options={"xatol": 1e-10})
        if r.fun < best:
            best_E, best = r.x, r.fun
    return float(best), float(best_E)


def free_energy_gap(spec, R, B, cfg: SEConfig = SEConfig(), grid: int = 401,
                    check: bool = True) -> Gap:
    """inf over E outside the floor's basin of F_un(E) - F_un(E_f)."""
    Ef = mse_floor(spec, R, B, cfg)
    Eu = basin_edge(spec, R, B, cfg, floor=Ef, grid=grid)
    if Eu is None:
        return Gap(np.inf, Ef)
    f = lambda E: F_un(E, spec, R, B, cfg)
    F0 = float(f(np.array([Ef]))[0])
    best, arg = _grid_min(f, Eu, grid)
    if check:
        coarse, _ = _grid_min(f, Eu, (grid + 1) // 2)
        if abs(coarse - best) >= 1e-4:
            raise QuadratureError("gap moved by more than 1e-4 under grid halving")
    return Gap(best - F0, Ef, Eu, arg)


def r_pot(spec, B, cfg: SEConfig = SEConfig(), rate_tol=1e-4) -> ThresholdResult:
    def positive(R):
        return free_energy_gap(spec, R, B, cfg).value > 0
    return bisect_threshold(positive, rate_tol, start=0.5 * capacity(spec) or 0.1)


def F_co(profile, coupling: CouplingSpec, spec, R, B, cfg: SEConfig = SEConfig()):
    """sum_r U_un(E_r) - sum_c S_un(Sigma_c(E))."""
    E = np.asarray(getattr(profile, "E", profile), dtype=float)
    U = U_un(E, spec, R, cfg, check=False).sum()
    x = precision_c(E, coupling, spec, R, cfg.gh_nodes)
    return float(U - kernel_for(B, cfg).entropy(x).sum())
