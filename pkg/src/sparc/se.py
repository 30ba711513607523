"""State evolution for the underlying and spatially coupled ensembles.

The equivalent scalar problem is a one-hot section ``S`` observed as
``S + Z * Sigma / sqrt(log2 B)``.  Everything is written in terms of the
precision ``x = Sigma^{-2}``: with ``l = log2 B`` the denoiser logits are

    a = l x e_1 + sqrt(l x) Z

(``S`` is fixed to the first one-hot vector by symmetry).  The same logits
give the MMSE and the entropy-like term of the potential, so both share one
kernel and one frozen sample bank (common random numbers).  For ``B = 2``
only ``Z_2 - Z_1`` matters and the kernel is an exact 1-D quadrature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import expit

from .channel import GH_NODES, ChannelSpec, capacity, precision
from .code import CouplingSpec
from .errors import BracketError, DimensionError, MaxIterError, MonteCarloError

LN2 = np.log(2.0)
FLOOR_TOL = 1e-6


@dataclass(frozen=True)
class SEConfig:
    mc_samples: int = 100_000
    gh_nodes: int = GH_NODES
    tol: float = 1e-10
    max_iter: int = 10_000
    master_seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 2 or self.gh_nodes < 2 or self.max_iter < 1:
            raise ValueError("SEConfig counts must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class ThresholdResult:
    value: float
    bracket: tuple
    tol: float

    def to_dict(self):
        return {"value": self.value, "bracket": list(self.bracket), "tol": self.tol}


# -- the scalar MMSE kernel -------------------------------------------------

def _composite_legendre(lo, hi, panels, order=16):
    t, w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


class MMSEKernel:
    """mmse(x) and the entropy term s(x) of the equivalent Gaussian channel at precision x."""

    CHUNK = 1 << 21          # samples * B per bank chunk
    KEEP = 20_000_000        # keep the bank in memory below this many entries

    def __init__(self, B: int, n: int = 100_000, seed: int = 0):
        self.B = B
        self.l = np.log2(B)
        self.n = int(n)
        self.seed = seed
        self.exact = B == 2
        if self.exact:
            w, wt = _composite_legendre(-12.0, 12.0, 240)
            self._w = w
            self._wt = wt * np.exp(-0.5 * w * w) / np.sqrt(2 * np.pi)
        self._bank = None
        self._table = None

    # bank of standard normals, split in reproducible chunks
    def _chunks(self):
        if self._bank is not None:
            yield from self._bank
            return
        rows = max(1, self.CHUNK // self.B)
        out = []
        for k, start in enumerate(range(0, self.n, rows)):
            m = min(rows, self.n - start)
            rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(k,)))
            z = rng.standard_normal((m, self.B))
            out.append(z)
            yield z
        if self.n * self.B <= self.KEEP:
            self._bank = out

    def _samples(self, x):
        """Per-sample squared error and entropy term at a finite precision x > 0."""
        for z in self._chunks():
            a = z * np.sqrt(self.l * x)
            a[:, 0] += self.l * x
            m = a.max(axis=1, keepdims=True)
            e = np.exp(a - m)
            tot = e.sum(axis=1, keepdims=True)
            g = e / tot
            err = (1.0 - g[:, 0]) ** 2 + np.sum(g[:, 1:] ** 2, axis=1)
            ent = (np.log(tot[:, 0]) + m[:, 0] - a[:, 0]) / np.log(self.B)
            yield err, ent

    def _exact(self, x):
        x = np.asarray(x, dtype=float)[..., None]
        d = np.sqrt(2.0 * x) * self._w - x
        mm = 2.0 * expit(d) ** 2 @ self._wt
        ent = np.logaddexp(0.0, d) @ self._wt / LN2
        return mm, ent

    def evaluate(self, x, check: bool = False):
        """Return (mmse, entropy term) at precision(s) x; x may be 0 or inf."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        mm = np.empty_like(flat)
        ent = np.empty_like(flat)
        zero = flat <= 0
        inf = np.isinf(flat)
        mm[zero], ent[zero] = 1.0 - 1.0 / self.B, 1.0
        mm[inf], ent[inf] = 0.0, 0.0
        live = ~(zero | inf)
        if self.exact:
            if live.any():
                mm[live], ent[live] = self._exact(flat[live])
        else:
            for i in np.flatnonzero(live):
                errs, ents = zip(*self._samples(flat[i]))
                errs = np.concatenate(errs)
                ents = np.concatenate(ents)
                if check:
                    _half_split(errs)
                    _half_split(ents)
                mm[i], ent[i] = errs.mean(), ents.mean()
        return mm.reshape(x.shape), ent.reshape(x.shape)

    def mmse(self, x, check=False):
        return self.evaluate(x, check)[0]

    def entropy(self, x, check=False):
        return self.evaluate(x, check)[1]

    # interpolated mmse for the coupled recursion
    TABLE_RANGE = (1e-4, 1e3)
    TABLE_POINTS = 1200

    def table(self):
        """PCHIP of log mmse against log x; monotone whenever the samples are."""
        if self._table is None:
            lo, hi = self.TABLE_RANGE
            lx = np.linspace(np.log(lo), np.log(hi), self.TABLE_POINTS)
            vals = self.mmse(np.exp(lx))
            self._table_monotone = bool(np.all(np.diff(vals) <= 0))
            with np.errstate(over="ignore", divide="ignore"):
                self._table = PchipInterpolator(lx, np.log(np.maximum(vals, 1e-300)),
                                                extrapolate=False)
        return self._table

    def mmse_fast(self, x):
        """Interpolated mmse; falls back to the direct average outside the table range."""
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        lo, hi = self.TABLE_RANGE
        inside = (x >= lo) & (x <= hi)
        if inside.any():
            out[inside] = np.exp(self.table()(np.log(x[inside])))
        if (~inside).any():
            out[~inside] = self.mmse(x[~inside])
        return out


def _half_split(v):
    n = v.size // 2
    a, b = v[:n].mean(), v[n:2 * n].mean()
    se = np.sqrt(v[:n].var() / n + v[n:2 * n].var() / n)
    if abs(a - b) > 3.0 * se and abs(a - b) > 1e-14:
        raise MonteCarloError(f"half-sample estimates {a:.6g} and {b:.6g} disagree")


@lru_cache(maxsize=16)
def get_kernel(B: int, n: int, seed: int) -> MMSEKernel:
    return MMSEKernel(B, n, seed)


def kernel_for(B: int, cfg: SEConfig) -> MMSEKernel:
    return get_kernel(B, cfg.mc_samples, cfg.master_seed)


# -- underlying ensemble ----------------------------------------------------

def T_un(E, spec: ChannelSpec, R, B: int, cfg: SEConfig = SEConfig(), check: bool = False):
    """One step of the scalar recursion: mmse at the effective noise Sigma(E)."""
    x = precision(spec, R, E, cfg.gh_nodes)
    return kernel_for(B, cfg).mmse(x, check)


def trajectory_un(E0, spec, R, B, cfg: SEConfig = SEConfig(), n_iter=None, fast=True):
    """E^(0), E^(1), ... until |dE| < tol (or for exactly n_iter steps if given).

    ``fast`` reads the mmse from the interpolated table of the same sample
    bank instead of re-averaging the bank at every step.
    """
    kern = kernel_for(B, cfg)
    step = kern.mmse_fast if fast else kern.mmse
    traj = [float(E0)]
    steps = cfg.max_iter if n_iter is None else n_iter
    for _ in range(steps):
        traj.append(float(step(precision(spec, R, traj[-1], cfg.gh_nodes))))
        if n_iter is None and abs(traj[-1] - traj[-2]) < cfg.tol:
            return traj
    if n_iter is None:
        raise MaxIterError(f"no convergence in {cfg.max_iter} iterations", last=traj[-1])
    return traj


def iterate_un(E0, spec, R, B, cfg: SEConfig = SEConfig(), fast=True):
    return trajectory_un(E0, spec, R, B, cfg, fast=fast)[-1]


def mse_floor(spec, R, B, cfg: SEConfig = SEConfig()):
    return iterate_un(0.0, spec, R, B, cfg)


def _limit(E0, spec, R, B, cfg):
    try:
        return iterate_un(E0, spec, R, B, cfg)
    except MaxIterError as err:
        # creeping through a near-tangency: the last iterate is still stuck
        return err.last


def in_basin(E, spec, R, B, cfg: SEConfig = SEConfig(), floor=None, tol=FLOOR_TOL):
    Ef = mse_floor(spec, R, B, cfg) if floor is None else floor
    return abs(_limit(E, spec, R, B, cfg) - Ef) <= tol


def basin_edge(spec, R, B, cfg: SEConfig = SEConfig(), floor=None, grid=401):
    """Lower end E_u of the complement of the floor's basin, or None if it is empty.

    The scalar map is nondecreasing, so the basin is [0, E_u) with E_u the
    smallest fixed point above the floor.
    """
    Ef = mse_floor(spec, R, B, cfg) if floor is None else floor
    E = np.linspace(0.0, 1.0, grid)
    gap = T_un(E, spec, R, B, cfg) - E
    above = E > Ef + FLOOR_TOL
    idx = np.flatnonzero(above & (gap >= 0))
    if idx.size == 0:
        return None
    k = idx[0]
    if gap[k] == 0 or not above[k - 1] or gap[k - 1] >= 0:
        return float(E[k])
    f = lambda e: float(T_un(e, spec, R, B, cfg) - e)
    return float(brentq(f, E[k - 1], E[k], xtol=1e-12))


def bisect_threshold(pred, rate_tol=1e-4, start=0.1, max_steps=60) -> ThresholdResult:
    """Largest rate with pred(rate) true, assuming a monotone true -> false switch."""
    lo = hi = None
    r = start
    for _ in range(max_steps):
        if pred(r):
            lo = r
            if hi is not None:
                break
            r *= 2.0
        else:
            hi = r
            if lo is not None:
                break
            r *= 0.5
    if lo is None or hi is None:
        raise BracketError("could not bracket the threshold")
    while hi - lo > rate_tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(0.5 * (lo + hi), (lo, hi), rate_tol)


def r_un(spec, B, cfg: SEConfig = SEConfig(), rate_tol=1e-4) -> ThresholdResult:
    def decodable(R):
        return in_basin(1.0, spec, R, B, cfg)
    return bisect_threshold(decodable, rate_tol, start=0.5 * capacity(spec) or 0.1)


# -- coupled ensemble ---------------------------------------------------------

@dataclass
class Profile:
    E: np.ndarray
    pinned: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float).copy()
        self.pinned = np.asarray(self.pinned, dtype=int)
        self.E[self.pinned] = 0.0

    @classmethod
    def constant(cls, coupling: CouplingSpec, value=1.0):
        return cls(np.full(coupling.gamma, float(value)), coupling.pinned)


def degraded(E, G) -> str:
    """'strict' if E >= G with some strict inequality, 'weak' if E == G, else 'none'."""
    E = np.asarray(getattr(E, "E", E))
    G = np.asarray(getattr(G, "E", G))
    if E.shape != G.shape:
        raise DimensionError("profiles differ in length")
    if not np.all(E >= G):
        return "none"
    return "strict" if np.any(E > G) else "weak"


def precision_c(E, coupling: CouplingSpec, spec, R, gh_nodes=GH_NODES):
    """Per-block precision Sigma_c^{-2} = sum_r J[r, c] Sigma^{-2}(E_r)."""
    E = np.asarray(getattr(E, "E", E), dtype=float)
    s = precision(spec, R, E, gh_nodes)
    J = coupling.J
    with np.errstate(invalid="ignore"):
        terms = np.where(J > 0, J * s[:, None], 0.0)
    return terms.sum(axis=0)


def sigma_c(profile, coupling, spec, R, gh_nodes=GH_NODES):
    """Per-block effective noise variance Sigma_c^2 (0 where the precision is infinite)."""
    with np.errstate(divide="ignore"):
        return 1.0 / precision_c(profile, coupling, spec, R, gh_nodes)


def T_co(profile, coupling, spec, R, B, cfg: SEConfig = SEConfig(), fast=True):
    E = np.asarray(getattr(profile, "E", profile), dtype=float)
    x = precision_c(E, coupling, spec, R, cfg.gh_nodes)
    kern = kernel_for(B, cfg)
    m = kern.mmse_fast(x) if fast else kern.mmse(x)
    out = coupling.J @ m
    out[coupling.pinned] = 0.0
    return Profile(out, coupling.pinned)


def trajectory_co(coupling, spec, R, B, cfg: SEConfig = SEConfig(), E0=None, n_iter=None,
                  fast=True):
    E = Profile.constant(coupling, 1.0) if E0 is None else Profile(getattr(E0, "E", E0), coupling.pinned)
    traj = [E.E]
    steps = cfg.max_iter if n_iter is None else n_iter
    for _ in range(steps):
        E = T_co(E, coupling, spec, R, B, cfg, fast)
        traj.append(E.E)
        if n_iter is None and np.max(np.abs(traj[-1] - traj[-2])) < cfg.tol:
            return traj
    if n_iter is None:
        raise MaxIterError(f"no convergence in {cfg.max_iter} iterations",
                           last=Profile(traj[-1], coupling.pinned))
    return traj


def iterate_co(coupling, spec, R, B, cfg: SEConfig = SEConfig(), E0=None, fast=True) -> Profile:
    return Profile(trajectory_co(coupling, spec, R, B, cfg, E0, fast=fast)[-1], coupling.pinned)


def r_co(coupling, spec, B, cfg: SEConfig = SEConfig(), rate_tol=1e-4,
         floor_tol=FLOOR_TOL) -> ThresholdResult:
    """Largest rate whose coupled fixed profile from all-ones sits on the floor profile."""
    def decodable(R):
        Ef = mse_floor(spec, R, B, cfg)
        try:
            E = iterate_co(coupling, spec, R, B, cfg)
        except MaxIterError as err:
            E = err.last
        return bool(np.all(E.E <= Ef + floor_tol))
    return bisect_threshold(decodable, rate_tol, start=0.5 * capacity(spec) or 0.1)


def is_unimodal(E, tol=1e-12) -> bool:
    """Nondecreasing up to its maximum and nonincreasing after it."""
    E = np.asarray(getattr(E, "E", E))
    k = int(np.argmax(E))
    d = np.diff(E)
    return bool(np.all(d[:k] >= -tol) and np.all(d[k:] <= tol))
