"""Memoryless channels, the GAMP output function and Fisher-information machinery.

Binary-input channels are handled through the input threshold ``theta``: the
codeword component ``z`` is mapped to ``+1`` when ``z > theta`` and to ``-1``
otherwise (``theta = 0`` for the sign map, ``theta = Q^{-1}(p1)`` for the
biased sign map).  Every effective-channel quantity then only depends on the
two transition columns ``W(y|+1)`` and ``W(y|-1)``, e.g.

    f(y|p, tau) = W(y|+1) Phi(u) + W(y|-1) Phi(-u),   u = (p - theta) / sqrt(tau)

All likelihood ratios are evaluated in log space (``log_ndtr``) so Mills
ratios never underflow.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import entr, log_ndtr, ndtri

from .errors import DegenerateLikelihood, FitError, InvalidSpec, QuadratureError

KINDS = ("awgn", "bsc", "bec", "z")
PI_MAPS = ("identity", "sign", "biased_sign")
GH_NODES = 61
LN2 = np.log(2.0)
_LOG_SQRT_2PI = 0.5 * np.log(2 * np.pi)


@dataclass(frozen=True)
class ChannelSpec:
    kind: str
    param: float
    pi_map: str = "sign"
    p1: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown channel kind {self.kind!r}")
        if self.pi_map not in PI_MAPS:
            raise InvalidSpec(f"unknown input map {self.pi_map!r}")
        if self.kind == "awgn":
            if self.pi_map != "identity":
                raise InvalidSpec("awgn pairs only with the identity map")
            if not self.param > 0:
                raise InvalidSpec("awgn snr must be positive")
        else:
            if not 0.0 <= self.param <= 1.0:
                raise InvalidSpec(f"{self.kind} probability must lie in [0, 1]")
            allowed = ("sign", "biased_sign") if self.kind == "z" else ("sign",)
            if self.pi_map not in allowed:
                raise InvalidSpec(f"{self.kind} cannot use the {self.pi_map} map")
        if self.pi_map == "biased_sign":
            if self.p1 is None or not 0.0 < self.p1 < 1.0:
                raise InvalidSpec("biased_sign needs p1 in (0, 1)")
        elif self.p1 is not None:
            raise InvalidSpec("p1 only applies to the biased_sign map")

    @property
    def binary(self) -> bool:
        return self.kind != "awgn"

    @property
    def theta(self) -> float:
        """Input threshold of the sign-type map."""
        if self.pi_map == "biased_sign":
            return qinv(self.p1)
        return 0.0

    @property
    def alphabet(self):
        if self.kind == "awgn":
            return None
        if self.kind == "bec":
            return np.array([-1.0, 0.0, 1.0])
        return np.array([-1.0, 1.0])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "param": float(self.param), "pi_map": self.pi_map}
        if self.p1 is not None:
            d["p1"] = float(self.p1)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelSpec":
        extra = set(d) - {"kind", "param", "pi_map", "p1"}
        if extra:
            raise InvalidSpec(f"unexpected channel fields {sorted(extra)}")
        kind = d["kind"]
        default_map = "identity" if kind == "awgn" else "sign"
        return cls(kind, float(d["param"]), d.get("pi_map", default_map), d.get("p1"))


def awgn(snr):
    return ChannelSpec("awgn", snr, "identity")


def bsc(eps):
    return ChannelSpec("bsc", eps, "sign")


def bec(eps):
    return ChannelSpec("bec", eps, "sign")


def zchannel(eps, p1=None):
    if p1 is None:
        return ChannelSpec("z", eps, "sign")
    return ChannelSpec("z", eps, "biased_sign", p1)


# -- small numerics ---------------------------------------------------------

def h2(p):
    """Binary entropy in bits (exact 0 at the endpoints)."""
    p = np.asarray(p, dtype=float)
    return (entr(p) + entr(1.0 - p)) / LN2


def qinv(p):
    """Inverse Gaussian tail function, Q(qinv(p)) = p."""
    return -ndtri(p)


@lru_cache(maxsize=None)
def gauss_hermite(n: int):
    """Nodes/weights for E[g(T)], T ~ N(0, 1)."""
    t, w = hermegauss(n)
    return t, w / w.sum()


def _log_phi(u):
    return -0.5 * u * u - _LOG_SQRT_2PI


def _transitions(spec: ChannelSpec):
    """Output values with W(y|+1), W(y|-1) columns for a binary-input channel."""
    e = spec.param
    if spec.kind == "bsc":
        return np.array([-1.0, 1.0]), np.array([e, 1 - e]), np.array([1 - e, e])
    if spec.kind == "bec":
        return (np.array([-1.0, 0.0, 1.0]), np.array([0.0, e, 1 - e]),
                np.array([1 - e, e, 0.0]))
    if spec.kind == "z":
        return np.array([-1.0, 1.0]), np.array([0.0, 1.0]), np.array([1 - e, e])
    raise InvalidSpec("awgn has no discrete transition table")


def _lookup(spec, y):
    ys, wp, wm = _transitions(spec)
    y = np.asarray(y, dtype=float)
    idx = np.searchsorted(ys, y)
    idx = np.clip(idx, 0, len(ys) - 1)
    if not np.all(ys[idx] == y):
        raise InvalidSpec(f"observation outside the {spec.kind} output alphabet")
    return wp[idx], wm[idx]


def _log_mix(wp, wm, u):
    """log(wp * Phi(u) + wm * Phi(-u)) without underflow."""
    with np.errstate(divide="ignore"):
        return np.logaddexp(np.log(wp) + log_ndtr(u), np.log(wm) + log_ndtr(-u))


# -- operations ---------------------------------------------------------------

def input_map(spec: ChannelSpec, z):
    z = np.asarray(z, dtype=float)
    if not spec.binary:
        return z
    return np.where(z > spec.theta, 1.0, -1.0)


def sample_output(spec: ChannelSpec, z, rng: np.random.Generator):
    """Draw y ~ P_out(.|z) componentwise; deterministic given the generator state."""
    z = np.asarray(z, dtype=float)
    if spec.kind == "awgn":
        return z + rng.standard_normal(z.shape) / np.sqrt(spec.param)
    a = input_map(spec, z)
    draw = rng.random(z.shape)
    e = spec.param
    if spec.kind == "bsc":
        return np.where(draw < e, -a, a)
    if spec.kind == "bec":
        return np.where(draw < e, 0.0, a)
    # z channel: only the -1 input is ever flipped
    return np.where((a < 0) & (draw < e), 1.0, a)


def g_out_pair(spec: ChannelSpec, p, y, tau):
    """Score ``g_out`` and ``-d g_out / dp`` for the effective channel.

    ``g_out = (E[Z|p,y,tau] - p) / tau = d/dp ln f(y|p,tau)`` and
    ``-d g_out/dp = (tau - Var[Z|p,y,tau]) / tau**2``, with Z ~ N(p, tau).
    """
    p = np.asarray(p, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    if spec.kind == "awgn":
        v = tau + 1.0 / spec.param
        return (np.asarray(y, dtype=float) - p) / v, np.broadcast_to(1.0 / v, np.broadcast(p, tau, y).shape).copy()

    wp, wm = _lookup(spec, y)
    sq = np.sqrt(tau)
    u = (p - spec.theta) / sq
    logf = _log_mix(wp, wm, u)
    if np.any(np.isneginf(logf)):
        raise DegenerateLikelihood("observation has zero likelihood under f(y|p,tau)")
    score = (wp - wm) * np.exp(_log_phi(u) - logf) / sq
    return score, score * (score + u / sq)


def _fisher_sum(spec, u, k):
    """sum_y dW_y^2 phi(u)^k / f_y(u); terms vanish where phi(u) underflows."""
    ys, wp, wm = _transitions(spec)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        lphi = _log_phi(u)
        total = np.zeros(np.shape(u))
        for a, b in zip(wp, wm):
            if a == b:
                continue
            t = np.exp(k * lphi + 2 * np.log(abs(a - b)) - _log_mix(a, b, u))
            total = total + np.where(np.isneginf(lphi), 0.0, t)
    return total


def fisher(spec: ChannelSpec, p, E):
    """Fisher information F(p|E) of p in f(y|p,E); closed forms per channel."""
    p = np.asarray(p, dtype=float)
    E = np.asarray(E, dtype=float)
    if spec.kind == "awgn":
        return np.broadcast_to(1.0 / (1.0 / spec.param + E), np.broadcast(p, E).shape).copy()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = (p - spec.theta) / np.sqrt(E)
        out = _fisher_sum(spec, u, 2) / E
    # E = 0: the Fisher information collapses to 0 away from the threshold
    at_zero = E == 0
    if np.any(at_zero):
        out = np.where(at_zero, np.where(p == spec.theta, np.inf, 0.0), out)
    return out


def _smooth_fisher_factor(spec, u):
    """phi(u) * sum_y dW_y^2 / f_y(u), the part of F(p|E) that stays O(1)."""
    return _fisher_sum(spec, u, 1)


def fisher_mean(spec: ChannelSpec, E, nodes: int = GH_NODES):
    """E_{p ~ N(0, 1-E)} F(p|E), vectorized over E.

    For binary inputs F(p|E) peaks in a window of width sqrt(E) around the
    threshold.  Merging N(p|theta, E) from the Fisher density with the
    N(p|0, 1-E) weight gives a Gaussian of variance E(1-E); in its standard
    coordinate the remaining integrand is smooth, so Gauss-Hermite converges
    uniformly in E.  The result diverges like E^{-1/2} at E = 0 (returned as inf).
    """
    E = np.asarray(E, dtype=float)
    if np.any((E < 0) | (E > 1)):
        raise ValueError("E must lie in [0, 1]")
    if spec.kind == "awgn":
        return 1.0 / (1.0 / spec.param + E)
    t, w = gauss_hermite(nodes)
    th = spec.theta
    Ec = E[..., None]
    u = np.sqrt(1.0 - Ec) * t - th * np.sqrt(Ec)
    inner = _smooth_fisher_factor(spec, u) @ w
    with np.errstate(divide="ignore"):
        return np.exp(_log_phi(th)) * inner / np.sqrt(E)


def precision(spec: ChannelSpec, R, E, nodes: int = GH_NODES):
    """Inverse effective noise variance Sigma^{-2}(E) (inf where Sigma = 0)."""
    return fisher_mean(spec, E, nodes) / R


def sigma2(spec: ChannelSpec, R, E, nodes: int = GH_NODES, check: bool = True,
           rtol: float = 1e-8):
    """Effective noise variance Sigma^2(E) = R / E_p[F(p|E)].

    With ``check`` the node count is doubled and the two results must agree
    to ``rtol``; otherwise QuadratureError is raised.
    """
    if R <= 0:
        raise ValueError("rate must be positive")
    with np.errstate(divide="ignore"):
        out = R / fisher_mean(spec, E, nodes)
        if check and spec.binary:
            ref = R / fisher_mean(spec, E, 2 * nodes)
            bad = np.abs(out - ref) > rtol * np.abs(ref)
            if np.any(bad):
                raise QuadratureError(
                    f"Sigma^2 changed by more than {rtol:g} under node doubling")
    return out


def capacity(spec: ChannelSpec) -> float:
    """Mutual information of W under the input law induced by the map (bits)."""
    e = spec.param
    if spec.kind == "awgn":
        return 0.5 * np.log2(1.0 + spec.param)
    if spec.kind == "bsc":
        return float(1.0 - h2(e))
    if spec.kind == "bec":
        return float(1.0 - e)
    p1 = 0.5 if spec.p1 is None else spec.p1
    return float(h2((1 - p1) * (1 - e)) - (1 - p1) * h2(e))


def scaling_exponent_fit(spec: ChannelSpec, R, grid=None, rel_step=1e-2):
    """Least-squares exponent of lambda(E) = max(S, |S'|, |S''|), S = Sigma^{-2}.

    Returns ``(beta_hat, C_hat)`` from ``log lambda = log(C/R) + beta log(1/E)``
    fitted on a logarithmic grid; derivatives are central differences with
    step ``rel_step * E``.
    """
    if spec.kind not in ("bsc", "bec"):
        raise InvalidSpec("scaling fit is defined for the bsc and bec only")
    E = np.logspace(-4, np.log10(0.5), 40) if grid is None else np.asarray(grid, float)
    h = rel_step * E
    s0 = precision(spec, R, E)
    sp = precision(spec, R, E + h)
    sm = precision(spec, R, E - h)
    d1 = (sp - sm) / (2 * h)
    d2 = (sp - 2 * s0 + sm) / h**2
    lam = np.maximum.reduce([s0, np.abs(d1), np.abs(d2)])
    if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
        raise FitError("non-finite lambda(E) on the fit grid")
    beta, logc = np.polyfit(np.log(1.0 / E), np.log(lam), 1)
    return float(beta), float(R * np.exp(logc))
