"""Large-section-size limits: the limiting potential, thresholds and the Z-channel input bias."""
from __future__ import annotations

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .channel import ChannelSpec, _transitions, capacity, fisher, h2, precision, qinv
from .errors import InvalidSpec, QuadratureError
from .potential import U_un, output_entropy
from .se import SEConfig

LN2 = np.log(2.0)


def phi_un_large_b(E, spec: ChannelSpec, R, cfg: SEConfig = SEConfig()):
    """U_un(E) - max(0, 1 - Sigma^{-2}(E) / (2 ln 2))."""
    x = precision(spec, R, np.asarray(E, dtype=float), cfg.gh_nodes)
    return U_un(E, spec, R, cfg, check=False) - np.maximum(0.0, 1.0 - x / (2 * LN2))


def r_un_inf(spec: ChannelSpec) -> float:
    """Large-B algorithmic threshold of the underlying ensemble, per-channel closed form."""
    e = spec.param
    if spec.kind == "awgn":
        return 1.0 / (2 * LN2 * (1 + 1.0 / spec.param))
    if spec.kind == "bsc":
        return (1 - 2 * e) ** 2 / (np.pi * LN2)
    if spec.kind == "bec":
        return (1 - e) / (np.pi * LN2)
    if spec.pi_map == "sign":
        return (1 - e) / (np.pi * LN2 * (1 + e))
    p1 = spec.p1
    return ((1 - e) * np.exp(-qinv(p1) ** 2)
            / (4 * np.pi * LN2 * (1 - p1) * ((1 - p1) * e + p1)))


def r_un_inf_fisher(spec: ChannelSpec) -> float:
    """The same threshold through the Fisher information F(0|1) / (2 ln 2)."""
    return float(fisher(spec, 0.0, 1.0)) / (2 * LN2)


def r_pot_entropy(spec: ChannelSpec, nodes: int = 61) -> float:
    """Output entropy at E = 1 minus at E = 0, i.e. H(Y) - H(Y|pi(Z))."""
    H = output_entropy(spec, np.array([1.0, 0.0]), nodes)
    return float(H[0] - H[1])


def r_pot_integral(spec: ChannelSpec) -> float:
    """Direct adaptive-quadrature evaluation of the double-integral form of the large-B potential threshold."""
    if spec.kind == "awgn":
        s2 = 1.0 / spec.param
        out = lambda y: norm.logpdf(y, 0.0, np.sqrt(1.0 + s2))

        def inner(z):
            f = lambda n: norm.pdf(n) * (norm.logpdf(z + n * np.sqrt(s2), z, np.sqrt(s2))
                                         - out(z + n * np.sqrt(s2)))
            return integrate.quad(f, -12, 12, epsabs=1e-13, epsrel=1e-12)[0]

        val = integrate.quad(lambda z: norm.pdf(z) * inner(z), -12, 12,
                             epsabs=1e-13, epsrel=1e-12)[0]
        return val / LN2
    ys, wp, wm = _transitions(spec)
    th = spec.theta

    def P_out(k, z):
        return wp[k] if z > th else wm[k]

    total = 0.0
    for k in range(len(ys)):
        marg = integrate.quad(lambda z: norm.pdf(z) * P_out(k, z), -np.inf, th, epsabs=1e-14)[0] \
            + integrate.quad(lambda z: norm.pdf(z) * P_out(k, z), th, np.inf, epsabs=1e-14)[0]
        for lo, hi in ((-np.inf, th), (th, np.inf)):
            def f(z):
                p = P_out(k, z)
                return 0.0 if p == 0 else norm.pdf(z) * p * (np.log2(p) - np.log2(marg))
            total += integrate.quad(f, lo, hi, epsabs=1e-14)[0]
    return total


def r_pot_inf(spec: ChannelSpec, check: bool = True, tol: float = 1e-6) -> float:
    """Large-B potential threshold; equals the capacity under the induced input law."""
    c = capacity(spec)
    if check:
        alt = r_pot_entropy(spec)
        if abs(alt - c) > tol:
            raise QuadratureError(f"entropy route gives {alt:.10g}, capacity is {c:.10g}")
    return c


def z_optimal_bias(eps: float) -> float:
    """Capacity-achieving P(input = +1) for the Z channel flipping -1 inputs w.p. eps."""
    if not 0.0 <= eps < 1.0:
        raise InvalidSpec("need 0 <= eps < 1")
    return 1.0 - 1.0 / ((1 - eps) * (1 + 2.0 ** (h2(eps) / (1 - eps))))


def asymptotic_record(spec: ChannelSpec) -> dict:
    rec = {"channel": spec.kind, "param": spec.param,
           "r_un_inf": r_un_inf(spec), "capacity": capacity(spec)}
    if spec.kind == "z":
        rec["p1_star"] = float(z_optimal_bias(spec.param))
    return rec
