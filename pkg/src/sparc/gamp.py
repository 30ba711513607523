"""GAMP decoder for sparse superposition codes with a sectionwise one-hot prior."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, g_out_pair
from .code import CodingMatrix, Message, pm_modulate, pm_demodulate
from .errors import DimensionError, DivergenceError

TAU_MIN = 1e-12
TAU_MAX = 1e12


def denoise_gin(r_hat, tau):
    """Posterior mean of one-hot sections observed in Gaussian noise.

    Works on the last axis, so ``r_hat`` may be a single B-vector or an
    (L, B) array; ``tau`` broadcasts against it.
    """
    r_hat = np.asarray(r_hat, dtype=float)
    tau = np.asarray(tau, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (2.0 * r_hat - 1.0) / (2.0 * tau)
    a = np.nan_to_num(a, nan=0.0)
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def denoise_var(g):
    g = np.asarray(g, dtype=float)
    return g * (1.0 - g)


def hard_decision(s_hat) -> Message:
    """One-hot at the largest component of each section (lowest index on ties)."""
    s_hat = np.asarray(s_hat)
    L, B = s_hat.shape
    s = np.zeros((L, B))
    s[np.arange(L), np.argmax(s_hat, axis=1)] = 1.0
    return Message(pm_demodulate(s), s, np.zeros(L, dtype=bool))


def section_error_rate(decoded: Message, truth: Message) -> float:
    if decoded.s.shape != truth.s.shape:
        raise DimensionError("messages differ in shape")
    free = ~truth.known
    if not free.any():
        return 0.0
    wrong = decoded.index[free] != truth.index[free]
    return float(wrong.mean())


@dataclass
class DecodeTrace:
    mse: list = field(default_factory=list)
    ser: list = field(default_factory=list)
    converged: bool = False
    iterations_run: int = 0

    def rows(self):
        return [(t, m, s) for t, (m, s) in enumerate(zip(self.mse, self.ser))]


def _metrics(s_hat, truth):
    mse = float(np.sum((s_hat - truth.s) ** 2) / truth.L)
    return mse, section_error_rate(hard_decision(s_hat), truth)


def gamp_decode(y, F, spec: ChannelSpec, n_iter: int, true_s: Message | None = None,
                stop_tol: float = 1e-8, B: int | None = None, init: str = "zero",
                F2=None):
    """Run GAMP and return ``(s_hat, trace)`` with ``s_hat`` of shape (L, B).

    ``init="zero"`` starts from s_hat = 0, tau_s = 1/B; ``init="prior"`` uses
    the prior mean 1/B and prior variance (1/B)(1 - 1/B).  Sections flagged
    ``known`` in ``true_s`` are held at their true value with zero variance.
    Iteration stops after ``n_iter`` steps, or earlier once the change in MSE
    (or, without ground truth, the mean squared change of s_hat per section)
    drops below ``stop_tol``, or once every free section is one-hot to within
    the variance floor or receives no output precision.  Sections whose output
    precision underflows keep their previous estimate; the clamped recursion
    would otherwise reset them to the prior.
    """
    A = F.F if isinstance(F, CodingMatrix) else np.asarray(F, dtype=float)
    y = np.asarray(y, dtype=float)
    M, N = A.shape
    if y.shape != (M,):
        raise DimensionError(f"y has shape {y.shape}, expected ({M},)")
    if true_s is not None:
        B = true_s.B
    if B is None:
        raise ValueError("section size B is required without a reference message")
    if N % B:
        raise DimensionError("N is not a multiple of B")
    L = N // B
    if true_s is not None and true_s.L != L:
        raise DimensionError("reference message does not match the matrix")
    A2 = A * A if F2 is None else F2

    if init == "zero":
        s_hat = np.zeros((L, B))
        tau_s = np.full((L, B), 1.0 / B)
    elif init == "prior":
        s_hat = np.full((L, B), 1.0 / B)
        tau_s = np.full((L, B), (1.0 / B) * (1.0 - 1.0 / B))
    else:
        raise ValueError(f"unknown init {init!r}")

    known = true_s.known if true_s is not None else np.zeros(L, dtype=bool)

    def pin(s, v):
        if known.any():
            s[known] = true_s.s[known]
            v[known] = 0.0

    pin(s_hat, tau_s)
    trace = DecodeTrace()
    if true_s is not None:
        m, e = _metrics(s_hat, true_s)
        trace.mse.append(m)
        trace.ser.append(e)

    z_hat = np.zeros(M)
    for t in range(n_iter):
        tau_p = A2 @ tau_s.reshape(-1)
        if not np.all(np.isfinite(tau_p)) or np.any(tau_p > TAU_MAX):
            raise DivergenceError(f"tau_p left the finite range at iteration {t}")
        tau_p = np.maximum(tau_p, TAU_MIN)
        p_hat = A @ s_hat.reshape(-1) - tau_p * z_hat
        z_hat, tau_z = g_out_pair(spec, p_hat, y, tau_p)
        raw = tau_z @ A2
        prec = np.clip(raw, TAU_MIN, TAU_MAX)
        tau_r = 1.0 / prec
        r_hat = s_hat.reshape(-1) + tau_r * (z_hat @ A)
        if not np.all(np.isfinite(r_hat)):
            raise DivergenceError(f"non-finite r_hat at iteration {t}")
        s_new = denoise_gin(r_hat.reshape(L, B), tau_r.reshape(L, B))
        tau_new = denoise_var(s_new)
        # output precision underflowed (saturated likelihood): no new evidence, keep the estimate
        stale = np.all(raw.reshape(L, B) < TAU_MIN, axis=1)
        s_new[stale] = s_hat[stale]
        tau_new[stale] = tau_s[stale]
        tau_s = tau_new
        pin(s_new, tau_s)
        delta = float(np.sum((s_new - s_hat) ** 2) / L)
        s_hat = s_new
        trace.iterations_run = t + 1
        if true_s is not None:
            m, e = _metrics(s_hat, true_s)
            trace.mse.append(m)
            trace.ser.append(e)
            delta = abs(trace.mse[-1] - trace.mse[-2])
        # nothing left to update: every free section one-hot or starved of evidence
        if delta < stop_tol or np.all((np.all(tau_s < TAU_MIN, axis=1) | stale)[~known]):
            trace.converged = True
            break
    return s_hat, trace


def prior_message(L: int, B: int) -> Message:
    """All-zero-bits message, handy as a placeholder reference."""
    return pm_modulate(np.zeros(L * (B.bit_length() - 1), dtype=np.uint8), B, L)
