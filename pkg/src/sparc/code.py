"""Sparse superposition code ensembles: messages, coupling designs and coding matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidSpec


@dataclass(frozen=True)
class CodeParams:
    L: int
    B: int
    R: float
    gamma: int = 1

    def __post_init__(self):
        if self.B < 2 or self.B & (self.B - 1):
            raise InvalidSpec("section size B must be a power of two >= 2")
        if self.L < 1 or self.R <= 0:
            raise InvalidSpec("need L >= 1 and R > 0")
        if self.gamma < 1:
            raise InvalidSpec("gamma must be >= 1")

    @property
    def logB(self) -> int:
        return self.B.bit_length() - 1

    @property
    def N(self) -> int:
        return self.L * self.B

    @property
    def M(self) -> int:
        # round up, then up to a multiple of the block count
        m = math.ceil(self.L * self.logB / self.R - 1e-9)
        return -(-m // self.gamma) * self.gamma

    @property
    def alpha(self) -> float:
        return self.M / self.N

    @property
    def realized_rate(self) -> float:
        return self.L * self.logB / self.M


@dataclass
class Message:
    u: np.ndarray          # L*log2(B) bits, uint8
    s: np.ndarray          # (L, B) one-hot, float
    known: np.ndarray      # (L,) bool, sections revealed to the decoder

    @property
    def L(self) -> int:
        return self.s.shape[0]

    @property
    def B(self) -> int:
        return self.s.shape[1]

    @property
    def index(self) -> np.ndarray:
        return np.argmax(self.s, axis=1)

    def flat(self) -> np.ndarray:
        return self.s.reshape(-1)


def pm_modulate(u, B: int, L: int) -> Message:
    """Position modulation: section l is one-hot at the integer value of its bits (MSB first)."""
    u = np.asarray(u, dtype=np.uint8).reshape(-1)
    k = B.bit_length() - 1
    if B < 2 or 1 << k != B:
        raise InvalidSpec("B must be a power of two >= 2")
    if u.size != L * k:
        raise DimensionError(f"expected {L * k} bits, got {u.size}")
    if np.any(u > 1):
        raise InvalidSpec("bits must be 0/1")
    weights = 1 << np.arange(k - 1, -1, -1)
    idx = u.reshape(L, k).astype(np.int64) @ weights
    s = np.zeros((L, B))
    s[np.arange(L), idx] = 1.0
    return Message(u, s, np.zeros(L, dtype=bool))


def pm_demodulate(s) -> np.ndarray:
    s = np.asarray(s)
    if s.ndim != 2:
        raise DimensionError("expected an (L, B) section array")
    L, B = s.shape
    k = B.bit_length() - 1
    idx = np.argmax(s, axis=1)
    shifts = np.arange(k - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def random_message(L: int, B: int, rng: np.random.Generator) -> Message:
    k = B.bit_length() - 1
    return pm_modulate(rng.integers(0, 2, L * k, dtype=np.uint8), B, L)


def seed_mask(L: int, gamma: int, w: int) -> np.ndarray:
    """Sections in the first and last 4w blocks are known to the decoder."""
    if L % gamma:
        raise DimensionError("L must be divisible by gamma")
    known = np.zeros(L, dtype=bool)
    if w > 0:
        per = L // gamma
        known[: 4 * w * per] = True
        known[L - 4 * w * per:] = True
    return known


# -- coupling --------------------------------------------------------------

@dataclass(frozen=True)
class DesignFunction:
    """Samples g_w(k/w) for k = -w..w, with the bound and Lipschitz constants they satisfy."""
    samples: tuple
    g_lower: float
    g_upper: float
    g_star: float

    @property
    def w(self) -> int:
        return (len(self.samples) - 1) // 2

    def validate(self, tol: float = 1e-12):
        g = np.asarray(self.samples, dtype=float)
        w = self.w
        if g.size != 2 * w + 1:
            raise InvalidSpec("design function needs 2w+1 samples")
        if not 0 < self.g_lower <= self.g_upper:
            raise InvalidSpec("need 0 < g_lower <= g_upper")
        if np.any(g < self.g_lower - tol) or np.any(g > self.g_upper + tol):
            raise InvalidSpec("design samples leave [g_lower, g_upper]")
        if w > 0:
            k = np.arange(-w, w + 1)
            dg = np.abs(g[:, None] - g[None, :])
            bound = self.g_star / w * np.abs(k[:, None] - k[None, :])
            if np.any(dg > bound + tol):
                raise InvalidSpec("design samples violate the Lipschitz bound")
        if abs(g.mean() - 1.0) > tol:
            raise InvalidSpec("design samples must average to 1")


def uniform_design(w: int) -> DesignFunction:
    return DesignFunction(tuple([1.0] * (2 * w + 1)), 1.0, 1.0, 0.0)


@dataclass(frozen=True)
class CouplingSpec:
    gamma: int
    w: int
    J: np.ndarray = field(repr=False)
    row_norm: np.ndarray = field(repr=False)

    @property
    def pinned(self) -> np.ndarray:
        """0-based indices of the pinned blocks (first and last 3w)."""
        g, w = self.gamma, self.w
        return np.r_[np.arange(3 * w), np.arange(g - 3 * w, g)].astype(int)


def build_design_variances(df: DesignFunction, gamma: int, w: int | None = None) -> CouplingSpec:
    """Row-normalized block variances J[r, c] = gamma_r g_w((c-r)/w) / (2w+1) on the band."""
    w = df.w if w is None else w
    if w != df.w:
        raise InvalidSpec("window w does not match the design function")
    df.validate()
    if gamma < 8 * w + 2:
        raise InvalidSpec("need gamma >= 8w+2 to fit both seeds")
    g = np.asarray(df.samples, dtype=float)
    J = np.zeros((gamma, gamma))
    r = np.arange(gamma)
    for k in range(-w, w + 1):
        c = r + k
        ok = (c >= 0) & (c < gamma)
        J[r[ok], c[ok]] = g[k + w] / (2 * w + 1)
    norm = 1.0 / J.sum(axis=1)
    J *= norm[:, None]
    return CouplingSpec(gamma, w, J, norm)


def effective_rate(R: float, w: int, gamma: int) -> float:
    """Rate after discounting the revealed seed blocks."""
    if gamma <= 8 * w:
        raise InvalidSpec("need gamma > 8w")
    return R * (1.0 - 8.0 * w / gamma)


# -- matrices --------------------------------------------------------------

@dataclass
class CodingMatrix:
    F: np.ndarray
    ensemble: str                    # "underlying" | "coupled"
    gamma: int = 1
    w: int = 0
    seed: int | None = None

    @property
    def shape(self):
        return self.F.shape

    def header(self) -> dict:
        M, N = self.F.shape
        return {"M": M, "N": N, "ensemble": self.ensemble, "gamma": self.gamma,
                "w": self.w, "seed": self.seed}


def block_std(params: CodeParams, coupling: CouplingSpec) -> np.ndarray:
    return np.sqrt(coupling.J * coupling.gamma / params.L)


def build_matrix(params: CodeParams, coupling: CouplingSpec | None,
                 rng: np.random.Generator, seed: int | None = None) -> CodingMatrix:
    M, N, L = params.M, params.N, params.L
    F = rng.standard_normal((M, N))
    if coupling is None:
        F *= 1.0 / np.sqrt(L)
        return CodingMatrix(F, "underlying", 1, 0, seed)
    g = coupling.gamma
    if M % g or L % g:
        raise DimensionError("M and L must be divisible by gamma")
    std = block_std(params, coupling)
    mr, nc = M // g, N // g
    for r in range(g):
        F[r * mr:(r + 1) * mr] *= np.repeat(std[r], nc)
    return CodingMatrix(F, "coupled", g, coupling.w, seed)


def encode(F, s) -> np.ndarray:
    A = F.F if isinstance(F, CodingMatrix) else np.asarray(F)
    x = s.flat() if isinstance(s, Message) else np.asarray(s, dtype=float).reshape(-1)
    if A.shape[1] != x.size:
        raise DimensionError(f"matrix has {A.shape[1]} columns, message has {x.size} entries")
    return A @ x
