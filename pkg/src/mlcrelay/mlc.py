"""Multilevel coset encoder, the relay's effective coset code, and end-node recovery.

Level matrices are ``uint8`` arrays with one row per level (level 1 first) and
one column per code position.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal, Mapping

import numpy as np

from . import gf2dense
from .errors import DimensionMismatch, GeneratorMismatch
from .f2algebra import BinMatrix, DecodeFunction, invert


def _as_bits(a, name: str) -> np.ndarray:
    if isinstance(a, BinMatrix):
        a = a.to_list()
    arr = np.array(a, dtype=np.uint8, ndmin=2)
    if arr.size and arr.max() > 1:
        raise ValueError(f"{name} must contain only 0/1 entries")
    return arr


def _bin_to_array(m: BinMatrix) -> np.ndarray:
    return np.array(m.to_list(), dtype=np.uint8).reshape(m.rows, m.cols)


@dataclass(frozen=True, eq=False)
class CosetCode:
    """Linear code with K x N generator ``g`` and ell x N coset-leader matrix ``lam``."""

    g: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        g = _as_bits(self.g, "g")
        lam = _as_bits(self.lam, "lam")
        k, n = g.shape
        if not 0 < k <= n:
            raise ValueError(f"need 0 < K <= N, got K={k}, N={n}")
        if lam.shape[1] != n:
            raise DimensionMismatch("coset leaders must have N columns")
        if gf2dense.rank(g) != k:
            raise ValueError("generator must have full row rank")
        g.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "lam", lam)

    @property
    def k(self) -> int:
        return self.g.shape[0]

    @property
    def n(self) -> int:
        return self.g.shape[1]

    @property
    def ell(self) -> int:
        return self.lam.shape[0]

    @property
    def rate(self) -> float:
        return self.k / self.n

    def parity_check(self) -> np.ndarray:
        return gf2dense.nullspace(self.g)

    def same_linear_code(self, other: "CosetCode") -> bool:
        return self.g.shape == other.g.shape and bool(np.array_equal(self.g, other.g))


def random_coset_code(k: int, n: int, ell: int, rng: np.random.Generator) -> CosetCode:
    """Uniform full-rank generator with uniform coset leaders (rejection on rank)."""
    while True:
        g = rng.integers(0, 2, size=(k, n), dtype=np.uint8)
        if gf2dense.rank(g) == k:
            return CosetCode(g, rng.integers(0, 2, size=(ell, n), dtype=np.uint8))


def split_message(u: np.ndarray, ell: int, k: int) -> np.ndarray:
    """Row-major split of a flat message into ell rows of K bits, level 1 first."""
    u = np.asarray(u, dtype=np.uint8).ravel()
    if u.size != ell * k:
        raise DimensionMismatch(f"message has {u.size} bits, expected {ell * k}")
    return u.reshape(ell, k)


def encode(code: CosetCode, u: np.ndarray) -> np.ndarray:
    """``X = U G + Lambda`` over F2; row k is a codeword of coset ``lam[k] + C``."""
    u = _as_bits(u, "u")
    if u.shape != (code.ell, code.k):
        raise DimensionMismatch(f"message matrix {u.shape}, expected {(code.ell, code.k)}")
    return gf2dense.matmul(u, code.g) ^ code.lam


def relay_effective_code(code_a: CosetCode, code_b: CosetCode, f: DecodeFunction,
                         u_a: np.ndarray, u_b: np.ndarray):
    """Effective message, coset matrix and codeword matrix seen by the relay under ``f``.

    Returns ``(u_fr, lambda_fr, x_fr)`` with ``x_fr = u_fr G + lambda_fr``.
    """
    if not code_a.same_linear_code(code_b):
        raise GeneratorMismatch("both nodes must use cosets of the same linear code")
    if code_a.ell != f.ell or code_b.ell != f.ell:
        raise DimensionMismatch("code level count differs from the function's ell")
    comb = _bin_to_array(f.matrix)
    u_stack = np.vstack([_as_bits(u_a, "u_a"), _as_bits(u_b, "u_b")])
    lam_stack = np.vstack([code_a.lam, code_b.lam])
    u_fr = gf2dense.matmul(comb, u_stack)
    lambda_fr = gf2dense.matmul(comb, lam_stack)
    x_fr = gf2dense.matmul(u_fr, code_a.g) ^ lambda_fr
    return u_fr, lambda_fr, x_fr


def combine(f: DecodeFunction, x_a: np.ndarray, x_b: np.ndarray) -> np.ndarray:
    """``[D_A D_B] [X_A; X_B]`` evaluated directly on codeword matrices."""
    comb = _bin_to_array(f.matrix)
    return gf2dense.matmul(comb, np.vstack([_as_bits(x_a, "x_a"), _as_bits(x_b, "x_b")]))


def recover_peer(x_fr: np.ndarray, own: np.ndarray, f: DecodeFunction,
                 side: Literal["A", "B"]) -> np.ndarray:
    """Columnwise peer recovery, e.g. for side A: ``x_b = D_B^-1 (x_fr + D_A x_a)``."""
    x_fr = _as_bits(x_fr, "x_fr")
    own = _as_bits(own, "own")
    if x_fr.shape != own.shape or x_fr.shape[0] != f.ell:
        raise DimensionMismatch("x_fr and own must both be ell x N")
    if side == "A":
        mine, peer = f.d_a, f.d_b
    elif side == "B":
        mine, peer = f.d_b, f.d_a
    else:
        raise ValueError("side must be 'A' or 'B'")
    residual = x_fr ^ gf2dense.matmul(_bin_to_array(mine), own)
    return gf2dense.matmul(_bin_to_array(invert(peer)), residual)


def function_table(f: DecodeFunction | Callable[[int, int], int], ell: int) -> dict[tuple[int, int], int]:
    n = 2 ** ell
    return {(a, b): f(a, b) for a in range(n) for b in range(n)}


def check_unambiguous(f_table: Mapping[tuple[int, int], int], ell: int) -> bool:
    """True iff fixing either argument leaves the map injective in the other."""
    n = 2 ** ell
    if len(f_table) != n * n:
        raise ValueError("table must cover every (x_a, x_b) pair")
    for fixed in range(n):
        if len({f_table[(a, fixed)] for a in range(n)}) < n:
            return False
        if len({f_table[(fixed, b)] for b in range(n)}) < n:
            return False
    return True
