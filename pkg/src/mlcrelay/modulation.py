"""Labeled constellations, the relay's effective constellation, and the MA channel.

Noise convention: ``sigma2`` is the variance per real component, total noise
power is ``2 * sigma2`` and, for unit-energy constellations,
``SNR = 1 / (2 * sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySubset
from .f2algebra import BinMatrix, DecodeFunction, address_from_str


@dataclass(frozen=True)
class LabeledConstellation:
    """``points[x]`` is the symbol M(x) for packed address ``x``."""

    ell: int
    points: tuple[complex, ...]

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) != 2 ** self.ell:
            raise ValueError(f"need {2 ** self.ell} points, got {len(pts)}")
        if len(set(pts)) != len(pts):
            raise ValueError("constellation points must be distinct")
        energy = sum(abs(p) ** 2 for p in pts) / len(pts)
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"average energy {energy} != 1")

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=complex)

    def label_of(self, point: complex) -> int:
        return self.points.index(point)

    def __call__(self, x: int) -> complex:
        return self.points[x]


def qpsk_gray() -> LabeledConstellation:
    """QPSK with M(00)=1, M(01)=j, M(11)=-1, M(10)=-j (level 1 written first)."""
    table = {"00": 1 + 0j, "01": 1j, "11": -1 + 0j, "10": -1j}
    pts = [0j] * 4
    for s, q in table.items():
        pts[address_from_str(s)] = q
    return LabeledConstellation(2, tuple(pts))


def label_subset(c: LabeledConstellation, fixed: Mapping[int, int]) -> set[complex]:
    """Points whose addresses agree with ``fixed`` ({level (1-based): bit})."""
    for k in fixed:
        if not 1 <= k <= c.ell:
            raise ValueError(f"level {k} outside 1..{c.ell}")
    return {
        q for x, q in enumerate(c.points)
        if all(((x >> (k - 1)) & 1) == b for k, b in fixed.items())
    }


@dataclass(frozen=True)
class ChannelPair:
    h_a: complex
    h_b: complex

    def __post_init__(self):
        for h in (self.h_a, self.h_b):
            if not math.isfinite(abs(h)):
                raise ValueError("channel gains must be finite")

    @classmethod
    def from_theta(cls, theta_a: float, theta_b: float = 0.0) -> "ChannelPair":
        return cls(complex(np.exp(1j * theta_a)), complex(np.exp(1j * theta_b)))

    def rotated(self, phi: float) -> "ChannelPair":
        r = complex(np.exp(1j * phi))
        return ChannelPair(r * self.h_a, r * self.h_b)

    def swapped(self) -> "ChannelPair":
        return ChannelPair(self.h_b, self.h_a)


@dataclass(frozen=True)
class NoiseModel:
    sigma2: float

    def __post_init__(self):
        if not (self.sigma2 >= 0 and math.isfinite(self.sigma2)):
            raise ValueError("sigma2 must be finite and nonnegative")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseModel":
        return cls(1.0 / (2.0 * 10.0 ** (snr_db / 10.0)))

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(1.0 / (2.0 * self.sigma2))


@dataclass(frozen=True)
class RelayConstellation:
    """All ``2**(2 ell)`` pairs; entry ``p`` has ``x_a = p & mask``, ``x_b = p >> ell``."""

    ell: int
    x_a: np.ndarray
    x_b: np.ndarray
    points: np.ndarray
    f: DecodeFunction | None = None
    relay_label: np.ndarray | None = field(default=None)

    @property
    def pair_index(self) -> np.ndarray:
        return self.x_a | (self.x_b << self.ell)

    def labels_for(self, t: BinMatrix) -> np.ndarray:
        """Apply a binary matrix with ``2 ell`` columns to every stacked pair ``[x_a; x_b]``."""
        if t.cols != 2 * self.ell:
            raise DimensionMismatch(f"need {2 * self.ell} columns, got {t.cols}")
        return np.array([t.apply(int(p)) for p in self.pair_index], dtype=np.int64)

    def relay_label_subset(self, fixed: Mapping[int, int]) -> np.ndarray:
        """Points whose relay label agrees with ``fixed`` (1-based level -> bit), with multiplicity."""
        if self.relay_label is None:
            raise ValueError("relay constellation built without a decoding function")
        keep = np.ones(len(self.points), dtype=bool)
        for k, b in fixed.items():
            keep &= ((self.relay_label >> (k - 1)) & 1) == b
        return self.points[keep]


def relay_constellation(c: LabeledConstellation, h: ChannelPair,
                        f: DecodeFunction | None = None) -> RelayConstellation:
    if f is not None and f.ell != c.ell:
        raise DimensionMismatch("constellation and decoding function disagree on ell")
    n = 2 ** c.ell
    idx = np.arange(n * n)
    x_a = idx & (n - 1)
    x_b = idx >> c.ell
    pts = c.array
    points = h.h_a * pts[x_a] + h.h_b * pts[x_b]
    label = None
    if f is not None:
        label = np.array([f(int(a), int(b)) for a, b in zip(x_a, x_b)], dtype=np.int64)
    for arr in (x_a, x_b, points):
        arr.setflags(write=False)
    if label is not None:
        label.setflags(write=False)
    return RelayConstellation(c.ell, x_a, x_b, points, f, label)


def make_rng(seed: int | Sequence[int]) -> np.random.Generator:
    """Counter-based generator; independent streams come from distinct seed tuples."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def channel_sample(c: LabeledConstellation, h: ChannelPair, s_a: Sequence[int], s_b: Sequence[int],
                   noise: NoiseModel, seed: int | Sequence[int]) -> np.ndarray:
    """``y[n] = h_a M(x_a[n]) + h_b M(x_b[n]) + w[n]`` with complex AWGN of per-component variance sigma2."""
    s_a = np.asarray(s_a, dtype=np.int64)
    s_b = np.asarray(s_b, dtype=np.int64)
    if s_a.shape != s_b.shape:
        raise DimensionMismatch("address sequences differ in length")
    pts = c.array
    q = h.h_a * pts[s_a] + h.h_b * pts[s_b]
    if noise.sigma2 == 0:
        return q
    rng = make_rng(seed)
    sd = math.sqrt(noise.sigma2)
    w = rng.standard_normal(q.shape) + 1j * rng.standard_normal(q.shape)
    return q + sd * w


def likelihood(y: complex | np.ndarray, subset, noise: NoiseModel) -> np.ndarray | float:
    """Equal-weight mixture of circular complex Gaussians centered on ``subset``."""
    pts = np.asarray(list(subset), dtype=complex)
    if pts.size == 0:
        raise EmptySubset("likelihood needs at least one point")
    if noise.sigma2 <= 0:
        raise ValueError("likelihood needs sigma2 > 0")
    y_arr = np.asarray(y, dtype=complex)
    d2 = np.abs(y_arr[..., None] - pts) ** 2
    dens = np.exp(-d2 / (2 * noise.sigma2)).mean(axis=-1) / (2 * math.pi * noise.sigma2)
    return float(dens) if dens.ndim == 0 else dens


@dataclass(frozen=True)
class LabelConstraint:
    """``t @ [x_a; x_b] = value`` for a full-row-rank ``t`` with ``2 ell`` columns."""

    t: BinMatrix
    value: int

    def __post_init__(self):
        if self.t.rank() != self.t.rows:
            raise ValueError("constraint matrix must have full row rank")
        if self.value >> self.t.rows:
            raise ValueError("value has more bits than constraint rows")

    def satisfying_pairs(self, ell: int) -> list[tuple[int, int]]:
        if self.t.cols != 2 * ell:
            raise DimensionMismatch("constraint width must be 2*ell")
        n = 2 ** ell
        return [(p & (n - 1), p >> ell) for p in range(n * n) if self.t.apply(p) == self.value]
