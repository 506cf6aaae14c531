"""Achievable-rate evaluation for the relay's decoding functions.

Every mutual-information term is a difference of conditional differential
entropies of the relay output.  Conditioning on a linear function of the pair
``(x_a, x_b)`` splits the ``2**(2 ell)`` equiprobable pairs into equal-sized
cells; ``H(Y | cells)`` is the average of the Gaussian-mixture entropies of the
cells' relay points.  Mixture entropies use a per-component Gauss-Hermite
product rule; Monte-Carlo estimators with independent code paths are provided
as cross-checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import QuadratureDivergence, ZeroCoefficient
from .f2algebra import (
    GF4_NONZERO,
    BinMatrix,
    DecodeFunction,
    Gf4Element,
    PartitionSpec,
    enumerate_partitions,
    parity,
    partition_transform,
)
from .modulation import (
    ChannelPair,
    LabeledConstellation,
    NoiseModel,
    make_rng,
    relay_constellation,
)

LOG2E = 1.0 / math.log(2.0)
GH_ORDER = 24
GH_REFINE_ORDERS = (24, 32, 48, 64, 96, 128, 160)
GH_TOL = 1e-7


# --- mixture entropy ---------------------------------------------------------

@lru_cache(maxsize=None)
def _gh_rule_2d(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermgauss(order)
    gx, gy = np.meshgrid(x, x, indexing="ij")
    weights = (np.outer(w, w) / math.pi).ravel()
    keep = weights > 1e-18 * weights.max()
    return (gx + 1j * gy).ravel()[keep], weights[keep]


def _canonical_components(points) -> tuple[np.ndarray, np.ndarray]:
    """Distinct points in lexicographic order with their multiplicity weights."""
    pts = np.asarray(points, dtype=complex).ravel()
    if pts.size == 0:
        raise ValueError("mixture needs at least one point")
    uniq, counts = np.unique(pts, return_counts=True)
    return uniq, counts / pts.size


def _gh_entropy(pts: np.ndarray, wts: np.ndarray, sigma2: float, order: int) -> float:
    offsets, gw = _gh_rule_2d(order)
    y = pts[:, None] + math.sqrt(2.0 * sigma2) * offsets[None, :]
    d2 = np.abs(y[:, :, None] - pts[None, None, :]) ** 2 / (2.0 * sigma2)
    log_mix = logsumexp(-d2, b=wts, axis=-1)
    neg_log_p = math.log(2.0 * math.pi * sigma2) - log_mix
    return float(wts @ (neg_log_p @ gw)) * LOG2E


def mixture_entropy(points, noise: NoiseModel, orders: Sequence[int] = GH_REFINE_ORDERS,
                    tol: float = GH_TOL) -> float:
    """Differential entropy in bits of the equal-weight complex Gaussian mixture on ``points``.

    The product rule is refined through ``orders`` until two consecutive orders
    agree within ``tol``; the finer of the agreeing pair is returned.
    """
    if noise.sigma2 <= 0:
        raise ValueError("mixture entropy needs sigma2 > 0")
    pts, wts = _canonical_components(points)
    if pts.size == 1:
        return math.log2(2.0 * math.pi * math.e * noise.sigma2)
    prev = _gh_entropy(pts, wts, noise.sigma2, orders[0])
    for order in orders[1:]:
        cur = _gh_entropy(pts, wts, noise.sigma2, order)
        if abs(cur - prev) <= tol:
            return cur
        prev = cur
    raise QuadratureDivergence(f"Gauss-Hermite did not settle to {tol} bits by order {orders[-1]}")


def mixture_entropy_mc(points, noise: NoiseModel, samples: int = 1_000_000,
                       seed: int | Sequence[int] = 0, chunk: int = 200_000) -> float:
    """Monte-Carlo mixture entropy, stratified over components.

    Uses the exact entropy of the sampling component as a control variate, so
    only ``E[log p(y) / phi_i(y)]`` is estimated.
    """
    pts = np.asarray(points, dtype=complex).ravel()
    m = pts.size
    per = max(1, samples // m)
    rng = make_rng(seed)
    s2 = noise.sigma2
    acc = 0.0
    for i in range(m):
        done = 0
        while done < per:
            n = min(chunk, per - done)
            w = _antithetic_noise(rng, n, s2)
            y = pts[i] + w
            expo = -(np.abs(y[:, None] - pts[None, :]) ** 2 - np.abs(w[:, None]) ** 2) / (2 * s2)
            acc += float(np.sum(logsumexp(expo, axis=1) - math.log(m)))
            done += n
    return math.log2(2 * math.pi * math.e * s2) - acc / (per * m) * LOG2E


def _antithetic_noise(rng: np.random.Generator, n: int, sigma2: float) -> np.ndarray:
    half = (n + 1) // 2
    z = rng.standard_normal(half) + 1j * rng.standard_normal(half)
    return math.sqrt(sigma2) * np.concatenate([z, -z])[:n]


# --- cells --------------------------------------------------------------------

def cells_from_labels(labels: np.ndarray) -> tuple[tuple[int, ...], ...]:
    """Group pair indices by label value; canonical (sorted) partition."""
    groups: dict[int, list[int]] = {}
    for p, lab in enumerate(np.asarray(labels).tolist()):
        groups.setdefault(lab, []).append(p)
    return tuple(sorted(tuple(g) for g in groups.values()))


def conditioning_matrix(spec: PartitionSpec) -> BinMatrix:
    """Rows of the partition transform outside the block leaders.

    Knowing these linear functions of the labels is the same as knowing
    ``{X^k, k not in S}`` and ``{X^k + Z_i, k in S_i}``.
    """
    d = partition_transform(spec)
    leaders = set(spec.leaders)
    return d.select_rows(k - 1 for k in range(1, spec.ell + 1) if k not in leaders)


class RateEngine:
    """Mutual-information evaluator for one (constellation, channel, noise) triple.

    Conditional entropies are cached by cell partition so distinct bound terms
    that induce the same partition share one evaluation.
    """

    def __init__(self, c: LabeledConstellation, h: ChannelPair, noise: NoiseModel):
        self.c = c
        self.h = h
        self.noise = noise
        self.rc = relay_constellation(c, h)
        self.ell = c.ell
        self._cell_h: dict[tuple[int, ...], float] = {}
        self._part_h: dict[tuple[tuple[int, ...], ...], float] = {}

    @property
    def n_pairs(self) -> int:
        return len(self.rc.points)

    def cell_entropy(self, cell: tuple[int, ...]) -> float:
        hit = self._cell_h.get(cell)
        if hit is None:
            hit = mixture_entropy(self.rc.points[list(cell)], self.noise)
            self._cell_h[cell] = hit
        return hit

    def partition_entropy(self, cells: tuple[tuple[int, ...], ...]) -> float:
        hit = self._part_h.get(cells)
        if hit is None:
            hit = float(sum(len(c) * self.cell_entropy(c) for c in cells)) / self.n_pairs
            self._part_h[cells] = hit
        return hit

    def conditional_entropy(self, t: BinMatrix) -> float:
        """``H(Y | t [x_a; x_b])``; a zero-row ``t`` gives ``H(Y)``."""
        if t.rows == 0:
            return self.partition_entropy((tuple(range(self.n_pairs)),))
        return self.partition_entropy(cells_from_labels(self.rc.labels_for(t)))

    def entropy_given_labels(self, labels: Sequence[int]) -> float:
        return self.partition_entropy(cells_from_labels(np.asarray(labels)))

    def bound_term(self, label_map: BinMatrix, spec: PartitionSpec) -> float:
        """``I(Y; {X^k, k in S} | {X^k, k not in S}, {X^k + Z_i, k in S_i})`` for labels ``label_map [x_a; x_b]``."""
        if spec.ell != label_map.rows:
            raise ValueError("spec level count differs from the label map")
        cond = conditioning_matrix(spec) @ label_map if spec.p < spec.ell else BinMatrix.zeros(0, label_map.cols)
        term = self.conditional_entropy(cond) - self.conditional_entropy(label_map)
        return max(term, 0.0)

    def terms(self, label_map: BinMatrix, specs: Iterable[PartitionSpec]) -> dict[PartitionSpec, float]:
        return {s: self.bound_term(label_map, s) for s in specs}


@lru_cache(maxsize=512)
def get_engine(c: LabeledConstellation, h: ChannelPair, noise: NoiseModel) -> RateEngine:
    return RateEngine(c, h, noise)


# --- reports ------------------------------------------------------------------

@dataclass(frozen=True)
class RateReport:
    f: DecodeFunction | None
    h: ChannelPair
    snr_db: float
    ell: int
    terms: dict[PartitionSpec, float] = field(hash=False)

    @property
    def rate(self) -> float:
        """Bits per binary code symbol: min over terms of term / p."""
        return min(v / s.p for s, v in self.terms.items())

    @property
    def sum_rate(self) -> float:
        """Bits per complex symbol across all levels."""
        return self.ell * self.rate

    @property
    def f_id(self) -> str:
        return self.f.name if self.f is not None else "df"

    def limiting_term(self) -> PartitionSpec:
        return min(self.terms, key=lambda s: self.terms[s] / s.p)


def bound_term(c: LabeledConstellation, h: ChannelPair, f: DecodeFunction, spec: PartitionSpec,
               noise: NoiseModel) -> float:
    return get_engine(c, h, noise).bound_term(f.matrix, spec)


def rate_f(c: LabeledConstellation, h: ChannelPair, f: DecodeFunction, noise: NoiseModel) -> RateReport:
    eng = get_engine(c, h, noise)
    return RateReport(f, h, noise.snr_db, c.ell, eng.terms(f.matrix, enumerate_partitions(c.ell)))


def df_report(c: LabeledConstellation, h: ChannelPair, noise: NoiseModel) -> RateReport:
    """Decode-and-forward: the same partition bound applied to all ``2 ell`` stacked levels."""
    eng = get_engine(c, h, noise)
    ident = BinMatrix.identity(2 * c.ell)
    return RateReport(None, h, noise.snr_db, 2 * c.ell, eng.terms(ident, enumerate_partitions(2 * c.ell)))


def df_rate(c: LabeledConstellation, h: ChannelPair, noise: NoiseModel) -> float:
    return df_report(c, h, noise).rate


def gf4_labels(alpha: Gf4Element, beta: Gf4Element, ell: int = 2) -> list[int]:
    """``alpha x_a + beta x_b`` over GF(4) for every pair, reading label bits as x1 + x2 w."""
    if ell != 2:
        raise ValueError("GF(4) labels need ell = 2")
    return [(alpha * Gf4Element(p & 3) + beta * Gf4Element(p >> 2)).value for p in range(16)]


def gf4_rate(c: LabeledConstellation, h: ChannelPair, alpha: Gf4Element, beta: Gf4Element,
             noise: NoiseModel) -> float:
    """``I(Y; alpha X_A + beta X_B)`` in bits per GF(4) (= complex) symbol."""
    if not alpha or not beta:
        raise ZeroCoefficient("GF(4) coefficients must be nonzero")
    eng = get_engine(c, h, noise)
    h_y = eng.conditional_entropy(BinMatrix.zeros(0, 2 * c.ell))
    return max(h_y - eng.entropy_given_labels(gf4_labels(alpha, beta, c.ell)), 0.0)


def gf4_pairs() -> list[tuple[Gf4Element, Gf4Element]]:
    return list(product(GF4_NONZERO, GF4_NONZERO))


# --- auxiliary-variable route ---------------------------------------------------

def bound_term_auxiliary(c: LabeledConstellation, h: ChannelPair, label_map: BinMatrix,
                         spec: PartitionSpec, noise: NoiseModel) -> float:
    """Same term as :meth:`RateEngine.bound_term`, literally conditioning on ``X^k + Z_i``.

    Enumerates every (pair, z_1..z_p) outcome uniformly and builds the cells
    from the tuple of conditioning values, without the partition transform.
    """
    rc = relay_constellation(c, h)
    pairs = range(len(rc.points))
    labels = [label_map.apply(p) for p in pairs]
    zs = list(product((0, 1), repeat=spec.p))
    comp = sorted(spec.complement)

    def key(lab: int, z: tuple[int, ...]) -> tuple:
        fixed = tuple((lab >> (k - 1)) & 1 for k in comp)
        noisy = tuple(((lab >> (k - 1)) & 1) ^ z[i] for i, b in enumerate(spec.blocks) for k in b)
        return fixed + noisy

    cond: dict[tuple, list[complex]] = {}
    full: dict[int, list[complex]] = {}
    for p, z in product(pairs, zs):
        cond.setdefault(key(labels[p], z), []).append(rc.points[p])
        full.setdefault(labels[p], []).append(rc.points[p])
    h_cond = np.mean([mixture_entropy(v, noise) for v in cond.values()])
    h_full = np.mean([mixture_entropy(v, noise) for v in full.values()])
    return float(h_cond - h_full)


def conditional_mi_xor(c: LabeledConstellation, h: ChannelPair, f: DecodeFunction,
                       noise: NoiseModel) -> float:
    """``I(Y; X^1, X^2 | X^1 + X^2)`` directly from cells of the label parity (ell = 2)."""
    rc = relay_constellation(c, h, f)
    par = [parity(int(l)) for l in rc.relay_label]
    return float(_entropy_by_key(rc.points, par, noise) - _entropy_by_key(rc.points, rc.relay_label, noise))


def _entropy_by_key(points: np.ndarray, keys, noise: NoiseModel) -> float:
    groups: dict[int, list[complex]] = {}
    for q, k in zip(points, np.asarray(keys).tolist()):
        groups.setdefault(k, []).append(q)
    return float(np.mean([mixture_entropy(v, noise) for v in groups.values()]))


# --- Monte-Carlo oracle for bound terms -------------------------------------------

def bound_term_mc(c: LabeledConstellation, h: ChannelPair, label_map: BinMatrix, spec: PartitionSpec,
                  noise: NoiseModel, samples: int = 1_000_000, seed: int | Sequence[int] = 0,
                  chunk: int = 250_000) -> float:
    """``E[log p(y | all labels) - log p(y | conditioning)]`` by stratified sampling over pairs."""
    rc = relay_constellation(c, h)
    pts = rc.points
    n_pairs = pts.size
    labels = np.array([label_map.apply(p) for p in range(n_pairs)])
    if spec.p < spec.ell:
        cmat = conditioning_matrix(spec) @ label_map
        cond = np.array([cmat.apply(p) for p in range(n_pairs)])
    else:
        cond = np.zeros(n_pairs, dtype=int)
    same_full = labels[:, None] == labels[None, :]
    same_cond = cond[:, None] == cond[None, :]
    per = max(1, samples // n_pairs)
    rng = make_rng(seed)
    s2 = noise.sigma2
    acc = 0.0
    for p in range(n_pairs):
        done = 0
        while done < per:
            n = min(chunk, per - done)
            w = _antithetic_noise(rng, n, s2)
            y = pts[p] + w
            expo = -(np.abs(y[:, None] - pts[None, :]) ** 2 - np.abs(w[:, None]) ** 2) / (2 * s2)
            num = logsumexp(np.where(same_full[p], expo, -np.inf), axis=1) - math.log(same_full[p].sum())
            den = logsumexp(np.where(same_cond[p], expo, -np.inf), axis=1) - math.log(same_cond[p].sum())
            acc += float(np.sum(num - den))
            done += n
    return acc / (per * n_pairs) * LOG2E


# --- universal rate ----------------------------------------------------------------

def theta_grid(steps: int) -> np.ndarray:
    """Phase differences ``2 pi k / steps``, i.e. the grid with m = steps / 2."""
    if steps < 1:
        raise ValueError("steps must be positive")
    return 2.0 * math.pi * np.arange(steps) / steps


def gain_set(steps: int, grid_2d: bool = False) -> list[ChannelPair]:
    """Unit-magnitude gains on the phase grid.

    By rotation invariance only ``theta_a - theta_b`` matters; ``grid_2d``
    enumerates both phases anyway.
    """
    thetas = theta_grid(steps)
    if grid_2d:
        return [ChannelPair.from_theta(ta, tb) for ta in thetas for tb in thetas]
    return [ChannelPair.from_theta(t, 0.0) for t in thetas]


@dataclass(frozen=True)
class GainChoice:
    h: ChannelPair
    best_rate: float
    best: tuple[str, ...]


def _best_for_gain(args) -> GainChoice:
    c, h, funcs, noise, tie_tol = args
    rates = [rate_f(c, h, f, noise).rate for f in funcs]
    top = max(rates)
    names = tuple(f.name for f, r in zip(funcs, rates) if r >= top - tie_tol)
    return GainChoice(h, top, names)


def universal_rate(c: LabeledConstellation, gains: Sequence[ChannelPair], funcs: Sequence[DecodeFunction],
                   noise: NoiseModel, jobs: int = 1, tie_tol: float = 1e-9) -> tuple[float, list[GainChoice]]:
    """``min over gains of max over funcs of rate_f`` (bits per binary code symbol) and the per-gain choice."""
    if not gains or not funcs:
        raise ValueError("gains and funcs must be nonempty")
    tasks = [(c, h, tuple(funcs), noise, tie_tol) for h in gains]
    table = parallel_map(_best_for_gain, tasks, jobs)
    return min(t.best_rate for t in table), table


def _gf4_best(args) -> float:
    c, h, noise = args
    return max(gf4_rate(c, h, a, b, noise) for a, b in gf4_pairs())


def gf4_universal_rate(c: LabeledConstellation, gains: Sequence[ChannelPair], noise: NoiseModel,
                       jobs: int = 1) -> float:
    """Universal GF(4) rate in bits per complex symbol."""
    return min(parallel_map(_gf4_best, [(c, h, noise) for h in gains], jobs))


def parallel_map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# --- threshold SNR ---------------------------------------------------------------

def threshold_snr_db(c: LabeledConstellation, h: ChannelPair, f: DecodeFunction, target: float = 0.5,
                     lo: float = -10.0, hi: float = 30.0, xtol: float = 1e-3) -> float:
    """Smallest SNR (dB) at which ``rate_f`` reaches ``target`` bits per binary symbol."""

    def gap(snr_db: float) -> float:
        return rate_from_terms(RateEngine(c, h, NoiseModel.from_snr_db(snr_db)), f) - target

    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo >= 0:
        return lo
    if g_hi < 0:
        return math.inf
    return float(brentq(gap, lo, hi, xtol=xtol))


def rate_from_terms(eng: RateEngine, f: DecodeFunction) -> float:
    terms = eng.terms(f.matrix, enumerate_partitions(f.ell))
    return min(v / s.p for s, v in terms.items())
