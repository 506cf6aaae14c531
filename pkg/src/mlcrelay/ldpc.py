"""Link-level validation with a regular (3,6) LDPC code at the relay.

The relay demaps each effective level with soft information about the other
levels, runs sum-product decoding per level on the de-cosetted LLRs, and
iterates (demapper <-> decoders) until every level satisfies its checks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from . import gf2dense
from .errors import ConstructionFailed, WindowNotBracketing
from .f2algebra import DecodeFunction, decode_function_from_name, iter_decode_functions
from .modulation import (
    ChannelPair,
    LabeledConstellation,
    NoiseModel,
    RelayConstellation,
    channel_sample,
    make_rng,
    qpsk_gray,
    relay_constellation,
)
from .rates import threshold_snr_db

LLR_CLIP = 30.0
VAR_DEGREE = 3
CHECK_DEGREE = 6


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Regular (3,6) code; ``check_vars[c]`` lists the six variables of check ``c``."""

    n: int
    check_vars: np.ndarray
    seed: int = 0
    _enc: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        cv = np.asarray(self.check_vars, dtype=np.int64)
        if cv.shape != (self.m, CHECK_DEGREE):
            raise ValueError(f"check_vars must be {self.m}x{CHECK_DEGREE}")
        counts = np.bincount(cv.ravel(), minlength=self.n)
        if counts.size != self.n or np.any(counts != VAR_DEGREE):
            raise ValueError("every variable must sit in exactly three checks")
        cv.setflags(write=False)
        object.__setattr__(self, "check_vars", cv)
        # edges are numbered check-major: edge c*6 + j joins check c and check_vars[c, j]
        var_edges = np.argsort(cv.ravel(), kind="stable").reshape(self.n, VAR_DEGREE)
        var_edges.setflags(write=False)
        object.__setattr__(self, "var_edges", var_edges)

    @property
    def m(self) -> int:
        return self.n * VAR_DEGREE // CHECK_DEGREE

    @property
    def design_rate(self) -> float:
        return 1.0 - self.m / self.n

    @property
    def parity(self) -> sparse.csr_matrix:
        rows = np.repeat(np.arange(self.m), CHECK_DEGREE)
        data = np.ones(rows.size, dtype=np.uint8)
        return sparse.csr_matrix((data, (rows, self.check_vars.ravel())), shape=(self.m, self.n))

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """Check parities; works on ``(..., n)`` arrays."""
        bits = np.asarray(bits, dtype=np.uint8)
        return np.bitwise_xor.reduce(bits[..., self.check_vars], axis=-1)

    def is_codeword(self, bits: np.ndarray) -> bool:
        return not np.any(self.syndrome(bits))

    def four_cycles(self) -> int:
        """Number of check pairs sharing two or more variables."""
        h = self.parity.astype(np.int32)
        overlap = sparse.triu(h @ h.T, k=1)
        return int(np.sum(overlap.data >= 2))

    # -- systematic encoder -------------------------------------------------

    def _encoder(self) -> dict:
        if not self._enc:
            dense = self.parity.toarray()
            red, pivots = gf2dense.rref(dense)
            pivot_set = set(pivots)
            free = np.array([c for c in range(self.n) if c not in pivot_set], dtype=np.int64)
            self._enc.update(
                pivots=np.array(pivots, dtype=np.int64),
                free=free,
                a=red[: len(pivots)][:, free].astype(np.float32),
            )
        return self._enc

    @property
    def k(self) -> int:
        """Dimension of the code (n minus the rank of the check matrix)."""
        return len(self._encoder()["free"])

    def encode(self, u: np.ndarray) -> np.ndarray:
        """Encode message rows ``(..., k)`` into codeword rows ``(..., n)``."""
        enc = self._encoder()
        u = np.asarray(u, dtype=np.uint8)
        lead = u.shape[:-1]
        u2 = u.reshape(-1, u.shape[-1])
        out = np.zeros((u2.shape[0], self.n), dtype=np.uint8)
        out[:, enc["free"]] = u2
        par = (u2.astype(np.float32) @ enc["a"].T).astype(np.int64) & 1
        out[:, enc["pivots"]] = par
        return out.reshape(*lead, self.n)

    def extract_message(self, codeword: np.ndarray) -> np.ndarray:
        return np.asarray(codeword)[..., self._encoder()["free"]]


def _construct(n: int, rng: np.random.Generator) -> np.ndarray | None:
    m = n * VAR_DEGREE // CHECK_DEGREE
    deg = np.zeros(m, dtype=np.int64)
    check_vars = np.full((m, CHECK_DEGREE), -1, dtype=np.int64)
    var_sets: list[list[int]] = [[] for _ in range(m)]
    var_checks: list[list[int]] = []
    for v in range(n):
        chosen: list[int] = []
        blocked = np.zeros(m, dtype=bool)
        for _ in range(VAR_DEGREE):
            ok = (deg < CHECK_DEGREE) & ~blocked
            if not ok.any():
                return None
            cand = np.flatnonzero(ok)
            low = cand[deg[cand] == deg[cand].min()]
            c = int(low[rng.integers(low.size)])
            chosen.append(c)
            blocked[c] = True
            # checks that already share a variable with c would close a 4-cycle
            for u in var_sets[c]:
                blocked[var_checks[u]] = True
        for c in chosen:
            check_vars[c, deg[c]] = v
            deg[c] += 1
            var_sets[c].append(v)
        var_checks.append(chosen)
    return check_vars


def build_code(n: int, seed: int = 0, retries: int = 20) -> LdpcCode:
    """Greedy progressive edge placement: lowest-degree checks first, never closing a 4-cycle."""
    if n < 96 or n % 2:
        raise ValueError("block length must be even and at least 96")
    for attempt in range(retries):
        cv = _construct(n, make_rng((seed, attempt)))
        if cv is not None:
            return LdpcCode(n, cv, seed)
    raise ConstructionFailed(f"no 4-cycle-free (3,6) graph for n={n} after {retries} attempts")


@lru_cache(maxsize=4)
def cached_code(n: int, seed: int) -> LdpcCode:
    return build_code(n, seed)


# --- demapper ---------------------------------------------------------------

def _label_bits(rc: RelayConstellation) -> np.ndarray:
    """``(ell, 2**(2 ell))`` array of relay-label bits per entry."""
    return np.array([(rc.relay_label >> k) & 1 for k in range(rc.ell)], dtype=np.int64)


def demap_llr(y: np.ndarray, rc: RelayConstellation, level: int, priors: np.ndarray | None,
              lambda_fr: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """De-cosetted LLRs ``log P(y | x^k = 0) / P(y | x^k = 1)`` for 0-based ``level``.

    ``priors`` is an ``(ell, N)`` array of LLRs on the relay-label bits; the row
    for ``level`` is ignored.  Other levels are marginalised with those priors.
    """
    if noise.sigma2 <= 0:
        raise ValueError("demapping needs sigma2 > 0")
    y = np.asarray(y, dtype=complex)
    bits = _label_bits(rc)
    metric = -np.abs(y[:, None] - rc.points[None, :]) ** 2 / (2.0 * noise.sigma2)
    if priors is not None:
        for j in range(rc.ell):
            if j != level:
                signs = 1.0 - 2.0 * bits[j]
                metric = metric + 0.5 * priors[j][:, None] * signs[None, :]
    zero = bits[level] == 0
    llr = logsumexp(metric[:, zero], axis=1) - logsumexp(metric[:, ~zero], axis=1)
    llr = llr * (1.0 - 2.0 * np.asarray(lambda_fr[level], dtype=np.float64))
    return np.clip(llr, -LLR_CLIP, LLR_CLIP)


# --- sum-product --------------------------------------------------------------

def _leave_one_out_product(t: np.ndarray) -> np.ndarray:
    ones = np.ones((t.shape[0], 1))
    prefix = np.cumprod(np.hstack([ones, t[:, :-1]]), axis=1)
    suffix = np.cumprod(np.hstack([ones, t[:, :0:-1]]), axis=1)[:, ::-1]
    return prefix * suffix


def sum_product(code: LdpcCode, llr: np.ndarray, max_iter: int = 50,
                c2v: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Flooding sum-product decoding.

    Returns ``(posterior LLRs, check-to-variable messages, converged)``; passing
    the returned messages back in warm-starts the next call.
    """
    ev = code.check_vars.ravel()
    c2v = np.zeros(ev.size) if c2v is None else c2v.copy()
    total = llr + c2v[code.var_edges].sum(axis=1)
    if code.is_codeword(total < 0):
        return total, c2v, True
    for _ in range(max_iter):
        v2c = np.clip(total[ev] - c2v, -LLR_CLIP, LLR_CLIP)
        t = np.tanh(0.5 * v2c).reshape(code.m, CHECK_DEGREE)
        ext = np.clip(_leave_one_out_product(t), -1 + 1e-15, 1 - 1e-15)
        c2v = np.clip(2.0 * np.arctanh(ext).ravel(), -LLR_CLIP, LLR_CLIP)
        total = llr + c2v[code.var_edges].sum(axis=1)
        if code.is_codeword(total < 0):
            return total, c2v, True
    return total, c2v, False


def joint_decode(y: np.ndarray, code: LdpcCode, f: DecodeFunction, rc: RelayConstellation,
                 lambda_fr: np.ndarray, noise: NoiseModel, max_outer: int = 8,
                 max_inner: int = 50) -> tuple[np.ndarray, bool]:
    """Iterative demapping and per-level decoding of all ell effective codeword rows.

    Returns hard decisions on ``X_{f,R}`` (coset leaders re-applied) and
    whether every level ended on a valid coset codeword.
    """
    ell = f.ell
    lam = np.asarray(lambda_fr, dtype=np.uint8)
    sign = 1.0 - 2.0 * lam
    priors = np.zeros((ell, code.n))
    c2v: list[np.ndarray | None] = [None] * ell
    hard = np.zeros((ell, code.n), dtype=np.uint8)
    ok = [False] * ell
    for _ in range(max_outer):
        for k in range(ell):
            llr = demap_llr(y, rc, k, priors, lam, noise)
            post, c2v[k], ok[k] = sum_product(code, llr, max_inner, c2v[k])
            priors[k] = (post - llr) * sign[k]
            hard[k] = (post < 0).astype(np.uint8)
        if all(ok):
            break
    return hard ^ lam, all(ok)


# --- simulation -----------------------------------------------------------------

@dataclass(frozen=True)
class SimOutcome:
    trials: int
    bit_errors: int
    frame_errors: int
    snr_db: float
    theta: float

    @property
    def ber(self) -> float:
        return self.bit_errors / max(1, self.trials)


@dataclass(frozen=True)
class TrialSetup:
    n: int
    code_seed: int
    theta: float
    f_name: str
    snr_db: float
    seed: int
    max_outer: int = 8
    max_inner: int = 50


def _to_addresses(x: np.ndarray) -> np.ndarray:
    return sum(x[k].astype(np.int64) << k for k in range(x.shape[0]))


def run_trial(setup: TrialSetup, trial: int, c: LabeledConstellation | None = None) -> int:
    """One block through the MA channel and the relay decoder; returns bit errors in ``X_{f,R}``.

    Messages, cosets and the unit-variance noise draw depend only on
    ``(seed, trial)``, so sweeps over SNR reuse the same realisations.
    """
    c = c or qpsk_gray()
    code = cached_code(setup.n, setup.code_seed)
    f = decode_function_from_name(setup.f_name, c.ell)
    ell = c.ell
    rng = make_rng((setup.seed, trial, 0))
    u = rng.integers(0, 2, size=(2, ell, code.k), dtype=np.uint8)
    lam = rng.integers(0, 2, size=(2, ell, code.n), dtype=np.uint8)
    x_a = code.encode(u[0]) ^ lam[0]
    x_b = code.encode(u[1]) ^ lam[1]
    h = ChannelPair.from_theta(setup.theta, 0.0)
    noise = NoiseModel.from_snr_db(setup.snr_db)
    y = channel_sample(c, h, _to_addresses(x_a), _to_addresses(x_b), noise, (setup.seed, trial, 1))
    rc = relay_constellation(c, h, f)
    comb = np.array(f.matrix.to_list(), dtype=np.uint8)
    lambda_fr = gf2dense.matmul(comb, np.vstack([lam[0], lam[1]]))
    x_fr = gf2dense.matmul(comb, np.vstack([x_a, x_b]))
    x_hat, _ = joint_decode(y, code, f, rc, lambda_fr, noise, setup.max_outer, setup.max_inner)
    return int(np.count_nonzero(x_hat != x_fr))


def _trial_task(args) -> int:
    setup, trial = args
    return run_trial(setup, trial)


def simulate(setup: TrialSetup, trials: int, jobs: int = 1, stop_on_error: bool = False) -> SimOutcome:
    """Run trials in batches of ``jobs``; with ``stop_on_error`` the first failing batch ends the run."""
    errors: list[int] = []
    batch = max(1, jobs)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for start in range(0, trials, batch):
            idx = range(start, min(trials, start + batch))
            tasks = [(setup, t) for t in idx]
            got = list(pool.map(_trial_task, tasks)) if pool else [_trial_task(t) for t in tasks]
            errors.extend(got)
            if stop_on_error and any(got):
                break
    finally:
        if pool:
            pool.shutdown()
    return SimOutcome(len(errors), int(sum(errors)), int(sum(e > 0 for e in errors)), setup.snr_db, setup.theta)


# --- required SNR -----------------------------------------------------------------

def best_function(theta: float, c: LabeledConstellation | None = None, target: float = 0.5,
                  funcs: Sequence[DecodeFunction] | None = None,
                  tie_db: float = 5e-3) -> tuple[DecodeFunction, float]:
    """Decoding function with the lowest theoretical threshold SNR at ``theta``."""
    c = c or qpsk_gray()
    funcs = list(funcs) if funcs is not None else list(iter_decode_functions(c.ell))
    h = ChannelPair.from_theta(theta, 0.0)
    best = None
    for f in funcs:
        thr = threshold_snr_db(c, h, f, target)
        # thresholds come from a root finder with ~1e-3 dB resolution
        if best is None or thr < best[1] - tie_db:
            best = (f, thr)
    return best


def required_snr(theta: float, code: LdpcCode | int, f_policy: str = "best", trials: int = 50,
                 window: tuple[float, float] | None = None, seed: int = 0, code_seed: int = 0,
                 step_db: float = 0.1, jobs: int = 1, max_outer: int = 8, max_inner: int = 50,
                 on_probe: Callable[[float, bool], None] | None = None) -> dict:
    """Bisect (on a ``step_db`` grid) for the smallest SNR with zero errors over ``trials`` blocks.

    ``f_policy`` is ``"best"`` (lowest theoretical threshold at this theta) or a
    function id such as ``"xor"``.  ``code`` is a built code or a block length;
    workers rebuild it from ``(n, code_seed)``.  The default window spans from the
    theoretical threshold to 4 dB above it.
    """
    c = qpsk_gray()
    if isinstance(code, LdpcCode):
        n, code_seed = code.n, code.seed
    else:
        n = int(code)
    if f_policy == "best":
        f, thr = best_function(theta, c)
    else:
        f = decode_function_from_name(f_policy, c.ell)
        thr = threshold_snr_db(c, ChannelPair.from_theta(theta, 0.0), f)
    if window is None:
        window = (math.floor(thr / step_db) * step_db, math.floor(thr / step_db) * step_db + 4.0)
    lo_i = round(window[0] / step_db)
    hi_i = round(window[1] / step_db)

    def passes(i: int) -> bool:
        setup = TrialSetup(n, code_seed, theta, f.name, i * step_db, seed, max_outer, max_inner)
        ok = simulate(setup, trials, jobs, stop_on_error=True).frame_errors == 0
        if on_probe:
            on_probe(i * step_db, ok)
        return ok

    if passes(lo_i) or not passes(hi_i):
        raise WindowNotBracketing(f"window {window} does not bracket the decoding threshold")
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if passes(mid):
            hi_i = mid
        else:
            lo_i = mid
    sim = round(hi_i * step_db, 10)
    return {"theta": theta, "f": f.name, "theoretical_snr_db": thr, "simulated_snr_db": sim,
            "gap_db": sim - thr}
