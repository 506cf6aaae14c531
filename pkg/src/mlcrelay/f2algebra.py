"""Exact arithmetic over F2 and GF(4).

Small binary matrices are stored bit-packed, one Python ``int`` per row, with
bit ``c`` of row ``r`` holding entry ``(r, c)``.  Column vectors use the same
packing: bit ``k - 1`` of an integer address holds level ``k``, so level 1 is
the top entry of the column.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Iterator, Sequence

from .errors import DimensionMismatch, EllTooLarge, SingularMatrix, ZeroCoefficient

MAX_DIM = 64
MAX_ENUM_ELL = 4


def parity(x: int) -> int:
    return x.bit_count() & 1


def bits_of(x: int, n: int) -> tuple[int, ...]:
    """Unpack an integer address into ``(x^1, ..., x^n)``."""
    return tuple((x >> k) & 1 for k in range(n))


def pack_bits(bits: Iterable[int]) -> int:
    v = 0
    for k, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        v |= b << k
    return v


def address_from_str(s: str) -> int:
    """Parse a label string such as ``"01"`` (level 1 first) into an address."""
    return pack_bits(int(ch) for ch in s)


def address_to_str(x: int, n: int) -> str:
    return "".join(str(b) for b in bits_of(x, n))


@dataclass(frozen=True)
class BinMatrix:
    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative dimension")
        if self.cols > MAX_DIM:
            raise ValueError(f"at most {MAX_DIM} columns supported")
        if len(self.data) != self.rows:
            raise ValueError("row count does not match data length")
        mask = (1 << self.cols) - 1
        if any(r & ~mask for r in self.data):
            raise ValueError("row has bits beyond the column count")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "BinMatrix":
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), ncols, tuple(pack_bits(r) for r in rows))

    @classmethod
    def identity(cls, n: int) -> "BinMatrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinMatrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def from_code(cls, code: int, rows: int, cols: int) -> "BinMatrix":
        """Inverse of :attr:`code`."""
        bits = [(code >> (rows * cols - 1 - i)) & 1 for i in range(rows * cols)]
        return cls.from_rows([bits[r * cols:(r + 1) * cols] for r in range(rows)])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def code(self) -> int:
        """Row-major entries read as one binary number, entry (0, 0) most significant."""
        v = 0
        for row in self.data:
            for c in range(self.cols):
                v = (v << 1) | ((row >> c) & 1)
        return v

    def hex(self) -> str:
        width = max(1, -(-self.rows * self.cols // 4))
        return f"{self.code:0{width}x}"

    def to_list(self) -> list[list[int]]:
        return [list(bits_of(r, self.cols)) for r in self.data]

    def __getitem__(self, rc: tuple[int, int]) -> int:
        r, c = rc
        return (self.data[r] >> c) & 1

    def row(self, r: int) -> int:
        return self.data[r]

    def apply(self, x: int) -> int:
        """Matrix-vector product with a packed column vector."""
        return sum(parity(row & x) << i for i, row in enumerate(self.data))

    def __matmul__(self, other: "BinMatrix") -> "BinMatrix":
        if not isinstance(other, BinMatrix):
            return NotImplemented
        if self.cols != other.rows:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")
        out = []
        for row in self.data:
            acc = 0
            j = 0
            while row:
                if row & 1:
                    acc ^= other.data[j]
                row >>= 1
                j += 1
            out.append(acc)
        return BinMatrix(self.rows, other.cols, tuple(out))

    def __xor__(self, other: "BinMatrix") -> "BinMatrix":
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} ^ {other.shape}")
        return BinMatrix(self.rows, self.cols, tuple(a ^ b for a, b in zip(self.data, other.data)))

    __add__ = __xor__

    @property
    def T(self) -> "BinMatrix":
        out = []
        for c in range(self.cols):
            out.append(sum(((row >> c) & 1) << r for r, row in enumerate(self.data)))
        return BinMatrix(self.cols, self.rows, tuple(out))

    def hstack(self, other: "BinMatrix") -> "BinMatrix":
        if self.rows != other.rows:
            raise DimensionMismatch("hstack needs equal row counts")
        return BinMatrix(self.rows, self.cols + other.cols,
                         tuple(a | (b << self.cols) for a, b in zip(self.data, other.data)))

    def vstack(self, other: "BinMatrix") -> "BinMatrix":
        if self.cols != other.cols:
            raise DimensionMismatch("vstack needs equal column counts")
        return BinMatrix(self.rows + other.rows, self.cols, self.data + other.data)

    def select_rows(self, idx: Iterable[int]) -> "BinMatrix":
        picked = tuple(self.data[i] for i in idx)
        return BinMatrix(len(picked), self.cols, picked)

    def rank(self) -> int:
        return len(_echelon(list(self.data), self.cols)[1])

    def is_invertible(self) -> bool:
        return self.rows == self.cols and self.rank() == self.rows

    def __repr__(self) -> str:
        return f"BinMatrix({self.to_list()})"


def _echelon(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form; returns (rows, pivot columns)."""
    rows = list(rows)
    pivots = []
    r = 0
    for c in range(ncols):
        bit = 1 << c
        sel = next((i for i in range(r, len(rows)) if rows[i] & bit), None)
        if sel is None:
            continue
        rows[r], rows[sel] = rows[sel], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & bit:
                rows[i] ^= rows[r]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def invert(m: BinMatrix) -> BinMatrix:
    """Inverse over F2 by Gauss-Jordan on the augmented matrix ``[m | I]``."""
    if m.rows != m.cols:
        raise DimensionMismatch(f"cannot invert non-square {m.shape}")
    n = m.rows
    if 2 * n > MAX_DIM:
        raise ValueError("matrix too large to invert in packed form")
    aug = [row | (1 << (n + i)) for i, row in enumerate(m.data)]
    red, pivots = _echelon(aug, n)
    if len(pivots) < n:
        raise SingularMatrix(f"rank {m.rank()} < {n}")
    return BinMatrix(n, n, tuple(row >> n for row in red))


def _check_ell(ell: int) -> None:
    if ell < 1:
        raise ValueError("ell must be at least 1")
    if ell > MAX_ENUM_ELL:
        raise EllTooLarge(f"exhaustive enumeration capped at ell={MAX_ENUM_ELL}")


def gl2_order(ell: int) -> int:
    """Number of invertible ell x ell binary matrices."""
    out = 1
    for i in range(ell):
        out *= 2 ** ell - 2 ** i
    return out


@lru_cache(maxsize=None)
def enumerate_invertible(ell: int) -> tuple[BinMatrix, ...]:
    """All invertible ell x ell matrices over F2, ordered by :attr:`BinMatrix.code`.

    Built by choosing each row outside the span of the previous rows, which is
    exhaustive and never touches a singular candidate.
    """
    _check_ell(ell)
    out: list[tuple[int, ...]] = []

    def extend(rows: list[int], span: set[int]) -> None:
        if len(rows) == ell:
            out.append(tuple(rows))
            return
        for cand in range(1, 1 << ell):
            if cand in span:
                continue
            extend(rows + [cand], span | {s ^ cand for s in span})

    extend([], {0})
    mats = [BinMatrix(ell, ell, rows) for rows in out]
    mats.sort(key=lambda m: m.code)
    return tuple(mats)


@dataclass(frozen=True)
class DecodeFunction:
    """Relay decoding function ``f(x_a, x_b) = D_A x_a + D_B x_b`` over F2."""

    ell: int
    d_a: BinMatrix
    d_b: BinMatrix

    def __post_init__(self):
        for m in (self.d_a, self.d_b):
            if m.shape != (self.ell, self.ell):
                raise DimensionMismatch(f"expected {self.ell}x{self.ell}, got {m.shape}")
            if not m.is_invertible():
                raise SingularMatrix("decoding-function blocks must be invertible")

    @property
    def matrix(self) -> BinMatrix:
        """The ell x 2ell matrix ``[D_A D_B]`` acting on ``x_a | x_b << ell``."""
        return self.d_a.hstack(self.d_b)

    def __call__(self, x_a: int, x_b: int) -> int:
        return self.d_a.apply(x_a) ^ self.d_b.apply(x_b)

    def swapped(self) -> "DecodeFunction":
        return DecodeFunction(self.ell, self.d_b, self.d_a)

    @property
    def name(self) -> str:
        eye = BinMatrix.identity(self.ell)
        if self.ell == 2 and self.d_a == eye:
            if self.d_b == eye:
                return "xor"
            if self.d_b == BinMatrix.from_rows([[0, 1], [1, 0]]):
                return "rxor"
        return f"{self.d_a.hex()}_{self.d_b.hex()}"


def xor_function(ell: int = 2) -> DecodeFunction:
    eye = BinMatrix.identity(ell)
    return DecodeFunction(ell, eye, eye)


def rotated_xor_function() -> DecodeFunction:
    return DecodeFunction(2, BinMatrix.identity(2), BinMatrix.from_rows([[0, 1], [1, 0]]))


def iter_decode_functions(ell: int) -> Iterator[DecodeFunction]:
    """Lazily iterate the whole class, ``|D|**2`` members."""
    mats = enumerate_invertible(ell)
    for d_a, d_b in product(mats, mats):
        yield DecodeFunction(ell, d_a, d_b)


def decode_function_from_name(name: str, ell: int = 2) -> DecodeFunction:
    if name == "xor":
        return xor_function(ell)
    if name == "rxor":
        if ell != 2:
            raise ValueError("rxor is defined for ell=2 only")
        return rotated_xor_function()
    try:
        a, b = name.split("_")
        d_a = BinMatrix.from_code(int(a, 16), ell, ell)
        d_b = BinMatrix.from_code(int(b, 16), ell, ell)
    except ValueError as exc:
        raise ValueError(f"unrecognized function id {name!r}") from exc
    return DecodeFunction(ell, d_a, d_b)


# --- GF(4) -----------------------------------------------------------------
# Elements a0 + a1*w are stored as a0 | a1 << 1, with w**2 = w + 1.

def _gf4_mul_raw(a: int, b: int) -> int:
    prod = 0
    for i in range(2):
        if (b >> i) & 1:
            prod ^= a << i
    if prod & 0b100:
        prod ^= 0b111
    return prod


_GF4_MUL = tuple(tuple(_gf4_mul_raw(a, b) for b in range(4)) for a in range(4))


@dataclass(frozen=True)
class Gf4Element:
    value: int

    def __post_init__(self):
        if self.value not in (0, 1, 2, 3):
            raise ValueError(f"GF(4) value must be in 0..3, got {self.value!r}")

    def __add__(self, other: "Gf4Element") -> "Gf4Element":
        return Gf4Element(self.value ^ other.value)

    __sub__ = __add__

    def __mul__(self, other: "Gf4Element") -> "Gf4Element":
        return Gf4Element(_GF4_MUL[self.value][other.value])

    def __bool__(self) -> bool:
        return self.value != 0

    def inverse(self) -> "Gf4Element":
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse in GF(4)")
        return next(Gf4Element(b) for b in range(1, 4) if _GF4_MUL[self.value][b] == 1)

    def __repr__(self) -> str:
        return ("0", "1", "w", "w^2")[self.value]


GF4_ZERO, GF4_ONE, GF4_OMEGA, GF4_OMEGA2 = (Gf4Element(v) for v in range(4))
GF4_NONZERO = (GF4_ONE, GF4_OMEGA, GF4_OMEGA2)


def gf4_mul_matrix(alpha: Gf4Element) -> BinMatrix:
    """Matrix of ``x -> alpha * x`` in the basis {1, w}; column j is alpha times basis j."""
    cols = [_GF4_MUL[alpha.value][1], _GF4_MUL[alpha.value][2]]
    return BinMatrix.from_rows([[(cols[0] >> i) & 1, (cols[1] >> i) & 1] for i in range(2)])


def gf4_embed(alpha: Gf4Element, beta: Gf4Element) -> DecodeFunction:
    if not alpha or not beta:
        raise ZeroCoefficient("GF(4) combination coefficients must be nonzero")
    return DecodeFunction(2, gf4_mul_matrix(alpha), gf4_mul_matrix(beta))


# --- partitions --------------------------------------------------------------

@dataclass(frozen=True)
class PartitionSpec:
    """A subset S of levels split into unordered nonempty blocks (1-based levels)."""

    ell: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        canon = tuple(sorted((tuple(sorted(set(b))) for b in self.blocks), key=lambda b: b[0] if b else 0))
        if not canon:
            raise ValueError("at least one block required")
        seen: set[int] = set()
        for b in canon:
            if not b:
                raise ValueError("blocks must be nonempty")
            if seen.intersection(b):
                raise ValueError("blocks must be disjoint")
            if b[0] < 1 or b[-1] > self.ell:
                raise ValueError(f"levels must lie in 1..{self.ell}")
            seen.update(b)
        object.__setattr__(self, "blocks", canon)

    @property
    def p(self) -> int:
        return len(self.blocks)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(k for b in self.blocks for k in b)

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(1, self.ell + 1)) - self.support

    @property
    def leaders(self) -> tuple[int, ...]:
        """Smallest element of each block."""
        return tuple(b[0] for b in self.blocks)

    @property
    def label(self) -> str:
        return "".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)

    def sort_key(self) -> tuple:
        return (-self.p, len(self.support), self.blocks)


def _set_partitions(items: list[int]) -> Iterator[list[list[int]]]:
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


@lru_cache(maxsize=None)
def enumerate_partitions(ell: int) -> tuple[PartitionSpec, ...]:
    """Every (S, {S_1..S_p}) with S nonempty, each unordered partition once.

    Ordered by descending block count, then subset size, then blocks, which for
    ell=2 gives {1}{2}, {1}, {2}, {1,2}.
    """
    _check_ell(ell)
    specs = set()
    for mask in range(1, 1 << ell):
        subset = [k + 1 for k in range(ell) if (mask >> k) & 1]
        for part in _set_partitions(subset):
            specs.add(PartitionSpec(ell, tuple(tuple(b) for b in part)))
    return tuple(sorted(specs, key=PartitionSpec.sort_key))


def partition_transform(spec: PartitionSpec) -> BinMatrix:
    """Matrix whose column t_k (leader of block S_k) is the indicator of S_k.

    Every other column is a unit column, so the result is lower-unitriangular
    after the leaders and always invertible.
    """
    ell = spec.ell
    cols = {m: 1 << (m - 1) for m in range(1, ell + 1)}
    for block in spec.blocks:
        cols[block[0]] = sum(1 << (k - 1) for k in block)
    rows = []
    for r in range(ell):
        rows.append(sum(((cols[m] >> r) & 1) << (m - 1) for m in range(1, ell + 1)))
    return BinMatrix(ell, ell, tuple(rows))
