"""Packed-bit linear algebra: the XNOR/popcount kernel behind every binary layer.

Logical bits are stored LSB-first in 64-bit words. Bit 1 encodes +1 and
bit 0 encodes -1, so the number of agreeing positions between two vectors
is monotone in their +/-1 dot product:

    2 * xnor_popcount(a, b) - n == sum_i sign(a)_i * sign(b)_i

All tail bits beyond the logical length are kept at zero by construction,
which lets the kernel count disagreements with a plain XOR (zero tails
XOR to zero and contribute nothing) instead of masking the final word.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InvalidSign

WORD_BITS = 64


def _n_words(length: int) -> int:
    return (length + WORD_BITS - 1) // WORD_BITS


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array into LSB-first uint64 words (tail zeroed)."""
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    n = bits.size
    nw = _n_words(n)
    if n == 0:
        return np.zeros(0, dtype=np.uint64)
    padded = np.zeros(nw * WORD_BITS, dtype=np.uint8)
    padded[:n] = bits
    packed = np.packbits(padded, bitorder="little")
    return packed.view("<u8").astype(np.uint64, copy=False)


def _unpack_bits(words: np.ndarray, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros(0, dtype=np.uint8)
    as_bytes = words.astype("<u8", copy=False).view(np.uint8)
    return np.unpackbits(as_bytes, bitorder="little")[:length]


class BitVector:
    """Immutable packed vector of +/-1 values (1 bit each, LSB-first)."""

    __slots__ = ("length", "words")

    def __init__(self, length: int, words: np.ndarray):
        if length < 0:
            raise ValueError("negative length")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.size != _n_words(length):
            raise DimensionMismatch(
                f"{words.size} words cannot hold {length} bits"
            )
        # Force the invariant rather than trusting the caller.
        rem = length % WORD_BITS
        if rem and words.size:
            words = words.copy()
            words[-1] &= np.uint64((1 << rem) - 1)
        self.length = length
        self.words = words
        self.words.setflags(write=False)

    @classmethod
    def zeros(cls, length: int) -> "BitVector":
        return cls(length, np.zeros(_n_words(length), dtype=np.uint64))

    @classmethod
    def from_bits(cls, bits) -> "BitVector":
        bits = np.asarray(bits)
        return cls(bits.size, _pack_bits(bits != 0))

    def to_bits(self) -> np.ndarray:
        """0/1 uint8 array of the logical bits."""
        return _unpack_bits(self.words, self.length)

    def to_signs(self) -> np.ndarray:
        """+/-1 int8 array (bit 1 -> +1, bit 0 -> -1)."""
        return (self.to_bits().astype(np.int8) * 2) - 1

    def complement(self) -> "BitVector":
        return BitVector(self.length, np.bitwise_not(self.words))

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return int((self.words[i // WORD_BITS] >> np.uint64(i % WORD_BITS)) & np.uint64(1))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitVector)
            and self.length == other.length
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):
        return hash((self.length, self.words.tobytes()))

    def __repr__(self) -> str:
        head = "".join(str(b) for b in self.to_bits()[:16])
        dots = "..." if self.length > 16 else ""
        return f"BitVector({self.length}, bits={head}{dots})"


class BitMatrix:
    """Row-major stack of equal-length BitVectors (one row per neuron)."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.shape != (rows, _n_words(cols)):
            raise DimensionMismatch(
                f"word array {words.shape} cannot hold {rows}x{cols} bits"
            )
        rem = cols % WORD_BITS
        if rem and words.size:
            words = words.copy()
            words[:, -1] &= np.uint64((1 << rem) - 1)
        self.rows = rows
        self.cols = cols
        self.words = words
        self.words.setflags(write=False)

    @classmethod
    def from_sign_matrix(cls, signs) -> "BitMatrix":
        """Pack a matrix of +/-1 entries, one row per output neuron."""
        signs = np.asarray(signs)
        if signs.ndim != 2:
            raise DimensionMismatch("expected a 2-d matrix")
        bad = (signs != 1) & (signs != -1)
        if bad.any():
            raise InvalidSign(f"{int(bad.sum())} entries outside {{-1,+1}}")
        rows, cols = signs.shape
        packed = np.stack(
            [_pack_bits(signs[i] == 1) for i in range(rows)]
        ) if rows else np.zeros((0, _n_words(cols)), dtype=np.uint64)
        return cls(rows, cols, packed)

    @classmethod
    def from_bit_rows(cls, bits) -> "BitMatrix":
        bits = np.asarray(bits)
        rows, cols = bits.shape
        packed = np.stack(
            [_pack_bits(bits[i] != 0) for i in range(rows)]
        ) if rows else np.zeros((0, _n_words(cols)), dtype=np.uint64)
        return cls(rows, cols, packed)

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.words[i])

    def to_signs(self) -> np.ndarray:
        """(rows, cols) int8 matrix of +/-1 entries."""
        if self.rows == 0:
            return np.zeros((0, self.cols), dtype=np.int8)
        return np.stack([self.row(i).to_signs() for i in range(self.rows)])

    def row_popcounts(self) -> np.ndarray:
        """Number of +1 weights per row."""
        return np.bitwise_count(self.words).sum(axis=1).astype(np.int64)

    def row_sign_sums(self) -> np.ndarray:
        """sum_j sign(W)_ij per row, i.e. 2*popcount(row) - cols."""
        return 2 * self.row_popcounts() - self.cols

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitMatrix)
            and (self.rows, self.cols) == (other.rows, other.cols)
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols})"


def pack_signs(values) -> BitVector:
    """Pack a sequence of +/-1 integers; bit i is 1 iff values[i] == +1."""
    arr = np.asarray(values)
    if arr.size == 0:
        return BitVector.zeros(0)
    bad = (arr != 1) & (arr != -1)
    if bad.any():
        raise InvalidSign(f"{int(bad.sum())} entries outside {{-1,+1}}")
    return BitVector.from_bits(arr == 1)


def xnor_popcount(a: BitVector, b: BitVector) -> int:
    """Number of positions where a and b agree.

    Tail bits cannot contribute: both tails are zero, so they never
    disagree under XOR, and agreements = length - popcount(a XOR b).
    """
    if a.length != b.length:
        raise DimensionMismatch(f"lengths {a.length} != {b.length}")
    n = a.length
    if n == 0:
        return 0
    if a.words.size == 1:
        return n - ((int(a.words[0]) ^ int(b.words[0])).bit_count())
    diff = np.bitwise_xor(a.words, b.words)
    return n - int(np.bitwise_count(diff).sum())


def binary_gemv(w: BitMatrix, a: BitVector) -> np.ndarray:
    """Per-row xnor_popcount of w against a; int64 vector of length w.rows."""
    if w.cols != a.length:
        raise DimensionMismatch(f"matrix cols {w.cols} != vector length {a.length}")
    if w.rows == 0:
        return np.zeros(0, dtype=np.int64)
    diff = np.bitwise_xor(w.words, a.words[None, :])
    return w.cols - np.bitwise_count(diff).sum(axis=1).astype(np.int64)


def binary_gemm_popcount(w: BitMatrix, stacked_words: np.ndarray, cols: int) -> np.ndarray:
    """xnor_popcount of every w row against every packed row of `stacked_words`.

    `stacked_words` is a (k, n_words) uint64 array of k packed vectors with
    `cols` logical bits each (tails zero). Returns an int64 (k, rows) array.
    Used to batch the T presentations of a stochastic pass.
    """
    if w.cols != cols:
        raise DimensionMismatch(f"matrix cols {w.cols} != vector length {cols}")
    if w.rows == 0 or stacked_words.shape[0] == 0:
        return np.zeros((stacked_words.shape[0], w.rows), dtype=np.int64)
    diff = np.bitwise_xor(stacked_words[:, None, :], w.words[None, :, :])
    return cols - np.bitwise_count(diff).sum(axis=2).astype(np.int64)
