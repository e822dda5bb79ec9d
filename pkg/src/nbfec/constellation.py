"""
Modulation alphabets, bit labelings, priors and the symbol mapper.

Points are stored as complex numbers (in-phase + j quadrature). Symbol
index ``i`` (the GF(2^m) code symbol) maps to ``points[i]``; the bit label
of that point is only used for GMI and pre-FEC BER.

Constellation file format (UTF-8)::

    # comment
    M D
    label_bits re im [prior]
    ...

with ``label_bits`` written MSB first as a 0/1 string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np


class ConstellationFormatError(ValueError):
    """Malformed or inconsistent constellation description."""


class SymbolRangeError(ValueError):
    """Symbol index outside the modulation alphabet."""


@dataclass(frozen=True, eq=False)
class Constellation:
    """
    Normalized signal set.

    Parameters
    ----------
    points : ndarray of complex, shape (M,)
        Constellation points after normalization to unit average energy.
    labels : ndarray of int, shape (M,)
        Bit label of each point as an integer (MSB = first bit).
    priors : ndarray of float, shape (M,)
        A priori probabilities, summing to one.
    name : str
    """

    points: np.ndarray
    labels: np.ndarray
    priors: np.ndarray
    name: str = ""
    _bits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=complex).ravel()
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        priors = np.asarray(self.priors, dtype=float).ravel()
        M = points.size
        if M < 2 or M & (M - 1):
            raise ConstellationFormatError(f"M={M} is not a power of two >= 2")
        if labels.size != M or priors.size != M:
            raise ConstellationFormatError("points, labels and priors differ in length")
        if len(np.unique(np.round(points, 12))) != M:
            raise ConstellationFormatError("duplicate constellation points")
        if sorted(labels.tolist()) != list(range(M)):
            raise ConstellationFormatError("labels are not a bijection onto {0,1}^m")
        if np.any(priors <= 0) or abs(priors.sum() - 1.0) > 1e-9:
            raise ConstellationFormatError("priors must be positive and sum to 1")
        priors = priors / priors.sum()
        energy = float(np.sum(priors * np.abs(points) ** 2))
        if energy <= 0:
            raise ConstellationFormatError("zero-energy constellation")
        points = points / math.sqrt(energy)

        m = M.bit_length() - 1
        shifts = np.arange(m - 1, -1, -1)
        bits = (labels[:, None] >> shifts[None, :]) & 1
        for name, arr in (("points", points), ("labels", labels),
                          ("priors", priors), ("_bits", bits)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def M(self) -> int:
        return self.points.size

    @property
    def m(self) -> int:
        return self.M.bit_length() - 1

    @property
    def bits(self) -> np.ndarray:
        """(M, m) array of label bits, MSB first."""
        return self._bits

    @property
    def energy(self) -> float:
        return float(np.sum(self.priors * np.abs(self.points) ** 2))

    @property
    def equiprobable(self) -> bool:
        return bool(np.allclose(self.priors, 1.0 / self.M, rtol=0, atol=1e-15))

    def with_labels(self, labels, name=None) -> "Constellation":
        return Constellation(self.points, labels, self.priors, name or self.name)

    def label_bits(self, i: int) -> tuple:
        """m-bit label of symbol ``i`` (MSB first)."""
        if not 0 <= i < self.M:
            raise SymbolRangeError(f"symbol {i} outside 0..{self.M - 1}")
        return tuple(int(b) for b in self._bits[i])

    def to_text(self) -> str:
        m = self.m
        lines = [f"# {self.name}" if self.name else "# constellation", f"{self.M} 2"]
        for s, lab, p in zip(self.points, self.labels, self.priors):
            lines.append(f"{int(lab):0{m}b} {s.real:.17g} {s.imag:.17g} {p:.17g}")
        return "\n".join(lines) + "\n"


def parse_constellation(text: str, name: str = "") -> Constellation:
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if header is None:
            if len(tok) != 2:
                raise ConstellationFormatError(f"line {lineno}: expected header 'M D'")
            try:
                header = int(tok[0]), int(tok[1])
            except ValueError:
                raise ConstellationFormatError(f"line {lineno}: bad header {line!r}") from None
            continue
        if len(tok) not in (3, 4):
            raise ConstellationFormatError(f"line {lineno}: expected 'bits re im [prior]'")
        rows.append((lineno, tok))
    if header is None:
        raise ConstellationFormatError("missing header")
    M, D = header
    if D != 2:
        raise ConstellationFormatError(f"only D=2 is supported, got D={D}")
    if M < 2 or M & (M - 1):
        raise ConstellationFormatError(f"M={M} is not a power of two")
    if len(rows) != M:
        raise ConstellationFormatError(f"header says M={M} but {len(rows)} points given")
    m = M.bit_length() - 1

    points, labels, priors = [], [], []
    for lineno, tok in rows:
        lab = tok[0]
        if len(lab) != m or set(lab) - {"0", "1"}:
            raise ConstellationFormatError(f"line {lineno}: label {lab!r} is not {m} bits")
        try:
            re_, im_ = float(tok[1]), float(tok[2])
            p = float(tok[3]) if len(tok) == 4 else 1.0 / M
        except ValueError:
            raise ConstellationFormatError(f"line {lineno}: non-numeric field") from None
        labels.append(int(lab, 2))
        points.append(complex(re_, im_))
        priors.append(p)
    priors = np.array(priors)
    if abs(priors.sum() - 1.0) > 1e-9:
        raise ConstellationFormatError(f"priors sum to {priors.sum():.12g}, not 1")
    return Constellation(np.array(points), np.array(labels), priors, name)


BUILTIN = ("C1", "C2", "C3", "C4", "8psk", "ring7c", "qpsk", "bpsk")


def builtin_names() -> tuple:
    return BUILTIN


def load_constellation(spec) -> Constellation:
    """
    Load a constellation from a built-in name or a file path.

    Built-ins: ``C1`` (rectangular 2x4), ``C2`` (4+4 star), ``C3`` (circular
    8-PSK), ``C4`` (7-point ring plus center), plus ``8psk``, ``ring7c``,
    ``qpsk`` (Gray) and ``bpsk``.
    """
    if isinstance(spec, Constellation):
        return spec
    key = str(spec)
    if key in BUILTIN:
        text = resources.files("nbfec.data.constellations").joinpath(f"{key}.txt").read_text("utf-8")
        return parse_constellation(text, key)
    path = Path(key)
    if not path.is_file():
        raise FileNotFoundError(f"no built-in constellation or file named {key!r}")
    return parse_constellation(path.read_text("utf-8"), path.stem)


def map_symbols(u, c: Constellation) -> np.ndarray:
    """Map GF symbols (integers 0..M-1) to complex constellation points."""
    u = np.asarray(u)
    if u.size and (u.min() < 0 or u.max() >= c.M):
        raise SymbolRangeError(f"symbols must lie in 0..{c.M - 1}")
    return c.points[u]


def demap_symbols(x, c: Constellation) -> np.ndarray:
    """Inverse of :func:`map_symbols` for exact constellation points."""
    x = np.asarray(x, dtype=complex)
    d = np.abs(x[..., None] - c.points)
    idx = d.argmin(axis=-1)
    if np.any(d.min(axis=-1) > 1e-9):
        raise SymbolRangeError("value is not a constellation point")
    return idx


def label_bits(i: int, c: Constellation) -> tuple:
    return c.label_bits(i)
