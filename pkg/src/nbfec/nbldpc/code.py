"""
Quasi-cyclic regular NB-LDPC codes over GF(2^m).

A code is a J x L base graph, one circulant shift per base edge (weight-one
circulants of size Z) and one nonzero GF coefficient per expanded edge.
Base-graph edge placement and shifts come from a seeded greedy search: each
new shift avoids every value that would close a 4-cycle in the lifted
graph, and also avoids 6-cycles whenever a free shift remains.

Preset file format (UTF-8 text)::

    # comment
    m 3
    dv 3
    dc 15
    Z 100
    coef_seed 1234
    base
    <J rows of L integers, -1 for no edge>
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from ..channel import STREAM_CODE, derive_rng
from ..gf import build_field

# Check degrees of the five rate presets with d_v = 3.
PRESET_CHECK_DEGREE = {0.7: 10, 0.75: 12, 0.8: 15, 0.85: 20, 0.9: 30}


class CodeConstructionError(RuntimeError):
    pass


@dataclass(eq=False)
class QCCode:
    """
    Parity-check structure.

    Attributes
    ----------
    m, dv, dc, Z : int
    base : ndarray, shape (J, L)
        Circulant shift per base entry, -1 where the block is zero.
    coef_seed : int
        Seed of the per-edge GF coefficients.
    name : str
    """

    m: int
    dv: int
    dc: int
    Z: int
    base: np.ndarray
    coef_seed: int
    name: str = ""
    row_ptr: np.ndarray = field(init=False, repr=False)
    edge_var: np.ndarray = field(init=False, repr=False)
    edge_coef: np.ndarray = field(init=False, repr=False)
    _encoder: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=np.int64)
        J, L = self.base.shape
        mask = self.base >= 0
        if np.any(mask.sum(axis=0) != self.dv) or np.any(mask.sum(axis=1) != self.dc):
            raise CodeConstructionError("base matrix is not (dv, dc)-regular")
        if np.any(self.base[mask] >= self.Z):
            raise CodeConstructionError("shift exceeds circulant size")
        Z = self.Z
        rows, cols = [], []
        for r in range(J):
            for c in np.flatnonzero(mask[r]):
                i = np.arange(Z)
                rows.append(r * Z + i)
                cols.append(c * Z + (i + self.base[r, c]) % Z)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        order = np.lexsort((cols, rows))
        rows, cols = rows[order], cols[order]
        self.row_ptr = np.searchsorted(rows, np.arange(J * Z + 1)).astype(np.int64)
        self.edge_var = cols.astype(np.int64)
        rng = derive_rng(self.coef_seed, STREAM_CODE)
        self.edge_coef = rng.integers(1, 1 << self.m, size=cols.size).astype(np.int64)

    @property
    def gf(self):
        return build_field(self.m)

    @property
    def M(self) -> int:
        return 1 << self.m

    @property
    def n(self) -> int:
        return self.base.shape[1] * self.Z

    @property
    def n_checks(self) -> int:
        return self.base.shape[0] * self.Z

    @property
    def design_rate(self) -> float:
        return 1.0 - self.dv / self.dc

    @property
    def layers(self) -> list:
        """Row ranges of the block rows (one layer per base row)."""
        return [range(r * self.Z, (r + 1) * self.Z) for r in range(self.base.shape[0])]

    @property
    def encoder(self):
        if self._encoder is None:
            from .encode import SystematicEncoder
            self._encoder = SystematicEncoder(self)
        return self._encoder

    @property
    def rank(self) -> int:
        return self.encoder.rank

    @property
    def k(self) -> int:
        return self.n - self.rank

    @property
    def rate(self) -> float:
        return self.k / self.n

    def dense_H(self) -> np.ndarray:
        H = np.zeros((self.n_checks, self.n), dtype=np.int64)
        rows = np.repeat(np.arange(self.n_checks), np.diff(self.row_ptr))
        H[rows, self.edge_var] = self.edge_coef
        return H

    def syndrome(self, word) -> np.ndarray:
        word = np.asarray(word, dtype=np.int64)
        prod = self.gf.mul_table[self.edge_coef, word[self.edge_var]]
        return np.bitwise_xor.reduceat(prod, self.row_ptr[:-1])

    def is_codeword(self, word) -> bool:
        return not np.any(self.syndrome(word))

    def girth(self, limit: int = 12) -> int:
        """Tanner-graph girth by BFS from every variable node (``limit + 2`` if none found)."""
        return int(_girth(self.row_ptr, self.edge_var, self.n, self.n_checks, limit))

    def to_text(self) -> str:
        lines = [f"# {self.name}" if self.name else "# QC NB-LDPC code",
                 f"m {self.m}", f"dv {self.dv}", f"dc {self.dc}", f"Z {self.Z}",
                 f"coef_seed {self.coef_seed}", "base"]
        lines += [" ".join(str(int(v)) for v in row) for row in self.base]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def parse_code(text: str, name: str = "") -> QCCode:
    params, base = {}, []
    in_base = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if in_base:
            base.append([int(v) for v in line.split()])
            continue
        if line == "base":
            in_base = True
            continue
        tok = line.split()
        if len(tok) != 2:
            raise CodeConstructionError(f"line {lineno}: expected 'key value'")
        params[tok[0]] = int(tok[1])
    missing = {"m", "dv", "dc", "Z", "coef_seed"} - params.keys()
    if missing or not base:
        raise CodeConstructionError(f"incomplete code file (missing {sorted(missing) or 'base'})")
    if len({len(r) for r in base}) != 1:
        raise CodeConstructionError("ragged base matrix")
    return QCCode(params["m"], params["dv"], params["dc"], params["Z"],
                  np.array(base), params["coef_seed"], name)


def load_code(path) -> QCCode:
    path = Path(path)
    return parse_code(path.read_text("utf-8"), path.stem)


def _base_graph(J, L, dv, dc, rng):
    """Random (dv, dc)-regular simple bipartite base graph, rows balanced greedily."""
    for _ in range(100):
        cap = np.full(J, dc)
        mask = np.zeros((J, L), dtype=bool)
        ok = True
        for c in range(L):
            # prefer rows with most remaining capacity, random tie-break
            key = cap + rng.random(J) * 0.5
            rows = np.argsort(-key)[:dv]
            if np.any(cap[rows] <= 0):
                ok = False
                break
            mask[rows, c] = True
            cap[rows] -= 1
        if ok and not cap.any():
            return mask
    raise CodeConstructionError(f"could not build a ({dv},{dc}) base graph with {J}x{L}")


def _forbidden_shifts(r, c, shift, mask, Z):
    """Shift values for edge (r, c) that would close a 4-cycle / a 6-cycle."""
    f4, f6 = set(), set()
    rows_c = [r1 for r1 in np.flatnonzero(mask[:, c]) if r1 != r]
    for r1 in rows_c:
        e1 = shift[r1, c]
        for c1 in np.flatnonzero(mask[r1]):
            if c1 == c:
                continue
            base1 = e1 - shift[r1, c1]
            if mask[r, c1]:
                f4.add(int((base1 + shift[r, c1]) % Z))
            for r2 in np.flatnonzero(mask[:, c1]):
                if r2 == r or r2 == r1:
                    continue
                base2 = base1 + shift[r2, c1]
                for c2 in np.flatnonzero(mask[r2] & mask[r]):
                    if c2 == c or c2 == c1:
                        continue
                    f6.add(int((base2 - shift[r2, c2] + shift[r, c2]) % Z))
    return f4, f6


def _lift(mask, Z, rng):
    J, L = mask.shape
    placed = np.zeros_like(mask)
    shift = np.full((J, L), -1, dtype=np.int64)
    n6 = 0
    for c in range(L):
        for r in np.flatnonzero(mask[:, c]):
            f4, f6 = _forbidden_shifts(r, c, shift, placed, Z)
            free = [s for s in range(Z) if s not in f4 and s not in f6]
            if not free:
                free = [s for s in range(Z) if s not in f4]
                n6 += 1
            if not free:
                raise CodeConstructionError(
                    f"no 4-cycle-free shift for base edge ({r},{c}) with Z={Z}; "
                    f"{len(f4)} of {Z} shifts blocked, increase Z")
            shift[r, c] = free[rng.integers(len(free))]
            placed[r, c] = True
    return shift, n6


def code_dimensions(dv, dc, n_target, Z=100):
    """Base width L (multiple of dc/gcd(dv,dc)) and circulant size Z giving n close to n_target."""
    L0 = dc // math.gcd(dv, dc)
    L = max(dc, L0 * max(1, round(n_target / (Z * L0))))
    Z = max(1, round(n_target / L))
    return L * dv // dc, L, Z


def build_code(m: int = 3, R: float | None = 0.8, n_target: int = 5000, seed: int = 0,
               dv: int = 3, dc: int | None = None, Z: int = 100, name: str = "") -> QCCode:
    """
    Construct a regular QC NB-LDPC code.

    ``R`` picks the check degree from the rate presets
    (0.7 -> 10, 0.75 -> 12, 0.8 -> 15, 0.85 -> 20, 0.9 -> 30) unless
    ``dc`` is given. Deterministic in ``seed``.
    """
    if dc is None:
        if R is None:
            raise CodeConstructionError("give either R or dc")
        key = round(float(R), 4)
        if key not in PRESET_CHECK_DEGREE:
            raise CodeConstructionError(f"no preset check degree for R={R}; pass dc")
        dc = PRESET_CHECK_DEGREE[key]
    if dc <= dv:
        raise CodeConstructionError("dc must exceed dv")
    J, L, Z = code_dimensions(dv, dc, n_target, Z)
    rng = derive_rng(seed, STREAM_CODE, 0)
    mask = _base_graph(J, L, dv, dc, rng)
    shift, _ = _lift(mask, Z, rng)
    code = QCCode(m, dv, dc, Z, shift, int(derive_rng(seed, STREAM_CODE, 1).integers(2**31)),
                  name or f"qc_m{m}_dv{dv}_dc{dc}_n{L * Z}_s{seed}")
    if code.girth(limit=4) < 6:  # pragma: no cover - guarded by _lift
        raise CodeConstructionError("constructed code has 4-cycles")
    return code


def preset_code(R: float, n_target: int = 5000, seed: int = 1) -> QCCode:
    """Shipped construction for rate R if present, else build one."""
    from importlib import resources

    fname = f"r{int(round(R * 100)):03d}.txt"
    res = resources.files("nbfec.data.codes").joinpath(fname)
    if n_target == 5000 and seed == 1 and res.is_file():
        return parse_code(res.read_text("utf-8"), fname[:-4])
    return build_code(R=R, n_target=n_target, seed=seed)


@numba.njit(cache=True)
def _girth(row_ptr, edge_var, n, n_checks, limit):
    # adjacency of the Tanner graph: variables 0..n-1, checks n..n+n_checks-1
    n_edges = edge_var.size
    deg = np.zeros(n + n_checks, np.int64)
    for r in range(n_checks):
        for e in range(row_ptr[r], row_ptr[r + 1]):
            deg[edge_var[e]] += 1
            deg[n + r] += 1
    ptr = np.zeros(n + n_checks + 1, np.int64)
    for v in range(n + n_checks):
        ptr[v + 1] = ptr[v] + deg[v]
    adj = np.empty(2 * n_edges, np.int64)
    fill = ptr[:-1].copy()
    for r in range(n_checks):
        for e in range(row_ptr[r], row_ptr[r + 1]):
            v = edge_var[e]
            adj[fill[v]] = n + r
            fill[v] += 1
            adj[fill[n + r]] = v
            fill[n + r] += 1

    best = limit + 2
    dist = np.full(n + n_checks, -1, np.int64)
    parent = np.full(n + n_checks, -1, np.int64)
    queue = np.empty(n + n_checks, np.int64)
    touched = np.empty(n + n_checks, np.int64)
    for root in range(n):
        head, tail, nt = 0, 0, 0
        dist[root] = 0
        parent[root] = -1
        queue[tail] = root
        tail += 1
        touched[nt] = root
        nt += 1
        while head < tail:
            u = queue[head]
            head += 1
            if 2 * dist[u] + 1 >= best:
                break
            for k in range(ptr[u], ptr[u + 1]):
                w = adj[k]
                if w == parent[u]:
                    continue
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue[tail] = w
                    tail += 1
                    touched[nt] = w
                    nt += 1
                else:
                    cyc = dist[u] + dist[w] + 1
                    if cyc < best:
                        best = cyc
        for i in range(nt):
            dist[touched[i]] = -1
            parent[touched[i]] = -1
    return best
