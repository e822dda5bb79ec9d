"""
Measurement databases: paired transmit indices and received samples.

File format (UTF-8 CSV)::

    # constellation=<name> M=<int> N=<int>
    # any_key=value        (optional metadata lines)
    tx_index,rx_i,rx_q
    3,0.7071,-0.6999
    ...

The column header line is optional on read.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DBFormatError(ValueError):
    pass


@dataclass(eq=False)
class MeasurementDB:
    tx: np.ndarray
    rx: np.ndarray
    constellation: str = ""
    M: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tx = np.asarray(self.tx, dtype=np.int64).ravel()
        self.rx = np.asarray(self.rx, dtype=complex).ravel()
        if self.tx.size != self.rx.size:
            raise DBFormatError("tx and rx differ in length")
        if self.tx.size < 1:
            raise DBFormatError("empty measurement database")
        if self.M and (self.tx.min() < 0 or self.tx.max() >= self.M):
            raise DBFormatError(f"tx indices must lie in 0..{self.M - 1}")

    def __len__(self):
        return self.tx.size

    @property
    def N(self) -> int:
        return self.tx.size


_HDR = re.compile(r"(\w+)=(\S+)")


def read_db(path) -> MeasurementDB:
    text = Path(path).read_text("utf-8")
    meta = {}
    body = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            meta.update(dict(_HDR.findall(s)))
            continue
        if s[0].isalpha():
            continue
        body.append(s)
    if not body:
        raise DBFormatError(f"{path}: no records")
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DBFormatError(f"{path}: {exc}") from None
    if arr.shape[1] != 3:
        raise DBFormatError(f"{path}: expected 3 columns tx_index,rx_i,rx_q")
    if np.any(arr[:, 0] != np.round(arr[:, 0])):
        raise DBFormatError(f"{path}: tx_index must be integer")
    name = meta.pop("constellation", "")
    M = int(meta.pop("M", 0))
    n_hdr = meta.pop("N", None)
    if n_hdr is not None and int(n_hdr) != arr.shape[0]:
        raise DBFormatError(f"{path}: header says N={n_hdr} but {arr.shape[0]} rows present")
    return MeasurementDB(arr[:, 0].astype(np.int64), arr[:, 1] + 1j * arr[:, 2], name, M, meta)


def write_db(db: MeasurementDB, path) -> None:
    lines = [f"# constellation={db.constellation} M={db.M} N={db.N}"]
    for k, v in db.meta.items():
        lines.append(f"# {k}={v}")
    lines.append("tx_index,rx_i,rx_q")
    lines.extend(f"{t},{y.real!r},{y.imag!r}" for t, y in zip(db.tx.tolist(), db.rx.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
