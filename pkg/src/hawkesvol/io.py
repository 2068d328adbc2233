"""Atomic CSV/JSON emission."""

from __future__ import annotations

import contextlib
import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


@contextlib.contextmanager
def atomic_open(dest: str | Path, mode: str = "w", **kwargs):
    """Write to a temp file in the destination directory, then rename over ``dest``."""
    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{dest.name}.", dir=dest.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, dest)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    if isinstance(x, (int, str)) and not isinstance(x, bool):
        return str(x)
    return f"{float(x):.15g}"


def write_csv(dest: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with atomic_open(dest, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(dest: str | Path, obj) -> None:
    with atomic_open(dest) as fh:
        fh.write(dumps(obj))
