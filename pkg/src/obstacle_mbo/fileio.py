"""File formats: binary PGM (P5) fields and masks, metrics CSV, run manifests."""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import PHASE_DTYPE

METRIC_COLUMNS = ("iter", "area_fraction", "energy", "movement", "flips")
STUDY_COLUMNS = ("h", "iterations", "components", "hull_error", "area_fraction_final")
BENCH_COLUMNS = ("n", "N", "seconds_per_iter")

_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+"
                     rb"(?:#[^\n]*\n\s*)*(\d+)\s")


class FormatError(ValueError):
    pass


def write_pgm(path, image: np.ndarray) -> None:
    """Write an 8-bit array as binary PGM, rows first."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM images are 2-d")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if m is None:
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit graymaps are supported (max value {maxval})")
    body = data[m.end():]
    if len(body) < w * h:
        raise FormatError(f"{path}: truncated, expected {w * h} pixel bytes, got {len(body)}")
    return np.frombuffer(body[: w * h], dtype=np.uint8).reshape(h, w).copy()


def save_phase(path, u: np.ndarray) -> None:
    write_pgm(path, np.where(np.asarray(u) > 0, 255, 0))


def load_phase(path) -> np.ndarray:
    img = read_pgm(path)
    if not np.all((img == 0) | (img == 255)):
        raise FormatError(f"{path}: phase images may only contain 0 and 255")
    if img.shape[0] != img.shape[1]:
        raise FormatError(f"{path}: phase images must be square, got {img.shape}")
    return np.where(img == 255, 1, -1).astype(PHASE_DTYPE)


def save_mask(path, mask: np.ndarray) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0))


def load_mask(path) -> np.ndarray:
    return load_phase(path) == 1


def outline(mask: np.ndarray) -> np.ndarray:
    """Cells of ``mask`` with a 4-neighbour outside it (periodic)."""
    inner = mask.copy()
    for shift in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        inner &= np.roll(mask, shift, axis=(0, 1))
    return mask & ~inner


def render(u: np.ndarray, phi: np.ndarray | None = None, psi: np.ndarray | None = None
           ) -> np.ndarray:
    """Phase in black (-1) and white (+1), obstacle outlines in mid-gray."""
    img = np.where(np.asarray(u) > 0, 255, 0).astype(np.uint8)
    for mask in (phi, psi):
        if mask is not None:
            img[outline(np.asarray(mask, dtype=bool))] = 128
    return img


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_rows(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")
