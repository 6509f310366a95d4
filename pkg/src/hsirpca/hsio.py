"""On-disk formats: cube files (JSON header + raw float64 payload) and
PGM images for masks and score maps.

A cube is stored as two files: `<name>.hsic`, a JSON header with keys
height, width, bands, dtype, byte_order; and `<name>.raw`, the payload as
little-endian float64 in band-sequential order. Masks are 8-bit binary PGM
(P5, maxval 255, 0 = background, 255 = target). Score maps are 16-bit PGM
(big-endian samples per the PGM convention) with the linear scale factor in
a `.scale` sidecar so scores can be recovered.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import numpy.typing as npt

from .cube import HsiCube
from .errors import DataError

NDArrayF = npt.NDArray[np.floating]
NDArrayB = npt.NDArray[np.bool_]
PathLike = Union[str, Path]

_HEADER_KEYS = ("height", "width", "bands", "dtype", "byte_order")


def raw_path_for(header_path: PathLike) -> Path:
    return Path(header_path).with_suffix(".raw")


def write_cube(cube: HsiCube, path: PathLike) -> None:
    """Write `<path>` (the .hsic header) and its .raw payload."""
    path = Path(path)
    if path.suffix != ".hsic":
        path = path.with_suffix(".hsic")
    header = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": "float64",
        "byte_order": "little",
    }
    path.write_text(json.dumps(header, indent=2) + "\n")
    raw_path_for(path).write_bytes(cube.data.astype("<f8").tobytes())


def read_cube(path: PathLike) -> HsiCube:
    path = Path(path)
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError("malformed cube header %s: %s" % (path, exc)) from exc
    if not isinstance(header, dict):
        raise DataError("cube header %s is not a key/value object" % path)
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise DataError("cube header %s missing keys %s" % (path, missing))
    if header["dtype"] != "float64":
        raise DataError("unsupported dtype %r in %s" % (header["dtype"], path))
    if header["byte_order"] != "little":
        raise DataError("unsupported byte order %r in %s" % (header["byte_order"], path))
    try:
        h, w, p = int(header["height"]), int(header["width"]), int(header["bands"])
    except (TypeError, ValueError) as exc:
        raise DataError("non-integer dimensions in %s" % path) from exc
    if h < 1 or w < 1 or p < 1:
        raise DataError("non-positive dimensions in %s" % path)
    payload = raw_path_for(path).read_bytes()
    expected = h * w * p * 8
    if len(payload) != expected:
        raise DataError(
            "payload %s has %d bytes, header %s declares %d"
            % (raw_path_for(path), len(payload), path, expected))
    data = np.frombuffer(payload, dtype="<f8").reshape(p, h, w)
    if not np.all(np.isfinite(data)):
        raise DataError("payload %s contains non-finite values" % raw_path_for(path))
    return HsiCube(height=h, width=w, bands=p, data=data.astype(np.float64))


def _read_pgm_tokens(blob: bytes, count: int) -> Tuple[list, int]:
    """Read `count` whitespace-separated header tokens, skipping # comments.
    Returns the tokens and the offset one byte past the last separator."""
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(blob):
            raise DataError("truncated PGM header")
        c = blob[i:i + 1]
        if c == b"#":
            while i < len(blob) and blob[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace() and blob[j:j + 1] != b"#":
                j += 1
            tokens.append(blob[i:j])
            i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= len(blob) or not blob[i:i + 1].isspace():
        raise DataError("PGM header not followed by raster")
    return tokens, i + 1


def write_mask_pgm(mask: NDArrayB, path: PathLike) -> None:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != np.bool_:
        raise DataError("mask must be a 2-D boolean array")
    h, w = mask.shape
    header = ("P5\n%d %d\n255\n" % (w, h)).encode("ascii")
    Path(path).write_bytes(header + (mask.astype(np.uint8) * 255).tobytes())


def read_mask_pgm(path: PathLike) -> NDArrayB:
    blob = Path(path).read_bytes()
    tokens, off = _read_pgm_tokens(blob, 4)
    if tokens[0] != b"P5":
        raise DataError("%s is not a binary PGM (P5) file" % path)
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise DataError("mask PGM %s must have maxval 255, got %d" % (path, maxval))
    raster = blob[off:]
    if len(raster) != h * w:
        raise DataError("mask PGM %s raster has %d bytes, expected %d"
                        % (path, len(raster), h * w))
    values = np.frombuffer(raster, dtype=np.uint8).reshape(h, w)
    if not np.all((values == 0) | (values == 255)):
        raise DataError("mask PGM %s contains values other than 0 and 255" % path)
    return values == 255


def scale_path_for(pgm_path: PathLike) -> Path:
    p = Path(pgm_path)
    return p.with_name(p.name + ".scale")


def write_score_pgm(scores: NDArrayF, path: PathLike) -> None:
    """16-bit PGM of round(score * scale) with scale = 65535 / max score
    (1.0 for an all-zero map), recorded in the sidecar."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DataError("score map must be 2-D")
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise DataError("scores must be finite and nonnegative")
    h, w = scores.shape
    top = float(scores.max()) if scores.size else 0.0
    scale = 65535.0 / top if top > 0 else 1.0
    pixels = np.clip(np.rint(scores * scale), 0, 65535).astype(">u2")
    header = ("P5\n%d %d\n65535\n" % (w, h)).encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())
    scale_path_for(path).write_text(repr(scale) + "\n")


def read_score_pgm(path: PathLike) -> NDArrayF:
    blob = Path(path).read_bytes()
    tokens, off = _read_pgm_tokens(blob, 4)
    if tokens[0] != b"P5":
        raise DataError("%s is not a binary PGM (P5) file" % path)
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 65535:
        raise DataError("score PGM %s must have maxval 65535, got %d" % (path, maxval))
    raster = blob[off:]
    if len(raster) != h * w * 2:
        raise DataError("score PGM %s raster has %d bytes, expected %d"
                        % (path, len(raster), h * w * 2))
    scale = float(scale_path_for(path).read_text().strip())
    pixels = np.frombuffer(raster, dtype=">u2").reshape(h, w)
    return pixels.astype(np.float64) / scale
