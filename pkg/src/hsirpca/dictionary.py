"""Target dictionaries: spectral sample records, the CSV interchange format,
and assembly into the p x Nt dictionary matrix the solver consumes.

The CSV layout is one header row of sample names followed by one row per
band. An optional first column named `wavelength_um` carries the band
centers. Values are written with full precision (shortest round-trip
decimal), so a save/load cycle reproduces them bit-exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .errors import DataError

NDArrayF = npt.NDArray[np.floating]
PathLike = Union[str, Path]

WAVELENGTH_COLUMN = "wavelength_um"


@dataclass(frozen=True)
class SpectrumRecord:
    """One named reflectance spectrum, optionally with band centers."""
    name: str
    reflectance: NDArrayF             # [p]
    wavelengths: Optional[NDArrayF] = None   # [p], micrometers, ascending

    def __post_init__(self):
        if not self.name:
            raise ValueError("SpectrumRecord.name must be non-empty")
        refl = np.asarray(self.reflectance, dtype=np.float64)
        if refl.ndim != 1 or refl.size == 0:
            raise ValueError("SpectrumRecord.reflectance must be 1-D and non-empty")
        if not np.all(np.isfinite(refl)):
            raise ValueError("SpectrumRecord.reflectance must be finite")
        object.__setattr__(self, "reflectance", refl)
        if self.wavelengths is not None:
            wl = np.asarray(self.wavelengths, dtype=np.float64)
            if wl.shape != refl.shape:
                raise ValueError("SpectrumRecord.wavelengths length must match reflectance")
            if not np.all(np.diff(wl) > 0):
                raise ValueError("SpectrumRecord.wavelengths must be strictly ascending")
            object.__setattr__(self, "wavelengths", wl)

    @property
    def bands(self) -> int:
        return int(self.reflectance.size)


@dataclass(frozen=True)
class TargetDictionary:
    """Dictionary matrix At whose columns are target sample spectra."""
    spectra: NDArrayF                 # [p, Nt]
    labels: Tuple[str, ...]
    normalized: bool = False          # True if columns were scaled to unit l2

    def __post_init__(self):
        A = np.asarray(self.spectra, dtype=np.float64)
        if A.ndim != 2 or A.shape[1] < 1:
            raise ValueError("TargetDictionary.spectra must be 2-D with Nt >= 1")
        if not np.all(np.isfinite(A)):
            raise ValueError("TargetDictionary.spectra must be finite")
        norms = np.linalg.norm(A, axis=0)
        zero = np.nonzero(norms == 0)[0]
        if zero.size:
            raise ValueError("TargetDictionary has all-zero columns at %s" % zero.tolist())
        if len(self.labels) != A.shape[1]:
            raise ValueError("TargetDictionary needs one label per column")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("TargetDictionary labels must be unique")
        object.__setattr__(self, "spectra", A)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @property
    def bands(self) -> int:
        return int(self.spectra.shape[0])

    @property
    def size(self) -> int:
        return int(self.spectra.shape[1])


def load_spectra(path: PathLike) -> List[SpectrumRecord]:
    """Read spectrum records from a CSV file (one column per sample)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("spectra file %s is empty" % path)
    header = [c.strip() for c in rows[0]]
    has_wl = bool(header) and header[0] == WAVELENGTH_COLUMN
    names = header[1:] if has_wl else header
    if not names:
        raise DataError("spectra file %s has no sample columns" % path)
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DataError("duplicate sample names %s in %s" % (dupes, path))
    width = len(header)
    values = np.empty((len(rows) - 1, width), dtype=np.float64)
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataError("row %d of %s has %d cells, header has %d"
                            % (i, path, len(row), width))
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError as exc:
                raise DataError("non-numeric cell %r at row %d, column %d of %s"
                                % (cell, i, j + 1, path)) from exc
    if values.shape[0] == 0:
        raise DataError("spectra file %s has a header but no data rows" % path)
    wl = values[:, 0] if has_wl else None
    first = 1 if has_wl else 0
    return [SpectrumRecord(name=name, reflectance=values[:, first + k], wavelengths=wl)
            for k, name in enumerate(names)]


def save_spectra(records: Sequence[SpectrumRecord], path: PathLike) -> None:
    """Write records as CSV with full-precision decimals."""
    if not records:
        raise DataError("no records to save")
    p = records[0].bands
    for rec in records:
        if rec.bands != p:
            raise DataError("record %r has %d bands, expected %d"
                            % (rec.name, rec.bands, p))
    wl = records[0].wavelengths
    for rec in records[1:]:
        same = (rec.wavelengths is None) == (wl is None)
        if same and wl is not None:
            same = np.array_equal(rec.wavelengths, wl)
        if not same:
            raise DataError("records disagree on wavelengths; cannot share one column")
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        names = [rec.name for rec in records]
        out.writerow(([WAVELENGTH_COLUMN] if wl is not None else []) + names)
        for i in range(p):
            row = [repr(float(wl[i]))] if wl is not None else []
            row.extend(repr(float(rec.reflectance[i])) for rec in records)
            out.writerow(row)


def build_dictionary(records: Sequence[SpectrumRecord], expected_bands: int,
                     normalize: bool = False) -> TargetDictionary:
    """Stack records (in order) into a dictionary with expected_bands rows."""
    if not records:
        raise DataError("cannot build a dictionary from zero records")
    for rec in records:
        if rec.bands != expected_bands:
            raise DataError("record %r has %d bands, scene has %d"
                            % (rec.name, rec.bands, expected_bands))
    A = np.column_stack([rec.reflectance for rec in records])
    norms = np.linalg.norm(A, axis=0)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise DataError("record %r is all-zero" % records[int(zero[0])].name)
    if normalize:
        A = A / norms
    return TargetDictionary(spectra=A, labels=tuple(r.name for r in records),
                            normalized=normalize)
