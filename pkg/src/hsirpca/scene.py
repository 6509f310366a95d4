"""Synthetic scene construction: low-rank backgrounds, replicated
pure-pixel backgrounds, and subpixel target implantation under the
replacement model pixel = alpha*target + (1 - alpha)*background.

Scenes for batch runs are described by a key/value spec file; see
`parse_scene_spec`. All generators are pure functions of their arguments
and a seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from .cube import HsiCube
from .dictionary import load_spectra
from .errors import DataError

NDArrayF = npt.NDArray[np.floating]
NDArrayB = npt.NDArray[np.bool_]

# fill fractions exercised by the standard implantation protocol
ALPHAS = (0.01, 0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0)

PROTOCOL_SAMPLE_COUNT = 72


@dataclass(frozen=True)
class BlockSpec:
    """A rectangular implant region (top-left corner plus size)."""
    top: int
    left: int
    height: int
    width: int

    def __post_init__(self):
        if self.top < 0 or self.left < 0:
            raise ValueError("BlockSpec corner must be nonnegative")
        if self.height < 1 or self.width < 1:
            raise ValueError("BlockSpec size must be positive")

    def overlaps(self, other: "BlockSpec") -> bool:
        return not (self.top + self.height <= other.top
                    or other.top + other.height <= self.top
                    or self.left + self.width <= other.left
                    or other.left + other.width <= self.left)


@dataclass(frozen=True)
class ImplantPlan:
    """Where and how strongly to implant one target spectrum."""
    target: NDArrayF              # [p]
    alpha: float                  # fill fraction, 0 < alpha <= 1
    blocks: Tuple[BlockSpec, ...]

    def __post_init__(self):
        t = np.asarray(self.target, dtype=np.float64)
        if t.ndim != 1 or not np.all(np.isfinite(t)):
            raise ValueError("ImplantPlan.target must be a finite 1-D spectrum")
        object.__setattr__(self, "target", t)
        if not 0 < self.alpha <= 1:
            raise ValueError("ImplantPlan.alpha must be in (0, 1]")
        blocks = tuple(self.blocks)
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                if blocks[i].overlaps(blocks[j]):
                    raise ValueError("ImplantPlan blocks %d and %d overlap" % (i, j))
        object.__setattr__(self, "blocks", blocks)


@dataclass(frozen=True)
class GroundTruth:
    """Implant mask (true at target pixels) and the fill fraction used."""
    mask: NDArrayB                # [height, width]
    alpha: float

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 2 or mask.dtype != np.bool_:
            raise ValueError("GroundTruth.mask must be a 2-D boolean array")
        object.__setattr__(self, "mask", mask)

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def _smooth_curve(rng: np.random.Generator, n: int,
                  bumps: Tuple[int, int] = (2, 5)) -> NDArrayF:
    """Nonnegative sum of random Gaussian bumps on [0, 1], peak about 1."""
    x = np.linspace(0.0, 1.0, n)
    y = np.zeros(n)
    for _ in range(int(rng.integers(bumps[0], bumps[1] + 1))):
        amp = rng.uniform(0.3, 1.0)
        center = rng.uniform(0.0, 1.0)
        width = rng.uniform(0.05, 0.25)
        y += amp * np.exp(-0.5 * ((x - center) / width) ** 2)
    return y / y.max()


def _blob_map(rng: np.random.Generator, height: int, width: int) -> NDArrayF:
    """Smooth nonnegative abundance map from a few spatial Gaussian blobs."""
    r = np.arange(height)[:, None]
    c = np.arange(width)[None, :]
    m = np.full((height, width), 0.05)
    for _ in range(int(rng.integers(2, 5))):
        cr = rng.uniform(0, height)
        cc = rng.uniform(0, width)
        sr = rng.uniform(0.1, 0.4) * max(height, 2)
        sc = rng.uniform(0.1, 0.4) * max(width, 2)
        m += rng.uniform(0.3, 1.0) * np.exp(
            -0.5 * (((r - cr) / sr) ** 2 + ((c - cc) / sc) ** 2))
    return m


def synth_background(height: int, width: int, bands: int, rank: int,
                     seed) -> HsiCube:
    """Background of numerical rank exactly `rank`: nonnegative endmember
    spectra mixed by smooth nonnegative abundance maps, scaled into [0, 1]."""
    e = height * width
    if not 1 <= rank <= min(e, bands):
        raise DataError("rank %d invalid for a %dx%dx%d scene"
                        % (rank, height, width, bands))
    rng = np.random.default_rng(seed)
    for _ in range(10):
        spectra = np.stack([0.1 + 0.9 * _smooth_curve(rng, bands)
                            for _ in range(rank)])        # [rank, bands]
        maps = np.stack([_blob_map(rng, height, width).ravel()
                         for _ in range(rank)])           # [rank, e]
        flat = maps.T @ spectra                           # [e, bands]
        flat /= flat.max()
        s = np.linalg.svd(flat, compute_uv=False)
        if s.size >= rank and s[rank - 1] > 1e-10 * s[0]:
            return HsiCube(height=height, width=width, bands=bands,
                           data=np.ascontiguousarray(
                               flat.T.reshape(bands, height, width)))
    raise DataError("could not draw rank-%d factors after 10 attempts" % rank)


def replicate_background(samples: Union[Sequence[NDArrayF], NDArrayF],
                         height: int, width: int, seed) -> HsiCube:
    """Fill every pixel with a randomly chosen sample spectrum."""
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] < 1:
        raise DataError("samples must be a non-empty list of equal-length spectra")
    if not np.all(np.isfinite(S)):
        raise DataError("samples contain non-finite values")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, S.shape[0], size=(height, width))
    img = S[idx]                                          # [h, w, p]
    return HsiCube(height=height, width=width, bands=S.shape[1],
                   data=np.ascontiguousarray(img.transpose(2, 0, 1)))


def implant(cube: HsiCube, plan: ImplantPlan) -> Tuple[HsiCube, GroundTruth]:
    """Replace block pixels by alpha*t + (1 - alpha)*background."""
    t = plan.target
    if t.size != cube.bands:
        raise DataError("target has %d bands, cube has %d" % (t.size, cube.bands))
    for b in plan.blocks:
        if b.top + b.height > cube.height or b.left + b.width > cube.width:
            raise DataError("block %r exceeds the %dx%d scene"
                            % (b, cube.height, cube.width))
    data = cube.data.copy()
    mask = np.zeros((cube.height, cube.width), dtype=bool)
    col = t[:, None, None]
    for b in plan.blocks:
        rows = slice(b.top, b.top + b.height)
        cols = slice(b.left, b.left + b.width)
        data[:, rows, cols] = plan.alpha * col + (1.0 - plan.alpha) * data[:, rows, cols]
        mask[rows, cols] = True
    out = HsiCube(height=cube.height, width=cube.width, bands=cube.bands, data=data)
    return out, GroundTruth(mask=mask, alpha=plan.alpha)


def add_noise(cube: HsiCube, sigma: float, seed) -> HsiCube:
    """Additive i.i.d. Gaussian sensor noise; sigma = 0 returns the cube."""
    if sigma < 0:
        raise DataError("noise sigma must be nonnegative")
    if sigma == 0:
        return cube
    rng = np.random.default_rng(seed)
    data = cube.data + rng.normal(0.0, sigma, size=cube.data.shape)
    return HsiCube(height=cube.height, width=cube.width, bands=cube.bands,
                   data=data)


def convoy_blocks(height: int, width: int, count: int = 7,
                  block_height: int = 6, block_width: int = 3,
                  gap: int = 6) -> Tuple[BlockSpec, ...]:
    """Vertical convoy of equal blocks, centered, `gap` rows apart."""
    total = count * block_height + (count - 1) * gap
    if total > height or block_width > width:
        raise DataError("convoy of %d %dx%d blocks (gap %d) does not fit in %dx%d"
                        % (count, block_height, block_width, gap, height, width))
    top0 = (height - total) // 2
    left = (width - block_width) // 2
    return tuple(BlockSpec(top=top0 + k * (block_height + gap), left=left,
                           height=block_height, width=block_width)
                 for k in range(count))


def _protocol_streams(seed) -> Tuple[np.random.Generator, ...]:
    # fixed spawn layout so protocol_target(seed) matches paper_protocol(seed)
    ss = np.random.SeedSequence(seed)
    return tuple(np.random.default_rng(child) for child in ss.spawn(3))


def _default_samples(rng: np.random.Generator, bands: int,
                     count: int = PROTOCOL_SAMPLE_COUNT) -> NDArrayF:
    """Stand-in pure-pixel library: one base mineral spectrum plus small
    smooth per-sample variability."""
    base = 0.15 + 0.7 * _smooth_curve(rng, bands)
    samples = np.empty((count, bands))
    for i in range(count):
        wobble = 1.0 + 0.03 * (2.0 * _smooth_curve(rng, bands) - 1.0)
        samples[i] = np.clip(base * wobble + rng.normal(0.0, 0.002, bands), 0.0, 1.0)
    return samples


def _default_target(rng: np.random.Generator, bands: int) -> NDArrayF:
    return 0.2 + 0.75 * _smooth_curve(rng, bands)


def protocol_target(seed, bands: int = 186) -> NDArrayF:
    """The target spectrum paper_protocol(seed) implants by default."""
    _, t_rng, _ = _protocol_streams(seed)
    return _default_target(t_rng, bands)


def paper_protocol(seed, height: int = 100, width: int = 100, bands: int = 186,
                   samples: Optional[NDArrayF] = None,
                   target: Optional[NDArrayF] = None,
                   alphas: Sequence[float] = ALPHAS
                   ) -> List[Tuple[HsiCube, GroundTruth, float]]:
    """One scene per fill fraction: a replicated pure-pixel background
    (identical across alphas) with the seven-block convoy implanted."""
    s_rng, t_rng, r_rng = _protocol_streams(seed)
    if samples is None:
        samples = _default_samples(s_rng, bands)
    if target is None:
        target = _default_target(t_rng, bands)
    background = replicate_background(samples, height, width, r_rng)
    blocks = convoy_blocks(height, width)
    out = []
    for alpha in alphas:
        cube, gt = implant(background, ImplantPlan(target=target, alpha=alpha,
                                                   blocks=blocks))
        out.append((cube, gt, float(alpha)))
    return out


@dataclass(frozen=True)
class SceneSpec:
    """Parsed scene spec file."""
    height: int
    width: int
    bands: int
    kind: str                     # "rank" | "samples" | "protocol"
    seed: int = 0
    rank: Optional[int] = None
    samples_path: Optional[str] = None
    target_path: Optional[str] = None
    alphas: Tuple[float, ...] = ()
    blocks: Optional[Tuple[BlockSpec, ...]] = None   # None = convoy default
    noise_sigma: float = 0.0


_SPEC_KEYS = {"height", "width", "bands", "seed", "rank", "samples",
              "protocol", "target", "alphas", "blocks", "noise_sigma"}


def parse_scene_spec(path) -> SceneSpec:
    """Read a key=value scene spec; '#' starts a comment."""
    entries = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError("line %d of %s is not key=value: %r" % (lineno, path, raw))
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _SPEC_KEYS:
            raise DataError("unknown key %r at line %d of %s" % (key, lineno, path))
        if key in entries:
            raise DataError("duplicate key %r at line %d of %s" % (key, lineno, path))
        entries[key] = value

    def take_int(key, default=None):
        if key not in entries:
            if default is None:
                raise DataError("spec %s is missing required key %r" % (path, key))
            return default
        try:
            return int(entries.pop(key))
        except ValueError as exc:
            raise DataError("key %r in %s is not an integer" % (key, path)) from exc

    height = take_int("height")
    width = take_int("width")
    bands = take_int("bands")
    if min(height, width, bands) < 1:
        raise DataError("height, width and bands must be positive in %s" % path)
    seed = take_int("seed", 0)

    sources = [k for k in ("rank", "samples", "protocol") if k in entries]
    if len(sources) != 1:
        raise DataError("spec %s must set exactly one of rank, samples, protocol"
                        % path)
    kind = sources[0]
    rank = None
    samples_path = None
    if kind == "rank":
        rank = take_int("rank")
    elif kind == "samples":
        samples_path = entries.pop("samples")
    else:
        if entries.pop("protocol") != "paper":
            raise DataError("key 'protocol' in %s only accepts 'paper'" % path)
        kind = "protocol"
        if "blocks" in entries:
            raise DataError("key 'blocks' is fixed to the convoy for protocol=paper")

    target_path = entries.pop("target", None)

    alphas: Tuple[float, ...] = ()
    if "alphas" in entries:
        try:
            alphas = tuple(float(a) for a in entries.pop("alphas").split(","))
        except ValueError as exc:
            raise DataError("key 'alphas' in %s is not a comma list of numbers"
                            % path) from exc
        for a in alphas:
            if not 0 < a <= 1:
                raise DataError("key 'alphas' in %s has %r outside (0, 1]" % (path, a))
    elif kind == "protocol":
        alphas = ALPHAS

    blocks: Optional[Tuple[BlockSpec, ...]] = None
    if "blocks" in entries:
        text = entries.pop("blocks")
        if text != "convoy":
            try:
                blocks = tuple(
                    BlockSpec(*(int(v) for v in part.split(",")))
                    for part in text.split(";") if part.strip())
            except (TypeError, ValueError) as exc:
                raise DataError(
                    "key 'blocks' in %s must be 'convoy' or 'top,left,h,w;...'"
                    % path) from exc

    noise_sigma = 0.0
    if "noise_sigma" in entries:
        try:
            noise_sigma = float(entries.pop("noise_sigma"))
        except ValueError as exc:
            raise DataError("key 'noise_sigma' in %s is not a number" % path) from exc
        if noise_sigma < 0:
            raise DataError("key 'noise_sigma' in %s must be nonnegative" % path)

    if entries:
        raise DataError("spec %s has unused keys %s" % (path, sorted(entries)))
    if alphas and kind != "protocol" and target_path is None:
        raise DataError("spec %s implants targets but sets no 'target' file" % path)
    return SceneSpec(height=height, width=width, bands=bands, kind=kind,
                     seed=seed, rank=rank, samples_path=samples_path,
                     target_path=target_path, alphas=alphas, blocks=blocks,
                     noise_sigma=noise_sigma)


def build_scenes(spec: SceneSpec
                 ) -> Tuple[List[Tuple[HsiCube, Optional[GroundTruth], Optional[float]]],
                            Optional[NDArrayF]]:
    """Materialize a scene spec: the scene list plus the implanted target
    spectrum (None when the spec implants nothing)."""
    target = None
    if spec.target_path is not None:
        records = load_spectra(spec.target_path)
        if records[0].bands != spec.bands:
            raise DataError("target %s has %d bands, spec declares %d"
                            % (spec.target_path, records[0].bands, spec.bands))
        target = records[0].reflectance

    if spec.kind == "protocol":
        scenes = paper_protocol(spec.seed, height=spec.height, width=spec.width,
                                bands=spec.bands, target=target,
                                alphas=spec.alphas)
        if target is None:
            target = protocol_target(spec.seed, spec.bands)
        out = [(cube, gt, alpha) for cube, gt, alpha in scenes]
    else:
        if spec.kind == "rank":
            background = synth_background(spec.height, spec.width, spec.bands,
                                          spec.rank, spec.seed)
        else:
            samples = np.stack([r.reflectance for r in load_spectra(spec.samples_path)])
            if samples.shape[1] != spec.bands:
                raise DataError("samples %s have %d bands, spec declares %d"
                                % (spec.samples_path, samples.shape[1], spec.bands))
            background = replicate_background(samples, spec.height, spec.width,
                                              spec.seed)
        if not spec.alphas:
            out = [(background, None, None)]
        else:
            blocks = spec.blocks or convoy_blocks(spec.height, spec.width)
            out = []
            for alpha in spec.alphas:
                cube, gt = implant(background, ImplantPlan(
                    target=target, alpha=alpha, blocks=blocks))
                out.append((cube, gt, float(alpha)))

    if spec.noise_sigma > 0:
        noisy = []
        children = np.random.SeedSequence(spec.seed).spawn(len(out) + 3)[3:]
        for (cube, gt, alpha), child in zip(out, children):
            noisy.append((add_noise(cube, spec.noise_sigma, child), gt, alpha))
        out = noisy
    return out, target
