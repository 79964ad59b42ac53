"""Loading, normalizing, splitting, and synthesizing bivariate sample pairs.

File format: whitespace-separated numeric columns x y, one pair per line.
Blank lines and lines starting with '#' are skipped.  An optional sidecar
``<name>.truth`` holds the ground-truth arrow ``->`` or ``<-``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .privacy import derive_rng
from .scores import DegenerateDataError, _as_vector

__all__ = [
    "SamplePairs",
    "SplitData",
    "load_pairs_file",
    "write_pairs_file",
    "normalize",
    "split",
    "synth_anm",
    "SYNTH_SHAPES",
]

X_CAUSES_Y = "x->y"
Y_CAUSES_X = "y->x"

SYNTH_SHAPES = ("cubic", "sigmoid", "linear-gaussian")


@dataclass(frozen=True)
class SamplePairs:
    x: np.ndarray
    y: np.ndarray
    id: str
    ground_truth: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _as_vector(self.x, "x"))
        object.__setattr__(self, "y", _as_vector(self.y, "y"))
        if self.x.size != self.y.size:
            raise ValueError(f"length mismatch: {self.x.size} vs {self.y.size}")
        if self.x.size == 0:
            raise ValueError("no sample pairs")
        if self.ground_truth not in (None, X_CAUSES_Y, Y_CAUSES_X):
            raise ValueError(f"bad ground truth label: {self.ground_truth!r}")

    def __len__(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class SplitData:
    train: SamplePairs
    test: SamplePairs
    seed: int


def load_pairs_file(path) -> SamplePairs:
    """Parse a two-column pairs file; malformed lines raise with their
    line number.  Reads ``<path>.truth`` for the causal arrow if present."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such pairs file: {p}")
    xs: list[float] = []
    ys: list[float] = []
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValueError(f"{p}:{lineno}: expected 2 columns, got {len(fields)}")
        try:
            vx, vy = float(fields[0]), float(fields[1])
        except ValueError as exc:
            raise ValueError(f"{p}:{lineno}: non-numeric field: {exc}") from None
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise ValueError(f"{p}:{lineno}: non-finite value")
        xs.append(vx)
        ys.append(vy)
    if not xs:
        raise ValueError(f"{p}: no data rows")
    truth = _load_truth_sidecar(p)
    return SamplePairs(np.array(xs), np.array(ys), id=p.stem, ground_truth=truth)


def _load_truth_sidecar(pairs_path: Path) -> str | None:
    sidecar = pairs_path.with_suffix(pairs_path.suffix + ".truth")
    if not sidecar.exists():
        return None
    text = sidecar.read_text().strip()
    if text == "->":
        return X_CAUSES_Y
    if text == "<-":
        return Y_CAUSES_X
    raise ValueError(f"{sidecar}: expected '->' or '<-', got {text!r}")


def write_pairs_file(samples: SamplePairs, path) -> None:
    """Write pairs with full precision; round-trips through load_pairs_file."""
    p = Path(path)
    lines = [f"{vx:.17g} {vy:.17g}" for vx, vy in zip(samples.x, samples.y)]
    p.write_text("\n".join(lines) + "\n")
    if samples.ground_truth is not None:
        arrow = "->" if samples.ground_truth == X_CAUSES_Y else "<-"
        p.with_suffix(p.suffix + ".truth").write_text(arrow + "\n")


def normalize(samples: SamplePairs) -> SamplePairs:
    """Min-max map each coordinate onto [-1, 1] (endpoints hit exactly).

    Idempotent up to floating point.  A constant coordinate has no range
    to map and raises DegenerateDataError.  The affine parameters are
    recorded in the id so reports can refer back to the original scale.
    """
    out = []
    for name, v in (("x", samples.x), ("y", samples.y)):
        vmin, vmax = float(np.min(v)), float(np.max(v))
        if vmax <= vmin:
            raise DegenerateDataError(f"coordinate {name} is constant; cannot normalize")
        out.append(2.0 * (v - vmin) / (vmax - vmin) - 1.0)
    tag = (
        f"{samples.id}|norm:x[{np.min(samples.x):.6g},{np.max(samples.x):.6g}]"
        f",y[{np.min(samples.y):.6g},{np.max(samples.y):.6g}]"
    )
    return replace(samples, x=out[0], y=out[1], id=tag)


def split(samples: SamplePairs, test_fraction: float, seed: int) -> SplitData:
    """Seeded uniform partition into train and test.

    The test set gets round(N * test_fraction) points; requires at least
    one training pair and four test pairs.  Identical (samples, fraction,
    seed) always produce the identical partition.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_total = len(samples)
    m = int(round(n_total * test_fraction))
    n = n_total - m
    if m < 4 or n < 1:
        raise ValueError(f"split too small: train={n}, test={m} (need n >= 1, m >= 4)")
    perm = derive_rng(seed, "split", samples.id, n_total).permutation(n_total)
    te, tr = perm[:m], perm[m:]
    mk = lambda idx, part: replace(
        samples, x=samples.x[idx], y=samples.y[idx], id=f"{samples.id}|{part}"
    )
    return SplitData(train=mk(tr, "train"), test=mk(te, "test"), seed=seed)


def synth_anm(shape: str, n_total: int, noise_level: float, seed: int) -> SamplePairs:
    """Synthetic cause-effect pairs with known direction, normalized to [-1, 1].

    cubic:            X ~ U[-1,1],  Y = X^3 + noise_level * U[-1,1]
    sigmoid:          X ~ U[-1,1],  Y = tanh(3X) + noise_level * U[-1,1]
    linear-gaussian:  X ~ N(0,1),   Y = 0.8X + noise_level * N(0,1)

    The linear-gaussian shape is the classic non-identifiable case (its id
    carries a ``nonidentifiable`` flag); an additive-noise test cannot beat
    coin flipping on it.  Ground truth is always x->y.
    """
    if shape not in SYNTH_SHAPES:
        raise ValueError(f"unknown shape {shape!r}; pick one of {SYNTH_SHAPES}")
    if n_total < 8:
        raise ValueError("need at least 8 samples of synthetic data")
    if noise_level < 0:
        raise ValueError("noise_level must be nonnegative")
    rng = derive_rng(seed, "synth", shape, n_total, noise_level)
    if shape == "cubic":
        x = rng.uniform(-1.0, 1.0, n_total)
        y = x**3 + noise_level * rng.uniform(-1.0, 1.0, n_total)
    elif shape == "sigmoid":
        x = rng.uniform(-1.0, 1.0, n_total)
        y = np.tanh(3.0 * x) + noise_level * rng.uniform(-1.0, 1.0, n_total)
    else:
        x = rng.standard_normal(n_total)
        y = 0.8 * x + noise_level * rng.standard_normal(n_total)
    tag = f"synth-{shape}-n{n_total}-noise{noise_level:g}-seed{seed}"
    if shape == "linear-gaussian":
        tag += "-nonidentifiable"
    raw = SamplePairs(x, y, id=tag, ground_truth=X_CAUSES_Y)
    return normalize(raw)
