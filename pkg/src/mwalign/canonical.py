"""Pick one of the four quarter-turn-equivalent aligned poses reproducibly."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .geometry import FrameConfig, rotation_about_axis
from .geometry_io import GeometrySet

SLAB_FRACTION = 0.10
CONFIDENCE_REL = 0.01
# relative difference below which two extents / slab sums count as equal
TIE_REL = 1e-9


@dataclass
class CanonicalizationReport:
    quarter_turns: int
    extent_x: float
    extent_y: float
    slab_weight_pos: float
    slab_weight_neg: float
    near_square: bool
    near_equal_slabs: bool

    def to_dict(self) -> dict:
        return asdict(self)


def quarter_turn(frame: FrameConfig, k: int) -> np.ndarray:
    return rotation_about_axis(frame.z, 90.0 * (k % 4))


def _slabs(xs, weights):
    lo, hi = xs.min(), xs.max()
    span = hi - lo
    pos = float(weights[xs >= hi - SLAB_FRACTION * span].sum())
    neg = float(weights[xs <= lo + SLAB_FRACTION * span].sum())
    return pos, neg


def _rel_diff(a, b):
    m = max(abs(a), abs(b))
    return 0.0 if m == 0 else abs(a - b) / m


def canonicalize_quadrant(samples: GeometrySet, frame: FrameConfig):
    """Quarter turn about ``z`` putting the long bbox side on ``x`` and the
    heavier 10% end slab towards ``+x``.

    Expects fully aligned input. Near-ties (square footprint, balanced end
    slabs) fall back to the smallest turn and are flagged in the report.
    """
    local = samples.positions @ frame.basis.T
    x, y = local[:, 0], local[:, 1]
    ext_x = float(x.max() - x.min())
    ext_y = float(y.max() - y.min())
    # quarter turn k=1 maps x -> y, so a long side on y needs an odd k
    base = 1 if ext_y > ext_x and _rel_diff(ext_x, ext_y) > TIE_REL else 0
    # x coordinate after `base` quarter turns: R(z, 90) maps (x, y) to (-y, x)
    xs = x if base == 0 else -y
    pos, neg = _slabs(xs, samples.weights)
    k = base if (pos >= neg or _rel_diff(pos, neg) <= TIE_REL) else base + 2
    if k != base:
        pos, neg = neg, pos
    ext_after = (ext_x, ext_y) if base == 0 else (ext_y, ext_x)
    report = CanonicalizationReport(
        quarter_turns=k,
        extent_x=ext_after[0],
        extent_y=ext_after[1],
        slab_weight_pos=pos,
        slab_weight_neg=neg,
        near_square=_rel_diff(ext_x, ext_y) < CONFIDENCE_REL,
        near_equal_slabs=_rel_diff(pos, neg) < CONFIDENCE_REL,
    )
    return quarter_turn(frame, k), report
