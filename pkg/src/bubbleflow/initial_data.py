"""Initial-data library shared by the CLI, sweeps, and tests."""

from __future__ import annotations

import numpy as np

from .bubbles import eval_bubble, multi_bubble
from .grids import BubbleConfig, RadialField, RadialGrid, load_field_csv

__all__ = ["INITIAL_KINDS", "build_initial"]

INITIAL_KINDS = ("bubble", "scaled-bubble", "two-bubble", "gaussian", "from-file")


def build_initial(
    kind: str,
    grid: RadialGrid,
    amplitude: float = 1.0,
    scales: tuple[float, ...] = (1.0,),
    signs: tuple[int, ...] = (1,),
    width: float = 1.0,
    path: str | None = None,
) -> tuple[RadialField, dict]:
    """Build a named initial field; returns (field, descriptor-for-manifest)."""
    D = grid.dimension
    desc = {"kind": kind}
    if kind == "bubble":
        f = RadialField(grid, eval_bubble(D, scales[0], grid.nodes), tag="exact-bubble")
        desc["scale"] = scales[0]
    elif kind == "scaled-bubble":
        f = RadialField(grid, amplitude * np.asarray(eval_bubble(D, scales[0], grid.nodes)))
        desc.update(amplitude=amplitude, scale=scales[0])
    elif kind == "two-bubble":
        if len(scales) != 2 or len(signs) != 2:
            raise ValueError("two-bubble needs two scales and two signs")
        cfg = BubbleConfig(tuple(signs), tuple(sorted(scales)))
        f = multi_bubble(cfg, grid)
        desc.update(scales=list(cfg.scales), signs=list(cfg.signs))
    elif kind == "gaussian":
        f = RadialField(grid, amplitude * np.exp(-((grid.nodes / width) ** 2)))
        desc.update(amplitude=amplitude, width=width)
    elif kind == "from-file":
        if path is None:
            raise ValueError("from-file needs a path")
        f, header = load_field_csv(path)
        if f.grid.descriptor() != grid.descriptor():
            raise ValueError("field file grid does not match the requested grid")
        desc.update(path=str(path))
    else:
        raise ValueError(f"unknown initial kind {kind!r}; choose from {INITIAL_KINDS}")
    return f, desc
