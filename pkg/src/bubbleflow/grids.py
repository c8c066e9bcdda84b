"""Radial grids, sampled fields, and bubble configurations.

Everything lives on a cell-centered finite-volume grid for (0, r_max] in
dimension D >= 3 with the measure r^(D-1) dr.  Cell edges e_0 = 0 < e_1 < ...
< e_n = r_max carry the fluxes; nodes sit at cell centers.  All quadratures
and the discrete Laplacian are built from the same edge/volume data so that
summation-by-parts identities hold to rounding.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RadialGrid",
    "RadialField",
    "BubbleConfig",
    "save_field_csv",
    "load_field_csv",
]


@dataclass(frozen=True)
class RadialGrid:
    """Cell-centered radial grid on (0, r_max].

    Parameters
    ----------
    dimension : int
        Spatial dimension D >= 3.
    edges : ndarray, shape (n+1,)
        Cell edges, edges[0] == 0.0 and edges[-1] == r_max, strictly
        increasing.
    grading : str
        "uniform" or "geometric".
    ratio : float or None
        Edge ratio q for geometric grading (edges[i+1]/edges[i] == q for
        i >= 1), None for uniform grids.
    """

    dimension: int
    edges: np.ndarray
    grading: str = "uniform"
    ratio: float | None = None

    def __post_init__(self):
        D = self.dimension
        if D < 3:
            raise ValueError(f"dimension must be >= 3, got {D}")
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 3:
            raise ValueError("edges must be a 1-D array with at least 2 cells")
        if e[0] != 0.0:
            raise ValueError("first edge must be 0")
        if np.any(np.diff(e) <= 0):
            raise ValueError("edges must be strictly increasing")
        e = e.copy()
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

        nodes = 0.5 * (e[:-1] + e[1:])
        # exact cell integrals of r^(D-1), r^(D-3) over (e_{i-1}, e_i]
        volumes = (e[1:] ** D - e[:-1] ** D) / D
        hardy_w = (e[1:] ** (D - 2) - e[:-1] ** (D - 2)) / (D - 2)
        # conductances c_i = e_i^(D-1) / (node spacing across edge e_i);
        # the last entry closes the domain with a homogeneous Dirichlet edge
        dr = np.empty(nodes.size)
        dr[:-1] = np.diff(nodes)
        dr[-1] = e[-1] - nodes[-1]
        conduct = e[1:] ** (D - 1) / dr
        for name, arr in (
            ("nodes", nodes),
            ("volumes", volumes),
            ("hardy_weights", hardy_w),
            ("conductances", conduct),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # derived arrays filled in __post_init__
    nodes: np.ndarray = field(init=False, repr=False)
    volumes: np.ndarray = field(init=False, repr=False)
    hardy_weights: np.ndarray = field(init=False, repr=False)
    conductances: np.ndarray = field(init=False, repr=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def r_max(self) -> float:
        return float(self.edges[-1])

    @classmethod
    def uniform(cls, dimension: int, n: int, r_max: float) -> "RadialGrid":
        """Uniform grid: n cells of width r_max/n, nodes at (i - 1/2) h."""
        edges = np.linspace(0.0, float(r_max), n + 1)
        return cls(dimension, edges, grading="uniform", ratio=None)

    @classmethod
    def geometric(cls, dimension: int, n: int, r_max: float, ratio: float) -> "RadialGrid":
        """Geometrically graded grid, refined toward the origin.

        Cell widths grow outward by the constant factor ``ratio``
        (h_i = h_1 ratio^(i-1), every junction mildly graded), so the local
        resolution scales like (ratio - 1) * r away from the origin.
        """
        if ratio <= 1.0:
            raise ValueError("geometric ratio must exceed 1")
        i = np.arange(0, n + 1, dtype=float)
        edges = float(r_max) * (ratio**i - 1.0) / (ratio**n - 1.0)
        edges[0] = 0.0
        edges[-1] = float(r_max)
        return cls(dimension, edges, grading="geometric", ratio=float(ratio))

    def descriptor(self) -> dict:
        """JSON-safe grid descriptor used in file headers and manifests."""
        return {
            "dimension": self.dimension,
            "n": self.n,
            "r_max": self.r_max,
            "grading": self.grading,
            "ratio": self.ratio,
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "RadialGrid":
        if desc["grading"] == "uniform":
            return cls.uniform(desc["dimension"], desc["n"], desc["r_max"])
        return cls.geometric(desc["dimension"], desc["n"], desc["r_max"], desc["ratio"])

    # -- discrete flux-form Laplacian (zero flux at the origin, homogeneous
    #    Dirichlet at r_max) ------------------------------------------------

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Flux-form radial Laplacian of a sampled field."""
        v = np.asarray(values, dtype=float)
        c = self.conductances
        flux = np.empty(self.n)          # flux through edge e_i, i = 1..n
        flux[:-1] = c[:-1] * (v[1:] - v[:-1])
        flux[-1] = c[-1] * (0.0 - v[-1])
        out = np.empty(self.n)
        out[0] = flux[0] / self.volumes[0]          # zero flux through e_0 = 0
        out[1:] = (flux[1:] - flux[:-1]) / self.volumes[1:]
        return out

    def laplacian_diagonals(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tridiagonal (lower, diag, upper) of the discrete Laplacian."""
        c = self.conductances
        V = self.volumes
        diag = np.empty(self.n)
        diag[0] = -c[0] / V[0]
        diag[1:] = -(c[:-1] + c[1:]) / V[1:]
        upper = c[:-1] / V[:-1]
        lower = c[:-1] / V[1:]
        return lower, diag, upper

    def interpolate(self, values: np.ndarray, r) -> np.ndarray | float:
        """Linear interpolation of node samples; 0 beyond r_max."""
        return np.interp(r, self.nodes, values, left=values[0], right=0.0)


@dataclass(frozen=True)
class RadialField:
    """Real field sampled at the nodes of a RadialGrid.

    The analytic tag records provenance ("exact-bubble", "exact-multibubble"
    or "generic"); values must be finite unless ``blown_up`` is set.
    """

    grid: RadialGrid
    values: np.ndarray
    tag: str = "generic"
    blown_up: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"values shape {v.shape} does not match grid n={self.grid.n}")
        if not self.blown_up and not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values and is not flagged blown-up")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dimension(self) -> int:
        return self.grid.dimension

    def with_values(self, values, tag="generic", blown_up=False) -> "RadialField":
        return RadialField(self.grid, values, tag=tag, blown_up=blown_up)

    def __add__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return RadialField(self.grid, self.values - other.values)

    def __rmul__(self, a: float) -> "RadialField":
        return RadialField(self.grid, float(a) * self.values)

    @classmethod
    def zero(cls, grid: RadialGrid) -> "RadialField":
        return cls(grid, np.zeros(grid.n))


@dataclass(frozen=True)
class BubbleConfig:
    """Parameters (signs, scales) of a signed multi-bubble superposition.

    scales must be strictly increasing; the empty config (M = 0) encodes the
    zero field.
    """

    signs: tuple[int, ...] = ()
    scales: tuple[float, ...] = ()

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        scales = tuple(float(x) for x in self.scales)
        if len(signs) != len(scales):
            raise ValueError("signs and scales must have equal length")
        if any(s not in (-1, 1) for s in signs):
            raise ValueError("signs must be +1 or -1")
        if any(x <= 0 for x in scales):
            raise ValueError("scales must be positive")
        if any(scales[j] >= scales[j + 1] for j in range(len(scales) - 1)):
            raise ValueError("scales must be strictly increasing")
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "scales", scales)

    @property
    def M(self) -> int:
        return len(self.scales)

    def ratio_terms(self, D: int, lambda_next: float | None = None) -> np.ndarray:
        """(lambda_j / lambda_{j+1})^((D-2)/2) for adjacent pairs.

        With ``lambda_next`` given, appends the boundary term
        (lambda_M / lambda_next)^((D-2)/2) used by the windowed proximity
        conventions.
        """
        lam = list(self.scales)
        if lambda_next is not None:
            lam.append(float(lambda_next))
        lam = np.asarray(lam)
        if lam.size < 2:
            return np.zeros(0)
        return (lam[:-1] / lam[1:]) ** ((D - 2) / 2.0)

    def to_dict(self) -> dict:
        return {"signs": list(self.signs), "scales": list(self.scales)}

    @classmethod
    def from_dict(cls, d: dict) -> "BubbleConfig":
        return cls(tuple(d["signs"]), tuple(d["scales"]))


def save_field_csv(path, field_: RadialField, extra: dict | None = None) -> None:
    """Write a field as two-column CSV with a JSON header line."""
    header = {"schema": "bubbleflow.field/1"}
    header.update(field_.grid.descriptor())
    header["tag"] = field_.tag
    if extra:
        header.update(extra)
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    buf.write("r,value\n")
    for r, v in zip(field_.grid.nodes, field_.values):
        buf.write(f"{float(r)!r},{float(v)!r}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def load_field_csv(path) -> tuple[RadialField, dict]:
    """Read a field CSV written by save_field_csv; returns (field, header)."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError("missing JSON header line")
        header = json.loads(first[2:])
        cols = fh.readline().strip()
        if cols != "r,value":
            raise ValueError(f"unexpected column header {cols!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    grid = RadialGrid.from_descriptor(header)
    if data.shape[0] != grid.n or not np.allclose(data[:, 0], grid.nodes, rtol=1e-12):
        raise ValueError("sample radii do not match the declared grid")
    return RadialField(grid, data[:, 1], tag=header.get("tag", "generic")), header
