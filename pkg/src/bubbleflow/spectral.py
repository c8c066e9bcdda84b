"""Linearized operators about bubble backgrounds and their bound state.

The linearization of the flow about a background B is L = -Lap - f'(B).
About a single bubble it has exactly one negative eigenvalue -kappa^2 with a
positive, exponentially decaying ground state Y.  The orthogonality profile Z
is a fixed two-lobe compactly supported bump, balanced so that <Z|Y> = 0
while <Z|LW> stays positive; modulation fits impose <Z_lam|g> = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .bubbles import (
    eval_bubble,
    eval_lambda_bubble,
    f_prime,
    multi_bubble_values,
)
from .energies import grad2, inner_product
from .grids import BubbleConfig, RadialField, RadialGrid

__all__ = [
    "SpectralError",
    "LinearizedOperator",
    "assemble_linearized",
    "Eigenpair",
    "negative_eigenpair",
    "spectrum_grid",
    "ZProfile",
    "build_z_profile",
    "CoercivityReport",
    "coercivity_form",
    "smooth_bump",
    "smooth_bump_deriv",
]

#: uniform-grid sizes that put the kappa^2 bias below the double-precision
#: noise floor of the tridiagonal solve while the ground state still decays
#: to rounding before r_max (exp(-kappa r_max) << 1)
_SPECTRUM_RMAX = {3: 48.0, 4: 56.0, 5: 64.0, 6: 72.0}


def spectrum_grid(D: int, n: int = 2**19, r_max: float | None = None) -> RadialGrid:
    """Recommended uniform grid for the eigen-solve at bubble scale 1."""
    if r_max is None:
        r_max = _SPECTRUM_RMAX.get(D, 12.0 * D)
    return RadialGrid.uniform(D, n, r_max)


_PACK_CACHE: dict[tuple[int, int], tuple["Eigenpair", "ZProfile"]] = {}


def default_spectral_pack(D: int, n: int = 2**15) -> tuple["Eigenpair", "ZProfile"]:
    """Cached (eigenpair, Z profile) at working precision for modulation fits."""
    key = (D, n)
    if key not in _PACK_CACHE:
        ep = negative_eigenpair(D, spectrum_grid(D, n=n))
        _PACK_CACHE[key] = (ep, build_z_profile(D, ep))
    return _PACK_CACHE[key]


class SpectralError(RuntimeError):
    """Raised when the discrete spectrum disagrees with the expected count."""


@dataclass(frozen=True)
class LinearizedOperator:
    """Tridiagonal action of -Lap - f'(background) on a radial grid.

    Symmetric with respect to the volume-weighted inner product; the
    quadratic form is evaluated through the same summation-by-parts route
    as the energy, so <L g | g> = grad2(g) - int f'(B) g^2 to rounding.
    """

    grid: RadialGrid
    background: np.ndarray
    fprime: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        b = np.asarray(self.background, dtype=float)
        if b.shape != (self.grid.n,):
            raise ValueError("background shape does not match grid")
        if not np.all(np.isfinite(b)):
            raise ValueError("background must be finite")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "background", b)
        fp = f_prime(self.grid.dimension, b)
        fp.setflags(write=False)
        object.__setattr__(self, "fprime", fp)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return -self.grid.apply_laplacian(values) - self.fprime * values

    def quadratic_form(self, g: RadialField) -> float:
        return grad2(g) - inner_product(self.grid, self.fprime * g.values, g.values)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return inner_product(self.grid, u, v)

    def symmetric_diagonals(self) -> tuple[np.ndarray, np.ndarray]:
        """(diag, offdiag) of the volume-symmetrized tridiagonal."""
        lower, diag, _ = self.grid.laplacian_diagonals()
        V = self.grid.volumes
        c = self.grid.conductances
        d = -diag - self.fprime
        e = -c[:-1] / np.sqrt(V[:-1] * V[1:])
        return d, e


def assemble_linearized(background, grid: RadialGrid) -> LinearizedOperator:
    """Linearized operator about a sampled field or a BubbleConfig."""
    if isinstance(background, BubbleConfig):
        vals = multi_bubble_values(grid.dimension, background, grid.nodes)
    elif isinstance(background, RadialField):
        if background.grid is not grid and background.grid.descriptor() != grid.descriptor():
            raise ValueError("background field lives on a different grid")
        vals = background.values
    else:
        vals = np.asarray(background, dtype=float)
    return LinearizedOperator(grid, vals)


@dataclass(frozen=True)
class Eigenpair:
    """Negative eigenvalue -kappa^2 and its L2-normalized ground state Y."""

    grid: RadialGrid
    kappa2: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def kappa(self) -> float:
        return math.sqrt(self.kappa2)

    @property
    def eigenvalue(self) -> float:
        return -self.kappa2

    def __call__(self, r) -> np.ndarray | float:
        """Y at arbitrary radii: linear interpolation, 0 beyond r_max."""
        return np.interp(r, self.grid.nodes, self.values, left=self.values[0], right=0.0)

    def rescaled(self, lam: float, r, invariant: str = "l2") -> np.ndarray:
        """Y_lam samples; invariant 'l2' uses lam^(-D/2), 'h1' lam^(-(D-2)/2)."""
        D = self.grid.dimension
        power = -D / 2.0 if invariant == "l2" else -(D - 2) / 2.0
        return lam**power * np.asarray(self(np.asarray(r) / lam))


def negative_eigenpair(D: int, grid: RadialGrid, scale: float = 1.0) -> Eigenpair:
    """The unique negative eigenpair of the single-bubble linearization.

    Uses LAPACK bisection/inverse iteration on the volume-symmetrized
    tridiagonal.  Raises SpectralError when the discrete operator does not
    show exactly one negative eigenvalue (grid too coarse) or when the core
    r <= sqrt(D(D-2)) holds fewer than 32 nodes.

    Parameters
    ----------
    D : int
        Dimension; must match grid.dimension.
    grid : RadialGrid
    scale : float
        Bubble scale of the background, default 1.
    """
    if D != grid.dimension:
        raise ValueError("dimension mismatch between argument and grid")
    core = math.sqrt(D * (D - 2.0)) * scale
    if int(np.sum(grid.nodes <= core)) < 32:
        raise SpectralError(
            f"grid resolves the bubble core with fewer than 32 nodes (r <= {core:.3g})"
        )
    op_check = assemble_linearized(np.zeros(grid.n), grid)
    d_check, _ = op_check.symmetric_diagonals()
    # backward error of the tridiagonal solve is ~ eps_mach * ||S||; keep it
    # a few orders below the eigenvalue scale (kappa^2 = O(0.1..1))
    norm_s = float(np.max(np.abs(d_check)))
    if norm_s > 5e9:
        raise SpectralError(
            "operator scale {:.1e} puts the eigensolver noise floor above the "
            "target accuracy; use a quasi-uniform grid (see spectrum_grid)".format(norm_s)
        )
    op = assemble_linearized(eval_bubble(D, scale, grid.nodes), grid)
    d, e = op.symmetric_diagonals()
    neg = eigh_tridiagonal(
        d, e, select="v", select_range=(-np.inf, 0.0), eigvals_only=True
    )
    if neg.size != 1:
        raise SpectralError(
            f"expected exactly one negative eigenvalue, found {neg.size}"
        )
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    lam0 = float(vals[0])
    if lam0 >= 0.0:
        raise SpectralError("lowest eigenvalue is not negative")
    y = vecs[:, 0] / np.sqrt(grid.volumes)
    # fix the global sign so the ground state is positive
    if y[np.argmax(np.abs(y))] < 0:
        y = -y
    nrm = math.sqrt(inner_product(grid, y, y))
    y = y / nrm
    tiny = 1e-12 * np.max(np.abs(y))
    signs = np.sign(y[np.abs(y) > tiny])
    if signs.size and np.any(signs != signs[0]):
        raise SpectralError("ground state changes sign; grid resolution suspect")
    return Eigenpair(grid, -lam0, y)


def smooth_bump(r, a: float, b: float) -> np.ndarray:
    """C-infinity bump supported on (a, b), peak value 1 at the midpoint."""
    r = np.asarray(r, dtype=float)
    x = (2.0 * r - (a + b)) / (b - a)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - xi**2))
    return out


def smooth_bump_deriv(r, a: float, b: float) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    x = (2.0 * r - (a + b)) / (b - a)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    xi = x[inside]
    out[inside] = (
        np.exp(1.0 - 1.0 / (1.0 - xi**2))
        * (-2.0 * xi / (1.0 - xi**2) ** 2)
        * (2.0 / (b - a))
    )
    return out


@dataclass(frozen=True)
class ZProfile:
    """Two-lobe orthogonality profile at bubble scale 1.

    Z = amp_inner * bump(inner support) - amp_outer * bump(outer support),
    with amp_outer solved so <Z|Y> = 0 and the overall sign fixed so that
    <Z|LW> > 0.  A nonzero single-signed profile cannot be orthogonal to the
    positive ground state, hence the signed two-lobe shape.
    """

    dimension: int
    inner_support: tuple[float, float]
    outer_support: tuple[float, float]
    amp_inner: float
    amp_outer: float

    def __call__(self, r) -> np.ndarray:
        return self.amp_inner * smooth_bump(r, *self.inner_support) - self.amp_outer * smooth_bump(
            r, *self.outer_support
        )

    def deriv(self, r) -> np.ndarray:
        return self.amp_inner * smooth_bump_deriv(
            r, *self.inner_support
        ) - self.amp_outer * smooth_bump_deriv(r, *self.outer_support)

    def scaling_generator(self, r) -> np.ndarray:
        """(r d/dr + D/2) Z, the mass-invariant generator applied to Z."""
        r = np.asarray(r, dtype=float)
        return r * self.deriv(r) + 0.5 * self.dimension * self(r)

    def rescaled(self, lam: float, r) -> np.ndarray:
        """Mass-invariant rescaling lam^(-D/2) Z(r/lam)."""
        return lam ** (-self.dimension / 2.0) * self(np.asarray(r) / lam)

    @property
    def support(self) -> tuple[float, float]:
        return (self.inner_support[0], self.outer_support[1])

    def params(self) -> dict:
        return {
            "inner_support": list(self.inner_support),
            "outer_support": list(self.outer_support),
            "amp_inner": self.amp_inner,
            "amp_outer": self.amp_outer,
        }


def build_z_profile(
    D: int,
    eigenpair: Eigenpair,
    inner_support: tuple[float, float] = (0.5, 1.0),
    outer_support: tuple[float, float] = (1.5, 2.5),
) -> ZProfile:
    """Balance the two-lobe profile against the ground state.

    Solves the single amplitude so <Z|Y> = 0, then flips the overall sign if
    needed to make <Z|LW> > 0.  Fails if either constraint is unreachable
    (degenerate pairings), which does not occur for the default supports.
    """
    grid = eigenpair.grid
    if outer_support[1] >= grid.r_max:
        raise ValueError("profile support must sit strictly inside the grid")
    r = grid.nodes
    b_in = smooth_bump(r, *inner_support)
    b_out = smooth_bump(r, *outer_support)
    y = eigenpair.values
    pin = inner_product(grid, b_in, y)
    pout = inner_product(grid, b_out, y)
    if pout == 0.0:
        raise SpectralError("outer lobe does not pair with the ground state")
    amp_inner, amp_outer = 1.0, pin / pout
    prof = ZProfile(D, tuple(inner_support), tuple(outer_support), amp_inner, amp_outer)
    lw = np.asarray(eval_lambda_bubble(D, r))
    pair_lw = inner_product(grid, prof(r), lw)
    if pair_lw < 0.0:
        prof = ZProfile(D, tuple(inner_support), tuple(outer_support), -amp_inner, -amp_outer)
        pair_lw = -pair_lw
    if pair_lw <= 0.0:
        raise SpectralError("balanced profile does not pair positively with LW")
    resid = abs(inner_product(grid, prof(r), y))
    norm = math.sqrt(inner_product(grid, prof(r), prof(r)))
    if resid > 1e-10 * max(norm, 1.0):
        raise SpectralError(f"orthogonality residue {resid:.3e} too large")
    return prof


@dataclass(frozen=True)
class CoercivityReport:
    form: float
    lower_bound: float
    unstable_projections: np.ndarray
    ortho_residuals: np.ndarray
    hypothesis_ok: bool


def coercivity_form(
    g: RadialField,
    config: BubbleConfig,
    eigenpair: Eigenpair,
    zprofile: ZProfile,
    c0: float,
    ortho_tol: float = 1e-8,
) -> CoercivityReport:
    """Quadratic form <L_W g|g> + sum_j <Y_lam_j|g>^2 against c0 ||g||_E^2.

    The contract form >= lower_bound applies when g is orthogonal to every
    rescaled Z profile; the report carries the orthogonality residuals and
    flags a hypothesis violation instead of raising.
    """
    from .energies import enorm2  # local import to avoid cycle at module load

    grid = g.grid
    D = grid.dimension
    op = assemble_linearized(config, grid)
    form = op.quadratic_form(g)
    proj = np.zeros(config.M)
    resid = np.zeros(config.M)
    gnorm = math.sqrt(inner_product(grid, g.values, g.values))
    for j, lam in enumerate(config.scales):
        y_l = eigenpair.rescaled(lam, grid.nodes, invariant="h1")
        proj[j] = inner_product(grid, y_l, g.values)
        z_l = zprofile.rescaled(lam, grid.nodes)
        resid[j] = inner_product(grid, z_l, g.values)
    form += float(np.sum(proj**2))
    lower = c0 * enorm2(g)
    ok = bool(np.all(np.abs(resid) <= ortho_tol * max(gnorm, 1e-300)))
    return CoercivityReport(float(form), float(lower), proj, resid, ok)
