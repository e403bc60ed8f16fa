"""Uniform B-spline grids, basis evaluation and least-squares grid refits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

REFIT_MARGIN = 0.01
REFIT_RIDGE = 1e-8
REFIT_REFINE_STEPS = 2


@dataclass(frozen=True)
class SplineGrid:
    """Uniform extended knot vector for a degree-``k`` basis over ``g`` intervals.

    ``knots[k]`` is ``domain_min`` and ``knots[k + g]`` is ``domain_max``; the
    ``k`` knots on either side extend the vector past the domain so that every
    in-domain point is covered by exactly ``k + 1`` basis functions.
    """

    degree: int
    intervals: int
    domain_min: float
    domain_max: float
    knots: np.ndarray

    @property
    def num_basis(self) -> int:
        return self.intervals + self.degree

    @property
    def step(self) -> float:
        return (self.domain_max - self.domain_min) / self.intervals

    def clamp(self, x):
        return np.clip(x, self.domain_min, self.domain_max)


def build_grid(domain_min: float, domain_max: float, g: int, k: int) -> SplineGrid:
    if int(g) != g or g < 1:
        raise ValueError(f"grid size g must be a positive integer, got {g}")
    if int(k) != k or k < 0:
        raise ValueError(f"spline degree k must be a non-negative integer, got {k}")
    domain_min, domain_max = float(domain_min), float(domain_max)
    if not np.isfinite(domain_min) or not np.isfinite(domain_max) or domain_min >= domain_max:
        raise ValueError(f"degenerate spline domain [{domain_min}, {domain_max}]")
    g, k = int(g), int(k)
    h = (domain_max - domain_min) / g
    knots = domain_min + h * np.arange(-k, g + k + 1, dtype=np.float64)
    # pin the domain ends exactly; arange arithmetic can be off by an ulp
    knots[k] = domain_min
    knots[k + g] = domain_max
    knots.setflags(write=False)
    return SplineGrid(k, g, domain_min, domain_max, knots)


def _interval_index(grid: SplineGrid, xc: np.ndarray) -> np.ndarray:
    # half-open intervals [t_j, t_j+1), except the last one which is closed
    k, g = grid.degree, grid.intervals
    j = np.floor((xc - grid.domain_min) / grid.step).astype(np.intp) + k
    j = np.clip(j, k, k + g - 1)
    # the division can land one interval off when x sits on a knot
    t = grid.knots
    j = j - ((xc < t[j]) & (j > k))
    j = j + ((xc >= t[j + 1]) & (j < k + g - 1))
    return j


def _local_basis(grid: SplineGrid, xc: np.ndarray, span: np.ndarray, degree: int) -> list[np.ndarray]:
    """Nonzero basis values on each point's knot span, for degrees 0..``degree``.

    Entry ``p`` has shape ``xc.shape + (p + 1,)``; column ``r`` is the basis
    function with index ``span - p + r``. This is the triangular Cox-de Boor
    scheme, touching only the ``p + 1`` functions that can be nonzero.
    """
    t = grid.knots
    N = np.ones(xc.shape + (1,))
    levels = [N]
    left = [None] + [xc - t[span + 1 - j] for j in range(1, degree + 1)]
    right = [None] + [t[span + j] - xc for j in range(1, degree + 1)]
    for j in range(1, degree + 1):
        nxt = np.empty(xc.shape + (j + 1,))
        saved = np.zeros(xc.shape)
        for r in range(j):
            temp = N[..., r] / (right[r + 1] + left[j - r])
            nxt[..., r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        nxt[..., j] = saved
        N = nxt
        levels.append(N)
    return levels


def _scatter(grid: SplineGrid, span: np.ndarray, local: np.ndarray) -> np.ndarray:
    k = grid.degree
    nb = grid.num_basis
    out = np.zeros(span.shape + (nb,))
    first = np.arange(0, span.size * nb, nb).reshape(span.shape) + span - k
    flat = out.reshape(-1)
    for r in range(local.shape[-1]):
        flat[(first + r).ravel()] = local[..., r].ravel()
    return out


def basis_and_derivative(grid: SplineGrid, x, derivative: bool = True):
    """Dense basis values (and first derivatives) at the clamped ``x``.

    The derivative uses ``B'_{i,k} = k/(t_{i+k}-t_i) B_{i,k-1} - k/(t_{i+k+1}-t_{i+1}) B_{i+1,k-1}``,
    which on a uniform grid is a difference of neighbouring degree ``k-1``
    values divided by the knot step. The clamp itself is not differentiated.
    """
    xc = grid.clamp(np.asarray(x, dtype=np.float64))
    k = grid.degree
    span = _interval_index(grid, xc)
    levels = _local_basis(grid, xc, span, k)
    B = _scatter(grid, span, levels[k])
    if not derivative:
        return B
    if k == 0:
        return B, np.zeros_like(B)
    lower = levels[k - 1]
    pad = np.zeros(lower.shape[:-1] + (1,))
    padded = np.concatenate([pad, lower, pad], axis=-1)
    dlocal = (padded[..., :-1] - padded[..., 1:]) / grid.step
    return B, _scatter(grid, span, dlocal)


def eval_basis(grid: SplineGrid, x) -> np.ndarray:
    """Values of all ``g + k`` basis functions at ``x`` (clamped to the domain).

    ``x`` may be a scalar or any array; the basis index is appended as the
    last axis.
    """
    return basis_and_derivative(grid, x, derivative=False)


def eval_basis_derivative(grid: SplineGrid, x) -> np.ndarray:
    """d/dx of every basis function at the clamped ``x`` (zeros for degree 0)."""
    return basis_and_derivative(grid, x)[1]


def eval_spline(grid: SplineGrid, coefficients, x) -> np.ndarray:
    """Evaluate ``sum_i c_i B_i(x)``; ``coefficients`` has the basis on axis 0."""
    c = np.asarray(coefficients, dtype=np.float64)
    B = eval_basis(grid, x)
    return np.tensordot(B, c, axes=([-1], [0]))


@dataclass(frozen=True)
class RefitResult:
    grid: SplineGrid
    coefficients: np.ndarray
    residual_rms: float

    def __iter__(self):
        # allows ``new_grid, new_coeffs = refit_grid(...)``
        yield self.grid
        yield self.coefficients


def refit_grid(
    old_grid: SplineGrid,
    coefficients,
    samples,
    new_g: int,
    *,
    margin: float = REFIT_MARGIN,
    ridge: float = REFIT_RIDGE,
) -> RefitResult:
    """Move a spline onto a new uniform grid spanning the observed samples.

    The old spline is evaluated at ``samples`` and new coefficients are found
    by ridge-regularised least squares so that the new spline reproduces those
    values. ``coefficients`` may carry extra trailing axes (one spline per
    column); all of them are refit against the same design matrix.
    A constant sample set keeps the old domain.
    """
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise ValueError("refit_grid needs at least one sample")
    c_old = np.asarray(coefficients, dtype=np.float64)
    if c_old.shape[0] != old_grid.num_basis:
        raise ValueError(
            f"coefficients have {c_old.shape[0]} basis entries, grid has {old_grid.num_basis}"
        )

    lo, hi = float(samples.min()), float(samples.max())
    width = hi - lo
    if width > 0:
        new_grid = build_grid(lo - margin * width, hi + margin * width, new_g, old_grid.degree)
    else:
        new_grid = build_grid(old_grid.domain_min, old_grid.domain_max, new_g, old_grid.degree)

    flat = c_old.reshape(c_old.shape[0], -1)
    target = eval_basis(old_grid, samples) @ flat
    A = eval_basis(new_grid, samples)
    gram = A.T @ A + ridge * np.eye(new_grid.num_basis)
    c_new = np.linalg.solve(gram, A.T @ target)
    # iterated Tikhonov: undo the ridge bias wherever the samples pin the fit
    for _ in range(REFIT_REFINE_STEPS):
        c_new = c_new + np.linalg.solve(gram, A.T @ (target - A @ c_new))
    resid = A @ c_new - target
    rms = float(np.sqrt(np.mean(resid**2))) if resid.size else 0.0
    return RefitResult(new_grid, c_new.reshape((new_grid.num_basis,) + c_old.shape[1:]), rms)
