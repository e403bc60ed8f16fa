"""KAN layer: a matrix of learnable edge functions ``phi(x) = w_b silu(x) + w_s spline(x)``."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .splines import SplineGrid, basis_and_derivative, eval_basis, refit_grid

TRAINABLE = ("coeffs", "w_b", "w_s", "bias")


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass
class KanLayerParams:
    """Trainable state of one KAN layer.

    ``coeffs[i, j]`` holds the spline coefficients of the edge from input
    ``i`` to output ``j``. The grid is shared by every edge and is not
    trained; it only changes through :func:`update_layer_grid`.
    """

    n_in: int
    n_out: int
    grid: SplineGrid
    coeffs: np.ndarray
    w_b: np.ndarray
    w_s: np.ndarray
    bias: np.ndarray

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRAINABLE}

    @property
    def num_parameters(self) -> int:
        return sum(a.size for a in self.arrays().values())

    def zeros_like(self) -> "KanLayerParams":
        return replace(self, **{n: np.zeros_like(a) for n, a in self.arrays().items()})

    def copy(self) -> "KanLayerParams":
        return replace(self, **{n: a.copy() for n, a in self.arrays().items()})


def kan_param_count(n_in: int, n_out: int, g: int, k: int) -> int:
    return n_in * n_out * (g + k + 2) + n_out


def init_kan_layer(n_in: int, n_out: int, grid: SplineGrid, seed) -> KanLayerParams:
    """Fresh layer with ``w_s = 1``, near-zero splines and Xavier-uniform ``w_b``.

    Spline coefficients are uniform on ``[-s, s]`` with ``s = 0.1/sqrt(g+k)``;
    as the basis is a partition of unity, ``|spline(x)| <= s`` on the domain.
    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if n_in < 1 or n_out < 1:
        raise ValueError(f"layer dimensions must be positive, got {n_in}x{n_out}")
    rng = np.random.default_rng(seed)
    nb = grid.num_basis
    scale = 0.1 / np.sqrt(nb)
    coeffs = rng.uniform(-scale, scale, size=(n_in, n_out, nb))
    bound = np.sqrt(6.0 / (n_in + n_out))
    w_b = rng.uniform(-bound, bound, size=(n_in, n_out))
    return KanLayerParams(
        n_in=n_in,
        n_out=n_out,
        grid=grid,
        coeffs=coeffs,
        w_b=w_b,
        w_s=np.ones((n_in, n_out)),
        bias=np.zeros(n_out),
    )


def _check_input(params: KanLayerParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_in:
        raise ValueError(f"expected input of shape (N, {params.n_in}), got {X.shape}")
    return X


def kan_forward(params: KanLayerParams, X) -> np.ndarray:
    X = _check_input(params, X)
    N = X.shape[0]
    nb = params.grid.num_basis
    B = eval_basis(params.grid, X).reshape(N, params.n_in * nb)
    # (n_in, n_out, nb) -> (n_in * nb, n_out), matching B's column order
    W = (params.w_s[:, :, None] * params.coeffs).transpose(0, 2, 1).reshape(-1, params.n_out)
    return silu(X) @ params.w_b + B @ W + params.bias


def kan_backward(params: KanLayerParams, X, grad_out) -> tuple[KanLayerParams, np.ndarray]:
    """Gradients of ``sum(grad_out * kan_forward(params, X))``.

    Returns a parameter-shaped gradient holder and the gradient w.r.t. ``X``.
    The spline term contributes nothing to the input gradient where ``X``
    lies outside the grid domain (the clamp is flat there).
    """
    X = _check_input(params, X)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    N = X.shape[0]
    if grad_out.shape != (N, params.n_out):
        raise ValueError(f"grad_out shape {grad_out.shape} does not match ({N}, {params.n_out})")
    grid = params.grid
    nb = grid.num_basis

    B, dB = basis_and_derivative(grid, X)
    G = (B.reshape(N, -1).T @ grad_out).reshape(params.n_in, nb, params.n_out)
    G = G.transpose(0, 2, 1)  # (n_in, n_out, nb)

    grads = params.zeros_like()
    grads.bias = grad_out.sum(axis=0)
    grads.w_b = silu(X).T @ grad_out
    grads.w_s = np.einsum("ijm,ijm->ij", params.coeffs, G)
    grads.coeffs = params.w_s[:, :, None] * G

    grad_X = silu_grad(X) * (grad_out @ params.w_b.T)
    grad_X += spline_input_grad(params, X, grad_out, dB)
    return grads, grad_X


def spline_input_grad(params: KanLayerParams, X, grad_out, dB=None) -> np.ndarray:
    """Input gradient flowing through the spline terms only (zero where clamped)."""
    X = np.asarray(X, dtype=np.float64)
    N, nb = X.shape[0], params.grid.num_basis
    grid = params.grid
    if dB is None:
        dB = basis_and_derivative(grid, X)[1]
    W = (params.w_s[:, :, None] * params.coeffs).transpose(1, 0, 2).reshape(params.n_out, -1)
    slope = (grad_out @ W).reshape(N, params.n_in, nb)
    inside = (X >= grid.domain_min) & (X <= grid.domain_max)
    return inside * np.einsum("nim,nim->ni", dB, slope)


def update_layer_grid(params: KanLayerParams, activations, new_g: int | None = None) -> KanLayerParams:
    """Re-centre the shared grid on the observed inputs and refit every edge.

    All input columns are pooled to set the new domain; each edge spline is
    refit at the pooled sample values so the layer keeps computing (nearly)
    the same function. ``w_b``, ``w_s`` and ``bias`` are carried over.
    """
    A = _check_input(params, activations)
    samples = np.unique(A)
    g = params.grid.intervals if new_g is None else new_g
    c = params.coeffs.transpose(2, 0, 1)  # basis axis first
    refit = refit_grid(params.grid, c, samples, g)
    new = params.copy()
    new.grid = refit.grid
    new.coeffs = np.ascontiguousarray(refit.coefficients.transpose(1, 2, 0))
    return new
