"""B-spline bases, derivatives and grid refits on a small grid.

Run with ``python3 demos/spline_basics.py``.
"""

import numpy as np

from gkan.splines import build_grid, eval_basis, eval_basis_derivative, refit_grid

grid = build_grid(-1.0, 1.0, g=5, k=2)
x = np.linspace(-1, 1, 9)

B = eval_basis(grid, x)
print(f"{grid.num_basis} bases, rows sum to one: {np.allclose(B.sum(axis=1), 1)}")
print("nonzeros per point:", (B > 0).sum(axis=1))

# derivative against a central difference
h = 1e-6
fd = (eval_basis(grid, x + h) - eval_basis(grid, x - h)) / (2 * h)
print(f"max derivative gap vs FD: {np.max(np.abs(fd - eval_basis_derivative(grid, x))[1:-1]):.1e}")

# fit coefficients to sin(3x), then move the spline onto a wider, finer grid
xs = np.linspace(-1, 1, 200)
A = eval_basis(grid, xs)
coeffs = np.linalg.lstsq(A, np.sin(3 * xs), rcond=None)[0]
samples = np.random.default_rng(0).uniform(-1.4, 1.4, 500)
res = refit_grid(grid, coeffs, samples, new_g=10)
print(f"refit domain [{res.grid.domain_min:.3f}, {res.grid.domain_max:.3f}], residual rms {res.residual_rms:.1e}")
