import numpy as np
import pytest

from anisokpp.grid import build_grid

DN = {"left": "dirichlet", "right": "neumann"}
ND = {"left": "neumann", "right": "dirichlet"}
DD = {"left": "dirichlet", "right": "dirichlet"}
SQUARE_LEFT_D = {"left": "dirichlet", "right": "neumann",
                 "bottom": "neumann", "top": "neumann"}


@pytest.fixture
def rng():
    return np.random.default_rng(20240810)


def grid_1d(cells, labels=DN):
    return build_grid(1, cells, labels)


def grid_2d(cells, labels=SQUARE_LEFT_D):
    return build_grid(2, (cells, cells), labels)


def smooth_field(grid, rng, modes=5, nonneg=False):
    """Random smooth nodal field vanishing on the Dirichlet nodes."""
    x = grid.coords if grid.dim == 1 else grid.coords[:, 0] + 0.7 * grid.coords[:, 1]
    vals = np.zeros(grid.node_count)
    for j in range(1, modes + 1):
        vals += rng.normal() / j * np.sin(np.pi * j * x) \
            + rng.normal() / j * np.cos(np.pi * j * x)
    if nonneg:
        vals = np.abs(vals)
    vals[grid.dirichlet_mask] = 0.0
    return vals
