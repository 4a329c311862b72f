"""Generalized symmetric-definite eigenproblems Hv = E Nv and the bound pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .elements import build_bundle
from .errors import BasisDependenceError, DomainError
from .potential import BasisSpec, Channel, Potential

# Smallest accepted ratio of Cholesky pivots (or overlap eigenvalues) in double precision.
PIVOT_RTOL = 1e-13

ROUTES = ("cholesky", "lowdin")


@dataclass(frozen=True)
class SpectrumEstimate:
    """Sorted variational eigenvalues; each one bounds the exact level from above.

    ``conditioning`` is the smallest Cholesky pivot of the prenormalized
    overlap matrix divided by the largest.
    """

    eigenvalues: tuple[float, ...]
    basis: BasisSpec
    channel: Channel
    conditioning: float

    def __getitem__(self, k):
        return self.eigenvalues[k]

    def __len__(self):
        return len(self.eigenvalues)


def _check_pair(h, n):
    h = np.asarray(h, dtype=float)
    n = np.asarray(n, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DomainError(f"H must be a square matrix, got shape {h.shape}")
    if n.shape != h.shape:
        raise DomainError(f"H and N differ in shape: {h.shape} vs {n.shape}")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(n))):
        raise DomainError("H and N must be finite")
    return h, n


def cholesky_upper(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangular U with N = U^T U, plus the pivots U_jj^2.

    Raises BasisDependenceError on a nonpositive pivot or when the pivot
    ratio falls below PIVOT_RTOL.
    """
    a = np.array(n, dtype=float)
    m = a.shape[0]
    u = np.zeros_like(a)
    pivots = np.empty(m)
    for j in range(m):
        d = a[j, j] - u[:j, j] @ u[:j, j]
        if not d > 0:
            raise BasisDependenceError(
                f"basis numerically dependent: Cholesky pivot {j} is {d:.3e}",
                pivot_index=j,
                pivot=float(d),
            )
        pivots[j] = d
        u[j, j] = np.sqrt(d)
        u[j, j + 1:] = (a[j, j + 1:] - u[:j, j] @ u[:j, j + 1:]) / u[j, j]
    ratio = pivots.min() / pivots.max()
    if ratio < PIVOT_RTOL:
        j = int(pivots.argmin())
        raise BasisDependenceError(
            f"basis numerically dependent: pivot ratio {ratio:.3e} below {PIVOT_RTOL:g} at index {j}",
            pivot_index=j,
            pivot=float(pivots[j]),
        )
    return u, pivots


def _cholesky_route(h, n):
    u, pivots = cholesky_upper(n)
    # U^-T H U^-1
    x = solve_triangular(u, h, trans="T", lower=False)
    a = solve_triangular(u, x.T, trans="T", lower=False).T
    return np.linalg.eigvalsh((a + a.T) / 2), pivots.min() / pivots.max()


def _lowdin_route(h, n):
    lam, vecs = np.linalg.eigh(n)
    if not lam[0] > 0 or lam[0] / lam[-1] < PIVOT_RTOL:
        raise BasisDependenceError(
            f"basis numerically dependent: overlap eigenvalue ratio {lam[0] / lam[-1]:.3e}",
            pivot_index=0,
            pivot=float(lam[0]),
        )
    w = vecs / np.sqrt(lam)
    a = w.T @ h @ w
    return np.linalg.eigvalsh((a + a.T) / 2), lam[0] / lam[-1]


def generalized_eigs_with_conditioning(h, n, route="cholesky"):
    """Like :func:`generalized_eigs` but also returns the conditioning ratio."""
    h, n = _check_pair(h, n)
    if route == "cholesky":
        return _cholesky_route(h, n)
    if route == "lowdin":
        return _lowdin_route(h, n)
    raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")


def generalized_eigs(h, n, route: str = "cholesky") -> np.ndarray:
    """All eigenvalues of Hv = E Nv, ascending.

    ``route="cholesky"`` reduces with N = U^T U; ``route="lowdin"`` uses the
    inverse square root of N and serves as a cross-check.
    """
    return generalized_eigs_with_conditioning(h, n, route)[0]


def upper_bounds(
    potential: Potential,
    basis: BasisSpec,
    channel: Channel = Channel(),
    precision: str = "extended",
) -> SpectrumEstimate:
    """Variational eigenvalues for one (n, p, t, s).

    The default ``precision="extended"`` reduces the overlap matrix in Arb
    ball arithmetic before rounding, which stays reliable when the overlap is
    too ill-conditioned for double precision.  ``precision="double"`` runs the
    plain float64 pipeline (prenormalize, Cholesky, symmetric solve).
    """
    basis.check(potential)
    bundle = build_bundle(potential, basis, channel)
    if precision == "extended":
        values = bundle.eigenvalues(basis.scale)
        conditioning = bundle.reduction.pivot_ratio
    elif precision == "double":
        h = bundle.prenormalized_kinetic * (potential.kinetic_factor / basis.scale**2)
        for term in potential.terms:
            h = h + term.coefficient * basis.scale**term.exponent * bundle.prenormalized_powers[term.exponent]
        values, conditioning = generalized_eigs_with_conditioning(h, bundle.prenormalized_norm)
    else:
        raise ValueError(f"precision must be 'extended' or 'double', got {precision!r}")
    return SpectrumEstimate(tuple(float(v) for v in values), basis, channel, float(conditioning))
