"""Exactly solvable models and a Numerov integrator, used as independent oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import BracketError, DomainError, NumericalError
from .potential import Channel, Potential

EXACT_TOL = 1e-9


@dataclass(frozen=True)
class ExactConstraintReport:
    """Outcome of an exact-solvability check; ``energy`` is None unless satisfied."""

    satisfied: bool
    residual: float
    energy: float | None = None


def gk_energy(A: float, n_radial: int = 0) -> float:
    """Levels of -d2/dr2 + r^2 + A/r^2: 2(2n + 1 + sqrt(A + 1/4))."""
    if A < 0:
        raise DomainError(f"A must be nonnegative, got {A!r}")
    if int(n_radial) != n_radial or n_radial < 0:
        raise DomainError(f"n_radial must be a nonnegative integer, got {n_radial!r}")
    return 2.0 * (2 * n_radial + 1.0 + math.sqrt(A + 0.25))


def spiked_alpha2_ground(lam: float) -> float:
    """Ground level of -d2/dr2 + r^2 + lam/r^2 in the s-wave: 2 + sqrt(1 + 4 lam)."""
    return 2.0 + math.sqrt(1.0 + 4.0 * lam)


def anharmonic_exact(a: float, b: float, c: float) -> ExactConstraintReport:
    """Check the s-wave exact ground state of a r^2 + b/r^4 + c/r^6.

    Exact when (2 sqrt(c) + b)^2 = c + 8 c sqrt(a c); the energy is then
    sqrt(a) (4 + b/sqrt(c)).  The constraint is tested to a relative 1e-9.
    """
    if not (a > 0 and c > 0):
        raise DomainError(f"need a > 0 and c > 0, got a={a!r}, c={c!r}")
    rc = math.sqrt(c)
    lhs = (2.0 * rc + b) ** 2
    rhs = c + 8.0 * c * math.sqrt(a * c)
    residual = abs(lhs - rhs)
    ok = residual <= EXACT_TOL * max(1.0, lhs, rhs)
    return ExactConstraintReport(ok, residual, math.sqrt(a) * (4.0 + b / rc) if ok else None)


def coulomb_determinant(D: float, B: float, A: float, l: int = 0, n_trunc: int = 0) -> ExactConstraintReport:
    """Exact-solvability test for -d2/dr2 + l(l+1)/r^2 - D/r + B r + A r^2.

    A polynomial solution of degree ``n_trunc`` exists when the tridiagonal
    determinant with diagonal a_k = D - (B/sqrt A)(k+l+1), superdiagonal
    b_k = (k+1)(k+2l+2) and subdiagonal c_k = E - sqrt(A)(2k+2l+1) + B^2/(4A)
    vanishes, where E = sqrt(A)(2n+2l+3) - B^2/(4A).  The determinant is
    evaluated by the continuant recurrence and compared with the product of
    the row 1-norms.
    """
    if not A > 0:
        raise DomainError(f"A must be positive, got {A!r}")
    if int(n_trunc) != n_trunc or n_trunc < 0:
        raise DomainError(f"n_trunc must be a nonnegative integer, got {n_trunc!r}")
    if int(l) != l or l < 0:
        raise DomainError(f"l must be a nonnegative integer, got {l!r}")
    ra = math.sqrt(A)
    n = int(n_trunc)
    energy = ra * (2 * n + 2 * l + 3) - B * B / (4.0 * A)
    diag = [D - (B / ra) * (k + l + 1) for k in range(n + 1)]
    sup = [(k + 1) * (k + 2 * l + 2) for k in range(n + 1)]
    sub = [energy - ra * (2 * k + 2 * l + 1) + B * B / (4.0 * A) for k in range(n + 1)]
    prev, det = 1.0, diag[0]
    for k in range(1, n + 1):
        prev, det = det, diag[k] * det - sup[k - 1] * sub[k] * prev
    scale = 1.0
    for k in range(n + 1):
        row = abs(diag[k]) + (abs(sup[k]) if k < n else 0.0) + (abs(sub[k]) if k > 0 else 0.0)
        scale *= max(row, 1e-300)
    residual = abs(det)
    ok = residual <= EXACT_TOL * scale
    return ExactConstraintReport(ok, residual, energy if ok else None)


# --- Numerov integration with node counting ------------------------------------


@njit(cache=True)
def _count_nodes(u, c, energy, start, delta0):
    """Sign changes of the Numerov solution from ``start`` to the last point.

    Works with ratios w[i+1]/w[i] of w = (1 - T) y, T = c (U - E), so nothing
    overflows.  The ratio is carried as delta = ratio - 1, which stays O(h)
    and keeps the O(h^2) source term from drowning in rounding.  Returns -1
    if the mesh is too coarse for the local wavelength.
    """
    nodes = 0
    delta = delta0
    if delta < -1.0:
        nodes += 1
    for i in range(start + 1, u.shape[0] - 1):
        t = c * (u[i] - energy)
        if t >= 0.5:
            return -1
        delta = 12.0 * t / (1.0 - t) + delta / (1.0 + delta)
        if delta < -1.0:
            nodes += 1
    return nodes


def _length_scale(potential):
    term = potential.terms[-1] if potential.terms else None
    if term is None or term.exponent <= 0 or term.coefficient <= 0:
        raise DomainError("potential does not confine; pass r_max explicitly")
    return (potential.kinetic_factor / term.coefficient) ** (1.0 / (term.exponent + 2.0))


class _Radial:
    """Effective potential on a mesh plus the small-r start for a given energy."""

    def __init__(self, potential, channel, r_max, mesh):
        self.potential, self.kappa = potential, potential.kinetic_factor
        self.h = r_max / mesh
        self.r = self.h * np.arange(1, mesh + 1)
        self.centrifugal = channel.centrifugal
        self.u = potential(self.r) + self.kappa * self.centrifugal / self.r**2
        self.c = self.h * self.h / (12.0 * self.kappa)
        q_min = potential.min_exponent()
        if q_min < -2:
            a = potential.coefficient(q_min)
            if a < 0:
                raise DomainError(f"attractive r^{q_min:g} singularity: no lower bound")
            self.steep = (q_min, a)
        else:
            self.steep = None
            strength = self.centrifugal + potential.coefficient(-2.0) / self.kappa
            if 1 + 4 * strength < 0:
                raise DomainError("attractive 1/r^2 term below -1/4: no lower bound")
            self.nu = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * strength))

    def _log_y(self, r, energy):
        if self.steep is not None:
            q, a = self.steep
            alpha = -q
            return -(2.0 / (alpha - 2.0)) * math.sqrt(a / self.kappa) * r ** (1 - alpha / 2) + alpha / 4 * math.log(r)
        nu, kappa = self.nu, self.kappa
        coeffs = {t.exponent: t.coefficient for t in self.potential.terms if t.exponent > -2}
        coeffs[0.0] = coeffs.get(0.0, 0.0) - energy
        series = 1.0
        for q, a in coeffs.items():
            series += a / (kappa * (q + 2) * (2 * nu + q + 1)) * r ** (q + 2)
        return nu * math.log(r) + math.log(abs(series))

    def nodes(self, energy):
        t = self.c * (self.u - energy)
        ok = np.nonzero(t <= 0.1)[0]
        if ok.size == 0:
            raise NumericalError("mesh never resolves the solution; increase mesh")
        i = int(ok[0])
        if i + 1 >= len(self.r):
            raise NumericalError("classically forbidden everywhere on the mesh")
        log_ratio = self._log_y(self.r[i + 1], energy) - self._log_y(self.r[i], energy)
        delta = math.expm1(log_ratio + math.log1p(-t[i + 1]) - math.log1p(-t[i]))
        n = _count_nodes(self.u, self.c, float(energy), i, delta)
        if n < 0:
            raise NumericalError("mesh too coarse for this energy; increase mesh")
        return n


def _solve(radial, k, tol):
    lo = float(radial.u.min())
    if radial.nodes(lo) > k:
        raise BracketError("node count already exceeds k at the potential minimum")
    span = max(1.0, abs(lo))
    hi = lo + span
    for _ in range(200):
        if radial.nodes(hi) > k:
            break
        lo, span = hi, span * 2.0
        hi = lo + span
    else:
        raise BracketError(f"no energy with {k + 1} nodes found")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if radial.nodes(mid) > k:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def integrate_radial(
    potential: Potential,
    channel: Channel = Channel(),
    k: int = 0,
    r_max: float | None = None,
    mesh: int = 200_000,
    tol: float = 1e-9,
) -> float:
    """k-th eigenvalue of -kappa R'' + U R = E R on [0, r_max], R(r_max) = 0.

    U is the potential plus the centrifugal barrier of the channel.  The level
    is located by bisection on the number of nodes of the outward Numerov
    solution.  Near the origin the solution starts from its known small-r
    form: r^nu with a first-order series correction, or the dominant-balance
    exponential when the potential is more singular than 1/r^2.

    With ``r_max=None`` the box is ten times the natural length scale of the
    leading confining term, enlarged until U(r_max) - E >= 25.
    """
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a nonnegative integer, got {k!r}")
    if mesh < 10_000:
        raise DomainError(f"mesh must be at least 10000, got {mesh!r}")
    auto = r_max is None
    if auto:
        r_max = 10.0 * _length_scale(potential)
    for _ in range(12):
        radial = _Radial(potential, channel, float(r_max), int(mesh))
        energy = _solve(radial, int(k), tol)
        if radial.u[-1] - energy >= 25.0:
            return energy
        if not auto:
            raise DomainError(
                f"r_max={r_max:g} too small: U(r_max) - E = {radial.u[-1] - energy:.3g} < 25"
            )
        r_max *= 1.5
    raise DomainError("could not find an r_max with U(r_max) - E >= 25")
