"""Closed-form matrix elements over the basis r^(i + (t+1)/2) exp(-r^p / 2).

Every entry is a Gamma function of a Hankel index ``i + j``, so each matrix
needs only ``2n - 1`` log-Gamma values.  They are computed with Arb ball
arithmetic (python-flint) and combined in log space, which keeps the
prenormalized entries ``X_ij / sqrt(N_ii N_jj)`` finite even when the raw
Gamma values overflow double precision.

The float64 matrices returned by :func:`power_matrix`, :func:`norm_matrix`
and :func:`kinetic_matrix` are the raw (unnormalized) elements.  The
:class:`MatrixBundle` caches the prenormalized matrices for one ``(p, t)``
and, on demand, their congruence-reduced form, from which the spectrum at
any scale ``s`` follows without new Gamma evaluations.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from flint import arb, arb_mat, ctx

from .errors import BasisDependenceError, DomainError, NumericalError
from .potential import BasisSpec, Channel, Potential, minimum_t

# Working precision (bits) for the Arb stage; raised on demand up to MAX_PREC.
BASE_PREC = 256
MAX_PREC = 3072
# Largest accepted relative radius of a reduced matrix (entry radius / max |entry|).
REDUCED_RTOL = 1e-18
# Largest accepted rounding-error estimate of an eigenvalue, relative to max(1, |E_0|).
EIGEN_RTOL = 1e-9

# flint's precision context is process-global
_ARB_LOCK = threading.RLock()


def _check_basis(p, t, n):
    if not p > 0:
        raise DomainError(f"power p must be positive, got {p!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"basis size must be a positive integer, got {n!r}")


def _check_power(q, p, t, n):
    _check_basis(p, t, n)
    if not t > -(q + 2):
        raise DomainError(
            f"P(q={q:g}) needs t > {-(q + 2):g}, got t={t!r}"
        )


def _log_hankel_arb(offset, p, t, n):
    """log(Gamma((k + t + offset)/p) / p) for k = 0 .. 2n-2, as Arb balls."""
    P, base = arb(p), arb(t) + arb(offset)
    logp = P.log()
    return [((base + k) / P).lgamma() - logp for k in range(2 * n - 1)]


def _log_hankel(offset, p, t, n):
    with _ARB_LOCK, ctx.workprec(BASE_PREC):
        return np.array([float(x.mid()) for x in _log_hankel_arb(offset, p, t, n)])


def _hankel_exp(logs, n):
    idx = np.add.outer(np.arange(n), np.arange(n))
    with np.errstate(over="raise"):
        try:
            return np.exp(logs[idx])
        except FloatingPointError:
            raise NumericalError(
                "matrix entries overflow double precision; use build_bundle, "
                "which keeps the entries prenormalized"
            ) from None


def _kinetic_bracket(p, t, nu, n):
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    return (nu - 1) * (nu - 3) + 1 - (i - j) ** 2 + p * (i + j + t)


def power_matrix(q: float, p: float, t: float, n: int) -> np.ndarray:
    """P_ij = (r^(i+(t+1)/2) e^(-r^p/2), r^q r^(j+(t+1)/2) e^(-r^p/2)) on [0, inf).

    Equals ``Gamma((i + j + t + q + 2)/p) / p``; defined for ``t > -(q + 2)``.
    """
    _check_power(q, p, t, n)
    return _hankel_exp(_log_hankel(q + 2.0, p, t, n), n)


def norm_matrix(p: float, t: float, n: int) -> np.ndarray:
    """Overlap matrix N = P(q=0)."""
    if not t > 0:
        raise DomainError(f"exponent shift t must be positive, got {t!r}")
    return power_matrix(0.0, p, t, n)


def kinetic_matrix(p: float, t: float, channel: Channel, n: int) -> np.ndarray:
    """-(R_i, R_j'') plus the centrifugal barrier of the channel.

    ``K_ij = Gamma((i+j+t)/p) / (4p) * [(nu-1)(nu-3) + 1 - (i-j)^2 + p(i+j+t)]``
    with ``nu = 2l + d``.
    """
    _check_basis(p, t, n)
    if not t > 0:
        raise DomainError(f"kinetic matrix needs t > 0, got t={t!r}")
    logs = _log_hankel(0.0, p, t, n) - math.log(4.0)
    return _hankel_exp(logs, n) * _kinetic_bracket(p, t, channel.nu, n)


def prenormalize(matrix: np.ndarray, norm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Divide entries by sqrt(N_ii N_jj); the generalized spectrum is unchanged."""
    diag = np.diag(norm)
    if np.any(~(diag > 0)):
        k = int(np.argmax(~(diag > 0)))
        raise BasisDependenceError(
            f"normalization matrix has nonpositive diagonal entry {diag[k]!r} at {k}",
            pivot_index=k,
            pivot=float(diag[k]),
        )
    d = 1.0 / np.sqrt(diag)
    scale = np.outer(d, d)
    out_norm = norm * scale
    np.fill_diagonal(out_norm, 1.0)
    return matrix * scale, out_norm


@dataclass(frozen=True)
class Reduction:
    """Matrices L^-1 X L^-T for N' = L L^T, rounded to float64.

    ``pivot_ratio`` is the smallest Cholesky pivot of N' over the largest.
    """

    kinetic: np.ndarray
    powers: dict
    pivot_ratio: float
    precision: int


def _arb_prenormalized(potential, channel, n, p, t, prec):
    """Prenormalized N', K', P'(q) as Arb matrices at ``prec`` bits, plus log N_ii."""
    with ctx.workprec(prec):
        log_n = _log_hankel_arb(2, p, t, n)
        half = [log_n[2 * i] / 2 for i in range(n)]
        log_k = _log_hankel_arb(0, p, t, n)
        log_p = {}
        for q in potential.exponents:
            log_p[q] = log_n if q == 0.0 else _log_hankel_arb(arb(q) + 2, p, t, n)
        nu = channel.nu
        c = (nu - 1) * (nu - 3) + 1
        P, T = arb(p), arb(t)
        norm, kin = arb_mat(n, n), arb_mat(n, n)
        pows = {q: arb_mat(n, n) for q in log_p}
        for i in range(n):
            for j in range(i, n):
                shift = half[i] + half[j]
                v = (log_n[i + j] - shift).exp()
                norm[i, j] = norm[j, i] = v
                v = (log_k[i + j] - shift).exp() / 4 * (c - (i - j) ** 2 + P * (i + j + T))
                kin[i, j] = kin[j, i] = v
                for q, lp in log_p.items():
                    v = (lp[i + j] - shift).exp()
                    pows[q][i, j] = pows[q][j, i] = v
        return norm, kin, pows, [log_n[2 * i] for i in range(n)]


def _mid_array(m, n):
    return np.array([float(x) for x in m.mid().entries()]).reshape(n, n)


def _relative_radius(m, n):
    entries = m.entries()
    big = max(abs(float(x.mid())) for x in entries)
    rad = max(float(x.rad()) for x in entries)
    if big == 0.0:
        return 0.0 if rad == 0.0 else math.inf
    return rad / big


class _NeedPrecision(Exception):
    def __init__(self, pivot_index=None, pivot=None):
        self.pivot_index = pivot_index
        self.pivot = pivot


def _cholesky_arb(a, n):
    """Lower Cholesky factor of an Arb matrix; returns (L, pivots)."""
    L = [[arb(0)] * n for _ in range(n)]
    pivots = []
    for j in range(n):
        s = a[j, j]
        row_j = L[j]
        for k in range(j):
            s -= row_j[k] * row_j[k]
        if not s > 0:
            raise _NeedPrecision(j, float(s.mid()))
        pivots.append(float(s.mid()))
        root = s.sqrt()
        row_j[j] = root
        for i in range(j + 1, n):
            v = a[i, j]
            row_i = L[i]
            for k in range(j):
                v -= row_i[k] * row_j[k]
            row_i[j] = v / root
    return arb_mat(L), pivots


def _reduce(bundle) -> Reduction:
    n = bundle.size
    prec, cached = bundle._arb
    last = None
    while prec <= MAX_PREC:
        with _ARB_LOCK, ctx.workprec(prec):
            if cached is not None:
                norm, kin, pows, _ = cached
                cached = None
            else:
                norm, kin, pows, _ = _arb_prenormalized(
                    bundle.potential, bundle.channel, n, bundle.power, bundle.exponent_shift, prec
                )
            try:
                L, pivots = _cholesky_arb(norm, n)
            except _NeedPrecision as exc:
                last = exc
                prec *= 2
                continue
            try:
                inv = L.inv()
            except ZeroDivisionError:
                last = _NeedPrecision()
                prec *= 2
                continue
            inv_t = inv.transpose()
            red_k = inv * kin * inv_t
            red_p = {q: inv * m * inv_t for q, m in pows.items()}
            worst = max([_relative_radius(red_k, n)] + [_relative_radius(m, n) for m in red_p.values()])
            if not worst <= REDUCED_RTOL:
                last = _NeedPrecision()
                prec *= 2
                continue
            sym = lambda x: (x + x.T) / 2
            return Reduction(
                kinetic=sym(_mid_array(red_k, n)),
                powers={q: sym(_mid_array(m, n)) for q, m in red_p.items()},
                pivot_ratio=min(pivots) / max(pivots),
                precision=prec,
            )
    raise BasisDependenceError(
        f"basis numerically dependent at {MAX_PREC}-bit precision "
        f"(n={n}, p={bundle.power:g}, t={bundle.exponent_shift:g})",
        pivot_index=getattr(last, "pivot_index", None),
        pivot=getattr(last, "pivot", None),
    )


@dataclass(frozen=True, eq=False)
class MatrixBundle:
    """Scale-independent matrices for one potential, channel and (n, p, t).

    ``norm``, ``kinetic`` and ``powers`` are the raw float64 matrices (entries
    may be ``inf`` when a Gamma value exceeds double range); the
    ``prenormalized_*`` attributes are always finite.
    """

    potential: Potential
    channel: Channel
    size: int
    power: float
    exponent_shift: float
    log_norm_diag: np.ndarray
    prenormalized_norm: np.ndarray
    prenormalized_kinetic: np.ndarray
    prenormalized_powers: dict = field(default_factory=dict)
    # (precision, Arb matrices) from construction, consumed by the first reduction attempt
    _arb: tuple = field(default=(BASE_PREC, None), repr=False)

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.size, self.power, self.exponent_shift)

    def _raw(self, m):
        half = self.log_norm_diag / 2
        with np.errstate(over="ignore", invalid="ignore"):
            return m * np.exp(np.add.outer(half, half))

    @property
    def norm(self) -> np.ndarray:
        return self._raw(self.prenormalized_norm)

    @property
    def kinetic(self) -> np.ndarray:
        return self._raw(self.prenormalized_kinetic)

    @property
    def powers(self) -> dict:
        return {q: self._raw(m) for q, m in self.prenormalized_powers.items()}

    @cached_property
    def reduction(self) -> Reduction:
        return _reduce(self)

    def reduced_hamiltonian(self, s: float) -> np.ndarray:
        """L^-1 H'(s) L^-T, a symmetric matrix whose eigenvalues are the bounds."""
        if not s > 0:
            raise DomainError(f"scale s must be positive, got {s!r}")
        red = self.reduction
        h = (self.potential.kinetic_factor / (s * s)) * red.kinetic
        for term in self.potential.terms:
            h = h + (term.coefficient * s**term.exponent) * red.powers[term.exponent]
        return h

    @cached_property
    def _abs_reduced(self):
        red = self.reduction
        return np.abs(red.kinetic), {q: np.abs(m) for q, m in red.powers.items()}

    def spectrum(self, s: float) -> tuple[np.ndarray, float]:
        """Eigenvalues at scale s and an estimate of their absolute rounding error.

        The estimate is 2 eps ||sum_m |c_m| |X_m| ||_F over the terms of the
        reduced Hamiltonian; it grows with the largest eigenvalue, which
        becomes enormous at extreme scales.
        """
        values = np.linalg.eigvalsh(self.reduced_hamiltonian(s))
        abs_k, abs_p = self._abs_reduced
        bound = (self.potential.kinetic_factor / (s * s)) * abs_k
        for term in self.potential.terms:
            bound = bound + abs(term.coefficient * s**term.exponent) * abs_p[term.exponent]
        return values, 2.0 * np.finfo(float).eps * float(np.linalg.norm(bound))

    def eigenvalues(self, s: float) -> np.ndarray:
        """All n variational eigenvalues at scale s, ascending.

        Raises NumericalError when double-precision rounding could move the
        eigenvalues by more than EIGEN_RTOL (relative to max(1, |E_0|)).
        """
        values, error = self.spectrum(s)
        if not error <= EIGEN_RTOL * max(1.0, abs(values[0])):
            raise NumericalError(
                f"eigenvalues at s={s:g} unreliable in double precision "
                f"(rounding estimate {error:.2e}); the scale is too extreme for this basis"
            )
        return values


def build_bundle(potential: Potential, basis: BasisSpec, channel: Channel) -> MatrixBundle:
    """Evaluate N, K and every P(q) once; the scale in ``basis`` is ignored.

    The reduction always starts from BASE_PREC bits, so the bounds are a
    deterministic function of the inputs.
    """
    prec = BASE_PREC
    n, p, t = basis.size, basis.power, basis.exponent_shift
    for q in potential.exponents:
        if not t > -(q + 2):
            raise DomainError(
                f"term r^{q:g} needs t > {-(q + 2):g} (minimum_t={minimum_t(potential):g}), got t={t!r}"
            )
    with _ARB_LOCK, ctx.workprec(prec):
        arbs = _arb_prenormalized(potential, channel, n, p, t, prec)
        norm, kin, pows, log_nn = arbs
        log_diag = np.array([float(x.mid()) for x in log_nn])
        pre_n = _mid_array(norm, n)
        np.fill_diagonal(pre_n, 1.0)
        pre_k = _mid_array(kin, n)
        pre_p = {q: _mid_array(m, n) for q, m in pows.items()}
    return MatrixBundle(potential, channel, n, p, t, log_diag, pre_n, pre_k, pre_p, (prec, arbs))


def scaled_hamiltonian(bundle: MatrixBundle, s: float) -> np.ndarray:
    """Raw H(s) = kinetic_factor * K / s^2 + sum_q a(q) s^q P(q)."""
    if not s > 0:
        raise DomainError(f"scale s must be positive, got {s!r}")
    h = (bundle.potential.kinetic_factor / (s * s)) * bundle.kinetic
    powers = bundle.powers
    for term in bundle.potential.terms:
        h = h + (term.coefficient * s**term.exponent) * powers[term.exponent]
    return h
