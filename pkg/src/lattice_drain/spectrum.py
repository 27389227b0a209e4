"""Dissipation spectrum of a lattice with a single lossy drain site.

The dynamical matrix in the energy eigenbasis is

    A_ij = delta_ij eps_i - (i/2) exp(i(phi_j - phi_i)) sqrt(G_i G_j),

with ``G_i = |psi_i(n0)|**2 * gamma``. Its eigenvalues solve
``S(lam) = 1/2 sum_j G_j / (lam - eps_j) = i`` and its left eigenvectors and
their inverse are known in closed form, which is what the dynamics module
relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .eigensystem import EigenSystem
from .errors import InputError, NumericError
from .lattice import LatticeModel

__all__ = [
    "DynamicalSpectrum",
    "ApproxSpectrum",
    "RegimeInfo",
    "RingAnalytics",
    "dynamical_matrix",
    "site_dynamical_matrix",
    "exact_dynamical_spectrum",
    "closed_form_left_eigenvectors",
    "closed_form_inverse",
    "self_consistency",
    "refine_root",
    "remainder_r",
    "approx_dissipation_spectrum",
    "classify_regime",
    "ring_analytics",
    "commutator_matrix",
]

PERTURBATIVE = "perturbative"
IMPEDANCE = "impedance"
ZENO = "zeno"


@dataclass(frozen=True)
class DynamicalSpectrum:
    """Exact spectrum of A, ordered so that entry ``i`` belongs to parent mode ``i``.

    ``lambdas = energies + delta_nu - 1j * rates / 2``. ``left_vectors`` (V)
    satisfies ``V @ A = diag(lambdas) @ V``; ``inverse_vectors`` is its inverse
    and ``weights`` the normalisations ``G_i`` entering it.
    """

    lambdas: np.ndarray
    energies: np.ndarray
    delta_nu: np.ndarray
    rates: np.ndarray
    left_vectors: np.ndarray
    inverse_vectors: np.ndarray
    weights: np.ndarray
    gamma: float
    match: np.ndarray
    ambiguous: np.ndarray
    macroscopic: np.ndarray
    residual: float
    refined: np.ndarray = field(default=None)

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)


@dataclass(frozen=True)
class ApproxSpectrum:
    remainder: np.ndarray
    rates: np.ndarray
    regime: np.ndarray
    pole: np.ndarray


@dataclass(frozen=True)
class RegimeInfo:
    label: str
    limit: float
    enhanced: bool


@dataclass(frozen=True)
class RingAnalytics:
    k_c: float | None
    mode_index: np.ndarray
    energies: np.ndarray
    rates: np.ndarray
    gamma_0: float | None


def _check_gamma(gamma):
    if gamma < 0:
        raise InputError(f"dissipation rate must be non-negative, got {gamma}")


def _drive(es: EigenSystem, gamma: float) -> np.ndarray:
    # e^{i phi_j} sqrt(Gbar_j)
    return np.exp(1j * es.drain_phase) * np.sqrt(es.drain_weight * gamma)


def dynamical_matrix(es: EigenSystem, gamma: float) -> np.ndarray:
    _check_gamma(gamma)
    u = _drive(es, gamma)
    return np.diag(es.energies).astype(complex) - 0.5j * np.outer(u.conj(), u)


def site_dynamical_matrix(model: LatticeModel, gamma: float) -> np.ndarray:
    """Same operator in the site basis: ``H - i (gamma/2) |n0><n0|``."""
    _check_gamma(gamma)
    a = np.array(model.hamiltonian, dtype=complex)
    a[model.drain, model.drain] -= 0.5j * gamma
    return a


def self_consistency(es: EigenSystem, gamma: float, lam) -> np.ndarray:
    """``S(lam) = 1/2 sum_j Gbar_j / (lam - eps_j)``, vectorised over ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    d = lam[..., None] - es.energies
    if np.any(d == 0):
        raise NumericError("self-consistency evaluated on an unperturbed energy")
    return 0.5 * gamma * np.sum(es.drain_weight / d, axis=-1)


def refine_root(es: EigenSystem, gamma: float, lam0, tol: float = 1e-10,
                max_iter: int = 100) -> np.ndarray:
    """Polish candidate eigenvalues by Newton iteration on ``S(lam) - i``.

    Stops once ``|S - i| < tol`` or the Newton step falls below machine
    resolution of ``lam``. Raises :class:`NumericError` otherwise.
    """
    lam = np.array(lam0, dtype=complex, ndmin=1)
    w = es.drain_weight * gamma
    done = np.zeros(lam.shape, dtype=bool)
    for _ in range(max_iter):
        d = lam[:, None] - es.energies
        f = 0.5 * np.sum(w / d, axis=1) - 1j
        fp = -0.5 * np.sum(w / d**2, axis=1)
        step = np.where(done, 0, f / fp)
        done |= np.abs(f) < tol
        lam = np.where(done, lam, lam - step)
        done |= np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(lam))
        if done.all():
            return lam if np.ndim(lam0) else lam[0]
    bad = np.flatnonzero(~done)
    raise NumericError(f"Newton refinement did not converge for {len(bad)} root(s); "
                       f"last iterate {lam[bad[0]]!r}")


def closed_form_left_eigenvectors(lambdas, es: EigenSystem, gamma: float,
                                  a: np.ndarray | None = None):
    """``V_ij = (1/2) e^{i phi_j} sqrt(Gbar_j) / (lam_i - eps_j)``.

    Returns ``(V, residual)`` where ``residual = max|V A - diag(lam) V|``.
    """
    lambdas = np.asarray(getattr(lambdas, "lambdas", lambdas), dtype=complex)
    d = lambdas[:, None] - es.energies[None, :]
    hit = np.argwhere(np.abs(d) == 0)
    if len(hit):
        i, j = hit[0]
        raise NumericError(f"pole collision: lambda_{i} equals eps_{j}")
    v = 0.5 * _drive(es, gamma)[None, :] / d
    if a is None:
        a = dynamical_matrix(es, gamma)
    residual = float(np.max(np.abs(v @ a - lambdas[:, None] * v)))
    return v, residual


def closed_form_inverse(lambdas, es: EigenSystem, gamma: float | None = None):
    """``V^-1_ij = e^{-i phi_i} sqrt(Gbar_i) G_j / (lam_j - eps_i)`` and ``G``.

    ``1/G_i = 1/2 sum_j Gbar_j / (lam_i - eps_j)**2``.
    """
    if isinstance(lambdas, DynamicalSpectrum):
        gamma = lambdas.gamma if gamma is None else gamma
        lambdas = lambdas.lambdas
    lambdas = np.asarray(lambdas, dtype=complex)
    d = lambdas[:, None] - es.energies[None, :]
    if np.any(d == 0):
        raise NumericError("pole collision in closed-form inverse")
    w = es.drain_weight * gamma
    g = 1.0 / (0.5 * np.sum(w[None, :] / d**2, axis=1))
    u = np.exp(-1j * es.drain_phase) * np.sqrt(w)
    winv = u[:, None] * g[None, :] / d.T
    return winv, g


def commutator_matrix(v: np.ndarray) -> np.ndarray:
    """``[b~_i, b~_j^dag] = sum_l V_il V_jl^*``."""
    return v @ v.conj().T


def _match(lambdas, energies):
    cost = np.abs(lambdas.real[:, None] - energies[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(len(energies), dtype=int)
    perm[cols] = rows
    # parent j whose nearest-two eigenvalues are equidistant is ambiguous
    ambiguous = np.zeros(len(energies), dtype=bool)
    for j in range(len(energies)):
        c = np.sort(cost[:, j])
        if len(c) > 1 and abs(c[1] - c[0]) <= 1e-12 * max(1.0, c[0]):
            ambiguous[j] = True
    return perm, ambiguous


def exact_dynamical_spectrum(a: np.ndarray, es: EigenSystem,
                             gamma: float | None = None) -> DynamicalSpectrum:
    """Diagonalize A, pair each eigenvalue with its parent energy and build
    the closed-form eigenvectors.

    ``gamma`` is recovered from the trace of ``a`` when not given.
    """
    a = np.asarray(a, dtype=complex)
    m = es.n_modes
    if a.shape != (m, m):
        raise InputError(f"dynamical matrix shape {a.shape} does not match {m} modes")
    if gamma is None:
        gamma = float(-2 * np.sum(np.diag(a).imag) / np.sum(es.drain_weight))
        gamma = max(gamma, 0.0)
    _check_gamma(gamma)
    if gamma == 0:
        eye = np.eye(m, dtype=complex)
        return DynamicalSpectrum(
            lambdas=es.energies.astype(complex), energies=es.energies,
            delta_nu=np.zeros(m), rates=np.zeros(m), left_vectors=eye,
            inverse_vectors=eye.copy(), weights=np.full(m, np.nan + 0j), gamma=0.0,
            match=np.arange(m), ambiguous=np.zeros(m, bool), macroscopic=np.zeros(m, bool),
            residual=0.0, refined=np.ones(m, bool))
    try:
        lam_num = scipy.linalg.eigvals(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(lam_num)):
        raise NumericError("eigensolver returned non-finite eigenvalues")

    scale = es.hop_scale
    try:
        lam_ref = refine_root(es, gamma, lam_num)
        refined = np.abs(lam_ref - lam_num) < 1e-6 * max(scale, gamma)
    except NumericError:
        lam_ref, refined = lam_num, np.zeros(m, bool)
    lam = np.where(refined, lam_ref, lam_num)

    perm, ambiguous = _match(lam, es.energies)
    lam = lam[perm]
    refined = refined[perm]
    v, residual = closed_form_left_eigenvectors(lam, es, gamma, a)
    winv, g = closed_form_inverse(lam, es, gamma)
    rates = -2 * lam.imag
    dmax = np.max(es.spacing) if m >= 2 else 0.0
    return DynamicalSpectrum(
        lambdas=lam, energies=es.energies, delta_nu=lam.real - es.energies, rates=rates,
        left_vectors=v, inverse_vectors=winv, weights=g, gamma=float(gamma),
        match=perm, ambiguous=ambiguous, macroscopic=rates > 10 * dmax,
        residual=residual, refined=refined)


def remainder_r(es: EigenSystem, i: int | None = None):
    """Rescaled remainder ``r_i = 1/pi sum_{j != i} Delta_i w_j / (eps_i - eps_j)``.

    Returns every mode's value when ``i`` is None.
    """
    eps, w, delta = es.energies, es.drain_weight, es.spacing
    diff = eps[:, None] - eps[None, :]
    np.fill_diagonal(diff, np.inf)
    r = delta * np.sum(w[None, :] / diff, axis=1) / np.pi
    return r if i is None else float(r[i])


def approx_dissipation_spectrum(es: EigenSystem, r, gamma: float) -> ApproxSpectrum:
    """Relaxation rates from the local level spacing, drain weight and remainder.

    The complex ratio is formed first and its modulus goes into a real log.
    An exact pole (``r = 0`` and ``Gbar/2 = Delta/pi``) yields ``inf`` with
    ``pole`` set for that mode.
    """
    _check_gamma(gamma)
    r = np.asarray(r, dtype=float)
    a = es.spacing / np.pi
    w = es.drain_weight
    x = 0.5 * gamma
    num = a + x * (w + 1j * r)
    den = a - x * (w - 1j * r)
    pole = np.abs(den) <= 1e-14 * np.abs(a)
    with np.errstate(divide="ignore"):
        rates = np.where(pole, np.inf, a * np.log(np.abs(num) / np.where(pole, 1.0, np.abs(den))))
    if gamma == 0:
        rates = np.zeros_like(a)
        pole = np.zeros_like(pole)
    regime = np.array([_regime_label(w[i] * gamma, es.spacing[i]) for i in range(len(a))])
    return ApproxSpectrum(remainder=r, rates=rates, regime=regime, pole=pole)


def _regime_label(gbar, delta):
    ratio = (gbar / 2) / (delta / np.pi)
    if ratio < 1 / 3:
        return PERTURBATIVE
    if ratio > 3:
        return ZENO
    return IMPEDANCE


def classify_regime(es: EigenSystem, r, gamma: float, i: int) -> RegimeInfo:
    """Regime of mode ``i`` and the matching limiting form of its rate.

    ``enhanced`` reports whether ``gamma_i / Gbar_i`` first rises with the
    coupling, which happens for ``|r_i| < |psi_i(n0)|**2 / sqrt(3)``.
    """
    r_i = float(np.asarray(r)[i]) if np.ndim(r) else float(r)
    w = es.drain_weight[i]
    delta = es.spacing[i]
    gbar = w * gamma
    a = delta / np.pi
    label = _regime_label(gbar, delta)
    if label == PERTURBATIVE:
        limit = gbar * a**2 / (a**2 + (r_i * gamma / 2) ** 2)
    elif label == ZENO:
        limit = w**2 / (w**2 + r_i**2) * 4 / np.pi**2 * delta**2 / gbar
    else:
        limit = np.inf if r_i == 0 else gbar * np.log1p(4 * w**2 / r_i**2) / 4
    return RegimeInfo(label, float(limit), bool(abs(r_i) < w / np.sqrt(3)))


def ring_analytics(n: int, j: float, gamma: float) -> RingAnalytics:
    """Large-N dissipation spectrum of the flux-pi/2 ring with one drain site.

    Modes are labelled ``i = -(n-1)/2 ... (n-1)/2`` with ``eps_i = 2j sin(pi i/n)``.
    Below ``gamma = 4j`` the rate peaks at the critical momentum
    ``2j cos(k_c) = gamma/2``; above it a drain-localised mode with
    ``gamma_0 = sqrt(gamma**2 - 16 j**2)`` splits off the band.
    """
    _check_gamma(gamma)
    if n < 3:
        raise InputError("ring needs n >= 3")
    idx = np.arange(n) - (n - 1) / 2
    c = np.cos(np.pi * idx / n)
    eps = 2 * j * np.sin(np.pi * idx / n)
    pref = 2 * j / n * c
    if gamma <= 4 * j:
        ckc = gamma / (4 * j)
        k_c = float(np.arccos(ckc))
        with np.errstate(divide="ignore"):
            rates = pref * np.log(np.abs((c + ckc) / (c - ckc)))
        hit = np.abs(c - ckc) < 1e-12
        rates = np.where(hit, pref * np.log(n), rates)
        gamma_0 = 0.0 if gamma == 4 * j else None
    else:
        k_c = None
        rates = pref * np.log((gamma + 4 * j * c) / (gamma - 4 * j * c))
        gamma_0 = float(np.sqrt(gamma**2 - 16 * j**2))
    return RingAnalytics(k_c=k_c, mode_index=idx, energies=eps, rates=rates, gamma_0=gamma_0)
