"""Gaussian second moments under a local squeezed bath.

Moments are stored as two blocks: ``normal[i, j] = <b_i^dag b_j>`` and
``anomalous[i, j] = <b_i b_j>``. With ``db = -i A b dt + g dW`` and bath
statistics ``<dW^dag dW> = nbar dt``, ``<dW dW> = m dt`` they obey

    d normal/dt    = i A^* normal - i normal A^T + nbar g^* g^T
    d anomalous/dt = -i A anomalous - i anomalous A^T + m g g^T

where ``g_i = e^{-i phi_i} sqrt(Gbar_i)``. ``evolve_exact`` solves these in the
dynamical eigenbasis ``b~ = V b``; ``evolve_rk4_oracle`` integrates them
directly and shares no code with it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eigensystem import EigenSystem
from .errors import InputError, NumericError
from .spectrum import DynamicalSpectrum

__all__ = [
    "BathSpec",
    "GaussianState",
    "TrajectoryRecord",
    "vacuum",
    "drive_vector",
    "evolve_exact",
    "evolve_rk4_oracle",
    "steady_state",
    "effective_coupling",
    "intermediate_correlations",
    "to_site_basis",
    "gram_matrix",
    "min_gram_eigenvalue",
    "LightConeProfile",
    "light_cone_profile",
]

EIGENMODE = "eigenmode"
SITE = "site"
RESONANT_TOL = 1e-14


@dataclass(frozen=True)
class BathSpec:
    nbar: float = 1.0
    m: complex = np.sqrt(2.0)
    gamma: float = 1.0

    def __post_init__(self):
        if self.nbar < 0:
            raise InputError("bath occupation nbar must be non-negative")
        if self.gamma < 0:
            raise InputError("dissipation rate must be non-negative")
        if abs(self.m) ** 2 > self.nbar * (self.nbar + 1) + 1e-12:
            raise InputError(f"|m|^2 = {abs(self.m)**2:.6g} exceeds nbar(nbar+1) = "
                             f"{self.nbar * (self.nbar + 1):.6g}")

    @classmethod
    def pure_squeezing(cls, nbar: float = 1.0, gamma: float = 1.0, phase: float = 0.0):
        return cls(nbar, np.sqrt(nbar * (nbar + 1)) * np.exp(1j * phase), gamma)


@dataclass(frozen=True)
class GaussianState:
    normal: np.ndarray
    anomalous: np.ndarray
    basis: str = EIGENMODE
    time: float = 0.0

    def __post_init__(self):
        if self.basis not in (EIGENMODE, SITE):
            raise InputError(f"unknown basis tag {self.basis!r}")
        n = np.asarray(self.normal, dtype=complex)
        a = np.asarray(self.anomalous, dtype=complex)
        if n.shape != a.shape or n.ndim != 2 or n.shape[0] != n.shape[1]:
            raise InputError("normal and anomalous blocks must be square and of equal shape")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "anomalous", a)

    @property
    def size(self) -> int:
        return self.normal.shape[0]

    def hermiticity_error(self) -> float:
        return float(max(np.max(np.abs(self.normal - self.normal.conj().T), initial=0),
                         np.max(np.abs(self.anomalous - self.anomalous.T), initial=0)))

    def distance(self, other: "GaussianState") -> float:
        return float(max(np.max(np.abs(self.normal - other.normal)),
                         np.max(np.abs(self.anomalous - other.anomalous))))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: list[GaussianState]
    labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise InputError("one state per time required")
        if np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")
        if len({s.basis for s in self.states}) > 1:
            raise InputError("trajectory states must share a basis")


def vacuum(m: int, basis: str = EIGENMODE) -> GaussianState:
    z = np.zeros((m, m), dtype=complex)
    return GaussianState(z, z.copy(), basis, 0.0)


def drive_vector(es: EigenSystem, gamma: float) -> np.ndarray:
    """Noise coupling ``g_i = e^{-i phi_i} sqrt(|psi_i(n0)|^2 gamma)``."""
    return np.exp(-1j * es.drain_phase) * np.sqrt(es.drain_weight * gamma)


def _expm1_over(x: np.ndarray, t: float) -> np.ndarray:
    """``(exp(x t) - 1) / x`` with the ``x -> 0`` limit ``t``."""
    small = np.abs(x) < RESONANT_TOL
    safe = np.where(small, 1.0, x)
    return np.where(small, t, np.expm1(x * t) / safe)


def _require_eigenmode(state: GaussianState, m: int):
    if state.basis != EIGENMODE:
        raise InputError("state must be in the eigenmode basis")
    if state.size != m:
        raise InputError(f"state has {state.size} modes, spectrum has {m}")


def _tilde_drive(ds: DynamicalSpectrum, es: EigenSystem) -> np.ndarray:
    # equals i for every mode when V carries the closed-form normalisation
    return ds.left_vectors @ drive_vector(es, ds.gamma)


def evolve_exact(ds: DynamicalSpectrum, es: EigenSystem, bath: BathSpec,
                 initial: GaussianState, t: float) -> GaussianState:
    """Closed-form moments at time ``t`` from the dynamical eigenbasis."""
    m = ds.n_modes
    _require_eigenmode(initial, m)
    if t < 0:
        raise InputError("time must be non-negative")
    v, w = ds.left_vectors, ds.inverse_vectors
    lam = ds.lambdas
    gt = _tilde_drive(ds, es)

    n0 = v.conj() @ initial.normal @ v.T
    a0 = v @ initial.anomalous @ v.T
    xn = 1j * (lam.conj()[:, None] - lam[None, :])
    xa = -1j * (lam[:, None] + lam[None, :])
    nt = np.exp(xn * t) * n0 + bath.nbar * np.outer(gt.conj(), gt) * _expm1_over(xn, t)
    at = np.exp(xa * t) * a0 + bath.m * np.outer(gt, gt) * _expm1_over(xa, t)

    normal = w.conj() @ nt @ w.T
    anomalous = w @ at @ w.T
    return GaussianState(_herm(normal), _sym(anomalous), EIGENMODE, float(initial.time + t))


def steady_state(ds: DynamicalSpectrum, es: EigenSystem, bath: BathSpec) -> GaussianState:
    if np.any(ds.rates <= 1e-12):
        raise NumericError("steady state is not unique: a coupled mode has zero decay rate")
    v, w, lam = ds.left_vectors, ds.inverse_vectors, ds.lambdas
    gt = _tilde_drive(ds, es)
    xn = 1j * (lam.conj()[:, None] - lam[None, :])
    xa = -1j * (lam[:, None] + lam[None, :])
    nt = -bath.nbar * np.outer(gt.conj(), gt) / xn
    at = -bath.m * np.outer(gt, gt) / xa
    return GaussianState(_herm(w.conj() @ nt @ w.T), _sym(w @ at @ w.T), EIGENMODE, np.inf)


def _herm(x):
    return (x + x.conj().T) / 2


def _sym(x):
    return (x + x.T) / 2


def _rk4_run(a, drive, bath, n, an, t, dt):
    steps = int(np.ceil(t / dt - 1e-9))
    h = t / steps if steps else 0.0
    ac = a.conj()
    at = a.T
    qn = bath.nbar * np.outer(drive.conj(), drive)
    qa = bath.m * np.outer(drive, drive)

    def rhs(n, an):
        return (1j * (ac @ n) - 1j * (n @ at) + qn,
                -1j * (a @ an) - 1j * (an @ at) + qa)

    for _ in range(steps):
        k1 = rhs(n, an)
        k2 = rhs(n + 0.5 * h * k1[0], an + 0.5 * h * k1[1])
        k3 = rhs(n + 0.5 * h * k2[0], an + 0.5 * h * k2[1])
        k4 = rhs(n + h * k3[0], an + h * k3[1])
        n = n + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        an = an + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return n, an


def evolve_rk4_oracle(a: np.ndarray, drive: np.ndarray, bath: BathSpec,
                      initial: GaussianState, t: float, dt: float = 0.02,
                      tol: float = 1e-8, max_halvings: int = 6) -> GaussianState:
    """Classical RK4 on the moment equations, halving ``dt`` until two
    successive resolutions agree to ``tol`` (max-norm).

    Works in whatever basis ``a`` and ``drive`` are expressed in; the result
    carries the basis tag of ``initial``.
    """
    if dt <= 0:
        raise InputError("dt must be positive")
    a = np.asarray(a, dtype=complex)
    drive = np.asarray(drive, dtype=complex)
    if a.shape != initial.normal.shape or drive.shape != (a.shape[0],):
        raise InputError("dynamical matrix, drive vector and state sizes disagree")
    prev = _rk4_run(a, drive, bath, initial.normal, initial.anomalous, t, dt)
    for _ in range(max_halvings):
        dt /= 2
        cur = _rk4_run(a, drive, bath, initial.normal, initial.anomalous, t, dt)
        err = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
        if err < tol:
            return GaussianState(_herm(cur[0]), _sym(cur[1]), initial.basis,
                                 float(initial.time + t))
        prev = cur
    raise NumericError(f"RK4 step halving did not converge (last change {err:.3e})")


def effective_coupling(es: EigenSystem, horizon: float | None = None,
                       n_sites: int | None = None) -> float:
    """Markovian drain-response scale ``J_eff``.

    Reciprocal of the real part of the one-sided integral of the drain-site
    autocorrelation ``sum_i |psi_i(n0)|^2 exp(-i eps_i tau)`` up to
    ``horizon`` (default ``N / (4 J)``).
    """
    if horizon is None:
        n = n_sites if n_sites is not None else es.n_sites
        horizon = n / (4 * es.hop_scale)
    eps = es.energies
    small = np.abs(eps) < 1e-12
    safe = np.where(small, 1.0, eps)
    integ = np.where(small, horizon, np.sin(eps * horizon) / safe)
    return float(1.0 / np.sum(es.drain_weight * integ))


def intermediate_correlations(es: EigenSystem, bath: BathSpec, jeff: float | None,
                              t: float) -> GaussianState:
    """Vacuum-start moments with the drain response replaced by its
    Markovian limit; valid for ``1/J << t << N/J``."""
    if jeff is None:
        jeff = effective_coupling(es)
    gamma = bath.gamma
    pref = gamma / (1 + gamma / (4 * jeff)) ** 2
    amp = es.drain_amp
    eps = es.energies
    # (1 - exp(-i w t)) / (i w) == -(exp(-i w t) - 1)/(i w) == expm1_over(-i w, t)
    wn = eps[None, :] - eps[:, None]
    wa = eps[None, :] + eps[:, None]
    normal = pref * bath.nbar * np.outer(amp, amp.conj()) * _expm1_over(-1j * wn, t)
    anomalous = pref * bath.m * np.outer(amp.conj(), amp.conj()) * _expm1_over(-1j * wa, t)
    return GaussianState(_herm(normal), _sym(anomalous), EIGENMODE, float(t))


def to_site_basis(state: GaussianState, es: EigenSystem) -> GaussianState:
    """``<a_m^dag a_n> = sum psi_i(m)^* psi_j(n) <b_i^dag b_j>``, ``<a_m a_n>`` likewise."""
    _require_eigenmode(state, es.n_modes)
    psi = es.wavefunctions
    normal = psi.conj() @ state.normal @ psi.T
    anomalous = psi @ state.anomalous @ psi.T
    return GaussianState(_herm(normal), _sym(anomalous), SITE, state.time)


def gram_matrix(state: GaussianState) -> np.ndarray:
    """Second moments ``<X_k^dag X_l>`` of ``X = (b_1..b_M, b_1^dag..b_M^dag)``."""
    n, a = state.normal, state.anomalous
    eye = np.eye(state.size)
    return np.block([[n, a.conj()], [a, eye + n.T]])


def min_gram_eigenvalue(state: GaussianState) -> float:
    g = gram_matrix(state)
    return float(np.linalg.eigvalsh((g + g.conj().T) / 2)[0])


@dataclass(frozen=True)
class LightConeProfile:
    inside_max: float
    outside_max: float
    front_position: float
    radius: float


def light_cone_profile(state: GaussianState, distance: np.ndarray, speed: float, t: float,
                       buffer: float = 4.0, front_threshold: float = 1e-2) -> LightConeProfile:
    """Split ``|<a_m a_n>|`` at ``max(d_m, d_n) = speed * t + buffer``.

    ``distance`` gives each site's 1D distance from the drain (see
    :meth:`LatticeModel.distance`). The front is the largest distance at which
    some anomalous correlator reaches ``front_threshold`` times the global
    maximum.
    """
    if state.basis != SITE:
        raise InputError("light-cone analysis needs a site-basis state")
    d = np.asarray(distance)
    if d.shape != (state.size,):
        raise InputError("distance must give one value per site")
    mag = np.abs(state.anomalous)
    radius = speed * t + buffer
    dd = np.maximum(d[:, None], d[None, :])
    inside = dd <= radius
    inside_max = float(mag[inside].max()) if inside.any() else 0.0
    outside_max = float(mag[~inside].max()) if (~inside).any() else 0.0
    peak = mag.max()
    if peak == 0:
        front = 0.0
    else:
        row = mag.max(axis=1)
        front = float(d[row >= front_threshold * peak].max())
    return LightConeProfile(inside_max, outside_max, front, radius)
