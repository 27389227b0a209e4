"""Quadratic hopping Hamiltonians with a single drain site.

All matrices are in units of the hopping rate ``j``. Two-dimensional lattices
use row-major site indexing, ``site = y * nx + x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import InputError

__all__ = [
    "LatticeModel",
    "build_chain",
    "build_step_chain",
    "build_ring_flux",
    "build_hofstadter",
    "model_from_spec",
    "load_model_spec",
]

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class LatticeModel:
    n_sites: int
    hamiltonian: np.ndarray
    drain: int
    label: str = ""
    hop_scale: float = 1.0
    geometry: str = "chain"  # chain | ring | square
    shape: tuple[int, ...] = field(default=())

    def __post_init__(self):
        h = np.array(self.hamiltonian, dtype=complex)
        if h.shape != (self.n_sites, self.n_sites):
            raise InputError(f"hamiltonian shape {h.shape} does not match n_sites={self.n_sites}")
        if not 0 <= self.drain < self.n_sites:
            raise InputError(f"drain site {self.drain} outside [0, {self.n_sites})")
        if self.hop_scale <= 0:
            raise InputError("hop_scale must be positive")
        check_hermitian(h, self.hop_scale)
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        if not self.shape:
            object.__setattr__(self, "shape", (self.n_sites,))

    def with_drain(self, drain: int) -> "LatticeModel":
        return LatticeModel(self.n_sites, self.hamiltonian, drain, self.label,
                            self.hop_scale, self.geometry, self.shape)

    def distance(self, site: int) -> np.ndarray:
        """Graph distance of every site from ``site`` (arc distance on a ring)."""
        idx = np.arange(self.n_sites)
        if self.geometry == "chain":
            return np.abs(idx - site)
        if self.geometry == "ring":
            d = np.abs(idx - site)
            return np.minimum(d, self.n_sites - d)
        raise InputError(f"no 1D distance for geometry {self.geometry!r}")


def check_hermitian(h: np.ndarray, scale: float = 1.0) -> None:
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > HERMITIAN_TOL * scale:
        raise InputError(f"hamiltonian is not Hermitian (max deviation {dev:.3e})")


def _open_chain(n: int, j: float) -> np.ndarray:
    h = np.zeros((n, n), dtype=complex)
    k = np.arange(n - 1)
    h[k, k + 1] = -j
    h[k + 1, k] = -j
    return h


def build_chain(n: int, j: float = 1.0, potential: Sequence[float] | None = None,
                drain: int = 0) -> LatticeModel:
    """Open chain with nearest-neighbour hopping ``-j``; drain on the edge by default."""
    if n < 1:
        raise InputError("chain needs n >= 1")
    h = _open_chain(n, j)
    if potential is not None and len(potential) > 0:
        if len(potential) != n:
            raise InputError(f"potential has {len(potential)} entries, expected {n}")
        h[np.diag_indices(n)] = np.asarray(potential, dtype=float)
    return LatticeModel(n, h, drain, label=f"chain-{n}", hop_scale=j)


def build_step_chain(n: int, j: float = 1.0, v: float = 2.0) -> LatticeModel:
    """Open chain with potential ``-v`` left of the centre, ``+v`` right of it.

    The drain sits on the central site, so ``n`` must be odd.
    """
    if n < 1 or n % 2 == 0:
        raise InputError(f"step chain needs an odd number of sites, got {n}")
    if v < 0:
        raise InputError("step strength v must be non-negative")
    c = n // 2
    pot = np.zeros(n)
    pot[:c] = -v
    pot[c + 1:] = v
    h = _open_chain(n, j)
    h[np.diag_indices(n)] = pot
    return LatticeModel(n, h, c, label=f"step-chain-{n}-v{v:g}", hop_scale=j)


def build_ring_flux(n: int, j: float = 1.0, flux: float = np.pi / 2) -> LatticeModel:
    if n < 3:
        raise InputError("ring needs n >= 3")
    if not 0.0 <= flux <= np.pi:
        raise InputError(f"ring flux must lie in [0, pi], got {flux}")
    h = np.zeros((n, n), dtype=complex)
    k = np.arange(n)
    hop = -j * np.exp(-1j * flux / n)
    h[k, (k + 1) % n] = hop
    h[(k + 1) % n, k] = np.conj(hop)
    return LatticeModel(n, h, 0, label=f"ring-{n}-flux{flux:.6g}", hop_scale=j,
                        geometry="ring")


def build_hofstadter(nx: int, ny: int, j: float = 1.0,
                     flux_per_plaquette: float = np.pi / 2) -> LatticeModel:
    """Open square lattice in the Landau gauge.

    Hops along x carry the Peierls phase; going counter-clockwise around a
    plaquette (+x, +y, -x, -y) multiplies the hop amplitudes to
    ``j**4 * exp(1j * flux_per_plaquette)``. The drain is the central site of
    the top row (row ``y = 0``).
    """
    if nx < 1 or ny < 1:
        raise InputError("square lattice needs nx, ny >= 1")
    n = nx * ny
    h = np.zeros((n, n), dtype=complex)

    def site(x, y):
        return y * nx + x

    for y in range(ny):
        for x in range(nx):
            if x + 1 < nx:
                a, b = site(x, y), site(x + 1, y)
                h[b, a] = -j * np.exp(-1j * flux_per_plaquette * y)
                h[a, b] = np.conj(h[b, a])
            if y + 1 < ny:
                a, b = site(x, y), site(x, y + 1)
                h[b, a] = h[a, b] = -j
    drain = site(int(np.ceil(nx / 2)) - 1, 0)
    return LatticeModel(n, h, drain, label=f"hofstadter-{nx}x{ny}-flux{flux_per_plaquette:.6g}",
                        hop_scale=j, geometry="square", shape=(ny, nx))


_BUILDERS = {
    "chain": lambda s: build_chain(int(s["n"]), float(s.get("j", 1.0)), s.get("potential") or None),
    "step-chain": lambda s: build_step_chain(int(s["n"]), float(s.get("j", 1.0)), float(s.get("v", 2.0))),
    "ring": lambda s: build_ring_flux(int(s["n"]), float(s.get("j", 1.0)), float(s.get("flux", np.pi / 2))),
    "hofstadter": lambda s: build_hofstadter(int(s["nx"]), int(s["ny"]), float(s.get("j", 1.0)),
                                             float(s.get("flux", np.pi / 2))),
}


def model_from_spec(spec: Mapping[str, Any]) -> LatticeModel:
    """Build a model from a key-value spec.

    Keys: ``kind`` (chain | step-chain | ring | hofstadter), ``n`` or
    ``nx``/``ny``, ``j``, ``flux``, ``v``, ``potential`` and the optional
    ``drain`` override.
    """
    kind = spec.get("kind")
    if kind not in _BUILDERS:
        raise InputError(f"unknown model kind {kind!r}; expected one of {sorted(_BUILDERS)}")
    try:
        model = _BUILDERS[kind](spec)
    except KeyError as exc:
        raise InputError(f"model spec for {kind!r} is missing key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad value in model spec: {exc}") from None
    if spec.get("drain") is not None:
        model = model.with_drain(int(spec["drain"]))
    return model


def load_model_spec(path: str | Path) -> LatticeModel:
    with open(path) as fh:
        spec = yaml.safe_load(fh) or {}
    if "model" in spec and isinstance(spec["model"], Mapping):
        spec = spec["model"]
    return model_from_spec(spec)
