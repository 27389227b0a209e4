"""Dissipation spectra and Gaussian dynamics of bosonic lattices drained at one site."""

__version__ = "0.1.0"

from .errors import InputError, NumericError  # noqa: E402
from .lattice import (LatticeModel, build_chain, build_hofstadter, build_ring_flux,  # noqa: E402
                      build_step_chain, model_from_spec)
from .eigensystem import EigenSystem, diagonalize_coupled, level_spacings  # noqa: E402
from .spectrum import (ApproxSpectrum, DynamicalSpectrum, approx_dissipation_spectrum,  # noqa: E402
                       classify_regime, closed_form_inverse, closed_form_left_eigenvectors,
                       dynamical_matrix, exact_dynamical_spectrum, refine_root, remainder_r,
                       ring_analytics, self_consistency, site_dynamical_matrix)
from .dynamics import (BathSpec, GaussianState, evolve_exact, evolve_rk4_oracle,  # noqa: E402
                       intermediate_correlations, light_cone_profile, steady_state,
                       to_site_basis, vacuum)
