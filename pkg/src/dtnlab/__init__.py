"""Zero-energy inverse boundary value problem laboratory.

Forward Dirichlet-to-Neumann maps on a square/cube, Faddeev functions on the
complex variety k.k = 0, reduction of DtN data to scattering amplitudes,
Born reconstruction with a logarithmic frequency cutoff, and a sweep harness
that checks the logarithmic stability shape empirically.
"""

__version__ = "0.1.0"

from .grid_domain import Domain, FourierGrid, build_square_domain, fourier_grid
from .potentials import (
    Potential,
    PotentialSpec,
    Spectrum,
    fourier_transform,
    inverse_fourier,
    norm_w_m1,
    sample_potential,
)
from .forward_dtn import (
    DtnMap,
    GuardReport,
    dirichlet_guard,
    dtn_diff_norm,
    dtn_difference,
    dtn_map,
    solve_dirichlet,
)
from .variety_faddeev import (
    ComplexFrequency,
    FaddeevField,
    GreenTable,
    ScatteringSample,
    ThetaPair,
    amplitude_h,
    asymptotic_diagnostic,
    born_pair,
    faddeev_green,
    lippmann_schwinger,
    theta_pair_3d,
)
from .reduction import BoundaryKernel, background_r1, h_from_dtn, kernel_A, solve_psi2
from .born import CutoffRule, Reconstruction, cutoff_rule, error_split, reconstruct, vhat_from_dtn
from .stability_lab import ExperimentConfig, StabilityReport, fit_exponent, run_sweep, verify_bounds

__all__ = [
    "Domain",
    "FourierGrid",
    "build_square_domain",
    "fourier_grid",
    "Potential",
    "PotentialSpec",
    "Spectrum",
    "fourier_transform",
    "inverse_fourier",
    "norm_w_m1",
    "sample_potential",
    "DtnMap",
    "GuardReport",
    "dirichlet_guard",
    "dtn_diff_norm",
    "dtn_difference",
    "dtn_map",
    "solve_dirichlet",
    "ComplexFrequency",
    "FaddeevField",
    "GreenTable",
    "ScatteringSample",
    "ThetaPair",
    "amplitude_h",
    "asymptotic_diagnostic",
    "born_pair",
    "faddeev_green",
    "lippmann_schwinger",
    "theta_pair_3d",
    "BoundaryKernel",
    "background_r1",
    "h_from_dtn",
    "kernel_A",
    "solve_psi2",
    "CutoffRule",
    "Reconstruction",
    "cutoff_rule",
    "error_split",
    "reconstruct",
    "vhat_from_dtn",
    "ExperimentConfig",
    "StabilityReport",
    "fit_exponent",
    "run_sweep",
    "verify_bounds",
]
