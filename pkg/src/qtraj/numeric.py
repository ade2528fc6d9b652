"""Centralized numeric tolerances.

Every comparison threshold used across the package lives in one record so
that runs can tighten or relax them coherently from the configuration file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class NumericPolicy:
    herm_tol: float = 1e-12            # |A - A^dag| allowed on Hermitian inputs
    norm_tol: float = 1e-12            # state normalization slack
    trace_tol: float = 1e-10           # density-matrix trace slack
    psd_tol: float = 1e-9              # allowed negative part of rho spectra
    eig_tol: float = 1e-10             # eigendecomposition reconstruction slack
    basis_tol: float = 1e-10           # orthonormality slack for bases
    rate_clip: float = 1e-10           # jump-rate eigenvalues in (-rate_clip, 0) clip to 0
    negative_rate_tol: float = 1e-12   # MCWF negative-rate trigger
    domain_tol: float = 1e-12          # positivity-domain witness slack
    pole_tol: float = 1e-8             # amplitude below which a state counts as a pole
    gauge_tol: float = 1e-8            # imaginary part allowed in real-gauge amplitudes
    max_step_probability: float = 0.5  # summed per-step jump probability guard

    def with_overrides(self, **kwargs: float) -> "NumericPolicy":
        unknown = set(kwargs) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown numeric policy fields: {sorted(unknown)}")
        return replace(self, **kwargs)


DEFAULT_NUMERIC = NumericPolicy()
