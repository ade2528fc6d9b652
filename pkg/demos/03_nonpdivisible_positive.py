"""Positive unravelings where P-divisibility fails.

Two phase covariant families break P-divisibility in periodic windows:

  * oscillating dephasing (kappa > 1): the theta-switch policy keeps every
    jump rate nonnegative for all initial states up to kappa_max ~ 1.15,
    estimated here by the kappa-theta scan;
  * negative pumping (kappa = 0.25): the sigma_z poles leave the positivity
    domain, but jumps to |+>, |-> with the free component pinned at its upper
    bound stay positive, and the ensemble shows the hallmark revival of |z|.
"""

import numpy as np

from qtraj import (
    PolicyContext,
    exact_solve,
    kappa_scan,
    negative_pumping_rates,
    phase_covariant_model,
    phase_covariant_p_div,
    phi_policy_pm_non_p,
    projector,
    run_ensemble,
    theta_state,
    time_grid,
)

# --- kappa-theta scan of the switch policy -------------------------------
thetas = np.linspace(0, np.pi / 2, 16)
scan = kappa_scan(1.3, np.arange(1.0, 1.45, 0.05), thetas, t_max=8.0, dt=2e-3)
for i, kappa in enumerate(scan.kappa_grid):
    row = "".join("+" if ok else "-" for ok in scan.positive[i])
    print(f"kappa={kappa:4.2f}  {row}")
print(
    f"kappa_max estimate {scan.kappa_max_estimate:g} "
    f"(bracket {scan.kappa_max_bracket}); P-divisibility already fails for "
    f"kappa > 1, e.g. at t=pi/2: "
    f"{phase_covariant_p_div(np.exp(-np.pi/4), np.exp(-np.pi/8), -1.05/2 * np.exp(-3*np.pi/16))}"
)

# --- negative pumping: revival of |z| under a positive unraveling --------
rates = negative_pumping_rates(0.25)
model = phase_covariant_model(rates)
policy = phi_policy_pm_non_p(rates, selector=1.0)
psi0 = theta_state(0.5 * np.arccos(0.8))  # z0 = 0.8
grid = time_grid(4.0, 1e-3)
res = run_ensemble(
    model, "psi_roqj", policy, psi0, grid, n_traj=4000, base_seed=1,
    output_stride=50, ctx=PolicyContext(),
)
rhos = exact_solve(model, projector(psi0), grid)
z_exact = np.real(rhos[:, 0, 0] - rhos[:, 1, 1])
i_min = 1000 + int(np.argmin(np.abs(z_exact[1000:3000])))
print(
    f"\nnegative pumping without a single negative rate along "
    f"{res.n_traj} trajectories ({res.jump_count_total} jumps)"
)
print(
    f"|z| dips to {abs(z_exact).min():.3f} near t~1 and revives to "
    f"{abs(z_exact[1500:2500]).max():.3f} near t~2 - non-Markovian backflow "
    f"captured with independent realizations"
)
