"""Density ratios at the contact points of straight chords in the unit disk.

A chord at height ``d`` meets the circle at angle ``theta = acos(d)``.  With
the wetted arc below the chord counted with weight ``2 sigma``, the corrected
density at a contact point tends to ``1 + d`` as the radius shrinks.  This
script prints the extrapolated limits and the smallest constant ``C`` that
makes every corrected profile non-decreasing.
"""
import numpy as np

from varicontact import mono
from varicontact.fixtures import chord_family


def main():
    family = chord_family(512)
    profiles, params = [], []
    print(f"{'fixture':<12} {'sigma':>6} {'limit':>10} {'expected':>9}")
    for f in family:
        grid = mono.rho_grid(f.dom.s0)
        for k, a in enumerate(f.contact_points):
            pr = mono.profile_I(f.V, f.dom, f.Bplus, f.sigma, a, grid, label=f"{f.name}@{k}")
            profiles.append(pr)
            params.append(mono.MonotoneParams(2.0, f.n, f.dom.kappa, f.dom.s0, 0.0, 0.0,
                                              f.sigma))
        est = mono.density_limit(profiles[-1])
        print(f"{f.name:<12} {f.sigma:6.3f} {est.estimate:10.6f} "
              f"{f.expected_density_limit[-1]:9.4f}")
    fit = mono.find_constant(profiles, params)
    print(f"\nsmallest C for p = 2: {fit.C:.4g} (binding profile {fit.binding or 'none'})")
    k = max(fit.binding_index, 0)
    worst = profiles[k]
    corr = mono.corrected_quantity(worst, params[k].with_C(fit.C))
    print(f"corrected quantity on {worst.label}: {corr[0]:.6f} -> {corr[-1]:.6f}, "
          f"min step {np.min(np.diff(corr)):.2e}")


if __name__ == "__main__":
    main()
