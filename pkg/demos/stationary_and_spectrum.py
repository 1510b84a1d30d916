"""Synchronized profile and the linearization around it, for a range of couplings.

Prints r, D_K and the spectral gap; the gap sets how fast the mean-field
dynamics relax onto the circle of synchronized states.
"""
from rotators.spectral import assemble, eigensolve
from rotators.stationary import diffusion_coefficient, solve_sync_degree

print(f"{'K':>5} {'r':>10} {'D_K':>10} {'lambda_1':>10}")
for K in (1.2, 1.5, 2.0, 3.0, 5.0):
    gap = eigensolve(assemble(K, 64)).eigenvalues[1]
    print(f"{K:5.2f} {solve_sync_degree(K):10.6f} {diffusion_coefficient(K):10.6f} {gap:10.6f}")
