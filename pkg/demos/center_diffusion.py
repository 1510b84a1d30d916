"""Small-scale look at the wandering of the synchronization center.

On the time scale N the center Psi_N diffuses with coefficient D_K.  This
runs a reduced version of the full experiment (a minute or so on one core);
expect a noisy estimate.
"""
from rotators.experiments import phase_diffusion_experiment

est = phase_diffusion_experiment(2.0, N=200, tau_f=1.0, dt=1e-3, n_paths=20, seed=1)
print(f"D_hat = {est.D_hat:.3f} +- {est.stderr:.3f}   (D_K = {est.target:.4f})")
print(f"drift = {est.drift:.3f} +- {est.drift_stderr:.3f},  R^2 = {est.r_squared:.3f}")
