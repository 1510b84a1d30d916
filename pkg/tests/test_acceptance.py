"""Acceptance suite: one PASS/FAIL line per criterion, shown in the terminal summary.

Criteria 6 and 7 are Monte Carlo runs at full scale (about 12 minutes on one
core for criterion 7, twice that with the determinism rerun).
"""
import json

import numpy as np
import pytest
from scipy import integrate

from rotators import experiments as ex
from rotators.hilbert import CircleGrid, HMinusOneElement, project_to_manifold, second_order_projection
from rotators.pde import FourierDensity, evolve, free_energy
from rotators.spectral import asymptotics_report, assemble, eigensolve, index_offset, potential_mean
from rotators.stationary import (
    TWO_PI,
    StationaryProfile,
    c_constant,
    diffusion_coefficient,
    psi_ratio,
    solve_sync_degree,
)

from conftest import report

pytestmark = pytest.mark.acceptance

SEED = 20261018
OUTPUTS: dict[int, bytes] = {}


def _dump(out: dict) -> bytes:
    return json.dumps(out, sort_keys=True).encode()


def _line(k: int, ok: bool, detail: str) -> None:
    report(f"CRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}")


def _quad(f):
    return integrate.quad(f, 0.0, TWO_PI, epsabs=1e-13, epsrel=1e-13, limit=400)[0]


# -- computations (pure functions of the seed and thread count) --------------------

def criterion_1(threads=1):
    out = {}
    for K in (1.5, 2.0, 5.0):
        r = solve_sync_degree(K)
        q = StationaryProfile.from_coupling(K)
        grid = CircleGrid(1024)
        inv_q = _quad(lambda t: 1.0 / q(t))
        # q' as an element of H_{-1}: its primitive is q itself
        norm = HMinusOneElement(grid, q(grid.nodes)).norm(1.0 / q(grid.nodes))
        out[str(K)] = {"fixed_point": abs(psi_ratio(2 * K * r) - r),
                       "c": abs(c_constant(K) - TWO_PI / inv_q),
                       "D_K": abs(diffusion_coefficient(K) * norm - 1.0)}
    return out


def criterion_2(threads=1):
    K = 2.0
    q = StationaryProfile.from_coupling(K)
    c = c_constant(K)
    grid = CircleGrid(1024)
    a = _quad(lambda t: (1.0 - c / q(t)) ** 2 * q(t))
    b = 1.0 - TWO_PI**2 / _quad(lambda t: 1.0 / q(t))
    n = HMinusOneElement(grid, q(grid.nodes)).norm(1.0 / q(grid.nodes)) ** 2
    return {"quadrature": a, "inverse_integral": b, "norm_squared": n}


def criterion_3(threads=1):
    dec = eigensolve(assemble(2.0, 64))
    grid, q = dec.grid, dec.profile(dec.grid.nodes)
    w = 1.0 / q
    qp = HMinusOneElement(grid, q)
    e0 = dec.element(0)
    stated = asymptotics_report(dec, (8, 12, 16))
    derived = asymptotics_report(dec, (8, 12, 16), constant=potential_mean(2.0, dec.profile.r))
    fp = dec.adjoint_derivative[:, 0]
    return {"lambda_0": float(dec.eigenvalues[0]),
            "lambda_1": float(dec.eigenvalues[1]),
            "alignment": abs(e0.inner(qp, w)) / (e0.norm(w) * qp.norm(w)),
            "l0": index_offset(dec),
            "stated_scaled_residuals": [row["scaled_residual"] for row in stated],
            "derived_scaled_residuals": [row["scaled_residual"] for row in derived],
            "biorthogonality": float(np.max(np.abs(dec.biorthogonality(11) - np.eye(11)))),
            "adjoint_energy": float(grid.integrate(fp * fp * q))}


def criterion_4(threads=1):
    u0 = FourierDensity.from_function(lambda t: (1 + 0.4 * np.cos(2 * t)) / TWO_PI, 64)
    c1 = []
    u = evolve(u0, 2.0, 10.0, callback=lambda t, cc: c1.append(abs(cc[1])))
    theta = np.linspace(0, TWO_PI, 1000, endpoint=False)
    sup_uniform = float(np.max(np.abs(u(theta) - 1 / TWO_PI)))

    res = ex.pde_approach(2.0)
    energies = []
    evolve(FourierDensity.from_function(ex.default_initial_density, 64), 2.0, res.t_end,
           callback=lambda t, cc: energies.append(free_energy(FourierDensity(cc.copy()), 2.0)))
    return {"max_abs_c1_in_U": float(max(c1)), "sup_error_U_t10": sup_uniform,
            "final_distance": res.final_distance, "approach_time": res.approach_time,
            "max_free_energy_increase": float(np.max(np.diff(energies))), "n_steps": len(energies),
            "rate": res.rate, "lambda_1": res.spectral_gap}


def criterion_5(threads=1):
    q = StationaryProfile.from_coupling(2.0, 0.4)
    shape = lambda t: (np.sin(t - 0.2) + 0.5 * np.cos(2 * t + 1.0) + 0.3 * np.sin(3 * t)) / TWO_PI
    errs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        mu = lambda t, e=eps: q(t) + e * shape(t)
        errs.append(abs(project_to_manifold(mu, 2.0, tol=1e-15) - second_order_projection(mu, q)))
    return {"errors": errs, "ratios": [errs[0] / errs[1], errs[1] / errs[2]]}


def criterion_6(threads=1):
    return ex.fluctuation_scaling(2.0, 5.0, (250, 500, 1000, 2000, 4000), n_paths=20, seed=SEED,
                                  threads=threads).to_dict()


def criterion_7(threads=1):
    return ex.phase_diffusion_experiment(2.0, 1000, tau_f=1.0, dt=1e-3, n_paths=100, seed=SEED,
                                         threads=threads).to_dict()


COMPUTE = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4,
           5: criterion_5, 6: criterion_6, 7: criterion_7}


def _output(k):
    if k not in OUTPUTS:
        OUTPUTS[k] = _dump(COMPUTE[k]())
    return json.loads(OUTPUTS[k])


# -- criteria -----------------------------------------------------------------------

def test_criterion_1_fixed_point_and_constants():
    out = _output(1)
    worst = {key: max(v[key] for v in out.values()) for key in ("fixed_point", "c", "D_K")}
    ok = worst["fixed_point"] < 1e-10 and worst["c"] < 1e-10 and worst["D_K"] < 1e-6
    _line(1, ok, "K in {1.5, 2, 5}: max |Psi(2Kr) - r| = %.1e, |c - 2pi/int 1/q| = %.1e, "
          "|D_K ||q'|| - 1| = %.1e" % (worst["fixed_point"], worst["c"], worst["D_K"]))
    assert ok


def test_criterion_2_triple_identity():
    out = _output(2)
    vals = list(out.values())
    spread = max(vals) - min(vals)
    ok = spread < 1e-8
    _line(2, ok, "K = 2: three expressions = %.15f, max pairwise gap %.1e" % (vals[0], spread))
    assert ok


def _asymptotic_ok(scaled):
    return all(s <= scaled[0] for s in scaled[1:])


def test_criterion_3_spectrum():
    out = _output(3)
    core = {"lambda_0 < 1e-8": abs(out["lambda_0"]) < 1e-8,
            "alignment > 1 - 1e-6": out["alignment"] > 1 - 1e-6,
            "lambda_1 > 0": out["lambda_1"] > 0,
            "biorthogonality 1e-6": out["biorthogonality"] < 1e-6,
            "adjoint energy 1e-6": abs(out["adjoint_energy"] - 1.0) < 1e-6}
    stated = _asymptotic_ok(out["stated_scaled_residuals"])
    derived = _asymptotic_ok(out["derived_scaled_residuals"])
    failed = [name for name, ok in core.items() if not ok]
    detail = ("lambda_1 = %.6f, |cos| = 1 - %.1e, biorth %.1e, asymptotic p*residual with "
              "p^2/2 - (Kr)^2/8: %s" % (out["lambda_1"], 1 - out["alignment"], out["biorthogonality"],
                                          ", ".join("%.2f" % s for s in out["stated_scaled_residuals"])))
    if failed:
        detail += "; failed: " + ", ".join(failed)
    _line(3, not failed and stated, detail)
    report("CRITERION 3 (constant +(Kr)^2/4 instead) %s: p*residual %s"
           % ("PASS" if derived else "FAIL", ", ".join("%.2e" % s for s in out["derived_scaled_residuals"])))
    assert not failed
    assert derived
    assert out["l0"] == -2


@pytest.mark.xfail(strict=True, reason="with the constant -(Kr)^2/8 the residual stays near 1.04, "
                                       "so p*residual grows with p")
def test_criterion_3_asymptotics_with_stated_constant():
    assert _asymptotic_ok(_output(3)["stated_scaled_residuals"])


def test_criterion_4_pde_dynamics():
    out = _output(4)
    checks = {"c1 stays 0 in U": out["max_abs_c1_in_U"] < 1e-12,
              "U -> uniform by t = 10": out["sup_error_U_t10"] < 1e-6,
              "generic reaches M": out["final_distance"] < 1e-6,
              "free energy monotone": out["max_free_energy_increase"] <= 1e-10,
              "rate vs lambda_1": abs(out["rate"] / out["lambda_1"] - 1) < 0.05}
    ok = all(checks.values())
    _line(4, ok, "|c1| <= %.1e, sup error %.1e at t = 10, dist %.1e (below 1e-6 at t = %.1f), "
          "max dF = %.1e over %d steps, rate %.4f vs lambda_1 %.4f"
          % (out["max_abs_c1_in_U"], out["sup_error_U_t10"], out["final_distance"], out["approach_time"],
             out["max_free_energy_increase"], out["n_steps"], out["rate"], out["lambda_1"]))
    assert ok, [k for k, v in checks.items() if not v]


def test_criterion_5_projection_expansion():
    out = _output(5)
    ok = all(6 <= r <= 10 for r in out["ratios"])
    _line(5, ok, "error ratios on halving eps: %s" % ", ".join("%.3f" % r for r in out["ratios"]))
    assert ok


def test_criterion_6_fluctuation_scaling():
    out = _output(6)
    ok = abs(out["slope"] + 0.5) <= 0.1
    _line(6, ok, "log-log slope %.4f over N = %s" % (out["slope"], out["N_values"]))
    assert ok


def test_criterion_7_phase_diffusion():
    out = _output(7)
    D_hat, target, se = out["D_hat"], out["target"], out["stderr"]
    checks = {"D_hat": abs(D_hat - target) <= max(3 * se, 0.15 * target),
              "drift": abs(out["drift"]) <= 3 * out["drift_stderr"],
              "R^2": out["r_squared"] >= 0.95}
    ok = all(checks.values())
    _line(7, ok, "D_hat = %.4f +- %.4f vs D_K = %.4f, drift %.4f +- %.4f, R^2 = %.4f, excluded %d"
          % (D_hat, se, target, out["drift"], out["drift_stderr"], out["r_squared"], out["excluded_paths"]))
    assert ok, [k for k, v in checks.items() if not v]


def test_criterion_8_determinism():
    # deterministic criteria: a plain rerun and a rerun with another thread count;
    # the Monte Carlo criteria: one rerun that changes the thread count
    mismatches = []
    for k in COMPUTE:
        first = OUTPUTS.get(k) or _dump(COMPUTE[k]())
        reruns = [COMPUTE[k](threads=2)] if k in (6, 7) else [COMPUTE[k](), COMPUTE[k](threads=2)]
        if any(_dump(out) != first for out in reruns):
            mismatches.append(k)
    ok = not mismatches
    _line(8, ok, "outputs of criteria 1-7 byte-identical on rerun" + ("" if ok else f"; differ: {mismatches}"))
    assert ok
