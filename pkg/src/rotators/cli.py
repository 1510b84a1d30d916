"""Command-line entry point.

Every subcommand reads a plain-text configuration of ``key = value`` lines
(``#`` starts a comment), lets ``--key value`` flags override it, and fills
the rest from defaults.  Scientific outputs (CSV, JSON with sorted keys) are
byte-identical for identical configurations; timestamps only appear in
``manifest.json``.

Errors are reported on stderr as one line ``rotators: error: <kind>: <detail>``
with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import experiments, pde, sde, spectral, stationary
from .experiments import write_json
from .hilbert import CircleGrid

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class ConfigError(ValueError):
    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


def _int_list(text: str) -> list[int]:
    values = [int(v) for v in str(text).replace(",", " ").split()]
    if not values:
        raise ValueError("empty list")
    return values


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("not an unsigned 64-bit integer")
    return v


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable
    default: object = None  # None means required
    help: str = ""

    @property
    def required(self) -> bool:
        return self.default is None


COMMON = (
    Key("seed", _u64, 0, "root seed of all random streams"),
    Key("threads", int, 1, "worker threads (results do not depend on it)"),
)

SCHEMAS: dict[str, tuple[Key, ...]] = {
    "stationary": (
        Key("K", float, help="coupling strength"),
        Key("n_points", int, 512, "grid size of the emitted profile"),
    ),
    "simulate": (
        Key("K", float, help="coupling strength"),
        Key("N", int, 1000, "number of rotators"),
        Key("t_end", float, 10.0, "final time"),
        Key("dt", float, 1e-3, "time step"),
        Key("record_stride", int, 100, "steps between records"),
        Key("initial", str, "quantiles_of_q", "equally_spaced | quantiles_of_q"),
        Key("psi0", float, 0.0, "center (or offset) of the initial configuration"),
    ),
    "pde": (
        Key("K", float, help="coupling strength"),
        Key("M", int, 64, "number of Fourier modes"),
        Key("t_end", float, 30.0, "final time"),
        Key("dt", float, 1e-3, "time step"),
        Key("record_every", int, 100, "steps between records"),
        Key("initial", str, "generic", "generic | uniform | profile"),
    ),
    "spectrum": (
        Key("K", float, help="coupling strength"),
        Key("M", int, 64, "number of Fourier modes per parity"),
        Key("n_eigenfunctions", int, 4, "eigenfunctions written to CSV"),
    ),
    "diffusion": (
        Key("K", float, help="coupling strength"),
        Key("N", int, 1000, "number of rotators"),
        Key("tau_f", float, 1.0, "final rescaled time (time / N)"),
        Key("dt", float, 1e-3, "time step"),
        Key("n_paths", int, 100, "independent paths"),
        Key("burn_in", float, 0.1, "rescaled time discarded before the fit"),
        Key("n_records", int, 100, "records per path"),
        Key("n_bootstrap", int, 1000, "bootstrap resamples for the standard error"),
    ),
    "scaling": (
        Key("K", float, help="coupling strength"),
        Key("t_fixed", float, 5.0, "observation time"),
        Key("N_list", _int_list, (250, 500, 1000, 2000, 4000), "comma separated sizes"),
        Key("n_paths", int, 20, "paths per size"),
        Key("dt", float, 1e-3, "time step"),
    ),
    "emergence": (
        Key("K", float, help="coupling strength"),
        Key("N", int, 500, "number of rotators"),
        Key("n_paths", int, 200, "independent paths"),
        Key("dt", float, 1e-3, "time step"),
        Key("offset", float, 0.0, "rotation of the equally spaced start"),
        Key("n_bins", int, 12, "histogram bins"),
    ),
}


def read_config_file(path) -> dict[str, str]:
    """Parse ``key = value`` lines (no sections) into raw strings."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config-unreadable", f"{path}: {exc.strerror}") from None
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError("config-syntax", " ".join(str(exc).split())) from None
    return dict(parser["config"])


def resolve_config(command: str, file_values: dict[str, str], flag_values: dict[str, object]) -> dict:
    """Merge flag > file > default and validate against the command schema."""
    keys = {k.name: k for k in SCHEMAS[command] + COMMON}
    unknown = sorted(set(file_values) - set(keys))
    if unknown:
        raise ConfigError("unknown-key", ", ".join(unknown))
    resolved = {}
    for name, key in keys.items():
        if flag_values.get(name) is not None:
            raw, origin = flag_values[name], "flag"
        elif name in file_values:
            raw, origin = file_values[name], "file"
        elif not key.required:
            resolved[name] = key.default
            continue
        else:
            raise ConfigError("missing-key", name)
        try:
            resolved[name] = key.parse(raw) if isinstance(raw, str) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError("bad-value", f"{name}={raw!r} ({origin}): {exc}") from None
    if "N_list" in resolved:
        resolved["N_list"] = list(resolved["N_list"])
    return resolved


# -- commands ---------------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def cmd_stationary(cfg: dict, out: Path) -> list[Path]:
    K = cfg["K"]
    grid = CircleGrid(cfg["n_points"])
    if K > 1.0:
        profile = stationary.StationaryProfile.from_coupling(K)
        summary = {"K": K, "r": profile.r, "D_K": stationary.diffusion_coefficient(K),
                   "c": stationary.c_constant(K), "tangent_norm": stationary.tangent_norm(K)}
        q = profile.evaluate(grid.nodes)
    else:
        # only the uniform state exists; c = 1/2pi and the tangent space is trivial
        summary = {"K": K, "r": 0.0, "D_K": None, "c": 1.0 / stationary.TWO_PI, "tangent_norm": 0.0}
        q = np.full(grid.n_points, 1.0 / stationary.TWO_PI)
    for name in ("r", "D_K", "c", "tangent_norm"):
        value = summary[name]
        print(f"{name} = {'undefined' if value is None else repr(value)}")
    _write_csv(out / "q.csv", ["theta", "q"], zip(grid.nodes, q))
    write_json(out / "stationary.json", summary)
    return [out / "q.csv", out / "stationary.json"]


def cmd_simulate(cfg: dict, out: Path) -> list[Path]:
    K, N = cfg["K"], cfg["N"]
    if cfg["initial"] not in ("equally_spaced", "quantiles_of_q"):
        raise ConfigError("bad-value", f"initial={cfg['initial']!r}")
    if cfg["initial"] == "quantiles_of_q":
        initial = sde.sample_initial("quantiles_of_q", N, K=K, psi=cfg["psi0"])
    else:
        initial = sde.sample_initial("equally_spaced", N, psi=cfg["psi0"])
    config = sde.SimConfig(K=K, N=N, t_end=cfg["t_end"], dt=cfg["dt"], seed=cfg["seed"],
                           record_stride=cfg["record_stride"])
    track = sde.run(config, initial)
    track.to_csv(out / "track.csv")
    _write_csv(out / "final_phases.csv", ["phi"], ([p] for p in track.final.phases))
    write_json(out / "simulate.json", {"t": track.final.t, "r_final": float(track.r_values[-1]),
                                       "psi_final": float(track.psi_unwrapped[-1])})
    return [out / "track.csv", out / "final_phases.csv", out / "simulate.json"]


def cmd_pde(cfg: dict, out: Path) -> list[Path]:
    K, M = cfg["K"], cfg["M"]
    if cfg["initial"] == "generic":
        c0 = pde.FourierDensity.from_function(experiments.default_initial_density, M)
    elif cfg["initial"] == "uniform":
        c0 = pde.FourierDensity.uniform(M)
    elif cfg["initial"] == "profile":
        c0 = pde.FourierDensity.from_profile(stationary.StationaryProfile.from_coupling(K), M)
    else:
        raise ConfigError("bad-value", f"initial={cfg['initial']!r}")
    traj = pde.trajectory(c0, K, cfg["t_end"], cfg["dt"], record_every=cfg["record_every"])
    traj.to_csv(out / "trajectory.csv")
    coef = traj.final.coefficients
    _write_csv(out / "final_coefficients.csv", ["k", "re_c", "im_c"],
               ((k, float(z.real), float(z.imag)) for k, z in enumerate(coef)))
    write_json(out / "pde.json", {"t_end": float(traj.times[-1]), "final_distance": float(traj.dist[-1]),
                                  "final_free_energy": float(traj.free_energy[-1]),
                                  "abs_c1": float(abs(coef[1]))})
    return [out / "trajectory.csv", out / "final_coefficients.csv", out / "pde.json"]


def _biorthogonality_error(dec, n):
    B = dec.biorthogonality(min(n, dec.eigenvalues.size))
    return float(np.max(np.abs(B - np.eye(B.shape[0]))))


def cmd_spectrum(cfg: dict, out: Path) -> list[Path]:
    dec = spectral.eigensolve(spectral.assemble(cfg["K"], cfg["M"]))
    l0 = spectral.index_offset(dec)
    spectral.write_spectrum_csv(dec, out / "spectrum.csv", l0=l0)
    n = min(cfg["n_eigenfunctions"], dec.eigenvalues.size)
    spectral.write_eigenfunctions_csv(dec, out / "eigenfunctions.csv", indices=range(n))
    write_json(out / "spectrum.json", {"lambda_0": float(dec.eigenvalues[0]),
                                       "lambda_1": float(dec.eigenvalues[1]), "l0": int(l0),
                                       "biorthogonality_error": _biorthogonality_error(dec, 11)})
    return [out / "spectrum.csv", out / "eigenfunctions.csv", out / "spectrum.json"]


def cmd_diffusion(cfg: dict, out: Path) -> list[Path]:
    est = experiments.phase_diffusion_experiment(
        cfg["K"], cfg["N"], cfg["tau_f"], cfg["dt"], cfg["n_paths"], seed=cfg["seed"],
        threads=cfg["threads"], burn_in=cfg["burn_in"], n_records=cfg["n_records"],
        n_bootstrap=cfg["n_bootstrap"])
    write_json(out / "diffusion.json", est.to_dict())
    est.write_variance_csv(out / "variance.csv")
    return [out / "diffusion.json", out / "variance.csv"]


def cmd_scaling(cfg: dict, out: Path) -> list[Path]:
    res = experiments.fluctuation_scaling(cfg["K"], cfg["t_fixed"], cfg["N_list"], cfg["n_paths"],
                                          seed=cfg["seed"], threads=cfg["threads"], dt=cfg["dt"])
    write_json(out / "scaling.json", res.to_dict())
    return [out / "scaling.json"]


def cmd_emergence(cfg: dict, out: Path) -> list[Path]:
    res = experiments.emergence_from_U(cfg["K"], cfg["N"], cfg["n_paths"], seed=cfg["seed"],
                                       threads=cfg["threads"], dt=cfg["dt"], offset=cfg["offset"],
                                       n_bins=cfg["n_bins"])
    write_json(out / "emergence.json", res.to_dict())
    return [out / "emergence.json"]


COMMANDS = {
    "stationary": cmd_stationary,
    "simulate": cmd_simulate,
    "pde": cmd_pde,
    "spectrum": cmd_spectrum,
    "diffusion": cmd_diffusion,
    "scaling": cmd_scaling,
    "emergence": cmd_emergence,
}


HELP = {
    "stationary": "synchronization degree, D_K, c and the profile q",
    "simulate": "one particle path, track of (t, r_N, Psi_N)",
    "pde": "Fokker-Planck run with distance and free energy",
    "spectrum": "eigenvalues and eigenfunctions of the linearization",
    "diffusion": "phase diffusion estimate against D_K",
    "scaling": "distance to the manifold against N",
    "emergence": "centers selected when leaving the uniform state",
}


# -- plumbing ---------------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotators", description="Mean-field rotator experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--out", metavar="DIR", default=None, help=f"output directory (default results/{name})")
        for key in schema + COMMON:
            default = "required" if key.required else key.default
            # flags stay strings and go through the same parser as file values
            p.add_argument(f"--{key.name}", dest=key.name, default=None, metavar="VALUE",
                           help=f"{key.help} [{default}]")
    return parser


def _fail(kind: str, detail: str, code: int) -> int:
    print(f"rotators: error: {kind}: {detail}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    flags = {k.name: getattr(args, k.name) for k in SCHEMAS[command] + COMMON}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(command, file_values, flags)
    except ConfigError as exc:
        return _fail(exc.kind, exc.detail, EXIT_CONFIG)

    out = Path(args.out or Path("results") / command)
    out.mkdir(parents=True, exist_ok=True)
    started = _now()
    try:
        outputs = COMMANDS[command](cfg, out)
    except ConfigError as exc:
        return _fail(exc.kind, exc.detail, EXIT_CONFIG)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        return _fail(type(exc).__name__, " ".join(str(exc).split()), EXIT_RUNTIME)
    manifest = {
        "command": command,
        "config": cfg,
        "seed": cfg["seed"],
        "version": __version__,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }
    write_json(out / "manifest.json", manifest)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
