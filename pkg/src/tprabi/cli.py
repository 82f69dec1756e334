"""Command-line front end.

    tprabi spectrum --omega0 2 --epsilon-list 0.4,0.49,0.499 --levels 3 --out spec.csv
    tprabi collapse-solve --omega0 1.2 --out states.csv
    tprabi wavefunction --omega0 4 --node-count 0 --out ground.csv
    tprabi threshold --k 1 --out thr.json
    tprabi verify --out report.json

Settings can also come from an INI file (``--config``) with one section per
command plus an optional [common] section; command-line flags win.

Exit codes: 0 success, 1 I/O error, 2 invalid configuration,
3 numeric failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, collapse, fock
from .errors import ConventionError, InvalidArgument, NumericFailure, RabiError
from .model import ModelParams, SpinorGridFunction

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3, 4
MAX_ROWS = 10_000
COMMANDS = ("spectrum", "collapse-solve", "wavefunction", "threshold", "verify")


def fmt(value) -> str:
    """Fixed 17-significant-digit float formatting (round-trips exactly)."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


@dataclass
class RunConfig:
    """Everything a command needs; round-trips through the INI format."""

    omega: float = 1.0
    omega0: float = 1.0
    epsilon: list[float] = field(default_factory=lambda: [0.5])
    cutoff: int = fock.DEFAULT_CUTOFF
    levels: int | None = None
    step: float | None = None
    xmax_policy: str = "auto"
    resolution: float = collapse.DEFAULT_RESOLUTION
    tolerance: float = 1e-3
    k: int = 1
    node_count: int = 0
    allow_beyond: bool = False
    out: str | None = None

    def validate(self):
        if not (self.omega > 0 and self.omega0 >= 0):
            raise InvalidArgument("need omega > 0 and omega0 >= 0")
        if not self.epsilon or any(e < 0 for e in self.epsilon):
            raise InvalidArgument("epsilon values must be non-negative")
        for name in ("resolution", "tolerance"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if self.step is not None and not self.step > 0:
            raise InvalidArgument("step must be positive")
        if self.cutoff < 2:
            raise InvalidArgument("cutoff must be at least 2")
        if self.levels is not None and self.levels < 1:
            raise InvalidArgument("levels must be at least 1")
        self.x_max()
        return self

    def x_max(self) -> float | None:
        if self.xmax_policy == "auto":
            return None
        try:
            value = float(self.xmax_policy)
        except ValueError:
            raise InvalidArgument(f"xmax-policy must be 'auto' or a number, got {self.xmax_policy!r}")
        if not value > 0:
            raise InvalidArgument("x_max must be positive")
        return value

    def to_section(self) -> dict[str, str]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if f.name == "epsilon":
                out[f.name] = ",".join(fmt(e) for e in value)
            elif isinstance(value, str):
                out[f.name] = value
            else:
                out[f.name] = fmt(value)
        return out

    @classmethod
    def from_section(cls, section) -> "RunConfig":
        cfg = cls()
        cfg.update({key.replace("-", "_"): value for key, value in section.items()})
        return cfg

    def update(self, values: dict):
        """Set fields from strings or typed values, ignoring None."""
        names = {f.name for f in dataclasses.fields(self)}
        for key, value in values.items():
            if value is None:
                continue
            if key not in names:
                raise InvalidArgument(f"unknown setting {key!r}")
            setattr(self, key, _coerce(key, value))
        return self

    def dumps(self, command: str) -> str:
        parser = configparser.ConfigParser()
        parser[command] = self.to_section()
        lines = []
        for name, section in parser.items():
            if name == "DEFAULT":
                continue
            lines.append(f"[{name}]")
            lines.extend(f"{k} = {v}" for k, v in section.items())
        return "\n".join(lines) + "\n"


def _coerce(key, value):
    if not isinstance(value, str):
        return list(value) if key == "epsilon" and not isinstance(value, float) else value
    try:
        if key == "epsilon":
            return [float(v) for v in value.split(",") if v.strip()]
        if key in ("cutoff", "levels", "k", "node_count"):
            return int(value)
        if key == "allow_beyond":
            return value.strip().lower() in ("1", "true", "yes", "on")
        if key in ("xmax_policy", "out"):
            return value.strip()
        return float(value)
    except ValueError:
        raise InvalidArgument(f"bad value for {key}: {value!r}")


def load_config(path: str | None, command: str) -> RunConfig:
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise InvalidArgument(f"cannot parse {path}: {exc}")
    for name in ("common", command):
        if parser.has_section(name):
            cfg.update({k.replace("-", "_"): v for k, v in parser.items(name)})
    return cfg


# ---------------------------------------------------------------------------
# output helpers

def _open_out(path: str | None):
    if path is None:
        return sys.stdout
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def write_csv(path: str | None, header, rows):
    fh = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj)) if math.isfinite(obj) else str(obj)
    return obj


def write_json(path: str | None, data: dict):
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)


def sidecar_path(path: str) -> str:
    return str(Path(path).with_suffix(".json"))


# ---------------------------------------------------------------------------
# commands

def cmd_spectrum(cfg: RunConfig) -> int:
    levels = cfg.levels or 5
    rows = []
    for eps in sorted(cfg.epsilon):
        params = ModelParams(cfg.omega, cfg.omega0, eps)
        if params.is_collapse_point() or params.is_beyond_collapse():
            if not cfg.allow_beyond:
                raise InvalidArgument(
                    f"epsilon={eps} is not below omega/2; pass --allow-beyond to diagonalize anyway")
            print(f"warning: epsilon={eps} >= omega/2: the truncated spectrum does not converge "
                  "and all levels are flagged unconverged", file=sys.stderr)
            result = fock.spectrum(params, levels, cfg.cutoff, check_convergence=False)
            converged = np.zeros(levels, dtype=bool)
        else:
            result = fock.spectrum(params, levels, cfg.cutoff)
            converged = result.converged
        for i, (E, res) in enumerate(zip(result.eigenvalues, result.residual_norms)):
            rows.append((eps, i, E, bool(converged[i]), res))
    write_csv(cfg.out, ["epsilon", "index", "energy", "converged", "residual"], rows)
    return EXIT_OK


def _collapse_params(cfg: RunConfig) -> ModelParams:
    return ModelParams.at_collapse(cfg.omega0, cfg.omega)


def cmd_collapse_solve(cfg: RunConfig) -> int:
    params = _collapse_params(cfg)
    states = collapse.shoot_bound_states(params, cfg.levels, cfg.step, cfg.x_max(),
                                         cfg.resolution)
    rows = [(params.omega0, i, s.node_count, s.E, s.e_tilde.e_tilde, s.norm_plus, s.norm_minus)
            for i, s in enumerate(states)]
    write_csv(cfg.out, ["omega0", "state_index", "node_count", "E", "E_tilde", "norm_plus",
                        "norm_minus"], rows)
    return EXIT_OK


def export_grid(spinor: SpinorGridFunction, e_tilde: float) -> SpinorGridFunction:
    """Decimate to at most MAX_ROWS, keeping the core of width sqrt(|E~|) resolved."""
    core = max(math.sqrt(abs(e_tilde)) / 4, spinor.h)
    return spinor.decimated(MAX_ROWS, core=core)


def cmd_wavefunction(cfg: RunConfig) -> int:
    params = _collapse_params(cfg)
    states = collapse.shoot_bound_states(params, cfg.node_count + 1, cfg.step, cfg.x_max(),
                                         cfg.resolution)
    match = [s for s in states if s.node_count == cfg.node_count]
    if not match:
        raise InvalidArgument(f"no bound state with {cfg.node_count} nodes at omega0={cfg.omega0}")
    state = match[0]
    grid = export_grid(state.wavefunction, state.e_tilde.e_tilde)
    write_csv(cfg.out, ["x", "psi_plus", "psi_minus"],
              zip(grid.x, grid.psi_plus, grid.psi_minus))
    meta = {
        "omega": params.omega, "omega0": params.omega0, "epsilon": params.epsilon,
        "E": state.E, "E_tilde": state.e_tilde.e_tilde, "node_count": state.node_count,
        "norm_plus": state.norm_plus, "norm_minus": state.norm_minus,
        "solver_step": state.h, "x_max": state.x_max, "rows": int(grid.x.size),
        "spacing": "uniform" if grid.x.size == state.wavefunction.x.size else "sinh",
    }
    if cfg.out is not None:
        write_json(sidecar_path(cfg.out), meta)
    return EXIT_OK


def cmd_threshold(cfg: RunConfig) -> int:
    result = collapse.threshold_omega0(cfg.k, cfg.omega, cfg.tolerance, cfg.resolution, cfg.step)
    write_json(cfg.out, {"k": result.k, "omega0_threshold": result.omega0_threshold,
                         "tolerance": result.tolerance,
                         "bracket_history": result.bracket_history,
                         "resolution": cfg.resolution})
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_suite
    report = run_suite(cfg)
    write_json(cfg.out, report)
    return EXIT_OK if report["all_passed"] else EXIT_VERIFY


HANDLERS = {
    "spectrum": cmd_spectrum,
    "collapse-solve": cmd_collapse_solve,
    "wavefunction": cmd_wavefunction,
    "threshold": cmd_threshold,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [common] and per-command sections")
    common.add_argument("--omega", type=float)
    common.add_argument("--omega0", type=float)
    common.add_argument("--epsilon", "--epsilon-list", dest="epsilon",
                        help="coupling, or comma-separated list for sweeps")
    common.add_argument("--cutoff", type=int, help="photon-number cutoff N")
    common.add_argument("--levels", type=int, help="number of levels / states")
    common.add_argument("--step", type=float, help="grid step h")
    common.add_argument("--xmax-policy", dest="xmax_policy",
                        help="'auto' (per-state extent) or a fixed x_max")
    common.add_argument("--resolution", type=float, help="bound-state energy floor |E~|/omega")
    common.add_argument("--tolerance", type=float)
    common.add_argument("--k", type=int, help="excitation (node count) for threshold")
    common.add_argument("--node-count", dest="node_count", type=int)
    common.add_argument("--allow-beyond", dest="allow_beyond", action="store_true", default=None)
    common.add_argument("--out", help="output file (stdout if omitted)")

    parser = argparse.ArgumentParser(prog="tprabi",
                                     description="Two-photon Rabi model spectra and collapse-point bound states")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config, args.command)
    values = {f.name: getattr(args, f.name, None) for f in dataclasses.fields(RunConfig)}
    return cfg.update(values).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return HANDLERS[args.command](cfg)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidArgument, ConventionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RabiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
