"""Batch runner: ``jcberry <experiment> [--config PATH] [--seed N] [--out DIR] ...``.

Configuration is a flat ``key = value`` file with ``#`` comments.  All
durations and rates are in units of the coupling ``lambda`` (``T_lambda`` is
``lambda T``, ``gamma_T`` is ``gamma T``, ...).  Exit codes: 0 success, 2
invalid input, 3 numerical-invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import dissipation, geometry, hilbert, model, noise, propagator, protocols
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    JCBerryError,
    MissingKey,
    NonFinite,
    NonPhysicalState,
    NormalizationError,
    OpenPath,
    OrthogonalStates,
    ParseError,
    RatioMismatch,
    StepTooLarge,
    TruncationError,
    UnknownKey,
    UnknownLabel,
)

EXPERIMENTS = ("ramsey", "ramsey-echo", "berry-path", "gate", "dissipation", "noise-mc", "fringe-scan", "dump")
NUMERICAL_ERRORS = (NonPhysicalState, NonFinite, TruncationError, StepTooLarge, NormalizationError,
                    OrthogonalStates, OpenPath, FloatingPointError, np.linalg.LinAlgError)
VALIDATION_ERRORS = (ParseError, ValueError, DimensionMismatch, RatioMismatch, UnknownLabel, BudgetExceeded)


@dataclass
class RunConfig:
    experiment: str | None = None
    r: float = 1 / math.sqrt(2)
    T_lambda: float = 20.0
    steps: int | None = None
    gamma_T: float = 0.0
    kappa_g_T: float = 0.0
    kappa_f_T: float = 0.0
    kappa_e_T: float = 0.0
    g_to_f_fraction: float = 1.0
    kicks: str | None = None
    M: int = 50
    initial_field: str = "dark"
    n_photon: int = 1
    nbar: float = 0.5
    fock_dim: int | None = None
    offsets: int = 16
    r_values: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    lambdas: tuple[float, ...] = (1.0, 1.0)
    deltas: tuple[float, ...] | None = None
    sigma_Omega: float = 0.02
    Gamma_Omega_T: float = 10.0
    sigma_phi: float = 0.0
    Gamma_phi_T: float = 10.0
    n_traj: int = 10000
    noise_steps: int = 2000
    stationary: bool = True
    c1: float = 1 / math.sqrt(2)
    lambda_hz: float | None = None
    seed: int = 0
    workers: int | None = None
    dump: str = "hamiltonian"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @property
    def T(self) -> float:
        return self.T_lambda

    def rates(self) -> propagator.DissipationRates:
        return propagator.DissipationRates.from_products(
            self.T, self.gamma_T, self.kappa_g_T, self.kappa_f_T, self.g_to_f_fraction, self.kappa_e_T
        )


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_NONNEG = {"gamma_T", "kappa_g_T", "kappa_f_T", "kappa_e_T", "sigma_Omega", "sigma_phi", "nbar", "r"}
_POSITIVE = {"T_lambda", "Gamma_Omega_T", "Gamma_phi_T", "lambda_hz"}
_BOOL = {"stationary"}
_INT = {"steps", "M", "n_photon", "fock_dim", "offsets", "n_traj", "noise_steps", "seed", "workers"}
_FLOAT_LIST = {"r_values", "lambdas", "deltas"}
_STR = {"experiment", "kicks", "initial_field", "dump"}


def _convert(key: str, raw: str, line: int):
    try:
        if raw.lower() in ("none", "") and key in ("steps", "fock_dim", "deltas", "lambda_hz", "kicks", "workers"):
            return None
        if key in _BOOL:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if key in _INT:
            val = int(raw)
        elif key in _FLOAT_LIST:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        elif key in _STR:
            val = raw
        else:
            val = float(raw)
    except ValueError:
        raise ParseError(f"cannot parse {key} = {raw!r}", line) from None
    if key in _NONNEG and val < 0:
        raise ParseError(f"{key} must be non-negative, got {raw}", line)
    if key in _POSITIVE and not val > 0:
        raise ParseError(f"{key} must be positive, got {raw}", line)
    if key in ("steps", "M", "offsets", "n_traj", "noise_steps", "fock_dim", "workers") and val < 1:
        raise ParseError(f"{key} must be at least 1, got {raw}", line)
    if key == "experiment" and val not in EXPERIMENTS:
        raise ParseError(f"unknown experiment {val!r}", line)
    if key == "g_to_f_fraction" and not 0 <= val <= 1:
        raise ParseError("g_to_f_fraction must lie in [0, 1]", line)
    return val


def parse_config(text: str, experiment: str | None = None, require_experiment: bool = True) -> RunConfig:
    """Parse flat ``key = value`` text; ``experiment`` overrides any value in the text."""
    values = {}
    for i, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", i)
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELDS:
            raise UnknownKey(f"unknown key {key!r}", i)
        values[key] = _convert(key, raw, i)
    if experiment is not None:
        values["experiment"] = _convert("experiment", experiment, 0)
    if require_experiment and values.get("experiment") is None:
        raise MissingKey("no experiment given (config key 'experiment' or subcommand)", 0)
    return RunConfig(**values)


def config_from_dict(d: dict) -> RunConfig:
    vals = {}
    for k, v in d.items():
        if k not in _FIELDS:
            raise UnknownKey(f"unknown key {k!r}", 0)
        vals[k] = tuple(v) if isinstance(v, list) else v
    return RunConfig(**vals)


# --- experiments ----------------------------------------------------------------

def _steps(cfg: RunConfig) -> int:
    return cfg.steps if cfg.steps is not None else model.default_steps(cfg.T, 1.0)


def _schedule(cfg: RunConfig, r: float | None = None, kicks: str | None = None) -> model.SweepSchedule:
    k = kicks or cfg.kicks or "none"
    return model.circle_sweep(cfg.r if r is None else r, cfg.T, steps=_steps(cfg), kicks=k, M=cfg.M)


def _initial_field(cfg: RunConfig) -> protocols.InitialField:
    if cfg.initial_field == "dark":
        return protocols.InitialField("dark")
    if cfg.initial_field == "displaced-number":
        return protocols.InitialField("displaced-number", n=cfg.n_photon)
    if cfg.initial_field == "thermal":
        return protocols.InitialField("thermal", nbar=cfg.nbar)
    raise ValueError(f"unknown initial_field {cfg.initial_field!r}")


def _ramsey_cfg(cfg: RunConfig, r: float | None = None, kicks: str | None = None) -> protocols.RamseyConfig:
    rates = cfg.rates()
    return protocols.RamseyConfig(
        schedule=_schedule(cfg, r, kicks),
        initial_field=_initial_field(cfg),
        rates=None if rates.is_zero else rates,
        fock_dim=cfg.fock_dim,
        offsets=cfg.offsets,
    )


def _check_probabilities(res: protocols.RamseyResult):
    for p in (res.Pg, res.Pf):
        if not -1e-9 <= p <= 1 + 1e-9:
            raise NonPhysicalState(f"probability {p!r} outside [0, 1]")


def _dark_path_report(cfg: RunConfig, fringe: float | None = None):
    sch = _schedule(cfg, kicks="none")
    N = cfg.fock_dim or hilbert.fock_dim_for(cfg.r)
    system = hilbert.System.single(N)
    psi0 = model.register_dark_state(system, "g", -cfg.r)
    res = propagator.evolve_unitary(sch, model.ModelParams(), psi0, system)
    rep = geometry.phase_report(
        geometry.PhaseSpacePath(res.alpha, closed=False),
        overlaps=res.overlaps,
        fringe_fit=fringe,
        analytic_reference=-2 * math.pi * cfg.r**2,
    )
    return res, rep


def _write(out: Path, name: str, text: str, written: dict):
    p = out / name
    p.write_text(text, encoding="utf-8")
    written[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()


def _fringe_rows_csv(res: protocols.RamseyResult, atom_pf: list[float]) -> str:
    lines = ["control,Pg,Pf,beta_fit,visibility"]
    for chi, pg, pf in zip(res.offsets, res.Pg_scan, atom_pf):
        lines.append(f"{float(chi)!r},{float(pg)!r},{float(pf)!r},{res.beta!r},{res.visibility!r}")
    return "\n".join(lines) + "\n"


def _exp_ramsey(cfg: RunConfig, out: Path, written: dict, echo: bool):
    kicks = cfg.kicks or ("midpoint" if echo else "none")
    rc = _ramsey_cfg(cfg, kicks=kicks)
    res = protocols.run_ramsey_echo(rc) if echo else protocols.run_ramsey(rc)
    _check_probabilities(res)
    pf_scan = [1.0 - pg - (1.0 - res.Pg - res.Pf) for pg in res.Pg_scan]
    _write(out, "fringe.csv", _fringe_rows_csv(res, pf_scan), written)
    _, rep = _dark_path_report(cfg, fringe=res.beta)
    _write(out, "phase_report.json", rep.to_json(), written)
    _write(out, "ramsey.json", json.dumps(res.summary(), indent=2), written)


def _exp_berry_path(cfg: RunConfig, out: Path, written: dict):
    res, rep = _dark_path_report(cfg)
    _write(out, "trajectory.csv", res.trajectory_csv(), written)
    _write(out, "phase_report.json", rep.to_json(), written)


def _exp_fringe_scan(cfg: RunConfig, out: Path, written: dict):
    rows = [(r, protocols.run_ramsey(_ramsey_cfg(cfg, r=r))) for r in cfg.r_values]
    for _, res in rows:
        _check_probabilities(res)
    _write(out, "fringe_scan.csv", protocols.fringe_scan_csv(rows), written)


def _exp_gate(cfg: RunConfig, out: Path, written: dict):
    lam0 = cfg.lambdas[0]
    sch = model.circle_sweep(cfg.r, cfg.T, steps=_steps(cfg), kicks=cfg.kicks or "none", M=cfg.M, lam=lam0)
    spec = protocols.GateSpec(sch, tuple(cfg.lambdas), cfg.deltas, cfg.fock_dim)
    g = protocols.simulate_gate(spec)
    ideal = protocols.ideal_gate(spec.n_qubits, -2 * math.pi * cfg.r**2)
    _write(out, "gate.json", g.to_json(ideal), written)


def _exp_dissipation(cfg: RunConfig, out: Path, written: dict):
    _write(out, "closed_form.json", dissipation.report_json(cfg.r, 2 * math.pi / cfg.T, cfg.T, cfg.rates()), written)


def _noise_params(cfg: RunConfig):
    pO = noise.NoiseProcessParams(cfg.Gamma_Omega_T / cfg.T, cfg.sigma_Omega**2)
    pP = noise.NoiseProcessParams(cfg.Gamma_phi_T / cfg.T, cfg.sigma_phi**2)
    return pO, pP


def _exp_noise(cfg: RunConfig, out: Path, written: dict):
    pO, pP = _noise_params(cfg)
    c2 = math.sqrt(max(0.0, 1 - cfg.c1**2))
    stats, betas = noise.mc_phase_statistics(
        pO, pP, cfg.r, cfg.T, steps=cfg.noise_steps, n_traj=cfg.n_traj, seed=cfg.seed,
        stationary=cfg.stationary, workers=cfg.workers, c1=cfg.c1, c2=c2, return_samples=True,
    )
    _write(out, "noise_samples.csv", noise.samples_csv(betas), written)
    _write(out, "noise_stats.json", stats.to_json(), written)


def _exp_dump(cfg: RunConfig, out: Path, written: dict):
    N = cfg.fock_dim or hilbert.fock_dim_for(cfg.r)
    system = hilbert.System.single(N)
    if cfg.dump == "hamiltonian":
        H = model.system_hamiltonian(system, model.ModelParams(), model.PumpParams(cfg.r, 0.0))
        _write(out, "hamiltonian.csv", hilbert.operator_to_csv(H), written)
    elif cfg.dump == "dark_state":
        _write(out, "dark_state.csv", hilbert.state_to_csv(model.register_dark_state(system, "g", -cfg.r)), written)
    elif cfg.dump == "schedule":
        _write(out, "schedule.csv", _schedule(cfg).to_csv(), written)
    else:
        raise ValueError(f"unknown dump target {cfg.dump!r}")


def _units(cfg: RunConfig) -> dict:
    u = {"time": "1/lambda", "rates": "products with T", "Omega": "lambda", "sigma_Omega": "lambda"}
    if cfg.lambda_hz is not None:
        lam = 2 * math.pi * cfg.lambda_hz
        u["lambda_rad_per_s"] = lam
        u["T_seconds"] = cfg.T / lam
    return u


def run(cfg: RunConfig, out_dir: str | os.PathLike = "out") -> int:
    """Run one experiment, write its outputs and ``manifest.json``; return an exit code."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, str] = {}
    status, error = 0, None
    try:
        exp = cfg.experiment
        if exp in ("ramsey", "ramsey-echo"):
            _exp_ramsey(cfg, out, written, echo=exp == "ramsey-echo")
        elif exp == "berry-path":
            _exp_berry_path(cfg, out, written)
        elif exp == "fringe-scan":
            _exp_fringe_scan(cfg, out, written)
        elif exp == "gate":
            _exp_gate(cfg, out, written)
        elif exp == "dissipation":
            _exp_dissipation(cfg, out, written)
        elif exp == "noise-mc":
            _exp_noise(cfg, out, written)
        elif exp == "dump":
            _exp_dump(cfg, out, written)
        else:
            raise MissingKey(f"no runnable experiment {exp!r}", 0)
    except NUMERICAL_ERRORS as e:
        status, error = 3, f"{type(e).__name__}: {e}"
    except VALIDATION_ERRORS as e:
        status, error = 2, f"{type(e).__name__}: {e}"
    except JCBerryError as e:
        status, error = 3, f"{type(e).__name__}: {e}"
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "units": _units(cfg),
        "versions": {"jcberry": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "outputs": written,
        "exit_code": status,
        "error": error,
        "wall_time_s": time.perf_counter() - t0,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    if error:
        print(error, file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jcberry", description=__doc__.splitlines()[0])
    p.add_argument("experiment", nargs="?", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--manifest", help="rerun the configuration stored in a manifest.json")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="out")
    p.add_argument("--workers", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.manifest:
            data = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            cfg = config_from_dict(data["config"])
            if args.experiment:
                cfg.experiment = args.experiment
        else:
            text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
            text += "\n" + "\n".join(args.set)
            cfg = parse_config(text, args.experiment)
        for key in ("seed", "workers", "steps"):
            val = getattr(args, key)
            if val is not None:
                if val < (0 if key == "seed" else 1):
                    raise ParseError(f"--{key} out of range: {val}", 0)
                setattr(cfg, key, val)
    except (ParseError, OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
