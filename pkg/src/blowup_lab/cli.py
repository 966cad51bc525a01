"""Command-line harness: ``blowup-lab {thresholds,criterion,simulate,sweep}``.

An experiment is a single JSON document, for example::

    {
      "params": {"d": 4, "p": 3},
      "profile": {"kind": "truncated_singular", "scale": 2.0, "cap": 10.0},
      "grid": {"r_max": 50, "n_cells": 4096},
      "t_max": 1.0,
      "record_every": 0.001,
      "snapshot_times": [0.001],
      "sweep": {"parameter": "N", "values": [0.5, 0.9, 1.2, 1.6, 2.0]}
    }

Command-line flags override the corresponding config fields.  Exit codes:
0 success, 2 parameter-domain error, 3 numerical failure; errors are also
reported as one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Sequence

from .criteria import (BLOWUP, check_blowup_criterion, encode_number, thresholds,
                       weighted_criterion_bound)
from .errors import DomainError, QuadratureError
from .model import ModelParams, profile_from_dict
from .solver import GridConfig, SimResult, simulate, write_snapshots_csv, write_summary_json

EXIT_OK, EXIT_DOMAIN, EXIT_NUMERICAL = 0, 2, 3

# sweep shorthands -> dotted config paths
SWEEP_ALIASES = {
    "N": "profile.scale",
    "scale": "profile.scale",
    "H": "profile.cap",
    "cap": "profile.cap",
    "d": "params.d",
    "p": "params.p",
    "beta": "params.beta",
}

GRID_KEYS = ("r_min", "r_max", "n_cells", "spacing", "symmetric_origin", "inner_boundary")


class NumericalFailure(RuntimeError):
    """A run that ended in a step failure."""


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise DomainError("config must be a JSON object")
    cfg.setdefault("_base_dir", str(Path(path).resolve().parent))
    return cfg


def apply_overrides(cfg: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    cfg = copy.deepcopy(cfg)
    params = cfg.setdefault("params", {})
    for key in ("d", "p", "beta"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    for key in ("t_max", "T"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "out", None) is not None:
        cfg["outputs"] = args.out
    return cfg


def _params(cfg: Mapping[str, Any]) -> ModelParams:
    params = cfg.get("params", {})
    if "d" not in params or "p" not in params:
        raise DomainError("params.d and params.p are required")
    d = params["d"]
    if isinstance(d, float) and d.is_integer():
        d = int(d)
    if not isinstance(d, int):
        raise DomainError("d must be an integer")
    return ModelParams(d, params["p"])


def _profile(cfg: Mapping[str, Any], params: ModelParams):
    if "profile" not in cfg:
        raise DomainError("config has no profile")
    base = cfg.get("_base_dir")
    return profile_from_dict(cfg["profile"], params, Path(base) if base else None)


def _grid(cfg: Mapping[str, Any]) -> GridConfig:
    raw = cfg.get("grid", {})
    unknown = set(raw) - set(GRID_KEYS)
    if unknown:
        raise DomainError(f"unknown grid fields {sorted(unknown)}")
    return GridConfig(**raw)


def _set_path(cfg: dict[str, Any], dotted: str, value: Any) -> None:
    node = cfg
    *head, last = dotted.split(".")
    for key in head:
        node = node.setdefault(key, {})
    node[last] = value


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(record: Mapping[str, Any], fmt: str, out_dir: Path | None, stem: str) -> None:
    if fmt == "csv":
        text = _csv_text(list(record), [[_cell(v) for v in record.values()]])
    else:
        text = json.dumps(record, indent=2) + "\n"
    sys.stdout.write(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"{stem}.{fmt}").write_text(text)


def _cell(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return v


def _out_dir(cfg: Mapping[str, Any]) -> Path | None:
    out = cfg.get("outputs")
    return Path(out) if out else None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_thresholds(cfg: Mapping[str, Any], fmt: str = "json") -> dict[str, Any]:
    params = _params(cfg)
    params.require_singular()
    record = {"d": params.d, "p": params.p, **thresholds(params.d, params.p).to_dict()}
    _emit(record, fmt, _out_dir(cfg), "thresholds")
    return record


def cmd_criterion(cfg: Mapping[str, Any], fmt: str = "json") -> dict[str, Any]:
    params = _params(cfg)
    record: dict[str, Any] = {"d": params.d, "p": params.p}
    if "profile" in cfg:
        record.update(check_blowup_criterion(_profile(cfg, params), params).to_dict())
    beta = cfg.get("params", {}).get("beta")
    if beta is not None:
        T = float(cfg.get("T", 1.0))
        record.update(beta=beta, T=T,
                      weighted_criterion_bound=encode_number(
                          weighted_criterion_bound(params.d, params.p, float(beta), T)))
    if len(record) == 2:
        raise DomainError("criterion needs a profile or params.beta")
    _emit(record, fmt, _out_dir(cfg), "criterion")
    return record


def _run_simulation(cfg: Mapping[str, Any], T_ref: float | None = None) -> SimResult:
    params = _params(cfg)
    profile = _profile(cfg, params)
    t_max = float(cfg.get("t_max", 1.0))
    far = cfg.get("far_field", 0.0)
    return simulate(
        profile, params, _grid(cfg), t_max,
        float(cfg.get("blowup_sup_threshold", 1e8)),
        record_every=cfg.get("record_every"),
        T_ref=cfg.get("T_ref", T_ref),
        far_field=far,
        snapshot_times=tuple(cfg.get("snapshot_times", ())),
        refine=bool(cfg.get("refine", False)),
        cfl_coeff=float(cfg.get("cfl_coeff", 0.2)),
        safety=float(cfg.get("safety", 0.1)),
    )


def cmd_simulate(cfg: Mapping[str, Any], fmt: str = "json") -> SimResult:
    result = _run_simulation(cfg)
    out_dir = _out_dir(cfg)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_summary_json(result, out_dir / "summary.json")
        result.series.to_csv(out_dir / "series.csv")
        if result.barrier_series is not None:
            (out_dir / "barrier.csv").write_text(
                _csv_text(["t", "barrier_max"], [[repr(float(t)), repr(float(z))]
                                                  for t, z in result.barrier_series]))
        if result.snapshots:
            write_snapshots_csv(result.snapshots, out_dir / "snapshots.csv")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "W", "mass_L1", "sup_norm"])
        for row in zip(result.series.t, result.series.W, result.series.mass_L1,
                       result.series.sup_norm):
            writer.writerow([repr(float(x)) for x in row])
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(result.summary(), indent=2) + "\n")
    if result.outcome.kind == "step_failure":
        raise NumericalFailure(f"step failure at t={result.outcome.time}: {result.outcome.reason}")
    return result


SWEEP_HEADER = ["parameter", "value", "verdict", "margin", "outcome", "time"]


def sweep_cell(cfg: Mapping[str, Any]) -> list[Any]:
    """Criterion plus simulation for one sweep cell; ``time`` is t_blow or the horizon."""
    params = _params(cfg)
    report = check_blowup_criterion(_profile(cfg, params), params)
    T_ref = None
    if report.verdict == BLOWUP and not isinstance(report.blowup_time_bound, str):
        T_ref = 1.1 * report.blowup_time_bound
    result = _run_simulation(cfg, T_ref if T_ref is not None else float(cfg.get("t_max", 1.0)))
    return [report.verdict, report.margin, result.outcome.kind, result.outcome.time]


def cmd_sweep(cfg: Mapping[str, Any], fmt: str = "csv") -> list[list[Any]]:
    spec = cfg.get("sweep")
    if not isinstance(spec, Mapping) or "parameter" not in spec:
        raise DomainError("sweep needs {'parameter': ..., 'values': [...]}")
    name = str(spec["parameter"])
    path = SWEEP_ALIASES.get(name, name)
    values = sorted(spec.get("values", []))
    cells = []
    for v in values:
        cell = copy.deepcopy(dict(cfg))
        _set_path(cell, path, v)
        cells.append(cell)
    workers = int(cfg.get("workers", 1))
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(sweep_cell, cells))
    else:
        results = [sweep_cell(c) for c in cells]
    rows = [[name, v, *res] for v, res in zip(values, results)]
    text_rows = [[_cell(x) for x in row] for row in rows]
    out_dir = _out_dir(cfg)
    if fmt == "json":
        text = json.dumps([dict(zip(SWEEP_HEADER, [encode_number(x) if isinstance(x, float) else x
                                                   for x in row])) for row in rows], indent=2) + "\n"
    else:
        text = _csv_text(SWEEP_HEADER, text_rows)
    sys.stdout.write(text)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"sweep.{fmt}").write_text(text)
    return rows


COMMANDS = {
    "thresholds": cmd_thresholds,
    "criterion": cmd_criterion,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _exponent(text: str):
    """Keep ``3`` and ``7/3`` exact; other inputs become floats."""
    if "/" in text:
        return text
    val = float(text)
    return int(val) if val.is_integer() else val


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--d", type=int, help="space dimension")
    common.add_argument("--p", type=_exponent, help="nonlinearity exponent (e.g. 3 or 7/3)")
    common.add_argument("--beta", type=float, help="weight exponent for |x|^beta u^p")
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--out", help="directory for output files")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--t-max", dest="t_max", type=float, help="simulation horizon")
    common.add_argument("--T", type=float, help="time for the weighted bound")

    parser = argparse.ArgumentParser(prog="blowup-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("thresholds", parents=[common], help="blowup thresholds N and M")
    sub.add_parser("criterion", parents=[common], help="Gaussian-moment blowup criterion")
    sub.add_parser("simulate", parents=[common], help="radial PDE run")
    sub.add_parser("sweep", parents=[common], help="criterion + simulation over a parameter range")
    return parser


def _fail(code: int, kind: str, exc: BaseException) -> int:
    err: dict[str, Any] = {"error": kind, "message": str(exc)}
    if isinstance(exc, QuadratureError):
        err.update(estimate=encode_number(exc.estimate), error_bound=encode_number(exc.error))
    sys.stderr.write(json.dumps(err, ensure_ascii=False) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        COMMANDS[args.command](cfg, fmt)
    except (QuadratureError, NumericalFailure, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical_failure", exc)
    except (DomainError, ValueError, KeyError, TypeError, OSError) as exc:
        return _fail(EXIT_DOMAIN, "domain_error", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
