"""Command-line entry point.

    morawetz-lab run --preset morawetz --out runs/m1
    morawetz-lab run --config cfg.json --override T_max=10 --override n=2001
    morawetz-lab convergence --preset linear-oracle --levels 3 --out runs/conv
    morawetz-lab sweep --preset decay --vary kappa=0.2,0.8 --out runs/sweep
    morawetz-lab report --out runs/m1

Config files are flat JSON objects whose keys are the fields of
:class:`~morawetz_lab.experiment.RunConfig`; a manifest written by ``run``
is accepted as a config too.  Flags override file keys.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .experiment import (
    PRESETS,
    ConfigError,
    RunConfig,
    convergence_study,
    preset_config,
    run_experiment,
    sweep,
    write_sweep_table,
    _jsonable,
)
from .field import FieldError
from .ledger import LedgerError
from .stepper import StepperError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_COMPUTE = 3
EXIT_CHECK_FAILED = 4

logger = logging.getLogger("morawetz_lab")


def parse_value(text: str) -> Any:
    """JSON literal if it parses (numbers, true/false, null, lists), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(item: str) -> tuple:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    key, value = item.split("=", 1)
    return key.strip(), parse_value(value.strip())


def load_config_file(path: Path) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "schema_version" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return data


def resolve_config(args) -> RunConfig:
    base: Dict[str, Any] = {}
    if args.config:
        base.update(load_config_file(args.config))
    preset = args.preset or base.get("preset")
    d = dict(PRESETS[preset]) if preset in PRESETS else {}
    if args.preset and args.preset not in PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}")
    d.update(base)
    if preset:
        d["preset"] = preset
    for item in args.override or ():
        k, v = parse_override(item)
        d[k] = v
    if getattr(args, "out", None):
        d["out_dir"] = str(args.out)
    return RunConfig.from_dict(d)


def _print_checks(report: Dict[str, Any]) -> bool:
    ok = True
    for name, chk in sorted(report.get("checks", {}).items()):
        status = "PASS" if chk["pass"] else "FAIL"
        ok &= bool(chk["pass"])
        print(f"{status}  {name:26s} value={chk['value']}  tol={chk['tol']}")
    return ok


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    manifest = run_experiment(cfg)
    print(f"{cfg.preset}: {manifest.steps} steps in {manifest.wall_seconds:.1f}s")
    ok = _print_checks(manifest.report)
    if cfg.out_dir:
        print(f"wrote {cfg.out_dir}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_convergence(args) -> int:
    cfg = resolve_config(args)
    res = convergence_study(cfg, args.levels)
    for name, row in res["table"].items():
        slopes = ", ".join(f"{s:.3f}" for s in row["slopes"])
        flag = "" if row["monotone"] else "  [non-monotone]"
        print(f"{name:34s} slopes: {slopes}{flag}")
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.json").write_text(
            json.dumps(_jsonable({"config": cfg.to_dict(), **res}), indent=2, sort_keys=True) + "\n"
        )
    return EXIT_OK


def _expand_vary(items: Sequence[str]) -> List[Dict[str, Any]]:
    combos: List[Dict[str, Any]] = [{}]
    for item in items or ():
        key, _, values = item.partition("=")
        if not values:
            raise ConfigError(f"--vary {item!r} is not KEY=V1,V2,...")
        vals = [parse_value(v) for v in values.split(",")]
        combos = [{**c, key.strip(): v} for c in combos for v in vals]
    return combos


def cmd_sweep(args) -> int:
    base = resolve_config(args)
    configs: List[RunConfig] = []
    if args.config and isinstance(json.loads(Path(args.config).read_text()), list):
        configs = [RunConfig.from_dict({**base.to_dict(), **d}) for d in json.loads(Path(args.config).read_text())]
    for combo in _expand_vary(args.vary):
        configs.append(base.with_overrides(**combo))
    out = Path(base.out_dir) if base.out_dir else None
    if out is not None:
        configs = [c.with_overrides(out_dir=str(out / f"run{i:03d}")) for i, c in enumerate(configs)]
    table = sweep(configs, max_workers=args.workers)
    cols = table["columns"]
    print("  ".join(cols))
    for row in table["rows"]:
        print("  ".join(str(row.get(c, "")) for c in cols) + (f"  {row['error']}" if "error" in row else ""))
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_sweep_table(table, out / "sweep.csv")
        (out / "sweep.json").write_text(
            json.dumps(_jsonable({k: table[k] for k in ("columns", "rows", "partial")}), indent=2) + "\n"
        )
    return EXIT_COMPUTE if table["partial"] else EXIT_OK


def cmd_report(args) -> int:
    if not args.out:
        raise ConfigError("report needs --out DIR pointing at a finished run")
    path = Path(args.out) / "report.json"
    try:
        report = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    ok = _print_checks(report)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morawetz-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, levels=False):
        p.add_argument("--config", type=Path, help="JSON config (or manifest) file")
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--override", action="append", metavar="KEY=VALUE", help="override a config key")
        if levels:
            p.add_argument("--levels", type=int, default=3)

    common(sub.add_parser("run", help="run one experiment"))
    common(sub.add_parser("convergence", help="refinement study"), levels=True)
    sw = sub.add_parser("sweep", help="run several configurations side by side")
    common(sw)
    sw.add_argument("--vary", action="append", metavar="KEY=V1,V2", help="sweep a key over values")
    sw.add_argument("--workers", type=int, default=1)
    rp = sub.add_parser("report", help="print the checks of a finished run")
    rp.add_argument("--out", type=Path, required=True)
    return ap


COMMANDS = {"run": cmd_run, "convergence": cmd_convergence, "sweep": cmd_sweep, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FieldError, TypeError) as exc:
        print(f"error [validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StepperError, LedgerError, FloatingPointError) as exc:
        print(f"error [compute]: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
