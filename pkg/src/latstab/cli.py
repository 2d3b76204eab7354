"""
Command-line front end.

Subcommands ``stability``, ``detscan``, ``converge`` and ``symbol`` read a
flat ``key = value`` configuration (dotted section keys, ``#`` comments),
apply command-line overrides, and write reports into the output directory.

Exit codes: 0 success or overall pass, 1 configuration error, 2 a check
failed, 3 a check could not be resolved.

Numerical libraries are imported only after ``--threads`` has been applied
to the usual BLAS/OpenMP environment variables.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time

__all__ = ["ConfigError", "DEFAULTS", "load_config", "parse_config_text", "build_parser", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_UNRESOLVED = 0, 1, 2, 3

DEFAULTS = {
    "model.name": "harmonic",
    "model.sigma": "",
    "grid.N": "16",
    "scan.M": "1000",
    "scan.tol_annulus": "1e-8",
    "scan.det_threshold": "0",
    "scan.layout": "auto",
    "scan.precision": "mp",
    "convergence.N_list": "8,16,32,64",
    "convergence.load": "0:1,0:1.0; 1:1,1:0.5:0.3",
    "solver.tol": "1e-10",
    "solver.max_iter": "200",
    "solver.method": "direct",
    "solver.nonlinear": "false",
    "symbol.N_list": "8,16,32,64",
    "symbol.k": "1,0; 0,1; 1,1; 2,-1; 1,2; 3,0; -2,3; 2,2; 4,1; 1,-3",
    "output.directory": "out",
    "output.formats": "text,json",
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines; unknown keys and malformed lines are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = (value, f"{source}:{lineno}")
    return out


def _int_list(s: str, where: str) -> list[int]:
    try:
        vals = [int(v) for v in s.replace(" ", "").split(",") if v]
    except ValueError:
        raise ConfigError(f"{where}: expected comma-separated integers, got {s!r}") from None
    if not vals:
        raise ConfigError(f"{where}: list is empty")
    return vals


def _parse_modes(s: str, where: str) -> list:
    modes = []
    for part in (p.strip() for p in s.split(";")):
        if not part:
            continue
        fields = part.split(":")
        if len(fields) not in (3, 4):
            raise ConfigError(f"{where}: load mode {part!r} must be 'comp:k1,k2:amp[:phase]'")
        try:
            comp = int(fields[0])
            k = tuple(int(v) for v in fields[1].split(","))
            amp = float(fields[2])
            phase = float(fields[3]) if len(fields) == 4 else 0.0
        except ValueError:
            raise ConfigError(f"{where}: cannot parse load mode {part!r}") from None
        if comp not in (0, 1) or len(k) != 2:
            raise ConfigError(f"{where}: load mode {part!r} needs component 0/1 and a 2-vector")
        modes.append((comp, k, amp, phase))
    if not modes:
        raise ConfigError(f"{where}: no load modes")
    return modes


def _parse_kvecs(s: str, where: str) -> list:
    out = []
    for part in (p.strip() for p in s.split(";")):
        if part:
            k = _int_list(part, where)
            if len(k) != 2:
                raise ConfigError(f"{where}: wavevector {part!r} must have two entries")
            out.append(tuple(k))
    return out


def _positive(v, where, kind=float):
    try:
        x = kind(v)
    except ValueError:
        raise ConfigError(f"{where}: expected {kind.__name__}, got {v!r}") from None
    if not x > 0:
        raise ConfigError(f"{where}: must be positive, got {v!r}")
    return x


def validate(raw: dict) -> dict:
    """Turn ``{key: (value, where)}`` into a typed configuration."""

    def get(key):
        return raw[key]

    cfg = {}
    name, w = get("model.name")
    if name not in ("harmonic", "lj", "pair"):
        raise ConfigError(f"{w}: model.name must be harmonic, lj or pair")
    cfg["model"] = name
    sig, w = get("model.sigma")
    cfg["sigma"] = _positive(sig, w) if sig else None
    cfg["N"] = _positive(*get("grid.N"), kind=int)
    cfg["M"] = _positive(*get("scan.M"), kind=int)
    if cfg["M"] < 100:
        raise ConfigError(f"{get('scan.M')[1]}: scan.M must be at least 100")
    cfg["tol_annulus"] = _positive(*get("scan.tol_annulus"))
    v, w = get("scan.det_threshold")
    try:
        cfg["det_threshold"] = float(v)
    except ValueError:
        raise ConfigError(f"{w}: expected float, got {v!r}") from None
    if cfg["det_threshold"] < 0:
        raise ConfigError(f"{w}: scan.det_threshold must be nonnegative")
    v, w = get("scan.layout")
    if v not in ("auto", "folded", "example"):
        raise ConfigError(f"{w}: scan.layout must be auto, folded or example")
    cfg["layout"] = v
    v, w = get("scan.precision")
    if v not in ("double", "mp"):
        raise ConfigError(f"{w}: scan.precision must be double or mp")
    cfg["precision"] = v
    v, w = get("convergence.N_list")
    nl = _int_list(v, w)
    for n in nl:
        if n < 8 or n & (n - 1):
            raise ConfigError(f"{w}: each N must be a power of two >= 8, got {n}")
    if any(b <= a for a, b in zip(nl, nl[1:])):
        raise ConfigError(f"{w}: N_list must be strictly increasing")
    cfg["N_list"] = nl
    cfg["load"] = _parse_modes(*get("convergence.load"))
    cfg["tol"] = _positive(*get("solver.tol"))
    cfg["max_iter"] = _positive(*get("solver.max_iter"), kind=int)
    v, w = get("solver.method")
    if v not in ("direct", "gmres"):
        raise ConfigError(f"{w}: solver.method must be direct or gmres")
    cfg["method"] = v
    v, w = get("solver.nonlinear")
    if v.lower() not in ("true", "false"):
        raise ConfigError(f"{w}: solver.nonlinear must be true or false")
    cfg["nonlinear"] = v.lower() == "true"
    v, w = get("symbol.N_list")
    cfg["symbol_N_list"] = [_positive(n, w, int) for n in _int_list(v, w)]
    cfg["symbol_k"] = _parse_kvecs(*get("symbol.k"))
    cfg["out"] = get("output.directory")[0]
    v, w = get("output.formats")
    formats = {f.strip() for f in v.split(",") if f.strip()}
    if not formats or not formats <= {"text", "json"}:
        raise ConfigError(f"{w}: output.formats must list text and/or json")
    cfg["formats"] = sorted(formats)
    return cfg


def load_config(path: str | None, overrides: dict) -> tuple[dict, dict]:
    """Defaults, then the file, then command-line overrides.

    Returns the typed configuration and the canonical string values.
    """
    raw = {k: (v, f"default:{k}") for k, v in DEFAULTS.items()}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        raw.update(parse_config_text(text, path))
    for k, v in overrides.items():
        if k not in DEFAULTS:
            raise ConfigError(f"--set: unknown key {k!r}")
        raw[k] = (str(v), f"--{k}")
    return validate(raw), {k: raw[k][0] for k in sorted(raw)}


# ---------------------------------------------------------------------------
# output helpers


def fmt(x) -> str:
    """17 significant digits, round-trip exact for doubles."""
    return format(float(x), ".17g")


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v) for v in r))
    return "\n".join(lines) + "\n"


def flatten(obj, prefix="") -> list:
    """``key: value`` lines from nested dictionaries; arrays are summarized."""
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            lines += flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        if len(obj) > 16:
            lines.append(f"{prefix}: <{len(obj)} values>")
        else:
            for i, v in enumerate(obj):
                lines += flatten(v, f"{prefix}[{i}]")
    elif isinstance(obj, bool) or obj is None:
        lines.append(f"{prefix}: {str(obj).lower()}")
    elif isinstance(obj, float):
        lines.append(f"{prefix}: {fmt(obj)}")
    elif isinstance(obj, complex):
        lines.append(f"{prefix}: {fmt(obj.real)} {fmt(obj.imag)}j")
    else:
        lines.append(f"{prefix}: {obj}")
    return lines


def _metadata(canon: dict, started: float, command: str) -> dict:
    from . import __version__

    blob = "\n".join(f"{k}={v}" for k, v in canon.items() if not k.startswith("output."))
    return {
        "command": command,
        "version": __version__,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "wall_time_s": round(time.time() - started, 3),
    }


def write_report(cfg, stem: str, data: dict, meta: dict) -> None:
    out = cfg["out"]
    if "text" in cfg["formats"]:
        body = flatten(data)
        body += ["# --- metadata (not part of the deterministic payload) ---"]
        body += [f"# {k}: {v}" for k, v in meta.items()]
        atomic_write(os.path.join(out, f"{stem}.txt"), "\n".join(body) + "\n")
    if "json" in cfg["formats"]:
        doc = {"data": data, "metadata": meta}
        atomic_write(os.path.join(out, f"{stem}.json"), json.dumps(doc, indent=1, sort_keys=False) + "\n")


# ---------------------------------------------------------------------------
# commands


def _model(cfg):
    from .models import get_model

    return get_model(cfg["model"], sigma=cfg["sigma"])


def _exit_for(verdict: str) -> int:
    return {"pass": EXIT_OK, "fail": EXIT_FAIL}.get(verdict, EXIT_UNRESOLVED)


def _mode1_source(cfg, model):
    from .stability import example2_mode1_matrix, folded_for

    layout = cfg["layout"]
    if layout == "auto":
        layout = "example" if cfg["model"] == "lj" else "folded"
    if layout == "example":
        if cfg["model"] != "lj":
            raise ConfigError("scan.layout: example layout is defined for the lj model only")
        return (lambda z: example2_mode1_matrix(z, model, precision=cfg["precision"])), "example"
    return folded_for(model), "folded"


def cmd_stability(cfg, canon, started) -> int:
    from .stability import full_stability_report

    model = _model(cfg)
    _, layout = _mode1_source(cfg, model)
    rep = full_stability_report(
        model,
        n_list=(cfg["N"],),
        M=cfg["M"],
        M_b=cfg["M"],
        tol_annulus=cfg["tol_annulus"],
        det_threshold=cfg["det_threshold"],
        layout=layout,
        precision=cfg["precision"],
    )
    data = rep.to_dict()
    for key in ("theta", "abs_det", "derivative"):
        data["mode1"].pop(key, None)
    data["assumption_b"].pop("per_theta", None)
    data["mode3"].pop("matrix", None)
    write_report(cfg, "stability_report", data, _metadata(canon, started, "stability"))
    print(f"overall: {rep.overall}")
    print(f"mode1.min_abs_det: {fmt(rep.mode1['min_abs_det'])}")
    return _exit_for(rep.overall)


def cmd_detscan(cfg, canon, started) -> int:
    import numpy as np

    from .stability import mode1_scan

    model = _model(cfg)
    source, layout = _mode1_source(cfg, model)
    scan = mode1_scan(source, cfg["M"], cfg["det_threshold"], cfg["tol_annulus"])
    theta, absdet, deriv = scan["theta"], scan["abs_det"], scan["derivative"]
    deriv = np.append(deriv, np.nan)
    rows = [(float(t), float(a), float(dd)) for t, a, dd in zip(theta, absdet, deriv)]
    atomic_write(os.path.join(cfg["out"], "detscan.csv"), csv_text(("theta", "abs_det", "d_abs_det"), rows))
    data = {
        "layout": layout,
        "M": cfg["M"],
        "rows": len(rows),
        "min_abs_det": scan["min_abs_det"],
        "argmin_theta": scan["argmin_theta"],
        "increasing_on_half": scan["increasing_on_half"],
        "max_asymmetry": scan["max_asymmetry"],
        "verdict": scan["verdict"],
    }
    write_report(cfg, "detscan_report", data, _metadata(canon, started, "detscan"))
    print(f"min_abs_det: {fmt(scan['min_abs_det'])}")
    print(f"increasing_on_half: {str(scan['increasing_on_half']).lower()}")
    return _exit_for(scan["verdict"])


def cmd_converge(cfg, canon, started) -> int:
    import math

    from .solver import convergence_study, fourier_load

    model = _model(cfg)
    table = convergence_study(
        model,
        fourier_load(cfg["load"]),
        cfg["N_list"],
        nonlinear=cfg["nonlinear"],
        tol=cfg["tol"],
        method=cfg["method"],
        max_iter=cfg["max_iter"],
    )
    rows = [(r["N"], r["eps"], r["e_l2"], r["e_h1"], r["e_h2"]) for r in table.rows]
    atomic_write(os.path.join(cfg["out"], "convergence.csv"), csv_text(("N", "eps", "e_l2", "e_h1", "e_h2"), rows))
    order = "n/a" if math.isnan(table.fitted_order) else f"{table.fitted_order:.3f}"
    data = {"fitted_order": order, "ratios": [float(r) for r in table.ratios], "rows": len(rows)}
    write_report(cfg, "convergence_report", data, _metadata(canon, started, "converge"))
    print(f"fitted_order: {order}")
    return EXIT_OK


def cmd_symbol(cfg, canon, started) -> int:
    import numpy as np

    from .models import symbol_cb

    model = _model(cfg)
    m = model.atomistic_stencil(1.0).m
    header = ["N", "eps", "k1", "k2"]
    for nm in ("h_at", "h_eps", "h_cb"):
        for i in range(m):
            for j in range(m):
                header += [f"{nm}_{i + 1}{j + 1}_re", f"{nm}_{i + 1}{j + 1}_im"]
    header += ["err_at_cb", "err_eps_cb", "herm_at", "herm_eps"]
    rows = []
    for n in cfg["symbol_N_list"]:
        eps = 1.0 / (2 * n)
        at, co = model.atomistic_stencil(eps), model.continuum_stencil(eps)
        for k in cfg["symbol_k"]:
            mats = (at.symbol(k, eps), co.symbol(k, eps), symbol_cb(model, k))
            row = [n, eps, k[0], k[1]]
            for mtx in mats:
                for v in mtx.reshape(-1):
                    row += [float(v.real), float(v.imag)]
            row += [
                float(np.linalg.norm(mats[0] - mats[2], 2)),
                float(np.linalg.norm(mats[1] - mats[2], 2)),
                float(np.max(np.abs(mats[0] - mats[0].conj().T))),
                float(np.max(np.abs(mats[1] - mats[1].conj().T))),
            ]
            rows.append(row)
    atomic_write(os.path.join(cfg["out"], "symbol.csv"), csv_text(header, rows))
    print(f"rows: {len(rows)}")
    return EXIT_OK


COMMANDS = {"stability": cmd_stability, "detscan": cmd_detscan, "converge": cmd_converge, "symbol": cmd_symbol}

FLAG_KEYS = {
    "model": "model.name",
    "sigma": "model.sigma",
    "N": "grid.N",
    "scan_M": "scan.M",
    "tol_annulus": "scan.tol_annulus",
    "det_threshold": "scan.det_threshold",
    "layout": "scan.layout",
    "precision": "scan.precision",
    "N_list": "convergence.N_list",
    "load": "convergence.load",
    "tol": "solver.tol",
    "max_iter": "solver.max_iter",
    "method": "solver.method",
    "nonlinear": "solver.nonlinear",
    "out": "output.directory",
    "formats": "output.formats",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the subcommand from being reset by
    # the subparser's own default
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", metavar="K", type=int, help="thread count (fallback: LATSTAB_THREADS)")
    common.add_argument("--model", help="harmonic, lj or pair")
    common.add_argument("--sigma", help="LJ length parameter")
    common.add_argument("--N", help="grid half-width for the bulk scan")
    common.add_argument("--scan-M", dest="scan_M", help="number of tangential samples")
    common.add_argument("--tol-annulus", dest="tol_annulus")
    common.add_argument("--det-threshold", dest="det_threshold")
    common.add_argument("--layout", help="mode I matrix layout: auto, folded or example")
    common.add_argument("--precision", help="example layout arithmetic: double or mp")
    common.add_argument("--N-list", dest="N_list", help="comma-separated N values")
    common.add_argument("--load", help="load modes 'comp:k1,k2:amp[:phase]; ...'")
    common.add_argument("--tol")
    common.add_argument("--max-iter", dest="max_iter")
    common.add_argument("--method")
    common.add_argument("--nonlinear", action="store_const", const="true")
    common.add_argument("--formats", help="text and/or json")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    parser = _Parser(prog="latstab", description="Interface stability and convergence checks.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _apply_threads(k) -> None:
    if k is None:
        env = os.environ.get("LATSTAB_THREADS")
        if not env:
            return
        try:
            k = int(env)
        except ValueError:
            raise ConfigError(f"LATSTAB_THREADS: expected integer, got {env!r}") from None
    if k < 1:
        raise ConfigError(f"--threads: must be positive, got {k}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(k)


def main(argv=None) -> int:
    started = time.time()
    args = build_parser().parse_args(argv)
    try:
        _apply_threads(getattr(args, "threads", None))
        overrides = {}
        for flag, key in FLAG_KEYS.items():
            v = getattr(args, flag, None)
            if v is not None:
                overrides[key] = v
        for item in getattr(args, "set", []):
            if "=" not in item:
                raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        cfg, canon = load_config(getattr(args, "config", None), overrides)
        return COMMANDS[args.command](cfg, canon, started)
    except ConfigError as exc:
        print(f"latstab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
