"""Command-line driver: ``sa-lab {spectrum,flow,instability,certify,audit}``.

Each run writes a directory ``<out-dir>/<timestamp>-<config hash>`` holding
``report.yaml`` (config echo, results, diagnostics; byte-identical for an
identical config), one CSV per table, and ``run.yaml`` with timing.
Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 not certifiable.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__, green
from . import instability as lab
from .config import RunConfig, config_hash, load_config, make_domain, make_model
from .errors import ConfigError, NotCertifiable, NumericError, SALabError
from .realization import SyntheticRealization

log = logging.getLogger("sa_lab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_NOT_CERT = 0, 2, 3, 4


class Table:
    def __init__(self, columns: list[str]):
        self.columns = list(columns)
        self.rows: list[list] = []

    def add(self, *row):
        self.rows.append(list(row))

    def write(self, path: Path) -> None:
        cplx = [any(isinstance(r[i], (complex, np.complexfloating)) for r in self.rows)
                for i in range(len(self.columns))]
        header = []
        for name, c in zip(self.columns, cplx):
            header.extend([f"{name}_re", f"{name}_im"] if c else [name])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in self.rows:
                out = []
                for v, c in zip(r, cplx):
                    if c:
                        v = complex(v)
                        out.extend([repr(v.real), repr(v.imag)])
                    else:
                        out.append(_cell(v))
                w.writerow(out)


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _threads() -> int:
    raw = os.environ.get("SA_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SA_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("SA_LAB_THREADS must be >= 1")
    return n


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _f(x) -> float:
    return float(np.real(x))


def _function_model(cfg, model):
    if isinstance(model, SyntheticRealization):
        raise ConfigError(f"command {cfg.command!r} needs a function model (pinned or full)")


# -- commands ------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig):
    model = make_model(cfg)
    tab = Table(["k", "lambda"] + (["lambda_fd", "abs_diff"] if cfg.oracle else []))
    diag = {}
    if isinstance(model, SyntheticRealization):
        lam = model.eigenvalues[:cfg.count]
        for k, v in enumerate(lam, 1):
            tab.add(k, float(v))
        return {"eigenvalues": lam.tolist(), "negative_count": 0}, {"spectrum": tab}, diag
    dom = make_domain(model, cfg.domain)
    lam = model.eigenvalues(dom, cfg.count)
    fd = None
    if cfg.oracle:
        from .oracle import fd_spectrum

        fd = fd_spectrum(model, dom, cfg.oracle_n, lam.size)
        diag["oracle_max_rel_diff"] = float(np.max(np.abs(lam - fd) / np.maximum(1.0, np.abs(lam))))
    for k, v in enumerate(lam, 1):
        row = [k, float(v)]
        if fd is not None:
            row += [float(fd[k - 1]), float(abs(v - fd[k - 1]))]
        tab.add(*row)
    chk = green.is_selfadjoint(dom)
    diag["selfadjoint_residual"] = float(chk.residual)
    res = {"eigenvalues": lam.tolist(), "negative_count": int(np.sum(lam < 0)),
           "lower_bound": model.lower_bound(),
           "below_lower_bound": int(np.sum(lam < model.lower_bound()))}
    return res, {"spectrum": tab}, diag


def cmd_flow(cfg: RunConfig):
    model = make_model(cfg)
    _function_model(cfg, model)
    base = make_domain(model, cfg.domain)
    grid = cfg.lambda_grid if cfg.lambda_grid is not None else [-1e1, -1e2, -1e3, -1e4]
    grid = sorted((float(v) for v in grid), reverse=True)
    pts = lab.kernel_flow(model, base, grid)
    tab = Table(["lambda", "gap", "method", "reason"])
    for p in pts:
        tab.add(p.lam, p.gap, p.method, p.reason)
    gaps = [p.gap for p in pts if p.gap is not None]
    res = {"gaps": gaps, "monotone": bool(np.all(np.diff(gaps) < 0)) if len(gaps) > 1 else True,
           "final_gap": gaps[-1] if gaps else None,
           "skipped": [{"lambda": p.lam, "reason": p.reason} for p in pts if p.reason]}
    diag = {}
    deep = min(grid)
    if deep <= -1e3:
        _, rep = lab.friedrichs_recover(model, deep, base)
        diag["friedrichs_recover"] = rep
    return res, {"flow": tab}, diag


def cmd_instability(cfg: RunConfig):
    model = make_model(cfg)
    _function_model(cfg, model)
    dom = make_domain(model, cfg.domain)
    ver = lab.is_unstable(model, dom, cfg.tolerances.get("rank", green.RANK_TOL))
    res = {"verdict": ver.verdict, "witness_dim": ver.witness.dim,
           "min_principal_angle": ver.min_angle}
    tables = {}
    if ver.unstable:
        grid = cfg.lambda_grid if cfg.lambda_grid is not None else [-1e2, -1e3, -1e4]
        grid = sorted((float(v) for v in grid), reverse=True)
        pts = _pmap(lambda lam: lab.instability_curve(model, dom, lam), grid, _threads())
        tab = Table(["lambda", "gap", "secular_residual", "hermitian_residual",
                     "sa_residual", "kernel_intersection_dim"])
        for p in pts:
            tab.add(p.lam, p.gap, p.secular_residual, p.hermitian_residual, p.sa_residual,
                    p.kernel_intersection)
        tables["curve"] = tab
        res["curve_accepted"] = all(p.accepted() for p in pts)
        res["curve_gaps"] = [p.gap for p in pts]
    return res, tables, {}


def cmd_certify(cfg: RunConfig):
    model = make_model(cfg)
    _function_model(cfg, model)
    base = make_domain(model, cfg.base)
    target = None if cfg.domain in (None, "", "none") else make_domain(model, cfg.domain)
    if target is not None and cfg.domain == cfg.base:
        target = None
    cert = lab.stability_certificate(model, base, cfg.M, cfg.lambda_grid, target=target,
                                     n_scan=cfg.n_scan, seed=cfg.seed)
    tab = Table(["lambda", "max_eig_F"])
    for lam, m in zip(cert.lam_grid, cert.max_eigs):
        tab.add(float(lam), float(m))
    scan = Table(["sample", "sigma_norm", "lowest_eigenvalue", "ok"])
    for i, s in enumerate(cert.scan):
        scan.add(i, s["sigma_norm"], s["lowest"], s["ok"])
    res = {"zeta": cert.zeta, "kind": cert.kind, "M": cert.M, "target_chart_norm": cert.target_norm,
           "monotone_tail": cert.monotone_tail, "scan_ok": cert.scan_ok}
    return res, {"certificate": tab, "scan": scan}, {}


def cmd_audit(cfg: RunConfig):
    model = make_model(cfg)
    _function_model(cfg, model)
    rep = lab.negative_count_audit(model, cfg.n_samples, cfg.seed, cfg.sample_scale)
    tab = Table(["sample", "count_below_m"])
    for i, c in enumerate(rep.counts):
        tab.add(i, c)
    wit = lab.eigen_witness(model, cfg.witness_lambda)
    chk = green.is_selfadjoint(wit)
    res = {"max_count": rep.max_count, "d": rep.d, "violations": rep.violations,
           "lower_bound": rep.bound, "n_samples": rep.n_samples}
    diag = {"witness": {"lambda": cfg.witness_lambda,
                        "traces": [[_f(v), float(np.imag(v))] for v in wit.coeffs[:, 0]],
                        "selfadjoint_residual": float(chk.residual),
                        "secular": float(model.secular(wit, cfg.witness_lambda))}}
    return res, {"audit": tab}, diag


COMMAND_FUNCS = {"spectrum": cmd_spectrum, "flow": cmd_flow, "instability": cmd_instability,
                 "certify": cmd_certify, "audit": cmd_audit}


# -- driver --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sa-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=list(COMMAND_FUNCS))
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--model", choices=["pinned", "full", "synthetic"])
    p.add_argument("--domain", help="dirichlet | neumann | robin(a,b) | chart(base,s) | ...")
    p.add_argument("--base", help="chart base for certify (default friedrichs)")
    p.add_argument("--lambda-grid", dest="lambda_grid", help="comma list or geom:a:b:n")
    p.add_argument("--count", type=int)
    p.add_argument("--truncation", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--M", type=float, dest="M")
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--oracle", action="store_true", default=None,
                   help="add finite-difference cross-check columns")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _run_dir(out: str, h: str) -> Path:
    root = Path(out)
    stamp = time.strftime("%Y%m%dT%H%M%S")
    path = root / f"{stamp}-{h}"
    i = 1
    while path.exists():
        path = root / f"{stamp}-{h}-{i}"
        i += 1
    path.mkdir(parents=True)
    return path


def run(cfg: RunConfig) -> tuple[int, dict, dict]:
    """Execute a validated config; returns (exit code, report, tables)."""
    report = {"tool": "sa-lab", "version": __version__, "command": cfg.command,
              "config": cfg.to_dict(), "config_hash": config_hash(cfg)}
    tables = {}
    try:
        res, tables, diag = COMMAND_FUNCS[cfg.command](cfg)
        report.update(status="ok", exit_code=EXIT_OK, results=_clean(res), diagnostics=_clean(diag))
    except NotCertifiable as exc:
        report.update(status="not-certifiable", exit_code=EXIT_NOT_CERT, results={},
                      diagnostics={}, error=str(exc))
    except ConfigError as exc:
        report.update(status="config-error", exit_code=EXIT_CONFIG, results={}, diagnostics={},
                      error=str(exc))
    except NumericError as exc:
        report.update(status="numeric-error", exit_code=EXIT_NUMERIC, results={}, diagnostics={},
                      error=f"{type(exc).__name__}: {exc}")
    return report["exit_code"], report, tables


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    over = {k: v for k, v in vars(args).items() if k not in ("config", "verbose")}
    t0 = time.perf_counter()
    try:
        threads = _threads()
        cfg = load_config(args.config, over)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, report, tables = run(cfg)
    try:
        out = _run_dir(cfg.out_dir, report["config_hash"])
    except OSError as exc:
        print(f"config error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    with open(out / "report.yaml", "w") as fh:
        yaml.safe_dump(report, fh, sort_keys=True)
    for name, tab in tables.items():
        tab.write(out / f"{name}.csv")
    with open(out / "run.yaml", "w") as fh:
        yaml.safe_dump({"started": time.strftime("%Y-%m-%dT%H:%M:%S"),
                        "elapsed_s": time.perf_counter() - t0, "threads": threads}, fh)
    if code:
        print(f"{report['status']}: {report.get('error', '')}", file=sys.stderr)
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
