"""Command-line entry point: ``dtnlab {forward,scatter,reconstruct,sweep,selftest}``.

Experiments are described by strict JSON configs; flags only carry paths,
verbosity and worker count.  Outputs are staged in a temporary directory and
moved into place only after every computation succeeded.

Exit codes: 0 success, 1 a requested check failed, 2 bad config or paths,
3 numerical failure (guard, solver).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .born import CutoffRule, ExactData, cutoff_rule, error_split, reconstruct
from .forward_dtn import DirichletEigenvalueError, DtnMap, SolverError, dtn_diff_norm, dtn_difference, dtn_map
from .grid_domain import Domain, build_square_domain, fourier_grid
from .reduction import ReductionError, reduce_pair
from .potentials import SupportError, fourier_transform, sample_potential, zero_potential
from .stability_lab import ConfigError, ExperimentConfig, check_keys, parse_potential, run_sweep, verify_bounds
from .variety_faddeev import (
    ConvergenceError,
    ResolutionError,
    VarietyError,
    amplitude_h,
    born_pair,
    faddeev_green,
    lippmann_schwinger,
    theta_pair_3d,
    vhat_at,
)

log = logging.getLogger("dtnlab")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class CheckFailed(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config helpers


def _number(data: dict, key: str, path: str, default=None, positive=False):
    if key not in data:
        if default is None:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}", "expected a number")
    if positive and not val > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    return val


def _integer(data: dict, key: str, path: str, default=None):
    val = _number(data, key, path, default)
    if not isinstance(val, int):
        raise ConfigError(f"{path}.{key}", "expected an integer")
    return val


def parse_domain(data: Any, path: str) -> Domain:
    check_keys(data, ("dim", "n", "side"), path)
    try:
        return build_square_domain(_integer(data, "dim", path, 2), _integer(data, "n", path, 64), _number(data, "side", path, 1.0))
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def load_config(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("$", f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _config_hash(cfg: Any) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


class Staging:
    """Collects output files in a temp dir and publishes them atomically."""

    def __init__(self, out_dir: Path):
        if not out_dir.is_dir():
            raise ConfigError("--out", f"output directory {out_dir} does not exist")
        self.out_dir = out_dir
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.tmp / name

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content)

    def publish(self, command: str, config: Any) -> list[Path]:
        manifest = {
            "command": command,
            "code_version": __version__,
            "config_hash": _config_hash(config),
            "files": {n: _sha256(self.tmp / n) for n in sorted(set(self.names))},
        }
        (self.tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        out = []
        for n in sorted(set(self.names)) + ["manifest.json"]:
            dest = self.out_dir / n
            os.replace(self.tmp / n, dest)
            out.append(dest)
        self.discard()
        return out

    def discard(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


# ---------------------------------------------------------------------------
# subcommands


def cmd_forward(cfg: Any, stage: Staging) -> bool:
    check_keys(cfg, ("domain", "potentials", "format", "guard"), "$", ("potentials",))
    dom = parse_domain(cfg.get("domain", {}), "$.domain")
    fmt = cfg.get("format", "csv")
    if fmt not in ("csv", "bin"):
        raise ConfigError("$.format", "expected 'csv' or 'bin'")
    items = cfg["potentials"]
    if not isinstance(items, list) or not items:
        raise ConfigError("$.potentials", "expected a non-empty list")
    maps = []
    for i, item in enumerate(items):
        path = f"$.potentials[{i}]"
        check_keys(item, ("name", "spec"), path, ("name",))
        name = item["name"]
        if not isinstance(name, str) or not name or "/" in name:
            raise ConfigError(f"{path}.name", "expected a plain file stem")
        spec = item.get("spec")
        v = zero_potential(dom) if spec is None else _sample(parse_potential(spec, f"{path}.spec"), dom, f"{path}.spec")
        maps.append((name, dtn_map(v, check=cfg.get("guard", True))))
    for name, phi in maps:
        tmp = stage.tmp / name
        for p in phi.save(tmp, fmt=fmt):
            stage.names.append(p.name)
    return True


def _sample(spec, dom, path):
    try:
        return sample_potential(spec, dom)
    except (SupportError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def cmd_scatter(cfg: Any, stage: Staging) -> bool:
    check_keys(cfg, ("domain", "potential", "pairs", "pad", "route_tol"), "$", ("pairs",))
    dom = parse_domain(cfg.get("domain", {}), "$.domain")
    v = zero_potential(dom) if cfg.get("potential") is None else _sample(parse_potential(cfg["potential"], "$.potential"), dom, "$.potential")
    pad = _integer(cfg, "pad", "$", 4)
    tol = cfg.get("route_tol")
    pairs = []
    if not isinstance(cfg["pairs"], list) or not cfg["pairs"]:
        raise ConfigError("$.pairs", "expected a non-empty list")
    for i, item in enumerate(cfg["pairs"]):
        path = f"$.pairs[{i}]"
        check_keys(item, ("p", "rho"), path, ("p",))
        p = np.asarray(item["p"], dtype=float)
        if p.shape != (dom.dim,):
            raise ConfigError(f"{path}.p", f"expected {dom.dim} components")
        if not np.any(p):
            raise ConfigError(f"{path}.p", "p = 0 has no complex frequency with Im k != 0")
        try:
            pair = theta_pair_3d(p, item["rho"]) if "rho" in item else born_pair(p)
        except VarietyError as exc:
            raise ConfigError(path, str(exc)) from None
        pairs.append(pair)
    v0 = zero_potential(dom, v.m)
    D = dtn_difference(v, v0) if not v.is_zero() else None
    rows, ok = [], True
    for pair in pairs:
        vh = vhat_at(v, pair.p)
        if v.is_zero():
            h_direct = h_red = 0j
        else:
            table = faddeev_green(pair.k, dom, pad=pad)
            h_direct = amplitude_h(v, lippmann_schwinger(v, pair.k, table), pair).h
            h_red = reduce_pair(pair, D, v0, table).h_diff
        gap = abs(h_red - h_direct) / abs(h_direct) if h_direct != 0 else abs(h_red)
        if tol is not None and gap > tol:
            ok = False
        rows.append(list(pair.p) + [pair.rho, h_direct.real, h_direct.imag, vh.real, vh.imag, h_red.real, h_red.imag, gap])
    head = [f"p{i + 1}" for i in range(dom.dim)] + ["rho", "h_re", "h_im", "vhat_re", "vhat_im", "h_reduction_re", "h_reduction_im", "route_gap"]
    stage.text("scatter.csv", _csv(head, rows))
    return ok


def _csv(head, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(head)
    for r in rows:
        wr.writerow([repr(float(x)) for x in r])
    return buf.getvalue()


def cmd_reconstruct(cfg: Any, stage: Staging) -> bool:
    check_keys(cfg, ("domain", "potential", "dtn_input", "fourier", "rho", "alpha", "max_sup_err"), "$")
    dom = parse_domain(cfg.get("domain", {}), "$.domain")
    fourier = check_keys(cfg.get("fourier", {}), ("p_max", "n_p"), "$.fourier")
    fg = fourier_grid(dom, _number(fourier, "p_max", "$.fourier", 8.0, True), _integer(fourier, "n_p", "$.fourier", 41))
    truth = None
    if cfg.get("potential") is not None:
        truth = _sample(parse_potential(cfg["potential"], "$.potential"), dom, "$.potential")
    phi0 = None
    if cfg.get("dtn_input"):
        try:
            phi = DtnMap.load(cfg["dtn_input"], dom)
        except (OSError, ValueError) as exc:
            raise ConfigError("$.dtn_input", str(exc)) from None
        phi0 = dtn_map(zero_potential(dom))
        D = phi - phi0
    elif truth is not None:
        D = dtn_difference(truth, zero_potential(dom, truth.m))
    else:
        raise ConfigError("$", "need 'potential' or 'dtn_input'")
    delta = dtn_diff_norm(D)
    rule = CutoffRule.for_domain(dom, _number(cfg, "alpha", "$", 0.5, True))
    summary: dict = {"delta": delta, "lambda": rule.lam, "L": rule.radius}
    if "rho" in cfg:
        rho = _number(cfg, "rho", "$", positive=True)
        summary["rho_source"] = "config"
    else:
        try:
            rho = cutoff_rule(delta, rule)
            summary["rho_source"] = "cutoff_rule"
        except ExactData:
            rho = 0.0
            summary["rho_source"] = "exact_data"
    try:
        fg.check_cutoff(rho)
    except ValueError as exc:
        raise ConfigError("$.rho", str(exc)) from None
    rec = reconstruct(D, rho, fg, dom)
    summary.update(rho=rho, imag_residue=rec.imag_residue, relative_imag_residue=rec.relative_imag_residue)
    ok = True
    if truth is not None:
        err = float(np.max(np.abs(rec.values - truth.values)))
        rel = err / truth.sup if truth.sup > 0 else err
        split = error_split(rec.spectrum, fourier_transform(truth, fg), rho)
        summary.update(sup_err=err, relative_sup_err=rel, I1=split.inside, I2=split.outside)
        if "max_sup_err" in cfg:
            ok = rel <= _number(cfg, "max_sup_err", "$", positive=True)
    rec.save_csv(dom, stage.path("reconstruction.csv"))
    stage.text("summary.json", json.dumps(summary, indent=2, sort_keys=True))
    return ok


def cmd_sweep(cfg: Any, stage: Staging, workers: int | None = None) -> bool:
    if isinstance(cfg, dict) and workers is not None:
        cfg = {**cfg, "workers": workers}
    exp = ExperimentConfig.from_dict(cfg)
    rep = run_sweep(exp)
    ledger = verify_bounds(rep)
    stage.text("report.json", rep.to_json())
    stage.text("report.csv", rep.to_csv())
    stage.text("ledger.txt", "\n".join(ledger.lines()) + "\n")
    for line in ledger.lines():
        log.info(line)
    return ledger.passed


# ---------------------------------------------------------------------------
# selftest: quick deterministic invariants on small grids


def _selftests() -> list[tuple[str, Callable[[], bool]]]:
    from .potentials import gaussian_bump
    from .reduction import background_r1, kernel_A, solve_psi2
    from .born import vhat_from_dtn
    from .stability_lab import fit_exponent

    dom = build_square_domain(2, 16)

    def zero_dtn():
        phi = dtn_map(zero_potential(dom))
        x1 = dom.boundary[:, 0]
        return np.max(np.abs(phi.apply(x1) - dom.normals[:, 0])) < 1e-8 and np.max(np.abs(phi.apply(np.ones(dom.num_boundary)))) < 1e-8

    def pair_on_variety():
        pr = born_pair([1.0, 0.0])
        return abs(pr.k.square()) < 1e-15 and np.allclose(pr.k.k, [0.5, 0.5j]) and np.allclose(pr.l.k, [-0.5, 0.5j])

    def theta_3d():
        pr = theta_pair_3d([1.0, 0, 0], 1.0, ([0, 1, 0], [0, 0, 1]))
        return np.allclose(pr.k.k, [0.5, 1j, np.sqrt(0.75)]) and abs(pr.k.square()) < 1e-12

    def rigidity():
        try:
            theta_pair_3d([1.0, 0.0], 1.0)
        except VarietyError:
            return True
        return False

    def zero_mu():
        pr = born_pair([4.0, 0.0])
        t = faddeev_green(pr.k, dom)
        f = lippmann_schwinger(zero_potential(dom), pr.k, t)
        return np.all(f.mu == 1) and amplitude_h(zero_potential(dom), f, pr).h == 0

    def zero_background():
        pr = born_pair([4.0, 0.0])
        t = faddeev_green(pr.k, dom)
        r1 = background_r1(zero_potential(dom), pr.k, t)
        return np.array_equal(r1.matrix, t.G_between(dom.boundary, dom.boundary))

    def zero_kernel():
        pr = born_pair([4.0, 0.0])
        t = faddeev_green(pr.k, dom)
        Z = DtnMap(dom, np.zeros((dom.num_boundary,) * 2))
        A = kernel_A(pr.k, Z, background_r1(zero_potential(dom), pr.k, t))
        psi1 = pr.k.plane_wave(dom.boundary)
        return not np.any(A.matrix) and np.allclose(solve_psi2(pr.k, A, psi1), psi1)

    def cutoff_example():
        rule = CutoffRule(0.5, np.sqrt(2) / 2, 2)
        return abs(rule.lam - 0.18469903) < 1e-7 and abs(cutoff_rule(1.0, rule) - 0.12802) < 1e-5

    def zero_born():
        Z = DtnMap(dom, np.zeros((dom.num_boundary,) * 2))
        return np.all(vhat_from_dtn(np.array([[1.0, 2.0], [0.0, 0.0]]), Z) == 0)

    def exact_power_law():
        X = np.array([3.0, 5.0, 8.0, 12.0])
        deltas = 1.0 / np.expm1(X)
        return abs(fit_exponent(list(zip(deltas, 2.0 * X**-3.0))).slope + 3) < 1e-10

    def gaussian_support():
        v = sample_potential(gaussian_bump(0.1, (0.0, 0.0), 0.1), dom)
        return v.sup <= 0.1 + 1e-15

    return [
        ("dtn of zero potential", zero_dtn),
        ("born pair on the variety", pair_on_variety),
        ("three-dimensional theta pair", theta_3d),
        ("two-dimensional rigidity", rigidity),
        ("zero potential gives mu = 1", zero_mu),
        ("zero background kernel", zero_background),
        ("zero kernel keeps psi", zero_kernel),
        ("cutoff arithmetic", cutoff_example),
        ("zero data gives zero spectrum", zero_born),
        ("power-law fit", exact_power_law),
        ("gaussian sampling", gaussian_support),
    ]


def cmd_selftest() -> bool:
    ok = True
    for name, fn in _selftests():
        try:
            passed = bool(fn())
        except Exception as exc:  # report, keep going
            log.error("%s raised %r", name, exc)
            passed = False
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return ok


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dtnlab", description="DtN maps, Faddeev functions and linearised reconstruction.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("forward", "scatter", "reconstruct", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("config", type=Path, help="JSON config file")
        sp.add_argument("--out", type=Path, required=True, help="existing output directory")
        if name == "sweep":
            sp.add_argument("--workers", type=int, default=None)
    sub.add_parser("selftest")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "selftest":
        return EXIT_OK if cmd_selftest() else EXIT_CHECK
    stage = None
    try:
        cfg = load_config(args.config)
        stage = Staging(args.out)
        if args.command == "forward":
            ok = cmd_forward(cfg, stage)
        elif args.command == "scatter":
            ok = cmd_scatter(cfg, stage)
        elif args.command == "reconstruct":
            ok = cmd_reconstruct(cfg, stage)
        else:
            ok = cmd_sweep(cfg, stage, args.workers)
        for p in stage.publish(args.command, cfg):
            print(p)
        stage = None
        return EXIT_OK if ok else EXIT_CHECK
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DirichletEigenvalueError, SolverError, ConvergenceError, ResolutionError, ReductionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        if stage is not None:
            stage.discard()


if __name__ == "__main__":
    sys.exit(main())
