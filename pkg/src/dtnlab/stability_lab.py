"""Sweeps over perturbation amplitude that probe the logarithmic stability shape.

For each amplitude ``eps`` the pair ``v1, v2 = v1 + eps * b`` is pushed through
the whole pipeline: DtN difference, ``delta``, cutoff, linearised
reconstruction of ``v1 - v2``.  The report stores per-run errors, the
inside/outside split of the spectral error and fitted constants, and
:func:`verify_bounds` turns them into a pass/fail ledger.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, NamedTuple, Sequence

import numpy as np

from . import __version__
from .born import CutoffRule, cutoff_rule, estimate_spectrum
from .forward_dtn import dirichlet_guard, dtn_diff_norm, dtn_difference
from .grid_domain import build_square_domain, fourier_grid
from .potentials import (
    PotentialSpec,
    Spectrum,
    ball_mask,
    fourier_transform,
    inverse_fourier,
    sample_potential,
    zero_potential,
)

FACTOR = 3.0
SLOPE_SLACK = 0.2
MIN_POINTS = 3
MIN_DECADES = 2.0


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending entry."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def check_keys(data: Any, allowed: Sequence[str], path: str, required: Sequence[str] = ()) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in data:
            raise ConfigError(f"{path}.{key}", "missing required key")
    return data


def parse_potential(data: Any, path: str) -> PotentialSpec:
    check_keys(data, ("kind", "amplitude", "center", "width", "order", "components", "smoothness"), path, ("kind",))
    comps = data.get("components", [])
    if not isinstance(comps, list):
        raise ConfigError(f"{path}.components", "expected a list")
    parsed = [parse_potential(c, f"{path}.components[{i}]") for i, c in enumerate(comps)]
    rest = {k: v for k, v in data.items() if k != "components"}
    try:
        if "center" in rest:
            rest["center"] = tuple(rest["center"])
        return PotentialSpec(components=tuple(parsed), **rest)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep depends on.  ``workers`` and ``output_dir`` do not enter the hash."""

    perturbation: PotentialSpec
    eps: tuple[float, ...]
    dim: int = 2
    n: int = 64
    side: float = 1.0
    background: PotentialSpec | None = None
    m: int | None = None
    p_max: float = 64.0
    n_p: int = 513
    alpha: float = 0.5
    i2_band: tuple[float, float, int] = (12.0, 32.0, 7)
    seed: int = 0
    label: str = ""
    output_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "i2_band", tuple(self.i2_band))
        if not eps:
            raise ConfigError("$.eps", "amplitude ladder is empty")
        if any(e < 0 for e in eps):
            raise ConfigError("$.eps", "amplitudes must be non-negative")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError("$.eps", "amplitude ladder must be strictly decreasing")
        if self.dim not in (2, 3):
            raise ConfigError("$.dim", "dimension must be 2 or 3")
        if self.smoothness <= self.dim:
            raise ConfigError("$.m", f"smoothness m={self.smoothness} must exceed d={self.dim}")
        if not 0 < self.alpha < 1:
            raise ConfigError("$.alpha", "alpha must lie in (0, 1)")
        lo, hi, cnt = self.i2_band
        if not (0 < lo < hi <= self.p_max and int(cnt) >= 2):
            raise ConfigError("$.i2_band", "need 0 < lo < hi <= p_max and at least 2 points")
        if self.workers < 1:
            raise ConfigError("$.workers", "need at least one worker")

    @property
    def smoothness(self) -> int:
        if self.m is not None:
            return self.m
        ms = [self.perturbation.nominal_smoothness(self.dim)]
        if self.background is not None:
            ms.append(self.background.nominal_smoothness(self.dim))
        return min(ms)

    @property
    def coarse(self) -> bool:
        return self.dim == 3

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, PotentialSpec):
                val = val.to_dict()
            elif isinstance(val, tuple):
                val = list(val)
            out[f.name] = val
        return out

    @classmethod
    def from_dict(cls, data: Any, path: str = "$") -> "ExperimentConfig":
        names = [f.name for f in fields(cls)]
        check_keys(data, names, path, ("perturbation", "eps"))
        kw = dict(data)
        kw["perturbation"] = parse_potential(kw["perturbation"], f"{path}.perturbation")
        if kw.get("background") is not None:
            kw["background"] = parse_potential(kw["background"], f"{path}.background")
        for key, typ in (("dim", int), ("n", int), ("n_p", int), ("seed", int), ("workers", int)):
            if key in kw and (not isinstance(kw[key], int) or isinstance(kw[key], bool)):
                raise ConfigError(f"{path}.{key}", f"expected {typ.__name__}")
        if not isinstance(kw["eps"], list):
            raise ConfigError(f"{path}.eps", "expected a list of numbers")
        try:
            return cls(**kw)
        except ConfigError as exc:
            raise ConfigError(path + exc.path[1:], str(exc).split(": ", 1)[1]) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(path, str(exc)) from None

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("workers")
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    eps: float
    status: str  # ok | exact | guard_failed | cutoff_exceeds_lattice
    delta: float
    rho: float | None
    sup_err: float
    sup_diff: float
    I1: float  # from the data-derived spectrum
    I1_true: float
    I2: float
    born_gap: float
    vhat_max: float
    imag_residue: float
    quad_tol: float
    guard_margin: float


class FitResult(NamedTuple):
    slope: float
    intercept: float
    residual: float
    points: int


class FitRefusal(ValueError):
    pass


def fit_exponent(points: Sequence[tuple[float, float]]) -> FitResult:
    """Slope of ``log error`` against ``log ln(1 + 1/delta)``."""
    pts = [(float(d), float(e)) for d, e in points]
    if len(pts) < MIN_POINTS:
        raise FitRefusal(f"need at least {MIN_POINTS} points, got {len(pts)}")
    ds = np.array([d for d, _ in pts])
    es = np.array([e for _, e in pts])
    if np.any(ds <= 0) or np.any(es <= 0):
        raise FitRefusal("delta and error must be positive for a log-log fit")
    span = math.log10(ds.max() / ds.min())
    if span < MIN_DECADES:
        raise FitRefusal(f"delta spans {span:.2f} decades; need at least {MIN_DECADES}")
    X = np.log(np.log1p(1.0 / ds))
    Y = np.log(es)
    coef, res, *_ = np.polyfit(X, Y, 1, full=True)
    rms = float(np.sqrt(res[0] / len(X))) if len(res) else 0.0
    return FitResult(float(coef[0]), float(coef[1]), rms, len(X))


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class StabilityReport:
    config: dict
    config_hash: str
    code_version: str
    records: list[RunRecord]
    i2_curve: list[tuple[float, float]]
    fits: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return int(self.fits["m"])

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "records": [asdict(r) for r in self.records],
            "i2_curve": [list(p) for p in self.i2_curve],
            "fits": self.fits,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "StabilityReport":
        d = json.loads(text)
        return cls(
            d["config"], d["config_hash"], d["code_version"],
            [RunRecord(**r) for r in d["records"]], [tuple(p) for p in d["i2_curve"]], d["fits"],
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["eps", "delta", "rho", "sup_err", "I1", "I2", "status", "neg_alpha1", "neg_alpha2", "config_hash"])
        a1, a2 = self.fits.get("alpha1"), self.fits.get("alpha2")
        for r in self.records:
            wr.writerow([
                repr(r.eps), repr(r.delta), "" if r.rho is None else repr(r.rho), repr(r.sup_err),
                repr(r.I1), repr(r.I2), r.status, repr(-a1), repr(-a2), self.config_hash,
            ])
        return buf.getvalue()

    def write(self, directory: str | Path) -> list[Path]:
        d = Path(directory)
        paths = [d / "report.json", d / "report.csv"]
        paths[0].write_text(self.to_json())
        paths[1].write_text(self.to_csv())
        return paths


def _run_one(cfg: ExperimentConfig, eps: float) -> RunRecord:
    dom = build_square_domain(cfg.dim, cfg.n, cfg.side)
    fg = fourier_grid(dom, cfg.p_max, cfg.n_p)
    rule = CutoffRule.for_domain(dom, cfg.alpha)
    v1 = sample_potential(cfg.background, dom) if cfg.background else zero_potential(dom, cfg.smoothness)
    bump = sample_potential(cfg.perturbation, dom)
    v2 = v1 + bump * eps
    diff = v1 - v2
    sup_diff = diff.sup
    g1, g2 = dirichlet_guard(v1), dirichlet_guard(v2)
    margin = min(g1.margin, g2.margin)
    nan = float("nan")
    if not (g1.passed and g2.passed):
        return RunRecord(eps, "guard_failed", nan, None, nan, sup_diff, nan, nan, nan, nan, nan, nan, nan, margin)
    D = dtn_difference(v1, v2)  # Phi_1 - Phi_2
    delta = dtn_diff_norm(D)
    true = fourier_transform(diff, fg)
    w = fg.weight
    full = inverse_fourier(true, dom, cfg.p_max).values
    quad = float(np.max(np.abs(full - diff.values)))
    if delta == 0.0:
        return RunRecord(eps, "exact", 0.0, None, 0.0, sup_diff, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, quad, margin)
    rho = cutoff_rule(delta, rule)
    if rho > cfg.p_max:
        return RunRecord(eps, "cutoff_exceeds_lattice", delta, rho, nan, sup_diff, nan, nan, nan, nan, nan, nan, quad, margin)
    est = estimate_spectrum(D, fg, rho)
    inv = inverse_fourier(est, dom, rho)
    mask = ball_mask(fg, rho)
    a_true = np.abs(true.values)
    return RunRecord(
        eps=eps,
        status="ok",
        delta=delta,
        rho=rho,
        sup_err=float(np.max(np.abs(inv.values - diff.values))),
        sup_diff=sup_diff,
        I1=float(np.abs(est.values[mask]).sum() * w),
        I1_true=float(a_true[mask].sum() * w),
        I2=float(a_true[~mask].sum() * w),
        born_gap=float(np.abs(est.values[mask] - true.values[mask]).sum() * w),
        vhat_max=float(np.max(np.abs(est.values[mask]), initial=0.0)),
        imag_residue=inv.imag,
        quad_tol=quad,
        guard_margin=margin,
    )


def _i2_curve(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    """``I2(rho)`` for the unit-amplitude perturbation over the configured band."""
    dom = build_square_domain(cfg.dim, cfg.n, cfg.side)
    fg = fourier_grid(dom, cfg.p_max, cfg.n_p)
    s = fourier_transform(sample_potential(cfg.perturbation, dom), fg)
    a = np.abs(s.values) * fg.weight
    lo, hi, cnt = cfg.i2_band
    out = []
    for rho in np.geomspace(lo, hi, int(cnt)):
        out.append((float(rho), float(a[~ball_mask(fg, rho)].sum())))
    return out


def _fits(cfg: ExperimentConfig, records: list[RunRecord], curve) -> dict:
    m, d = cfg.smoothness, cfg.dim
    dom = build_square_domain(cfg.dim, cfg.n, cfg.side)
    rule = CutoffRule.for_domain(dom, cfg.alpha)
    L, L1 = rule.radius, rule.shifted_radius
    out: dict = {
        "m": m,
        "alpha1": (m - d) / m,
        "alpha2": float(m - d),
        "lambda": rule.lam,
        "L": L,
        "L1": L1,
        "C5_formula": dom.perimeter / (2 * np.pi) ** d,
        "coarse": cfg.coarse,
    }
    ok = [r for r in records if r.status == "ok"]
    if ok:
        c5 = [r.vhat_max / (r.delta * math.exp(L * r.rho)) for r in ok]
        c6 = [r.I1 / (r.delta * math.exp(L1 * r.rho)) for r in ok]
        out["C5_ratios"] = c5
        out["C6_ratios"] = c6
        out["C5_fit"] = float(np.exp(np.mean(np.log(c5)))) if all(c > 0 for c in c5) else 0.0
        out["C6_fit"] = float(np.exp(np.mean(np.log(c6)))) if all(c > 0 for c in c6) else 0.0
    rhos = np.array([c[0] for c in curve])
    i2 = np.array([c[1] for c in curve])
    if len(rhos) >= 2 and np.all(i2 > 0):
        out["I2_slope"] = _loglog_slope(rhos, i2)
        out["C7R_fit"] = float(np.max(i2 * rhos ** (m - d)))
    pts = [(r.delta, r.sup_err) for r in ok]
    try:
        fit = fit_exponent(pts)
        out["exponent"] = fit._asdict()
    except FitRefusal as exc:
        out["exponent"] = {"refused": str(exc)}
    return out


def run_sweep(cfg: ExperimentConfig) -> StabilityReport:
    if cfg.workers > 1 and len(cfg.eps) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_run_one, [cfg] * len(cfg.eps), cfg.eps))
    else:
        records = [_run_one(cfg, e) for e in cfg.eps]
    nonzero = any(e > 0 for e in cfg.eps)
    curve = _i2_curve(cfg) if nonzero else []
    d = cfg.to_dict()
    d.pop("workers")
    d.pop("output_dir")
    return StabilityReport(d, cfg.hash(), __version__, records, curve, _fits(cfg, records, curve))


class LedgerEntry(NamedTuple):
    name: str
    passed: bool
    margin: float
    detail: str


@dataclass
class BoundsLedger:
    entries: list[LedgerEntry]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def __getitem__(self, name: str) -> LedgerEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{'PASS' if e.passed else 'FAIL'} {e.name} (margin {e.margin:.3g}): {e.detail}" for e in self.entries]


def _factor_check(name: str, ratios: list[float], fit: float) -> LedgerEntry:
    if not ratios:
        return LedgerEntry(name, True, math.inf, "vacuous: no records with delta > 0")
    if fit <= 0:
        ok = all(r == 0 for r in ratios)
        return LedgerEntry(name, ok, 0.0, "zero left-hand sides" if ok else "mixed zero/nonzero ratios")
    worst = max(max(r / fit, fit / r) if r > 0 else math.inf for r in ratios)
    return LedgerEntry(name, worst <= FACTOR, FACTOR - worst, f"C={fit:.4g}, worst ratio {worst:.3g} vs factor {FACTOR}")


def verify_bounds(report: StabilityReport) -> BoundsLedger:
    f = report.fits
    ok = [r for r in report.records if r.status == "ok"]
    live = [r for r in report.records if r.status in ("ok", "exact")]
    E: list[LedgerEntry] = []

    # pointwise bound |v1 - v2| <= I1 + I2 (true spectra), and its reconstruction analogue
    if live:
        gaps = [r.I1_true + r.I2 + r.quad_tol - r.sup_diff for r in live]
        E.append(LedgerEntry("triangle", min(gaps) >= 0, min(gaps), f"{len(live)} records"))
    else:
        E.append(LedgerEntry("triangle", True, math.inf, "vacuous"))
    if ok:
        gaps = [r.born_gap + r.I2 + r.quad_tol - r.sup_err for r in ok]
        E.append(LedgerEntry("reconstruction_triangle", min(gaps) >= 0, min(gaps), f"{len(ok)} records"))
    E.append(_factor_check("vhat_bound_shape", f.get("C5_ratios", []), f.get("C5_fit", 0.0)))
    E.append(_factor_check("I1_bound_shape", f.get("C6_ratios", []), f.get("C6_fit", 0.0)))

    if "I2_slope" in f:
        target = -(f["alpha2"]) * (1 - SLOPE_SLACK)
        E.append(LedgerEntry("I2_slope", f["I2_slope"] <= target, target - f["I2_slope"],
                             f"slope {f['I2_slope']:.3f} vs bound {target:.3f}"))
    else:
        E.append(LedgerEntry("I2_slope", True, math.inf, "vacuous: no perturbation"))

    if len(ok) >= 2:
        by_delta = sorted(ok, key=lambda r: -r.delta)  # increasing -ln(delta)
        deltas = [r.delta for r in sorted(ok, key=lambda r: -r.eps)]
        mono_d = all(a > b for a, b in zip(deltas, deltas[1:]))
        E.append(LedgerEntry("delta_monotone", mono_d, 0.0, "delta decreases with eps"))
        errs = [r.sup_err for r in by_delta]
        mono_e = all(b <= a for a, b in zip(errs, errs[1:]))
        worst = max((b - a for a, b in zip(errs, errs[1:])), default=0.0)
        E.append(LedgerEntry("error_monotone", mono_e, -worst, "sup error nonincreasing as delta shrinks"))
        E.append(LedgerEntry("stabilizing", errs[-1] <= errs[0], errs[0] - errs[-1], "smallest-delta error <= largest-delta error"))
    exp = f.get("exponent", {})
    if "slope" in exp:
        ref = -f["alpha1"]
        E.append(LedgerEntry("beats_alpha1", exp["slope"] < ref, ref - exp["slope"],
                             f"fitted slope {exp['slope']:.3f} vs {ref:.3f}"))
    else:
        E.append(LedgerEntry("beats_alpha1", not ok, 0.0, exp.get("refused", "no fit")))
    return BoundsLedger(E)
