"""Execute a scenario and write its tables, metrics and run manifest."""

from __future__ import annotations

import contextlib
import copy
import csv
import datetime as _dt
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

import uqprop
from uqprop.dynamics import DuffingParams, convert, duffing_closed_form, integrate, ou_moments
from uqprop.gmm import AdaptConfig, GaussKernel, Manifold, adaptive_propagate, mixture_moments, mixture_rows, ut_sigma, weighted_moments
from uqprop.mc import GaussianIC, McConfig, sample_moments, simulate_paths, write_samples
from uqprop.metrics import eps_lambda, eps_mu, relative_error
from uqprop.mfup import PlasmaConfig, mf_deterministic, mf_stochastic
from uqprop.plasma import NoiseMomentSet, moment_rows, plasma_run, plasma_run_bifidelity, state_covariance, state_mean
from uqprop.runner.config import Scenario, config_hash, read_config, validate

log = logging.getLogger(__name__)

OUT_ENV = "UQPROP_OUT_DIR"
DEFAULT_OUT = "uqprop-out"


@dataclass
class Check:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} = {self.value:.6g} (tol {self.tol:g})"


@dataclass
class Estimate:
    """Distribution summary in model coordinates: mixture components or samples."""

    components: list | None = None  # [(weight, mean, cov)]
    samples: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class RunResult:
    name: str
    out_dir: Path
    checks: list[Check]
    metrics: dict
    files: list[Path]
    timings: dict
    mean: np.ndarray
    cov: np.ndarray
    ref_mean: np.ndarray | None = None
    ref_cov: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


class _Timer:
    def __init__(self):
        self.times = {}

    @contextlib.contextmanager
    def __call__(self, name):
        t = time.perf_counter()
        try:
            yield
        finally:
            self.times[name] = time.perf_counter() - t


# ---------------------------------------------------------------------------
# method execution


def _flow(drift, t0, tf, h):
    def run(x):
        return integrate(drift, x, t0, tf, h, "rk4")

    return run


def _adapt(sc: Scenario) -> AdaptConfig:
    a = sc.method["adapt"]
    return AdaptConfig(
        eps_nu=a["eps_nu"],
        n_max=a.get("n_max", 20),
        alpha_min=a.get("alpha_min", 1e-6),
        zeta=a.get("zeta", 3.0),
        ut_kappa=a.get("ut_kappa"),
        order=a.get("order", 2),
        split_penalty=a.get("split_penalty", 1e-3),
    )


def _plasma_ic(sc: Scenario, order: int):
    if sc.kind == "gaussian":
        return NoiseMomentSet.gaussian(sc.mean, sc.cov, order, sc.t0)
    return sc.mean


def _mc(sc: Scenario, n: int, h: float, scheme: str) -> np.ndarray:
    ic = GaussianIC(sc.mean, sc.cov) if sc.kind == "gaussian" else sc.mean
    res = simulate_paths(sc.info.model, ic, sc.t0, sc.tf, McConfig(n, h, scheme, sc.seed, sc.threads))
    if res.valid.sum() < 2:
        raise RuntimeError("fewer than two Monte Carlo paths stayed finite")
    return res


def _default_scheme(integ: str) -> str:
    return "euler_maruyama" if integ == "euler_maruyama" else "rk4_additive_noise"


def _moment_component(ms: NoiseMomentSet):
    return (1.0, state_mean(ms), state_covariance(ms) if ms.order >= 2 else np.zeros((ms.n, ms.n)))


def run_method(sc: Scenario, all_steps: bool = False) -> Estimate:
    m = sc.method
    kind = m["kind"]
    h = m["h"]
    order = m.get("order", 2)
    integ = m.get("integ", "euler_maruyama" if kind == "plasma" else "rk4")
    model = sc.info.model
    if kind in ("plasma", "plasma_bifidelity"):
        outs = "all" if all_steps else None
        if kind == "plasma":
            sets = plasma_run(model, _plasma_ic(sc, order), sc.t0, sc.tf, h, order, integ, m.get("substeps", 1), outs)
        else:
            sets = plasma_run_bifidelity(
                model, sc.lf.model.drift, _plasma_ic(sc, order), sc.t0, sc.tf, h, order, integ, m.get("substeps", 1), outs
            )
        return Estimate([_moment_component(sets[-1])], extra={"sets": sets})
    if kind == "mc":
        res = _mc(sc, m["n_samples"], h, m.get("scheme", "euler_maruyama"))
        return Estimate(samples=res.terminal, extra={"mc": res})
    cfg = _adapt(sc)
    initial = Manifold.single(sc.mean, sc.cov)
    if kind == "gmm_adaptive":
        m_in, m_out = adaptive_propagate(initial, _flow(model.drift, sc.t0, sc.tf, h), cfg, sc.threads)
        return Estimate([(k.weight, k.mean, k.cov) for k in m_out], extra={"manifold": m_out, "initial": m_in})
    lf_map = _flow(sc.lf.model.drift, sc.t0, sc.tf, h)
    if kind == "mf_deterministic":

        def hf_prop(x0):
            return np.array(integrate(model.drift, list(x0), sc.t0, sc.tf, h, "rk4"), dtype=float)

        res = mf_deterministic(lf_map, hf_prop, initial, cfg, sc.threads)
    else:
        pc = PlasmaConfig(sc.t0, sc.tf, h, order, integ, m.get("substeps", 1), sc.lf.model.drift if m.get("bifidelity") else None)
        res = mf_stochastic(lf_map, model, initial, cfg, pc, sc.threads)
    return Estimate(
        [(k.weight, k.mean, k.cov) for k in res.gmm],
        extra={"mf": res, "manifold": res.gmm, "lf": [(k.weight, k.mean, k.cov) for k in res.lf]},
    )


def run_reference(sc: Scenario) -> Estimate | None:
    ref = sc.reference
    kind = ref["kind"]
    m = sc.method
    h = ref.get("h", m["h"])
    if kind == "none":
        return None
    if kind == "mc":
        res = _mc(sc, ref["n_samples"], h, ref.get("scheme", _default_scheme(m.get("integ", "euler_maruyama"))))
        return Estimate(samples=res.terminal, extra={"mc": res})
    if kind == "plasma":
        order = m.get("order", 2)
        sets = plasma_run(sc.info.model, _plasma_ic(sc, order), sc.t0, sc.tf, h, order, ref.get("integ", "rk4"), m.get("substeps", 1))
        return Estimate([_moment_component(sets[-1])], extra={"sets": sets})
    if kind == "ou_closed_form":
        if sc.kind != "deterministic":
            raise RuntimeError("the closed-form OU reference needs a deterministic start")
        p = sc.info.params
        mean, var = ou_moments(sc.mean[0], p.get("a", 1.0), p.get("sigma", 0.5), sc.tf - sc.t0)
        return Estimate([(1.0, np.atleast_1d(mean), np.atleast_2d(var))])
    if kind == "duffing_closed_form":
        steps = int(round((sc.tf - sc.t0) / h))
        cf = duffing_closed_form(sc.mean, DuffingParams(**sc.info.params), steps)
        return Estimate([(1.0, cf["state"][-1, :2], cf["cov"][-1])], extra={"closed_form": cf})
    raise RuntimeError(f"unknown reference {kind!r}")  # pragma: no cover - schema guards this


# ---------------------------------------------------------------------------
# coordinates and statistics


def _convert_rows(x: np.ndarray, src: str, dst: str, mu: float) -> np.ndarray:
    cols = convert([x[:, i] for i in range(x.shape[1])], src, dst, mu)
    return np.column_stack([np.broadcast_to(c, (x.shape[0],)) for c in cols])


def to_frame(est: Estimate, sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance in the output frame (UT per component for mixtures)."""
    src = sc.info.coords
    dst = sc.output_frame
    same = dst in ("state", src)
    if est.samples is not None:
        x = est.samples if same else _convert_rows(est.samples, src, dst, sc.info.mu)
        return sample_moments(x)
    comps = []
    for w, mu, cov in est.components:
        if not same:
            pts, wts = ut_sigma(mu, cov)
            mu, cov = weighted_moments(_convert_rows(pts, src, dst, sc.info.mu), wts)
        comps.append((w, mu, cov))
    if len(comps) == 1:
        return comps[0][1], comps[0][2]
    return mixture_moments([GaussKernel(w, mu, cov) for w, mu, cov in comps])


def _max_rel(est, ref) -> float:
    rel = relative_error(est, ref)
    keep = ~np.isnan(rel)
    return float(np.max(rel[keep])) if keep.any() else float("nan")


def _duffing_oracle(est: Estimate, ref: Estimate) -> float:
    sets = est.extra["sets"]
    cf = ref.extra["closed_form"]
    got_noise = np.array([[ms.moment(r) for r in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]] for ms in sets])
    got_central = np.array([ms.central for ms in sets])
    worst = 0.0
    for got, want in ((got_central, cf["central"]), (got_noise, cf["noise"])):
        if got.shape != want.shape:
            raise RuntimeError("closed-form and PLASMA step counts differ")
        nz = want != 0.0
        worst = max(worst, float(np.max(np.abs(got[nz] - want[nz]) / np.abs(want[nz]))) if nz.any() else 0.0)
        worst = max(worst, float(np.max(np.abs(got[~nz]))) if (~nz).any() else 0.0)
    return worst


# ---------------------------------------------------------------------------
# output


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def resolve_out_dir(out_dir=None) -> Path:
    return Path(out_dir or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _versions() -> dict:
    return {"uqprop": uqprop.__version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _effective_config(raw: dict, seed, threads) -> dict:
    cfg = copy.deepcopy(raw)
    if seed is not None:
        cfg["seed"] = int(seed)
    if threads is not None:
        cfg["threads"] = int(threads)
    return cfg


def run_scenario(source, out_dir=None, seed: int | None = None, threads: int | None = None, echo=print) -> RunResult:
    """Run a scenario file, bundled scenario name or config mapping.

    Writes ``mean.csv``, ``covariance.csv``, ``metrics.csv``, method tables
    and ``manifest.json`` below ``<out_dir>/<name>``; ``out_dir`` defaults
    to ``$UQPROP_OUT_DIR`` and then ``./uqprop-out``.
    """
    raw = source if isinstance(source, dict) else read_config(source)
    cfg = _effective_config(raw, seed, threads)
    sc = validate(cfg)
    timer = _Timer()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    echo(f"scenario {sc.name}: method {sc.method['kind']}, reference {sc.reference['kind']}")

    with timer("method"):
        est = run_method(sc, all_steps=sc.reference["kind"] == "duffing_closed_form")
    with timer("reference"):
        ref = run_reference(sc)
    mean, cov = to_frame(est, sc)
    ref_mean = ref_cov = None
    metrics: dict = {}
    checks: list[Check] = []
    tol = sc.reference.get("tolerances", {})
    if ref is not None:
        ref_mean, ref_cov = to_frame(ref, sc)
        metrics["mean_rel"] = _max_rel(mean, ref_mean)
        metrics["cov_diag_rel"] = _max_rel(np.diag(cov), np.diag(ref_cov))
        if np.any(ref_mean != 0):
            metrics["eps_mu"] = eps_mu(mean, ref_mean)
        if np.linalg.eigvalsh(ref_cov)[-1] > 0:
            metrics["eps_lambda"] = eps_lambda(cov, ref_cov)
        if "lf" in est.extra and "eps_mu" in metrics:
            lf_mean, lf_cov = to_frame(Estimate(est.extra["lf"]), sc)
            metrics["lf_eps_mu"] = eps_mu(lf_mean, ref_mean)
            metrics["lf_eps_lambda"] = eps_lambda(lf_cov, ref_cov)
            metrics["eps_mu_ratio"] = metrics["eps_mu"] / metrics["lf_eps_mu"]
            metrics["eps_lambda_ratio_dev"] = abs(metrics["eps_lambda"] / metrics["lf_eps_lambda"] - 1.0)
        if sc.reference["kind"] == "duffing_closed_form":
            metrics["oracle_rel"] = _duffing_oracle(est, ref)
    for name, t in tol.items():
        checks.append(Check(name, metrics.get(name, float("nan")), t))

    out = resolve_out_dir(out_dir) / sc.name
    out.mkdir(parents=True, exist_ok=True)
    files = []
    labels = sc.info.labels(sc.output_frame)
    has_ref = ref_mean is not None
    rows = []
    for i, (nm, unit) in enumerate(labels):
        row = [nm, unit, mean[i]]
        if has_ref:
            row += [ref_mean[i], abs(mean[i] - ref_mean[i]) / abs(ref_mean[i]) if ref_mean[i] != 0 else float("nan")]
        rows.append(row)
    files.append(_write_csv(out / "mean.csv", ["component", "unit", "estimate"] + (["reference", "rel_error"] if has_ref else []), rows))
    rows = []
    for i in range(len(labels)):
        for j in range(i, len(labels)):
            unit = f"{labels[i][1]}*{labels[j][1]}"
            row = [labels[i][0], labels[j][0], unit, cov[i, j]]
            if has_ref:
                row += [ref_cov[i, j], abs(cov[i, j] - ref_cov[i, j]) / abs(ref_cov[i, j]) if ref_cov[i, j] != 0 else float("nan")]
            rows.append(row)
    files.append(
        _write_csv(out / "covariance.csv", ["row", "col", "unit", "estimate"] + (["reference", "rel_error"] if has_ref else []), rows)
    )
    tol_rows = [[k, v, tol.get(k, ""), ("PASS" if v <= tol[k] else "FAIL") if k in tol else ""] for k, v in metrics.items()]
    files.append(_write_csv(out / "metrics.csv", ["metric", "value", "tolerance", "status"], tol_rows))
    if "sets" in est.extra:
        header, mrows = moment_rows(est.extra["sets"])
        files.append(_write_csv(out / "noise_moments.csv", header, mrows))
        cl = [f"{nm}_{unit}".replace("/", "_per_") for nm, unit in sc.info.labels()]
        files.append(_write_csv(out / "central.csv", ["time_s", *cl], [[ms.time, *ms.central.tolist()] for ms in est.extra["sets"]]))
    if "manifold" in est.extra:
        files.append(_write_csv(out / "mixture.csv", *mixture_rows(est.extra["manifold"])))
    if "mf" in est.extra:
        files.append(_write_csv(out / "kernels.csv", *est.extra["mf"].kernel_rows()))
    if sc.write_samples:
        for tag, e in (("samples", est), ("reference_samples", ref)):
            if e is not None and "mc" in e.extra:
                files.append(write_samples(out / f"{tag}.csv", e.extra["mc"], [nm for nm, _ in sc.info.labels()]))
    manifest = {
        "name": sc.name,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "seed": sc.seed,
        "threads": sc.threads,
        "started_utc": started,
        "wall_time_s": timer.times,
        "versions": _versions(),
        "argv": sys.argv,
        "metrics": metrics,
        "checks": [{"name": c.name, "value": c.value, "tol": c.tol, "passed": c.passed} for c in checks],
        "files": [f.name for f in files],
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, default=float))
    files.append(mpath)
    for c in checks:
        echo(c.line())
    echo(f"wrote {len(files)} files to {out} ({sum(timer.times.values()):.1f} s)")
    return RunResult(sc.name, out, checks, metrics, files, timer.times, mean, cov, ref_mean, ref_cov)
