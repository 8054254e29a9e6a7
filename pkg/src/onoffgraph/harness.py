"""Monte Carlo replication campaigns and their file outputs.

A campaign simulates R independent traces, runs the configured estimator on
each, and writes per-replication estimates plus histogram/QQ summary data.
Replication r uses a seed derived from the base seed by a fixed SplitMix64
finalizer, and results are gathered in replication order, so every output
byte is determined by (config, base seed) alone — independent of worker
count or scheduling.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .asymp import delta_method_cov, geometric_moment_cov
from .moments import (
    empirical_moments,
    estimate_from_subgraph,
    estimator_for,
    moments_needed,
)
from .simulate import ModelSpec, simulate_trace

_MASK64 = (1 << 64) - 1

_PARAM_ORDER = {
    "geometric_geometric": ("p", "q"),
    "pareto_pareto": ("alpha", "beta"),
    "weibull_geometric": ("alpha", "q"),
    "pareto_geometric": ("C", "alpha", "q"),
}

_FAMILY_BY_KINDS = {
    ("geometric", "geometric"): "geometric_geometric",
    ("pareto", "pareto"): "pareto_pareto",
    ("weibull", "geometric"): "weibull_geometric",
    ("pareto", "geometric"): "pareto_geometric",
}


def mix_seed(base_seed: int, rep: int) -> int:
    """Derive the replication seed: SplitMix64 finalizer over a spread index.

    The replication index is spread by the golden-ratio constant before the
    xor so that nearby indices land in distant states.
    """
    z = (base_seed ^ (rep * 0x9E3779B97F4A7C15)) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def infer_family(model: ModelSpec) -> str:
    kinds = (model.on_law.to_config()["kind"], model.off_law.to_config()["kind"])
    try:
        return _FAMILY_BY_KINDS[kinds]
    except KeyError:
        raise ValueError(f"no estimator family for law kinds {kinds}") from None


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one campaign."""

    model: ModelSpec
    kind: str = "edges"  # edges | triangles | wedges
    K: int = 10_000
    R: int = 100
    base_seed: int = 0
    family: str | None = None
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("need R >= 1")
        if self.K < 2:
            raise ValueError("need K >= 2")
        if self.family is None:
            self.family = infer_family(self.model)
        if self.kind != "edges" and self.family != "geometric_geometric":
            raise ValueError(
                f"{self.kind} observations support only the geometric/geometric family")
        if self.workers < 1:
            self.workers = _default_workers()

    @property
    def param_names(self) -> tuple:
        return _PARAM_ORDER[self.family]

    def to_json(self) -> dict:
        cfg = self.model.to_config()
        cfg.update({"kind": self.kind, "K": self.K, "reps": self.R,
                    "seed": self.base_seed, "family": self.family})
        return cfg

    @classmethod
    def from_json(cls, cfg: dict, **overrides) -> "ExperimentConfig":
        model = ModelSpec.from_config(cfg)
        kwargs = {
            "kind": cfg.get("kind", "edges"),
            "K": cfg.get("K", 10_000),
            "R": cfg.get("reps", 100),
            "base_seed": cfg.get("seed", 0),
            "family": cfg.get("family"),
            "workers": cfg.get("workers", 0) or _default_workers(),
        }
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(model=model, **kwargs)


def _default_workers() -> int:
    env = os.environ.get("RG_WORKERS")
    return max(1, int(env)) if env else 1


@dataclass
class CampaignSummary:
    config: ExperimentConfig
    rows: list  # one dict per replication: rep, seed, params or None, flags
    means: dict
    sds: dict
    predicted_sds: dict
    histograms: dict  # param -> (edges, counts)
    qq: dict  # param -> (theoretical, sample) standardized quantiles
    n_flagged: int
    wall_clock: float = 0.0  # informational only; never serialized

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "R": self.config.R,
            "n_flagged": self.n_flagged,
            "params": {
                name: {
                    "mean": self.means[name],
                    "sd": self.sds[name],
                    "predicted_sd": self.predicted_sds.get(name),
                }
                for name in self.config.param_names
            },
        }


def _run_replication(args):
    """One simulate-and-estimate unit; must stay module-level for pickling."""
    cfg_json, rep = args
    cfg = ExperimentConfig.from_json(cfg_json)
    seed = mix_seed(cfg.base_seed, rep)
    rng = np.random.default_rng(seed)
    trace = simulate_trace(cfg.model, cfg.K, rng, kind=cfg.kind)
    row = {"rep": rep, "seed": seed, "params": None, "flags": []}
    try:
        moms = empirical_moments(trace, moments_needed(cfg.family))
        if cfg.kind == "edges":
            report = estimator_for(cfg.family)(moms)
        else:
            report = estimate_from_subgraph(moms)
        row["params"] = {k: float(v) for k, v in report.params.items()}
        row["flags"] = list(report.flags)
    except Exception as exc:  # noqa: BLE001 - flagged, never aborts the campaign
        row["flags"] = [f"error:{type(exc).__name__}:{exc}"]
    return rep, row


def run_campaign(cfg: ExperimentConfig) -> CampaignSummary:
    """Run all replications and aggregate; output is scheduling-independent."""
    t0 = time.perf_counter()
    tasks = [(cfg.to_json(), rep) for rep in range(1, cfg.R + 1)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_replication, tasks, chunksize=1))
    else:
        results = [_run_replication(t) for t in tasks]
    results.sort(key=lambda item: item[0])
    rows = [row for _, row in results]

    names = cfg.param_names
    good = [r["params"] for r in rows if r["params"] is not None and not r["flags"]]
    n_flagged = cfg.R - len(good)
    means, sds, hists, qq = {}, {}, {}, {}
    for name in names:
        vals = np.array([g[name] for g in good])
        means[name] = float(vals.mean()) if len(vals) else None
        sds[name] = float(vals.std(ddof=1)) if len(vals) > 1 else None
        hists[name] = _histogram(vals)
        qq[name] = _qq_pairs(vals)
    predicted = _predicted_sds(cfg, means)
    return CampaignSummary(config=cfg, rows=rows, means=means, sds=sds,
                           predicted_sds=predicted, histograms=hists, qq=qq,
                           n_flagged=n_flagged,
                           wall_clock=time.perf_counter() - t0)


def _predicted_sds(cfg, means):
    """Delta-method sd prediction, available for geometric edge campaigns."""
    if cfg.kind != "edges" or cfg.family != "geometric_geometric":
        return {}
    p, q = means.get("p"), means.get("q")
    if p is None or q is None or not (0 < p < 1 and 0 < q < 1):
        return {}
    pc = delta_method_cov(cfg.model.n, p, q, geometric_moment_cov(cfg.model.n, p, q))
    sd_p, sd_q = pc.sd(cfg.K)
    return {"p": float(sd_p), "q": float(sd_q)}


def _histogram(vals, min_bins=10):
    """Freedman-Diaconis bins widened to at least min_bins."""
    if len(vals) == 0:
        return np.array([]), np.array([])
    if len(vals) == 1 or np.ptp(vals) == 0.0:
        edges = np.linspace(vals[0] - 0.5, vals[0] + 0.5, min_bins + 1)
        counts, _ = np.histogram(vals, bins=edges)
        return edges, counts
    edges = np.histogram_bin_edges(vals, bins="fd")
    if len(edges) - 1 < min_bins:
        edges = np.linspace(edges[0], edges[-1], min_bins + 1)
    counts, _ = np.histogram(vals, bins=edges)
    return edges, counts


def _qq_pairs(vals):
    """Standardized order statistics against normal quantiles."""
    R = len(vals)
    if R < 2:
        return np.array([]), np.array([])
    sd = vals.std(ddof=1)
    if sd == 0.0:
        return np.array([]), np.array([])
    sample = np.sort((vals - vals.mean()) / sd)
    theo = norm.ppf((np.arange(1, R + 1) - 0.5) / R)
    return theo, sample


# ---------------------------------------------------------------------------
# File emission
# ---------------------------------------------------------------------------


def emit_outputs(summary: CampaignSummary, out_dir) -> list:
    """Write estimates.csv, summary.json, and per-parameter hist/QQ CSVs."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        names = summary.config.param_names

        path = out / "estimates.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rep", "seed", *names, "flags"])
            for row in summary.rows:
                params = row["params"] or {}
                writer.writerow([
                    row["rep"], row["seed"],
                    *(repr(params[n]) if n in params else "" for n in names),
                    ";".join(row["flags"]),
                ])
        written.append(path)

        path = out / "summary.json"
        path.write_text(json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
        written.append(path)

        for name in names:
            edges, counts = summary.histograms[name]
            path = out / f"hist_{name}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_left", "bin_right", "count"])
                for i in range(len(counts)):
                    writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])),
                                     int(counts[i])])
            written.append(path)

            theo, sample = summary.qq[name]
            path = out / f"qq_{name}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["theoretical_quantile", "sample_quantile"])
                for t, s in zip(theo, sample):
                    writer.writerow([repr(float(t)), repr(float(s))])
            written.append(path)
        return written
    except OSError as exc:
        raise OSError(f"writing campaign outputs under {out}: {exc}") from exc
