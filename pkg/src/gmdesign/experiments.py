"""Scenario runner: sweeps, design baselines, CSV/SVG emission.

What a sweep does is determined by its variable:

``rotation_angle``
    The transfer matrix is the plane rotation of each grid angle; the
    exact-posterior estimator is scored at every angle.  No optimization.
``gain_db``
    The transfer matrix is a I with a = 10^(dB/10); the exact posterior,
    affine and genie estimators are scored.  No optimization.  The ``fig7``
    scenario additionally records raw observation samples, tagged with the
    latent noise component, at every grid point.
``snr_db``
    Per grid point, the stochastic-ascent design is run (warm-started from
    the previous point when configured), an affine-optimal design is
    computed as a baseline, and three rows are scored on common draws:
    designed matrix + exact posterior, untuned identity-style matrix +
    exact posterior, affine-designed matrix + affine estimator.

Grid points use sub-streams derived from (seed, grid index); evaluation
within a point is block-deterministic.  Output files are byte-stable for
a fixed config and seed, whatever the worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from . import __version__
from .config import ScenarioConfig, emit_config, initial_design, scaled_noise, snr_to_scale
from .estimators import CSV_COLUMNS, EvaluationReport, evaluate_designs
from .mixture import RandomStream
from .model import build_model
from .optimizer import StepSchedule, StoppingRule, lmmse_design, robbins_monro, save_matrix
from .svgchart import line_chart, scatter_panels

__all__ = ["PointResult", "SweepResult", "run_scenario", "emit_outputs", "SCATTER_SAMPLES"]

SCATTER_SAMPLES = 400

SAMPLES_COLUMNS = ("scenario", "gain_db", "y1", "y2", "noise_component", "seed")

# Sub-stream allocation below each grid point's stream.
_EVAL_SUBSTREAM = 0
_DESIGN_SUBSTREAM = 1
_SCATTER_SUBSTREAM = 2


@dataclass
class PointResult:
    sweep_value: float
    designs: dict[str, NDArray]
    reports: dict[str, EvaluationReport]
    samples: NDArray | None = None  # rows (y_1 .. y_M, latent noise index)


@dataclass
class SweepResult:
    config: ScenarioConfig
    estimator_tags: list[str]
    points: list[PointResult]
    config_hash: str
    code_version: str


def run_scenario(config: ScenarioConfig, workers: int = 1, on_point=None) -> SweepResult:
    """Execute one configured sweep; see the module docstring for semantics.

    ``on_point(index, point_result)`` is invoked in grid order as points
    complete, letting callers flush partial results.
    """
    workers = max(1, int(workers))
    signal = config.signal()
    noise = config.noise()
    variable = config.sweep.variable

    if variable == "rotation_angle":
        tags = ["mmse"]
        jobs = [
            _RotationPoint(config, signal, noise, value, idx)
            for idx, value in enumerate(config.sweep.grid)
        ]
        points = _run_independent(jobs, workers, on_point)
    elif variable == "gain_db":
        tags = ["mmse", "lmmse", "genie"]
        jobs = [
            _GainPoint(config, signal, noise, value, idx)
            for idx, value in enumerate(config.sweep.grid)
        ]
        points = _run_independent(jobs, workers, on_point)
    else:
        tags = ["rm_mmse", "identity_mmse", "lmmse_lmmse"]
        points = _run_design_sweep(config, signal, noise, workers, on_point)

    payload = emit_config(config).encode("utf-8")
    return SweepResult(
        config=config,
        estimator_tags=tags,
        points=points,
        config_hash=hashlib.sha256(payload).hexdigest(),
        code_version=__version__,
    )


def _point_stream(config: ScenarioConfig, index: int) -> RandomStream:
    return RandomStream(config.seed, 0).substream(index)


def _run_independent(jobs, workers, on_point):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(job) for job in jobs]
            points = []
            for idx, fut in enumerate(futures):
                point = fut.result()
                points.append(point)
                if on_point is not None:
                    on_point(idx, point)
    else:
        points = []
        for idx, job in enumerate(jobs):
            point = job()
            points.append(point)
            if on_point is not None:
                on_point(idx, point)
    return points


class _RotationPoint:
    def __init__(self, config, signal, noise, value, index):
        self.config, self.signal, self.noise = config, signal, noise
        self.value, self.index = value, index

    def __call__(self) -> PointResult:
        c, s = np.cos(self.value), np.sin(self.value)
        transfer = np.array([[c, -s], [s, c]])
        model = build_model(transfer, self.signal, self.noise)
        stream = _point_stream(self.config, self.index).substream(_EVAL_SUBSTREAM)
        reports = evaluate_designs(
            [("mmse", model, "mmse")], self.config.evaluation_samples, stream
        )
        return PointResult(self.value, {"mmse": transfer}, reports)


class _GainPoint:
    def __init__(self, config, signal, noise, value, index):
        self.config, self.signal, self.noise = config, signal, noise
        self.value, self.index = value, index

    def __call__(self) -> PointResult:
        gain = snr_to_scale(self.config, self.value)
        transfer = gain * np.eye(self.noise.dim, self.signal.dim)
        model = build_model(transfer, self.signal, self.noise)
        point = _point_stream(self.config, self.index)
        reports = evaluate_designs(
            [(tag, model, tag) for tag in ("mmse", "lmmse", "genie")],
            self.config.evaluation_samples,
            point.substream(_EVAL_SUBSTREAM),
        )
        samples = None
        if self.config.scenario == "fig7":
            gen = point.substream(_SCATTER_SUBSTREAM).generator()
            x, _ = self.signal.sample(gen, SCATTER_SAMPLES)
            nv, lidx = self.noise.sample(gen, SCATTER_SAMPLES)
            y = x @ transfer.T + nv
            samples = np.column_stack([y, lidx.astype(float)])
        return PointResult(
            self.value, {tag: transfer for tag in ("mmse", "lmmse", "genie")}, reports, samples
        )


def _run_design_sweep(config, signal, noise_template, workers, on_point):
    """snr_db sweep: per-point stochastic design plus baselines."""
    warm = config.optimizer.warm_start
    points: list[PointResult] = []
    warm_param = None
    if warm:
        for idx, value in enumerate(config.sweep.grid):
            point, warm_param = _design_point(
                config, signal, noise_template, value, idx, warm_param, workers
            )
            points.append(point)
            if on_point is not None:
                on_point(idx, point)
        return points
    jobs = [
        _ColdDesignPoint(config, signal, noise_template, value, idx)
        for idx, value in enumerate(config.sweep.grid)
    ]
    return _run_independent(jobs, workers, on_point)


class _ColdDesignPoint:
    def __init__(self, config, signal, noise_template, value, index):
        self.args = (config, signal, noise_template, value, index)

    def __call__(self) -> PointResult:
        return _design_point(*self.args, None, 1)[0]


def _design_point(config, signal, noise_template, value, index, warm_param, workers):
    spec = config.constraint
    if spec.kind in ("pilot", "frobenius_power"):
        power = snr_to_scale(config, value)
        constraint = replace(spec, power=power).build()
        noise = noise_template
        point_config = replace(config, constraint=replace(spec, power=power))
    else:
        scale = snr_to_scale(config, value)
        constraint = spec.build()
        noise = scaled_noise(noise_template, scale)
        point_config = config

    identity_param = initial_design(point_config)
    start = identity_param
    if warm_param is not None:
        try:
            start = constraint.project(np.asarray(warm_param, dtype=float))
        except ValueError:
            start = identity_param

    def builder(param):
        return build_model(constraint.to_transfer(param), signal, noise)

    point = _point_stream(config, index)
    opt = config.optimizer
    trace = robbins_monro(
        builder,
        constraint,
        start,
        StepSchedule(opt.step0, opt.tau),
        StoppingRule(opt.tolerance, opt.max_iterations),
        point.substream(_DESIGN_SUBSTREAM),
        batch_size=opt.batch_size,
    )
    rm_param = trace.final
    lmmse_param = lmmse_design(
        constraint, signal.moments(), noise.moments(), identity_param
    )

    entries = [
        ("rm_mmse", builder(rm_param), "mmse"),
        ("identity_mmse", builder(identity_param), "mmse"),
        ("lmmse_lmmse", builder(lmmse_param), "lmmse"),
    ]
    reports = evaluate_designs(
        entries, config.evaluation_samples, point.substream(_EVAL_SUBSTREAM), workers
    )
    designs = {
        "rm_mmse": rm_param,
        "identity_mmse": identity_param,
        "lmmse_lmmse": lmmse_param,
    }
    return PointResult(value, designs, reports), (rm_param if config.optimizer.warm_start else None)


# ----------------------------------------------------------------------
# output emission
# ----------------------------------------------------------------------


def csv_rows(result: SweepResult):
    """Report rows in (grid order) x (estimator order), matching CSV_COLUMNS."""
    for point in result.points:
        for tag in result.estimator_tags:
            yield point.reports[tag].csv_row(result.config.scenario, point.sweep_value)


def results_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for row in csv_rows(result):
        writer.writerow(row)
    return buf.getvalue()


def samples_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(SAMPLES_COLUMNS)
    for point in result.points:
        if point.samples is None:
            continue
        for row in point.samples:
            writer.writerow(
                [
                    result.config.scenario,
                    format(point.sweep_value, ".17g"),
                    format(row[0], ".17g"),
                    format(row[1], ".17g"),
                    str(int(row[-1])),
                    str(result.config.seed),
                ]
            )
    return buf.getvalue()


def emit_outputs(result: SweepResult, output_dir: str | None = None) -> list[str]:
    """Write results.csv, config-echo.json, provenance.json and charts.

    Design sweeps additionally store every per-point design matrix as a
    plain-text matrix file.  Returns the list of paths written.
    """
    outdir = output_dir if output_dir is not None else result.config.output_dir
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {outdir}: {exc}") from exc
    written = []

    def emit(name: str, text: str):
        path = os.path.join(outdir, name)
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise RuntimeError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    emit("results.csv", results_csv_text(result))
    emit("config-echo.json", emit_config(result.config))
    emit(
        "provenance.json",
        json.dumps(
            {
                "config_hash": result.config_hash,
                "code_version": result.code_version,
                "seed": result.config.seed,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )

    x_label = {
        "rotation_angle": "rotation angle (rad)",
        "gain_db": "gain (dB)",
        "snr_db": "SNR (dB)",
    }[result.config.sweep.variable]
    xs = [p.sweep_value for p in result.points]
    series = []
    for tag in result.estimator_tags:
        ys = [10.0 * np.log10(p.reports[tag].nmse) for p in result.points]
        series.append((tag, xs, ys))
    emit("chart.svg", line_chart(series, x_label, "NMSE (dB)", result.config.scenario))

    if any(p.samples is not None for p in result.points):
        emit("samples.csv", samples_csv_text(result))
        panels = []
        for point in result.points:
            if point.samples is None:
                continue
            pts = [(row[0], row[1], int(row[-1])) for row in point.samples]
            panels.append((f"gain {format(point.sweep_value, 'g')} dB", pts))
        emit("scatter.svg", scatter_panels(panels, "y1", "y2", result.config.scenario))

    if result.config.sweep.variable == "snr_db":
        for idx, point in enumerate(result.points):
            for tag, design in point.designs.items():
                path = os.path.join(outdir, f"design_p{idx}_{tag}.txt")
                save_matrix(path, design)
                written.append(path)
    return written
