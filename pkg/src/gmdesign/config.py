"""Experiment configuration: JSON schema, validation, builtin scenarios.

A config fully describes one sweep experiment: the input mixtures, the
feasible set of the design parameter, the sweep variable and grid, the
optimizer settings, and the evaluation budget.  Named scenarios bundle
ready-made parameter sets so each experiment reproduces with one command;
``custom`` uses the same machinery with user-supplied parameters.

The JSON schema is versioned and strict: unknown keys are rejected, and
every validation error names the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constraints import (
    Constraint,
    FactoredPrecoder,
    FrobeniusPower,
    Orthogonal,
    PilotStructure,
    Unconstrained,
)
from .mixture import GaussianMixture

__all__ = [
    "ConfigError",
    "MixtureSpec",
    "ConstraintSpec",
    "SweepSpec",
    "OptimizerParams",
    "ScenarioConfig",
    "parse_config",
    "parse_config_dict",
    "emit_config",
    "builtin_config",
    "snr_to_scale",
    "SCENARIO_NAMES",
]

SCHEMA_VERSION = 1
SCENARIO_NAMES = ("fig3", "fig4", "fig5", "fig6", "fig7", "custom")
SWEEP_VARIABLES = ("rotation_angle", "snr_db", "gain_db")
CONSTRAINT_KINDS = (
    "unconstrained",
    "orthogonal",
    "frobenius_power",
    "factored_precoder",
    "pilot",
)


class ConfigError(ValueError):
    """A configuration failed parsing or validation."""


def _nested_tuple(x):
    if isinstance(x, (list, tuple)):
        return tuple(_nested_tuple(v) for v in x)
    return float(x)


def _nested_list(x):
    if isinstance(x, tuple):
        return [_nested_list(v) for v in x]
    return x


@dataclass(frozen=True)
class MixtureSpec:
    """Plain-data mixture parameters, buildable into a GaussianMixture."""

    weights: tuple
    means: tuple
    covariances: tuple

    def build(self, what: str) -> GaussianMixture:
        try:
            return GaussianMixture.from_parameters(
                list(self.weights),
                [np.asarray(m) for m in self.means],
                [np.asarray(c) for c in self.covariances],
            )
        except ValueError as exc:
            raise ConfigError(f"{what}: {exc}") from exc

    @classmethod
    def from_dict(cls, data: dict, what: str) -> "MixtureSpec":
        data = dict(data)
        out = {}
        for key in ("weights", "means", "covariances"):
            if key not in data:
                raise ConfigError(f"{what}.{key}: missing")
            try:
                out[key] = _nested_tuple(data.pop(key))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{what}.{key}: not numeric") from exc
        if data:
            raise ConfigError(f"{what}: unknown keys {sorted(data)}")
        return cls(**out)

    def to_dict(self) -> dict:
        return {
            "weights": _nested_list(self.weights),
            "means": _nested_list(self.means),
            "covariances": _nested_list(self.covariances),
        }

    @classmethod
    def from_mixture(cls, mix: GaussianMixture) -> "MixtureSpec":
        return cls(
            weights=tuple(float(c.weight) for c in mix.components),
            means=tuple(tuple(map(float, c.mean)) for c in mix.components),
            covariances=tuple(
                tuple(tuple(map(float, row)) for row in c.covariance) for c in mix.components
            ),
        )


@dataclass(frozen=True)
class ConstraintSpec:
    """Plain-data constraint description, buildable into a Constraint."""

    kind: str
    power: float | None = None
    channel: tuple | None = None
    inner: "ConstraintSpec | None" = None
    receive_dim: int | None = None
    pilot_shape: tuple | None = None

    def build(self, what: str = "constraint") -> Constraint:
        if self.kind == "unconstrained":
            return Unconstrained()
        if self.kind == "orthogonal":
            return Orthogonal()
        if self.kind == "frobenius_power":
            return FrobeniusPower(self.power)
        if self.kind == "factored_precoder":
            return FactoredPrecoder(np.asarray(self.channel), self.inner.build(what + ".inner"))
        if self.kind == "pilot":
            return PilotStructure(
                receive_dim=self.receive_dim,
                s_shape=tuple(int(v) for v in self.pilot_shape),
                power=self.power,
            )
        raise ConfigError(f"{what}.kind: unknown constraint kind {self.kind!r}")

    @classmethod
    def from_dict(cls, data: dict, what: str = "constraint") -> "ConstraintSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind not in CONSTRAINT_KINDS:
            raise ConfigError(f"{what}.kind: expected one of {CONSTRAINT_KINDS}, got {kind!r}")
        out = {"kind": kind}
        if kind in ("frobenius_power", "pilot"):
            if "power" not in data:
                raise ConfigError(f"{what}.power: missing")
            out["power"] = float(data.pop("power"))
            if out["power"] <= 0:
                raise ConfigError(f"{what}.power: must be positive")
        if kind == "factored_precoder":
            if "channel" not in data:
                raise ConfigError(f"{what}.channel: missing")
            out["channel"] = _nested_tuple(data.pop("channel"))
            if "inner" not in data:
                raise ConfigError(f"{what}.inner: missing")
            out["inner"] = cls.from_dict(data.pop("inner"), what + ".inner")
        if kind == "pilot":
            for key in ("receive_dim", "pilot_shape"):
                if key not in data:
                    raise ConfigError(f"{what}.{key}: missing")
            out["receive_dim"] = int(data.pop("receive_dim"))
            shape = data.pop("pilot_shape")
            if len(shape) != 2:
                raise ConfigError(f"{what}.pilot_shape: expected [rows, cols]")
            out["pilot_shape"] = (int(shape[0]), int(shape[1]))
        if data:
            raise ConfigError(f"{what}: unknown keys {sorted(data)}")
        return cls(**out)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.power is not None:
            out["power"] = self.power
        if self.channel is not None:
            out["channel"] = _nested_list(self.channel)
        if self.inner is not None:
            out["inner"] = self.inner.to_dict()
        if self.receive_dim is not None:
            out["receive_dim"] = self.receive_dim
        if self.pilot_shape is not None:
            out["pilot_shape"] = list(self.pilot_shape)
        return out


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        variable = data.pop("variable", None)
        if variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep.variable: expected one of {SWEEP_VARIABLES}, got {variable!r}"
            )
        grid = data.pop("grid", None)
        if data:
            raise ConfigError(f"sweep: unknown keys {sorted(data)}")
        if not grid:
            raise ConfigError("sweep.grid: must be a nonempty list")
        try:
            grid = tuple(float(v) for v in grid)
        except (TypeError, ValueError) as exc:
            raise ConfigError("sweep.grid: not numeric") from exc
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep.grid: must be strictly increasing")
        return cls(variable=variable, grid=grid)

    def to_dict(self) -> dict:
        return {"variable": self.variable, "grid": list(self.grid)}


@dataclass(frozen=True)
class OptimizerParams:
    step0: float = 0.05
    tau: float = 200.0
    tolerance: float = 1e-4
    max_iterations: int = 20000
    batch_size: int = 1
    warm_start: bool = True

    @classmethod
    def from_dict(cls, data: dict) -> "OptimizerParams":
        data = dict(data)
        kwargs = {}
        casts = {
            "step0": float,
            "tau": float,
            "tolerance": float,
            "max_iterations": int,
            "batch_size": int,
            "warm_start": bool,
        }
        for key, cast in casts.items():
            if key in data:
                kwargs[key] = cast(data.pop(key))
        if data:
            raise ConfigError(f"optimizer: unknown keys {sorted(data)}")
        params = cls(**kwargs)
        if params.step0 <= 0:
            raise ConfigError("optimizer.step0: must be positive")
        if params.tau <= 0:
            raise ConfigError("optimizer.tau: must be positive")
        if params.tolerance < 0:
            raise ConfigError("optimizer.tolerance: must be nonnegative")
        if params.max_iterations < 0:
            raise ConfigError("optimizer.max_iterations: must be nonnegative")
        if params.batch_size < 1:
            raise ConfigError("optimizer.batch_size: must be at least 1")
        return params

    def to_dict(self) -> dict:
        return {
            "step0": self.step0,
            "tau": self.tau,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "batch_size": self.batch_size,
            "warm_start": self.warm_start,
        }


@dataclass(frozen=True)
class ScenarioConfig:
    """One fully-resolved experiment description."""

    scenario: str
    signal_mixture: MixtureSpec
    noise_mixture: MixtureSpec
    sweep: SweepSpec
    constraint: ConstraintSpec | None = None
    optimizer: OptimizerParams = field(default_factory=OptimizerParams)
    evaluation_samples: int = 1_000_000
    seed: int = 0
    output_dir: str = "out"
    schema_version: int = SCHEMA_VERSION

    def signal(self) -> GaussianMixture:
        return self.signal_mixture.build("signal_mixture")

    def noise(self) -> GaussianMixture:
        return self.noise_mixture.build("noise_mixture")

    def build_constraint(self) -> Constraint:
        if self.constraint is None:
            raise ConfigError("constraint: required for this scenario")
        return self.constraint.build()

    def to_dict(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "scenario": self.scenario,
            "seed": self.seed,
            "evaluation_samples": self.evaluation_samples,
            "output_dir": self.output_dir,
            "signal_mixture": self.signal_mixture.to_dict(),
            "noise_mixture": self.noise_mixture.to_dict(),
            "sweep": self.sweep.to_dict(),
            "optimizer": self.optimizer.to_dict(),
        }
        if self.constraint is not None:
            out["constraint"] = self.constraint.to_dict()
        return out


def parse_config_dict(data: dict) -> ScenarioConfig:
    """Validate a raw config mapping; defaults applied, unknown keys rejected."""
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object at top level")
    data = dict(data)

    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")

    scenario = data.pop("scenario", None)
    if scenario not in SCENARIO_NAMES:
        raise ConfigError(f"scenario: expected one of {SCENARIO_NAMES}, got {scenario!r}")

    for key in ("signal_mixture", "noise_mixture", "sweep"):
        if key not in data:
            raise ConfigError(f"{key}: missing")
    signal_spec = MixtureSpec.from_dict(data.pop("signal_mixture"), "signal_mixture")
    noise_spec = MixtureSpec.from_dict(data.pop("noise_mixture"), "noise_mixture")
    sweep = SweepSpec.from_dict(data.pop("sweep"))

    constraint = None
    if "constraint" in data:
        constraint = ConstraintSpec.from_dict(data.pop("constraint"))

    optimizer = OptimizerParams.from_dict(data.pop("optimizer", {}))

    try:
        evaluation_samples = int(data.pop("evaluation_samples", 1_000_000))
    except (TypeError, ValueError) as exc:
        raise ConfigError("evaluation_samples: not an integer") from exc
    if evaluation_samples < 1:
        raise ConfigError("evaluation_samples: must be at least 1")
    seed = int(data.pop("seed", 0))
    if seed < 0:
        raise ConfigError("seed: must be nonnegative")
    output_dir = str(data.pop("output_dir", f"out/{scenario}"))

    if data:
        raise ConfigError(f"config: unknown keys {sorted(data)}")

    config = ScenarioConfig(
        scenario=scenario,
        signal_mixture=signal_spec,
        noise_mixture=noise_spec,
        sweep=sweep,
        constraint=constraint,
        optimizer=optimizer,
        evaluation_samples=evaluation_samples,
        seed=seed,
        output_dir=output_dir,
        schema_version=version,
    )
    _validate_semantics(config)
    return config


def _validate_semantics(config: ScenarioConfig) -> None:
    signal = config.signal()
    noise = config.noise()
    variable = config.sweep.variable

    if variable == "rotation_angle":
        if signal.dim != 2 or noise.dim != 2:
            raise ConfigError("sweep.variable: rotation_angle needs 2-D signal and noise")
    elif variable == "gain_db":
        if signal.dim != noise.dim:
            raise ConfigError(
                "sweep.variable: gain_db needs equal signal and noise dimensions"
            )
    else:  # snr_db
        if config.constraint is None:
            raise ConfigError("constraint: required for snr_db sweeps")
        bounded = config.constraint
        if bounded.kind == "factored_precoder":
            bounded = bounded.inner
        if bounded.kind == "unconstrained":
            # an unbounded feasible set has no power budget to sweep and the
            # affine-design baseline would diverge along it
            raise ConfigError("constraint: snr_db sweeps need a bounded feasible set")
        constraint = config.build_constraint()
        initial = initial_design(config)
        transfer = constraint.to_transfer(initial)
        if transfer.shape != (noise.dim, signal.dim):
            raise ConfigError(
                f"constraint: realizes transfer shape {transfer.shape}, "
                f"model needs {(noise.dim, signal.dim)}"
            )


def initial_design(config: ScenarioConfig) -> np.ndarray:
    """Feasible starting design for snr_db sweeps: identity-like, projected."""
    constraint = config.build_constraint()
    if isinstance(constraint, PilotStructure):
        n, r = constraint.s_shape
        return constraint.project(np.eye(n, r))
    dim = config.signal().dim
    if isinstance(constraint, FactoredPrecoder):
        cols = np.asarray(constraint.channel).shape[1]
        return constraint.project(np.eye(cols, dim))
    if isinstance(constraint, FrobeniusPower):
        return constraint.project(np.eye(config.noise().dim, dim))
    return np.eye(config.noise().dim, dim)


def parse_config(path) -> ScenarioConfig:
    """Load and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at {path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return parse_config_dict(data)


def emit_config(config: ScenarioConfig) -> str:
    """Serialize a config; ``parse_config_dict(json.loads(...))`` round-trips."""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


# ----------------------------------------------------------------------
# SNR bookkeeping
# ----------------------------------------------------------------------


def snr_to_scale(config: ScenarioConfig, snr_db: float) -> float:
    """Map one grid value to the scalar it controls.

    * ``gain_db`` sweeps: the transfer gain a = 10^(dB/10).
    * ``snr_db`` sweeps with a pilot/power constraint: the pilot power
      budget solving SNR = power / tr(Cov_n).
    * ``snr_db`` sweeps with a precoder-style constraint: the noise
      covariance scale solving SNR = tr(Cov_x) / tr(Cov_n(scale)), where
      the scale multiplies component covariances and leaves means alone.
    """
    variable = config.sweep.variable
    if variable == "gain_db":
        return float(10.0 ** (snr_db / 10.0))
    if variable == "rotation_angle":
        raise ConfigError("sweep.variable: rotation_angle has no SNR scale")
    snr_lin = 10.0 ** (snr_db / 10.0)
    if snr_lin <= 0 or not math.isfinite(snr_lin):
        raise ConfigError(f"sweep.grid: SNR {snr_db} dB is not usable")
    noise = config.noise()
    spec = config.constraint
    if spec is not None and spec.kind in ("pilot", "frobenius_power"):
        tr_noise = float(np.trace(noise.moments()[1]))
        return snr_lin * tr_noise
    # precoder style: solve for the noise covariance scale
    signal = config.signal()
    tr_signal = float(np.trace(signal.moments()[1]))
    target = tr_signal / snr_lin
    mean_part = float(np.trace(noise.moments()[1])) - sum(
        c.weight * float(np.trace(c.covariance)) for c in noise.components
    )
    comp_part = sum(c.weight * float(np.trace(c.covariance)) for c in noise.components)
    scale = (target - mean_part) / comp_part
    if scale <= 0:
        raise ConfigError(
            f"sweep.grid: SNR {snr_db} dB is unreachable by scaling noise covariances"
        )
    return float(scale)


def scaled_noise(noise: GaussianMixture, scale: float) -> GaussianMixture:
    """Noise mixture with every component covariance multiplied by ``scale``."""
    return GaussianMixture.from_parameters(
        [c.weight for c in noise.components],
        [c.mean for c in noise.components],
        [scale * c.covariance for c in noise.components],
    )


# ----------------------------------------------------------------------
# builtin scenarios
# ----------------------------------------------------------------------


def builtin_config(name: str) -> ScenarioConfig:
    """Ready-made config for a named scenario."""
    if name == "fig3":
        bimodal = MixtureSpec(
            weights=(0.5, 0.5),
            means=((2.0, 0.0), (-2.0, 0.0)),
            covariances=(((1.0, 0.0), (0.0, 1.0)), ((1.0, 0.0), (0.0, 1.0))),
        )
        return ScenarioConfig(
            scenario="fig3",
            signal_mixture=bimodal,
            noise_mixture=bimodal,
            sweep=SweepSpec("rotation_angle", tuple(2.0 * math.pi * i / 64 for i in range(64))),
            constraint=ConstraintSpec(kind="orthogonal"),
            optimizer=OptimizerParams(
                step0=0.05, tau=200.0, tolerance=1e-4, max_iterations=50000
            ),
            evaluation_samples=100_000,
            seed=0,
            output_dir="out/fig3",
        )
    if name == "fig4":
        eye2 = ((1.0, 0.0), (0.0, 1.0))
        cov_x = ((0.1, 0.0), (0.0, 0.1))
        return ScenarioConfig(
            scenario="fig4",
            signal_mixture=MixtureSpec(
                weights=(0.25, 0.25, 0.25, 0.25),
                means=((-10.0, 10.0), (10.0, -10.0), (10.0, 10.0), (-10.0, -10.0)),
                covariances=(cov_x, cov_x, cov_x, cov_x),
            ),
            noise_mixture=MixtureSpec(
                weights=(1.0,),
                means=((0.0, 0.0),),
                covariances=(((1.0, 0.0), (0.0, 0.1)),),
            ),
            sweep=SweepSpec("snr_db", (-5.0, 0.0, 2.5, 5.0, 7.5, 10.0, 15.0, 20.0)),
            constraint=ConstraintSpec(
                kind="factored_precoder",
                channel=eye2,
                inner=ConstraintSpec(kind="orthogonal"),
            ),
            optimizer=OptimizerParams(
                step0=1e-3, tau=500.0, tolerance=1e-4, max_iterations=8000, batch_size=4
            ),
            evaluation_samples=1_000_000,
            seed=0,
            output_dir="out/fig4",
        )
    if name == "fig5":
        ones4 = (5.0, 5.0, 5.0, 5.0)
        half_eye4 = tuple(
            tuple(0.5 if i == j else 0.0 for j in range(4)) for i in range(4)
        )
        eye4 = tuple(tuple(1.0 if i == j else 0.0 for j in range(4)) for i in range(4))
        return ScenarioConfig(
            scenario="fig5",
            signal_mixture=MixtureSpec(
                weights=(1.0,), means=((0.0, 0.0, 0.0, 0.0),), covariances=(eye4,)
            ),
            noise_mixture=MixtureSpec(
                weights=(0.5, 0.5),
                means=(ones4, tuple(-v for v in ones4)),
                covariances=(half_eye4, half_eye4),
            ),
            sweep=SweepSpec("snr_db", tuple(-20.0 + 2.5 * i for i in range(15))),
            constraint=ConstraintSpec(
                kind="pilot", receive_dim=2, pilot_shape=(2, 2), power=102.0
            ),
            optimizer=OptimizerParams(
                step0=1.0,
                tau=500.0,
                tolerance=1e-4,
                max_iterations=4000,
                batch_size=8,
                warm_start=False,
            ),
            evaluation_samples=1_000_000,
            seed=0,
            output_dir="out/fig5",
        )
    if name in ("fig6", "fig7"):
        grid = (
            tuple(0.25 * i for i in range(81))
            if name == "fig6"
            else (3.45, 7.6)
        )
        return ScenarioConfig(
            scenario=name,
            signal_mixture=MixtureSpec(
                weights=(1.0,),
                means=((0.0, 0.0),),
                covariances=(((1.0, 0.0), (0.0, 1.0)),),
            ),
            noise_mixture=MixtureSpec(
                weights=(0.5, 0.5),
                means=((5.0, 5.0), (-5.0, -5.0)),
                covariances=(((0.5, 0.0), (0.0, 0.5)), ((0.5, 0.0), (0.0, 0.5))),
            ),
            sweep=SweepSpec("gain_db", grid),
            evaluation_samples=1_000_000,
            seed=0,
            output_dir=f"out/{name}",
        )
    raise ConfigError(f"scenario: no builtin configuration named {name!r}")


def config_with_overrides(
    config: ScenarioConfig,
    seed: int | None = None,
    output_dir: str | None = None,
    evaluation_samples: int | None = None,
    max_iterations: int | None = None,
) -> ScenarioConfig:
    """Apply CLI-style overrides to a parsed config."""
    if seed is not None:
        if seed < 0:
            raise ConfigError("seed: must be nonnegative")
        config = replace(config, seed=int(seed))
    if output_dir is not None:
        config = replace(config, output_dir=str(output_dir))
    if evaluation_samples is not None:
        if evaluation_samples < 1:
            raise ConfigError("evaluation_samples: must be at least 1")
        config = replace(config, evaluation_samples=int(evaluation_samples))
    if max_iterations is not None:
        if max_iterations < 0:
            raise ConfigError("optimizer.max_iterations: must be nonnegative")
        config = replace(
            config, optimizer=replace(config.optimizer, max_iterations=int(max_iterations))
        )
    return config
