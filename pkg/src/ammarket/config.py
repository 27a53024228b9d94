"""Run configuration: YAML schema, validation, defaults, and round-tripping.

An empty or missing block falls back to the base-case parameter set (the
450 MW wind farm feeding a 200,000 t/yr plant against an equal-capacity
conventional plant). Unknown keys are rejected with the offending path, and
every constraint violation names its field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .bargaining import BargainConfig
from .equilibrium import IterationConfig
from .experiments import StudyKind, StudySpec
from .market import (
    FuturesMode,
    MarketParams,
    ProducerKind,
    ProducerSpec,
    default_ga_spec,
    default_rep2a_spec,
)
from .programs import Anticipation, AnticipationKind
from .scenarios import (
    DEFAULT_CAPACITY_FACTORS,
    DEFAULT_RATED_POWER_MW,
    ScenarioConfig,
    WindProfile,
)


class ConfigError(ValueError):
    """Configuration parse or validation failure; the message names the field."""


@dataclass(frozen=True)
class StudyConfig:
    """Study selector and sweep grids (see experiments.StudySpec)."""

    name: str = "base"
    disturbance_bounds: tuple = (0.0, 22.5, 45.0, 67.5, 90.0)
    alphas: tuple = (0.4, 0.6, 0.8, 0.9, 0.95)
    ra_capacities: tuple = (50_000.0, 100_000.0, 150_000.0, 200_000.0, 250_000.0, 300_000.0)
    ga_capacities: tuple = (50_000.0, 100_000.0, 150_000.0, 200_000.0, 250_000.0, 300_000.0)
    nptp_alphas: tuple = (0.2, 0.7)
    workers: int = 1


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams
    producers: tuple[ProducerSpec, ...]
    wind: WindProfile
    scenario: ScenarioConfig
    equilibrium: IterationConfig
    bargain: BargainConfig
    mode: FuturesMode
    anticipation: Anticipation
    study: StudyConfig
    output_dir: str = "out"

    def rep2a(self) -> ProducerSpec:
        return next(p for p in self.producers if p.kind is ProducerKind.REP2A)

    def ga(self) -> ProducerSpec:
        return next(p for p in self.producers if p.kind is not ProducerKind.REP2A)

    def study_spec(self) -> StudySpec:
        kind = StudyKind(self.study.name)
        return StudySpec(
            study=kind,
            market=self.market,
            ra_spec=self.rep2a(),
            ga_spec=self.ga(),
            wind=self.wind,
            scenario=self.scenario,
            equilibrium=self.equilibrium,
            bargain=self.bargain,
            anticipation=self.anticipation,
            mode=self.mode,
            disturbance_bounds=self.study.disturbance_bounds,
            alphas=self.study.alphas,
            ra_capacities=self.study.ra_capacities,
            ga_capacities=self.study.ga_capacities,
            nptp_alphas=self.study.nptp_alphas,
            workers=self.study.workers,
        )

    def to_dict(self) -> dict:
        return {
            "market": {
                "rho_max": self.market.rho_max,
                "k_am": self.market.k_am,
                "periods_per_horizon": self.market.periods_per_horizon,
                "hours_per_period": self.market.hours_per_period,
            },
            "producers": [
                {
                    "kind": p.kind.value,
                    "prod_upper": p.prod_upper,
                    "prod_lower": p.prod_lower,
                    "eta_p2a": p.eta_p2a,
                    "fixed_cost": p.fixed_cost,
                    "variable_cost": p.variable_cost,
                    "alpha": p.alpha,
                }
                for p in self.producers
            ],
            "wind": {
                "rated_power": self.wind.rated_power,
                "monthly_avg_power": [float(v) for v in self.wind.monthly_avg_power],
            },
            "scenario": {
                "n_scenarios": self.scenario.n_scenarios,
                "disturbance_bound": self.scenario.disturbance_bound,
                "window": self.scenario.window,
                "seed": self.scenario.seed,
            },
            "equilibrium": {
                "gamma": self.equilibrium.gamma,
                "epsilon": self.equilibrium.epsilon,
                "max_iters": self.equilibrium.max_iters,
                "initial_price": self.equilibrium.initial_price,
            },
            "bargain": {
                "gamma": self.bargain.gamma,
                "beta_rho": self.bargain.beta_rho,
                "beta_q": self.bargain.beta_q,
                "epsilon": self.bargain.epsilon,
                "max_iters": self.bargain.max_iters,
                "epsilon_utility_rel": self.bargain.epsilon_utility_rel,
                "mode": self.mode.value,
            },
            "anticipation": {
                "kind": self.anticipation.kind.value,
                "segments": self.anticipation.segments,
            },
            "study": {
                "name": self.study.name,
                "disturbance_bounds": list(self.study.disturbance_bounds),
                "alphas": list(self.study.alphas),
                "ra_capacities": list(self.study.ra_capacities),
                "ga_capacities": list(self.study.ga_capacities),
                "nptp_alphas": list(self.study.nptp_alphas),
                "workers": self.study.workers,
            },
            "output_dir": self.output_dir,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _section(raw: dict, name: str, allowed: set[str]) -> dict:
    block = raw.get(name) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(block).__name__}")
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)} (allowed: {sorted(allowed)})")
    return block


def _num(block: dict, path: str, key: str, default, kind=float):
    value = block.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__}, got {value!r}") from None


def _grid(block: dict, path: str, key: str, default):
    value = block.get(key, default)
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigError(f"{path}.{key}: expected a nonempty list")
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: entries must be numbers") from None


def _build(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    top_allowed = {
        "market", "producers", "wind", "scenario", "equilibrium", "bargain",
        "anticipation", "study", "output_dir",
    }
    unknown = set(raw) - top_allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)} (allowed: {sorted(top_allowed)})")

    mb = _section(raw, "market", {"rho_max", "k_am", "periods_per_horizon", "hours_per_period"})
    try:
        market = MarketParams(
            rho_max=_num(mb, "market", "rho_max", 4850.0),
            k_am=_num(mb, "market", "k_am", 16.44),
            periods_per_horizon=_num(mb, "market", "periods_per_horizon", 12, int),
            hours_per_period=_num(mb, "market", "hours_per_period", 730.0),
        )
    except ValueError as exc:
        raise ConfigError(f"market: {exc}") from None

    producers_raw = raw.get("producers")
    if producers_raw is None:
        producers = (default_rep2a_spec(), default_ga_spec())
    else:
        if not isinstance(producers_raw, list) or len(producers_raw) != 2:
            raise ConfigError("producers: expected a list of exactly two producer blocks")
        allowed = {"kind", "prod_upper", "prod_lower", "eta_p2a", "fixed_cost", "variable_cost", "alpha"}
        built = []
        for i, block in enumerate(producers_raw):
            path = f"producers[{i}]"
            if not isinstance(block, dict):
                raise ConfigError(f"{path}: expected a mapping")
            unknown = set(block) - allowed
            if unknown:
                raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
            kind_raw = block.get("kind")
            try:
                kind = ProducerKind(kind_raw)
            except ValueError:
                raise ConfigError(
                    f"{path}.kind: expected one of {[k.value for k in ProducerKind]}, got {kind_raw!r}"
                ) from None
            base = default_rep2a_spec() if kind is ProducerKind.REP2A else default_ga_spec()
            if kind is ProducerKind.NPTP:
                base = ProducerSpec(kind=ProducerKind.NPTP, prod_upper=0.0, alpha=0.2)
            try:
                built.append(
                    ProducerSpec(
                        kind=kind,
                        prod_upper=_num(block, path, "prod_upper", base.prod_upper),
                        prod_lower=_num(block, path, "prod_lower", base.prod_lower),
                        eta_p2a=_num(block, path, "eta_p2a", base.eta_p2a),
                        fixed_cost=_num(block, path, "fixed_cost", base.fixed_cost),
                        variable_cost=_num(block, path, "variable_cost", base.variable_cost),
                        alpha=_num(block, path, "alpha", base.alpha),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        kinds = [p.kind for p in built]
        if sum(k is ProducerKind.REP2A for k in kinds) != 1:
            raise ConfigError("producers: exactly one renewable (rep2a) producer required")
        producers = tuple(built)

    wb = _section(raw, "wind", {"rated_power", "monthly_avg_power", "capacity_factors"})
    rated = _num(wb, "wind", "rated_power", DEFAULT_RATED_POWER_MW)
    if "monthly_avg_power" in wb and "capacity_factors" in wb:
        raise ConfigError("wind: give monthly_avg_power or capacity_factors, not both")
    try:
        if "monthly_avg_power" in wb:
            avg = np.asarray(_grid(wb, "wind", "monthly_avg_power", None), dtype=float)
        else:
            cf = np.asarray(
                _grid(wb, "wind", "capacity_factors", list(DEFAULT_CAPACITY_FACTORS)), dtype=float
            )
            avg = rated * cf
        wind = WindProfile(rated_power=rated, monthly_avg_power=avg)
    except ValueError as exc:
        raise ConfigError(f"wind: {exc}") from None
    if wind.n_periods != market.periods_per_horizon:
        raise ConfigError(
            f"wind: profile has {wind.n_periods} periods but the market horizon is "
            f"{market.periods_per_horizon}"
        )

    sb = _section(raw, "scenario", {"n_scenarios", "disturbance_bound", "window", "seed"})
    try:
        scenario = ScenarioConfig(
            n_scenarios=_num(sb, "scenario", "n_scenarios", 100, int),
            disturbance_bound=_num(sb, "scenario", "disturbance_bound", 45.0),
            window=_num(sb, "scenario", "window", 2, int),
            seed=_num(sb, "scenario", "seed", 7, int),
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None
    if scenario.n_scenarios < 1:
        raise ConfigError("scenario.n_scenarios: must be at least 1")
    if scenario.disturbance_bound < 0:
        raise ConfigError("scenario.disturbance_bound: must be nonnegative")
    if scenario.window < 1:
        raise ConfigError("scenario.window: must be at least 1")

    eb = _section(raw, "equilibrium", {"gamma", "epsilon", "max_iters", "initial_price"})
    try:
        equilibrium = IterationConfig(
            gamma=_num(eb, "equilibrium", "gamma", 0.5),
            epsilon=_num(eb, "equilibrium", "epsilon", 1e-3),
            max_iters=_num(eb, "equilibrium", "max_iters", 100, int),
            initial_price=_num(eb, "equilibrium", "initial_price", None),
        )
    except ValueError as exc:
        raise ConfigError(f"equilibrium: {exc}") from None

    bb = _section(
        raw,
        "bargain",
        {"gamma", "beta_rho", "beta_q", "epsilon", "max_iters", "epsilon_utility_rel", "mode"},
    )
    mode_raw = bb.get("mode", FuturesMode.MODE1_SHARE.value)
    try:
        mode = FuturesMode(mode_raw)
    except ValueError:
        raise ConfigError(
            f"bargain.mode: expected one of {[m.value for m in FuturesMode]}, got {mode_raw!r}"
        ) from None
    try:
        bargain_cfg = BargainConfig(
            gamma=_num(bb, "bargain", "gamma", 0.5),
            beta_rho=_num(bb, "bargain", "beta_rho", 0.1),
            beta_q=_num(bb, "bargain", "beta_q", 0.1),
            epsilon=_num(bb, "bargain", "epsilon", 1e-3),
            max_iters=_num(bb, "bargain", "max_iters", 500, int),
            epsilon_utility_rel=_num(bb, "bargain", "epsilon_utility_rel", 1e-4),
        )
    except ValueError as exc:
        raise ConfigError(f"bargain: {exc}") from None

    ab = _section(raw, "anticipation", {"kind", "segments"})
    kind_raw = ab.get("kind", AnticipationKind.PRICE_TAKER.value)
    try:
        akind = AnticipationKind(kind_raw)
    except ValueError:
        raise ConfigError(
            f"anticipation.kind: expected one of {[k.value for k in AnticipationKind]}, got {kind_raw!r}"
        ) from None
    try:
        anticipation = Anticipation(kind=akind, segments=_num(ab, "anticipation", "segments", 32, int))
    except ValueError as exc:
        raise ConfigError(f"anticipation: {exc}") from None

    stb = _section(
        raw,
        "study",
        {"name", "disturbance_bounds", "alphas", "ra_capacities", "ga_capacities", "nptp_alphas", "workers"},
    )
    name = stb.get("name", "base")
    if name not in {k.value for k in StudyKind}:
        raise ConfigError(
            f"study.name: expected one of {sorted(k.value for k in StudyKind)}, got {name!r}"
        )
    defaults = StudyConfig()
    study = StudyConfig(
        name=name,
        disturbance_bounds=_grid(stb, "study", "disturbance_bounds", list(defaults.disturbance_bounds)),
        alphas=_grid(stb, "study", "alphas", list(defaults.alphas)),
        ra_capacities=_grid(stb, "study", "ra_capacities", list(defaults.ra_capacities)),
        ga_capacities=_grid(stb, "study", "ga_capacities", list(defaults.ga_capacities)),
        nptp_alphas=_grid(stb, "study", "nptp_alphas", list(defaults.nptp_alphas)),
        workers=_num(stb, "study", "workers", 1, int),
    )
    if study.workers < 1:
        raise ConfigError("study.workers: must be at least 1")

    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir: expected a string")

    return RunConfig(
        market=market,
        producers=producers,
        wind=wind,
        scenario=scenario,
        equilibrium=equilibrium,
        bargain=bargain_cfg,
        mode=mode,
        anticipation=anticipation,
        study=study,
        output_dir=output_dir,
    )


def loads_config(text: str) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"config parse error{where}: {exc}") from None
    return _build(raw or {})


def load_config(path: str | None) -> RunConfig:
    """Load and validate a config file; None or an empty file yields the defaults."""
    if path is None:
        return _build({})
    with open(path, "r", encoding="utf-8") as fh:
        return loads_config(fh.read())
