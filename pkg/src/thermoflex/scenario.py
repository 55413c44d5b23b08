"""Scenario files: a single JSON document, validated strictly (unknown keys rejected)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .capability import T50_MAX_RESPONSE_MIN
from .errors import ConfigurationError, ThermoflexError
from .fleet import BuildingParams, Fleet, check_time_step


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsSpec(_Strict):
    n_bins: int = Field(ge=1)
    t_on: float = Field(gt=0)
    t_off: float = Field(gt=0)
    set_band_width: float = Field(gt=0)
    set_point: float
    population: float = Field(gt=0)
    tau: float = Field(gt=0)
    bin_width: Optional[float] = Field(default=None, gt=0)
    band_width: Optional[float] = Field(default=None, gt=0)
    t_gain: Optional[float] = Field(default=None, gt=0)
    rated_power: float = Field(default=1.0, gt=0)

    def build(self) -> BuildingParams:
        return BuildingParams(**self.model_dump())


class ControllerSpec(_Strict):
    gain: float = Field(default=1.0, gt=0)
    x_floor: float = Field(default=1e-9, gt=0)


class ObserverSpec(_Strict):
    enabled: bool = False
    gamma: float = Field(default=0.5, gt=0, lt=1)
    margin: Optional[float] = Field(default=None, gt=0)
    use_estimate: bool = True


class BuildingSpec(_Strict):
    name: str = Field(min_length=1)
    params: ParamsSpec
    controller: ControllerSpec = ControllerSpec()
    observer: ObserverSpec = ObserverSpec()
    capacity: Optional[float] = Field(default=None, gt=0)
    initial_state: Literal["steady", "uniform"] = "steady"
    initial_set_point: Optional[float] = None


class FileSignalSpec(_Strict):
    kind: Literal["file"]
    path: str
    kw_per_unit: float = Field(default=1.0, gt=0)


class SyntheticSignalSpec(_Strict):
    kind: Literal["synthetic"]
    volatility: float = Field(ge=0)


class T50SignalSpec(_Strict):
    kind: Literal["t50"]
    profile: Optional[list[tuple[float, float]]] = None


SignalSpec = Annotated[
    Union[FileSignalSpec, SyntheticSignalSpec, T50SignalSpec],
    Field(discriminator="kind"),
]


class DisturbanceSpec(_Strict):
    """Extra non-participating load, a reflected random walk added to the ramp."""

    volatility: float = Field(ge=0)
    amplitude: float = Field(gt=0)


class Scenario(_Strict):
    buildings: list[BuildingSpec] = Field(min_length=1)
    signal: SignalSpec
    dt_s: float = Field(default=4.0, gt=0)
    duration_min: float = Field(gt=0)
    dispatch_mode: Literal["optimized", "proportional"] = "optimized"
    penalty: Optional[float] = Field(default=None, gt=0)
    seed: int = 0
    response_time_min: float = Field(default=T50_MAX_RESPONSE_MIN, gt=0, le=T50_MAX_RESPONSE_MIN)
    disturbance: Optional[DisturbanceSpec] = None
    base_dir: Optional[str] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def _check(self):
        names = [b.name for b in self.buildings]
        if len(set(names)) != len(names):
            raise ValueError("building names must be unique")
        if "ISO" in names:
            raise ValueError("'ISO' is reserved for global trace rows")
        return self

    @property
    def dt(self) -> float:
        """Tick length in minutes."""
        return self.dt_s / 60.0

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration_min / self.dt))

    def fleets(self) -> list[Fleet]:
        """Build and check every fleet, including the integrator guard at ``dt``."""
        fleets = []
        for spec in self.buildings:
            try:
                fleet = Fleet.from_params(spec.params.build())
                check_time_step(self.dt, fleet.rates)
            except ThermoflexError as exc:
                raise ConfigurationError(f"building {spec.name!r}: {exc}") from exc
            fleets.append(fleet)
        return fleets

    def resolve(self, path: str) -> Path:
        candidate = Path(path)
        if not candidate.is_absolute() and self.base_dir is not None:
            candidate = Path(self.base_dir) / candidate
        return candidate


def parse_scenario(data: dict, base_dir=None) -> Scenario:
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid scenario: {exc}") from exc
    if base_dir is not None:
        scenario = scenario.model_copy(update={"base_dir": str(base_dir)})
    scenario.fleets()
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object")
    return parse_scenario(data, base_dir=path.parent)
