"""
Run configuration read from a TOML document.

Sections are ``data``, ``transform``, ``model``, ``forecast`` and
``experiment``; every section and key is optional and unknown keys are
rejected. Example::

    [data]
    path = ["AUS_fltper_1x1.txt", "AUS_mltper_1x1.txt"]
    source = "hmd"
    rebuild_from_qx = true

    [transform]
    kind = "alpha"
    alpha = "tune"

    [model]
    k_rule = "eigenvalue_ratio"
    model_rule = "auto_arima"

    [forecast]
    H = 10
    B = 1000
    gammas = [0.2, 0.05]
    seed = 0

    [experiment]
    scheme = ["expanding", "rolling"]
    criteria = ["KLD", "JSD_a", "JSD_g"]
    methods = ["alpha", "ilr", "clr", "eda", "lee_carter"]
"""

from pathlib import Path
from typing import List, Literal, Optional, Union

import tomli
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .compositions import TransformSpec
from .errors import ConfigContradiction, ConfigError, DomainError, InvalidParameterError
from .evaluation import METHODS, _method_spec
from .lifetable import DEFAULT_RADIX
from .metrics import POINT_CRITERIA, parse_criterion
from .pipeline import DEFAULT_B, DEFAULT_GAMMAS, EIGENVALUE_RATIO


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataSection(_Section):
    path: Union[str, List[str], None] = None
    source: Literal["hmd", "csv"] = "hmd"
    rebuild_from_qx: bool = True
    radix: float = Field(DEFAULT_RADIX, gt=0)

    @property
    def paths(self):
        if self.path is None:
            return []
        return [self.path] if isinstance(self.path, str) else list(self.path)


class TransformSection(_Section):
    kind: Literal["alpha", "ilr", "clr", "eda"] = "alpha"
    alpha: Union[float, Literal["tune"], None] = "tune"


class ModelSection(_Section):
    k_rule: Union[Literal["eigenvalue_ratio"], int] = EIGENVALUE_RATIO
    model_rule: Literal["auto_arima", "rwd"] = "auto_arima"

    @field_validator("k_rule")
    @classmethod
    def _positive(cls, v):
        if isinstance(v, int) and v < 1:
            raise ValueError("k_rule must be a positive integer or 'eigenvalue_ratio'")
        return v


class ForecastSection(_Section):
    H: int = Field(10, ge=1)
    B: int = Field(DEFAULT_B, ge=0)
    gammas: List[float] = list(DEFAULT_GAMMAS)
    seed: int = 0

    @field_validator("gammas")
    @classmethod
    def _levels(cls, v):
        if any(not 0 < g < 1 for g in v):
            raise ValueError("gammas must lie in (0, 1)")
        return v


class ExperimentSection(_Section):
    scheme: Union[Literal["expanding", "rolling"], List[Literal["expanding", "rolling"]]] = "expanding"
    criteria: List[str] = list(POINT_CRITERIA)
    methods: List[str] = list(METHODS)
    grid_step: float = Field(0.01, gt=0, le=0.5)
    refine: bool = True
    retune_per_origin: bool = False

    @field_validator("criteria")
    @classmethod
    def _criteria(cls, v):
        for c in v:
            parse_criterion(c)
        return v

    @field_validator("methods")
    @classmethod
    def _methods(cls, v):
        for m in v:
            _method_spec(m)
        return v

    @property
    def schemes(self):
        return [self.scheme] if isinstance(self.scheme, str) else list(self.scheme)


class RunConfig(_Section):
    data: DataSection = DataSection()
    transform: TransformSection = TransformSection()
    model: ModelSection = ModelSection()
    forecast: ForecastSection = ForecastSection()
    experiment: ExperimentSection = ExperimentSection()

    @property
    def wants_tuning(self):
        return self.transform.kind == "alpha" and self.transform.alpha == "tune"

    def transform_spec(self, alpha=None):
        """The configured transform; ``alpha`` fills in a tuned value."""
        t = self.transform
        try:
            if t.kind != "alpha":
                if t.alpha not in (None, "tune"):
                    raise ConfigContradiction(f"transform kind {t.kind!r} takes no alpha value")
                return TransformSpec(t.kind)
            a = alpha if t.alpha == "tune" else t.alpha
            if a is None:
                raise ConfigContradiction("transform.alpha is required for kind 'alpha'")
            return TransformSpec("alpha", a)
        except InvalidParameterError as exc:
            raise ConfigContradiction(str(exc)) from None

    def check_intervals(self):
        """Interval criteria need bootstrap bands at their levels."""
        for c in self.experiment.criteria:
            _, g = parse_criterion(c)
            if g is None:
                continue
            if self.forecast.B == 0:
                raise ConfigContradiction(f"criterion {c} needs bootstrap bands but B = 0")
            if g not in self.forecast.gammas:
                raise ConfigContradiction(f"criterion {c} needs gamma {g:g} in forecast.gammas")
        if 0 < self.forecast.B < 100:
            raise ConfigContradiction(f"B must be 0 or at least 100, got {self.forecast.B}")


def _format_validation(exc):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"])
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text, base_dir=None):
    """Validate a TOML document. Relative data paths resolve against ``base_dir``."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {_format_validation(exc)}") from None
    except DomainError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    if base_dir is not None and cfg.data.path is not None:
        resolved = [str((Path(base_dir) / p)) if not Path(p).is_absolute() else p
                    for p in cfg.data.paths]
        cfg.data.path = resolved if isinstance(cfg.data.path, list) else resolved[0]
    return cfg


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, base_dir=path.parent)
