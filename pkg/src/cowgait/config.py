"""Pipeline configuration (JSON) and deterministic JSON output helpers."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .classify.models import KINDS
from .filters import FilterParams
from .scoring import DEFAULT_TAU, DEFAULT_WINDOW_HOURS, STRATEGIES
from .steps import StepParams
from .traits import HBA_BANDS


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    "frame_rate": 30.0,
    "trajectories": None,
    "scores": None,
    "labels": None,
    # used when no trajectory file is given: generate a synthetic study
    "synth": {"n_healthy": 20, "n_lame": 20, "noise_sd": 0.0, "outlier_rate": 0.0, "n_observers": 4},
    "filter": dataclasses.asdict(FilterParams()),
    "steps": dataclasses.asdict(StepParams()),
    "hba_band": "gait",
    "merge": {"strategy": "tau_vote", "tau": DEFAULT_TAU, "window_hours": DEFAULT_WINDOW_HOURS},
    "cv": {"k": 5, "n_iter": 100, "n_perm": 100, "smote_k": 5},
    "classifiers": list(KINDS),
    "importance_classifier": None,
    "search_spaces": {},
    "plots": {"n_videos": 3},
}


def _merge(base: dict, over: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict) and key not in ("search_spaces",):
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclasses.dataclass
class PipelineConfig:
    data: dict
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, d: dict | None = None, base_dir=".") -> "PipelineConfig":
        cfg = cls(_merge(DEFAULTS, d or {}), Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d, path.parent)

    def __getitem__(self, key):
        return self.data[key]

    def override(self, **changes) -> "PipelineConfig":
        d = copy.deepcopy(self.data)
        for k, v in changes.items():
            if v is not None:
                d[k] = v
        cfg = PipelineConfig(d, self.base_dir)
        cfg.validate()
        return cfg

    def validate(self):
        d = self.data
        if d["frame_rate"] <= 0:
            raise ConfigError("frame_rate must be positive")
        if d["hba_band"] not in HBA_BANDS:
            raise ConfigError(f"hba_band must be one of {HBA_BANDS}")
        if d["merge"]["strategy"] not in STRATEGIES:
            raise ConfigError(f"merge.strategy must be one of {STRATEGIES}")
        bad = [c for c in d["classifiers"] if c not in KINDS]
        if bad or not d["classifiers"]:
            raise ConfigError(f"classifiers must be a non-empty subset of {KINDS}")
        if d["importance_classifier"] is not None and d["importance_classifier"] not in KINDS:
            raise ConfigError(f"importance_classifier must be one of {KINDS}")
        cv = d["cv"]
        if cv["k"] < 2 or cv["n_iter"] < 1 or cv["n_perm"] < 1 or cv["smote_k"] < 1:
            raise ConfigError("cv.k >= 2, cv.n_iter >= 1, cv.n_perm >= 1 and cv.smote_k >= 1 required")
        FilterParams(**d["filter"])
        StepParams(**d["steps"])

    def path(self, key):
        """Resolve an input path relative to the config file's directory."""
        p = self.data.get(key)
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def check_inputs(self):
        for key in ("trajectories", "scores", "labels"):
            p = self.path(key)
            if p is not None and not p.exists():
                raise ConfigError(f"{key} input {p} does not exist")
        if self.data["trajectories"] is None and self.data["synth"] is None:
            raise ConfigError("either trajectories or synth must be configured")

    @property
    def filter_params(self) -> FilterParams:
        return FilterParams(**self.data["filter"])

    @property
    def step_params(self) -> StepParams:
        return StepParams(**self.data["steps"])

    def hash(self) -> str:
        return hashlib.sha256(canonical_json(self.data).encode("utf-8")).hexdigest()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if math.isnan(f) or math.isinf(f) else f
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def dumps(obj) -> str:
    """Stable, human-readable JSON; NaN and infinities become null."""
    return json.dumps(_plain(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
