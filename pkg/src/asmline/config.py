"""Run and sweep configuration (JSON files)."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .digraph import DEFAULT_MAX_EDGES, WeightConfig
from .errors import ConfigError
from .reduction import ReductionConfig

OUTPUT_DIR_ENV = "ASMLINE_OUTPUT_DIR"
THREADS_ENV = "ASMLINE_THREADS"


def _weights(doc) -> WeightConfig:
    if isinstance(doc, WeightConfig):
        return doc
    try:
        if isinstance(doc, dict):
            return WeightConfig(float(doc["tech"]), float(doc["hand"]), float(doc["tol"]))
        tech, hand, tol = (float(x) for x in doc)
        return WeightConfig(tech, hand, tol)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad weight triple {doc!r}: {exc}") from exc


def _reduction(doc) -> ReductionConfig:
    if isinstance(doc, ReductionConfig):
        return doc
    try:
        return ReductionConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad reduction settings: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    assembly: str
    output_dir: str = "asmline-out"
    meshes: str | None = None
    constraints: str | None = None
    use_dof: bool = False
    weights: WeightConfig = field(default_factory=WeightConfig)
    lam: float = 0.5
    phases: int = 1
    gap: float = 0.0
    c: float | None = None
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    time_limit: float | None = None
    max_edges: int = DEFAULT_MAX_EDGES
    write_lp: bool = False
    write_dot: bool = True

    def validate(self, check_files: bool = True) -> None:
        """Raise ConfigError on the first problem found."""
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lam must be in [0, 1], got {self.lam}")
        if self.phases < 1:
            raise ConfigError(f"phases must be >= 1, got {self.phases}")
        if not 0.0 <= self.gap < 1.0:
            raise ConfigError(f"gap must be in [0, 1), got {self.gap}")
        if self.c is not None and not self.c > 0:
            raise ConfigError("c must be positive")
        if self.time_limit is not None and not self.time_limit > 0:
            raise ConfigError("time_limit must be positive")
        if self.max_edges < 1:
            raise ConfigError("max_edges must be >= 1")
        if self.use_dof and not (self.meshes or self.constraints):
            raise ConfigError("use_dof needs a mesh directory or a constraint document")
        if not check_files:
            return
        if not Path(self.assembly).is_file():
            raise ConfigError(f"assembly document not found: {self.assembly}")
        if self.use_dof and self.constraints is None and not Path(self.meshes).is_dir():
            raise ConfigError(f"mesh directory not found: {self.meshes}")
        if self.constraints is not None and not Path(self.constraints).is_file():
            raise ConfigError(f"constraint document not found: {self.constraints}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        d["reduction"] = asdict(self.reduction)
        return d

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "weights" in kw:
            kw["weights"] = _weights(kw["weights"])
        if "reduction" in kw:
            kw["reduction"] = _reduction(kw["reduction"])
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path | None = None) -> "RunConfig":
        """Build from a parsed JSON object; relative paths resolve against ``base_dir``."""
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "assembly" not in doc:
            raise ConfigError("config needs an 'assembly' path")
        kw = dict(doc)
        if "weights" in kw:
            kw["weights"] = _weights(kw["weights"])
        if "reduction" in kw:
            kw["reduction"] = _reduction(kw["reduction"])
        if base_dir is not None:
            for key in ("assembly", "meshes", "constraints", "output_dir"):
                if kw.get(key) is not None and not os.path.isabs(kw[key]):
                    kw[key] = str(Path(base_dir) / kw[key])
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(doc, base_dir=path.parent)


@dataclass(frozen=True)
class SweepSpec:
    lams: tuple[float, ...] = (0.5,)
    weights: tuple[WeightConfig, ...] = (WeightConfig(),)
    fractions: tuple[float, ...] = (0.0,)
    gaps: tuple[float, ...] = (0.0,)
    seeds: tuple[int, ...] = (0,)
    replications: int = 5

    def __post_init__(self):
        for name in ("lams", "weights", "fractions", "gaps", "seeds"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"sweep grid {name!r} is empty")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        for lam in self.lams:
            if not 0.0 <= lam <= 1.0:
                raise ConfigError(f"lam {lam} outside [0, 1]")
        for f in self.fractions:
            if not 0.0 <= f < 1.0:
                raise ConfigError(f"reduction fraction {f} outside [0, 1)")
        for gap in self.gaps:
            if not 0.0 <= gap < 1.0:
                raise ConfigError(f"gap {gap} outside [0, 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "SweepSpec":
        if not isinstance(doc, dict):
            raise ConfigError("sweep spec must be a JSON object")
        unknown = sorted(set(doc) - set(cls.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown sweep keys: {unknown}")
        kw = {}
        for key in ("lams", "fractions", "gaps"):
            if key in doc:
                kw[key] = tuple(float(x) for x in doc[key])
        if "seeds" in doc:
            kw["seeds"] = tuple(int(x) for x in doc["seeds"])
        if "weights" in doc:
            kw["weights"] = tuple(_weights(w) for w in doc["weights"])
        if "replications" in doc:
            kw["replications"] = int(doc["replications"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return {"lams": list(self.lams), "weights": [asdict(w) for w in self.weights],
                "fractions": list(self.fractions), "gaps": list(self.gaps),
                "seeds": list(self.seeds), "replications": self.replications}


def load_sweep_spec(path: str | Path) -> SweepSpec:
    try:
        return SweepSpec.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise ConfigError(f"cannot read sweep spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep spec {path} is not valid JSON: {exc}") from exc


def thread_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n
