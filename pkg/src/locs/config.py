"""Run configuration files, run records, and table output.

Configs are JSON documents.  The canonical form (sorted keys, two-space
indent, trailing newline) is what :func:`dumps_config` writes, so
``dumps_config(load_config(path))`` reproduces a canonical file byte for byte.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .dynamics import Monomial, NonlinearSystem, TargetSet, get_model, polynomial_system
from .linsys import InvalidInputError
from .planner import LocsConfig

OUTPUT_DIR_ENV = "LOCS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "locs_out"
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class SystemSpec:
    """Either a catalog model (name + parameters) or a polynomial definition."""

    catalog: Optional[str] = None
    parameters: Mapping[str, float] = field(default_factory=dict)
    polynomial: Optional[Mapping[str, Any]] = None

    def build(self) -> NonlinearSystem:
        if self.catalog is not None:
            try:
                return get_model(self.catalog, **self.parameters)
            except KeyError as exc:
                raise ConfigError(exc.args[0]) from None
            except TypeError as exc:
                raise ConfigError(f"bad parameters for {self.catalog!r}: {exc}") from None
        p = self.polynomial
        try:
            equations = [[Monomial(float(c), tuple(e)) for c, e in eq] for eq in p["equations"]]
            return polynomial_system(
                int(p["n_states"]),
                equations,
                [tuple(pair) for pair in p["inputs"]],
                p.get("n_inputs"),
                name=p.get("name", "polynomial"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad polynomial system: {exc}") from None

    def to_dict(self) -> dict:
        if self.catalog is not None:
            return {"catalog": self.catalog, "parameters": {k: float(v) for k, v in self.parameters.items()}}
        p = dict(self.polynomial)
        p["equations"] = [[[float(c), [int(v) for v in e]] for c, e in eq] for eq in p["equations"]]
        p["inputs"] = [[int(a), int(b)] for a, b in p["inputs"]]
        return {"polynomial": p}

    @classmethod
    def from_dict(cls, d: Mapping, where: str = "system") -> "SystemSpec":
        if not isinstance(d, Mapping):
            raise ConfigError(f"{where}: expected an object")
        if "catalog" in d:
            return cls(catalog=str(d["catalog"]), parameters=dict(d.get("parameters", {})))
        if "polynomial" in d:
            p = d["polynomial"]
            for key in ("n_states", "equations", "inputs"):
                if key not in p:
                    raise ConfigError(f"{where}.polynomial: missing {key!r}")
            return cls(polynomial=dict(p))
        raise ConfigError(f"{where}: needs 'catalog' or 'polynomial'")


_LOCS_FIELDS = [f.name for f in fields(LocsConfig)]


def locs_to_dict(cfg: LocsConfig) -> dict:
    d = {}
    for name in _LOCS_FIELDS:
        v = getattr(cfg, name)
        if name == "target":
            v = None if v is None else v.to_dict()
        elif isinstance(v, tuple):
            v = list(v)
        d[name] = v
    return d


def locs_from_dict(d: Mapping) -> LocsConfig:
    unknown = set(d) - set(_LOCS_FIELDS)
    if unknown:
        raise ConfigError(f"locs: unknown field(s) {sorted(unknown)}")
    kw = dict(d)
    if kw.get("target") is not None:
        try:
            kw["target"] = TargetSet.from_dict(kw["target"])
        except (KeyError, InvalidInputError) as exc:
            raise ConfigError(f"locs.target: {exc}") from None
    for key in ("w", "dt_candidates", "goal"):
        if kw.get(key) is not None:
            kw[key] = tuple(kw[key])
    try:
        return LocsConfig(**kw)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"locs: {exc}") from None


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec
    x0: tuple
    t0: float = 0.0
    true_system: Optional[SystemSpec] = None
    locs: LocsConfig = field(default_factory=LocsConfig)
    output_dir: Optional[str] = None
    output_format: str = "csv"

    def __post_init__(self):
        if self.output_format not in FORMATS:
            raise ConfigError(f"output_format must be one of {FORMATS}, got {self.output_format!r}")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        object.__setattr__(self, "t0", float(self.t0))

    def nominal(self) -> NonlinearSystem:
        sys_ = self.system.build()
        if sys_.n_states != len(self.x0):
            raise ConfigError(f"x0 has {len(self.x0)} entries for a {sys_.n_states}-state system")
        return sys_

    def plant(self) -> Optional[NonlinearSystem]:
        return None if self.true_system is None else self.true_system.build()

    def resolve_output_dir(self, override: Optional[str] = None) -> Path:
        return Path(override or self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "true_system": None if self.true_system is None else self.true_system.to_dict(),
            "x0": list(self.x0),
            "t0": self.t0,
            "locs": locs_to_dict(self.locs),
            "output_dir": self.output_dir,
            "output_format": self.output_format,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        known = {"system", "true_system", "x0", "t0", "locs", "output_dir", "output_format"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown top-level field(s) {sorted(unknown)}")
        if "system" not in d or "x0" not in d:
            raise ConfigError("config needs 'system' and 'x0'")
        ts = d.get("true_system")
        return cls(
            system=SystemSpec.from_dict(d["system"]),
            x0=tuple(d["x0"]),
            t0=d.get("t0", 0.0),
            true_system=None if ts is None else SystemSpec.from_dict(ts, "true_system"),
            locs=locs_from_dict(d.get("locs", {})),
            output_dir=d.get("output_dir"),
            output_format=d.get("output_format", "csv"),
        )

    def replace(self, **changes) -> "RunConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)


def dumps_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def loads_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be an object")
    return RunConfig.from_dict(data)


def load_config(path) -> RunConfig:
    path = Path(path)
    return loads_config(path.read_text(), str(path))


# ---------------------------------------------------------------------------
# run records and tables
# ---------------------------------------------------------------------------


@dataclass
class RunRecord:
    config: dict
    summary: dict
    diagnostics: list
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        return d


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))  # shortest string that round-trips exactly


def write_table(path: Path, header: Sequence[str], rows, fmt: str = "csv") -> Path:
    """Write rows under a one-line ``name[unit]`` header; returns the path.

    The suffix is appended, so stems such as ``ellipsoid_t0.5_E1`` survive.
    """
    path = Path(path)
    if path.suffix in (".csv", ".json"):
        path = path.with_suffix("")
    if fmt == "json":
        path = path.parent / (path.name + ".json")
        doc = {"columns": list(header), "rows": [[_json_value(v) for v in r] for r in rows]}
        path.write_text(json.dumps(doc, indent=1) + "\n")
        return path
    path = path.parent / (path.name + ".csv")
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _json_value(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    if isinstance(v, str):
        return v
    return float(v)


def read_table(path) -> tuple:
    """Return (header, float array) from a CSV table written by :func:`write_table`."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return doc["columns"], np.array(doc["rows"], dtype=float)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    return path
