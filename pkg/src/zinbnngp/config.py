"""YAML run configuration.

A config file may hold any of these sections::

    schema:  {count: y, location: location, covariates: [x1], ...}
    priors:  {alpha_var: 100, m: 13, ...}
    sampler: {n_iter: 10000, burn_in: 5000, ...}
    design:  {preset: sim3, scale: 0.3, ...}

Unknown sections or keys are rejected.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .gibbs import ChainConfig
from .model import ContractError, CsvSchema, PriorSpec, SchemaError
from .simulate import SimDesign

SECTIONS = ("schema", "priors", "sampler", "design")


@dataclass(frozen=True)
class RunConfig:
    schema: CsvSchema = field(default_factory=CsvSchema)
    priors: PriorSpec = field(default_factory=PriorSpec)
    sampler: ChainConfig = field(default_factory=ChainConfig)
    design: SimDesign | None = None

    @classmethod
    def from_dict(cls, d: dict | None) -> "RunConfig":
        d = d or {}
        if not isinstance(d, dict):
            raise SchemaError("config must be a mapping of sections")
        unknown = set(d) - set(SECTIONS)
        if unknown:
            raise SchemaError(f"unknown config sections: {sorted(unknown)}")
        for name in SECTIONS:
            if d.get(name) is not None and not isinstance(d[name], dict):
                raise SchemaError(f"section {name!r} must be a mapping")
        try:
            return cls(
                schema=CsvSchema.from_dict(d.get("schema") or {}),
                priors=PriorSpec.from_dict(d.get("priors") or {}),
                sampler=ChainConfig.from_dict(d.get("sampler") or {}),
                design=SimDesign.from_dict(d["design"]) if d.get("design") else None,
            )
        except ContractError:
            raise
        except (TypeError, ValueError) as e:
            # wrong value types, e.g. a string where a number belongs
            raise SchemaError(str(e)) from None

    def snapshot(self) -> dict:
        out = {"schema": asdict(self.schema), "priors": asdict(self.priors), "sampler": asdict(self.sampler)}
        if self.design is not None:
            out["design"] = self.design.to_dict()
        return out


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as e:
        raise SchemaError(f"cannot read config {path}: {e.strerror}") from None
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f":{mark.line + 1}" if mark is not None else ""
        raise SchemaError(f"{path}{where}: invalid YAML") from None
    return RunConfig.from_dict(raw)
