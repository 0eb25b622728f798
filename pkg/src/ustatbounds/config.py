"""Run configuration: JSON loading, schema validation and object builders."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .errors import ConfigError
from .gls import PsiFunction, constant_psi, exp_beta_psi, natural_psi, power_log_psi
from .model import DEFAULT_CAP, DiscreteDistribution, Kernel, dist_from_spec, kernel_from_spec, rademacher


def schema() -> dict:
    """The published configuration schema."""
    text = resources.files("ustatbounds").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def validate(data) -> dict:
    """Validate ``data`` against the schema, raising :class:`ConfigError` with the offending path."""
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {err.message}")
    return data


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    return validate(data)


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration plus command-line overrides."""

    subcommand: str
    data: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 1
    out: Path | None = None
    negative_control: bool = False

    def require(self, *keys: str) -> None:
        missing = [k for k in keys if k not in self.data]
        if missing:
            raise ConfigError(f"{self.subcommand} needs config keys: {', '.join(missing)}")

    def kernel(self) -> Kernel:
        self.require("kernel")
        return kernel_from_spec(self.data["kernel"])

    def dist(self) -> DiscreteDistribution:
        if "dist" not in self.data:
            return rademacher()
        return dist_from_spec(self.data["dist"])

    @property
    def cap(self) -> int:
        return int(self.data.get("cap", DEFAULT_CAP))

    @property
    def master_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        return int(self.data.get("seed", 0))

    def psi(self, centered_kernel) -> PsiFunction:
        spec = self.data.get("psi", {"family": "natural"})
        fam = spec["family"]
        if fam == "natural":
            return natural_psi(centered_kernel)
        if fam == "power_log":
            return power_log_psi(spec["c"], spec["m"], spec.get("r", 0.0))
        if fam == "exp_beta":
            return exp_beta_psi(spec["c"], spec["beta"])
        return constant_psi(spec["c"])
