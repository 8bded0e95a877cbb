"""JSON run configuration and deterministic file emitters."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .dynamics import Schedule
from .errors import CavityAQCError, InvalidInput
from .models import ModelKind, ModelSpec, parse_ec_clauses
from .stationary import CavityParams, Control

SIG_DIGITS = 12
EMIT_KINDS = frozenset({"sweep", "bifurcations", "trajectory", "protocol", "observables"})
SWEEP_CONTROLS = ("epsilon", "delta_c", "b_eff")


class ConfigError(CavityAQCError, ValueError):
    pass


@dataclass(frozen=True)
class SweepSpec:
    """Either an evenly spaced grid (lo, hi, n) or an explicit list of values."""

    control: str
    lo: float | None = None
    hi: float | None = None
    n: int | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.control not in SWEEP_CONTROLS:
            raise ConfigError(f"sweep control must be one of {SWEEP_CONTROLS}, got {self.control!r}")
        if self.values is not None:
            if not self.values:
                raise ConfigError("sweep values must be nonempty")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            return
        if self.lo is None or self.hi is None or self.n is None:
            raise ConfigError("sweep needs either values or lo, hi and n")
        if not self.lo < self.hi:
            raise ConfigError(f"sweep bounds must satisfy lo < hi, got {self.lo}, {self.hi}")
        if self.n < 2:
            raise ConfigError("sweep n must be >= 2")

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values)
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    cavity: CavityParams
    schedule: Schedule | None = None
    sweep: SweepSpec | None = None
    output_dir: Path = Path("out")
    emit: frozenset = EMIT_KINDS
    command: str | None = None
    options: dict = field(default_factory=dict)


_MODEL_KEYS = {"kind", "b_x", "j0", "n_qubits", "clauses", "instance", "seed", "n_clauses"}
_CAVITY_KEYS = {"delta_c", "kappa", "g", "epsilon"}
_SCHEDULE_KEYS = {
    "control", "eps0", "eps_mid", "eps_f", "delta0", "delta_mid", "delta_f", "switch_threshold",
    "t_max", "dt", "settle_tol", "settle_rate", "settle_window", "sample_stride",
}
_TOP_KEYS = {"model", "cavity", "schedule", "sweep", "output_dir", "emit", "command", "options", "description"}


def _check_keys(section: str, data: dict, allowed: set) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {section} field(s): {', '.join(sorted(unknown))}")


def _model_from(data: dict, base: Path) -> ModelSpec:
    _check_keys("model", data, _MODEL_KEYS)
    data = dict(data)
    kind = ModelKind(str(data.pop("kind")).upper())
    clauses = data.pop("clauses", None)
    instance = data.pop("instance", None)
    n_qubits = data.get("n_qubits")
    if instance is not None:
        path = (base / instance) if not Path(instance).is_absolute() else Path(instance)
        if not path.is_file():
            raise ConfigError(f"instance file not found: {path}")
        clauses = path.read_text(encoding="utf-8")
    if isinstance(clauses, str):
        inst = parse_ec_clauses(clauses, n_qubits)
        data["clauses"] = inst.clauses
        data.setdefault("n_qubits", inst.n_qubits)
    elif clauses is not None:
        text = "; ".join(" ".join(str(i) for i in c) for c in clauses)
        inst = parse_ec_clauses(text, n_qubits)
        data["clauses"] = inst.clauses
        data.setdefault("n_qubits", inst.n_qubits)
    return ModelSpec(kind=kind, **data)


def _schedule_from(data: dict) -> Schedule:
    _check_keys("schedule", data, _SCHEDULE_KEYS)
    control = Control(data.get("control", "epsilon"))
    prefix = "eps" if control is Control.EPSILON else "delta"
    other = "delta" if prefix == "eps" else "eps"
    stray = [k for k in (f"{other}0", f"{other}_mid", f"{other}_f") if k in data]
    if stray:
        raise ConfigError(f"schedule fields {stray} do not match control {control.value}")
    kwargs: dict[str, Any] = {
        "mid": data.get(f"{prefix}_mid"),
        "initial": data.get(f"{prefix}0"),
        "final": data.get(f"{prefix}_f"),
        "control": control,
    }
    for key in ("switch_threshold", "t_max", "dt", "settle_tol", "settle_rate", "settle_window", "sample_stride"):
        if key in data and data[key] is not None:
            kwargs[key] = data[key]
    if kwargs["mid"] is None:
        kwargs["mid"] = math.nan  # filled per sweep point
    return Schedule(**kwargs)


def config_from_dict(data: dict, base: Path = Path(".")) -> RunConfig:
    _check_keys("config", data, _TOP_KEYS)
    try:
        model = _model_from(data["model"], base)
        _check_keys("cavity", data["cavity"], _CAVITY_KEYS)
        cavity = CavityParams(**data["cavity"])
        schedule = _schedule_from(data["schedule"]) if data.get("schedule") is not None else None
        sweep = None
        if data.get("sweep") is not None:
            _check_keys("sweep", data["sweep"], {"control", "lo", "hi", "n", "values"})
            sweep = SweepSpec(**data["sweep"])
    except KeyError as exc:
        raise ConfigError(f"missing required field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, CavityAQCError):
            raise
        raise ConfigError(str(exc)) from None
    emit = frozenset(data.get("emit", EMIT_KINDS))
    if not emit <= EMIT_KINDS:
        raise ConfigError(f"unknown emit kind(s): {', '.join(sorted(emit - EMIT_KINDS))}")
    return RunConfig(
        model=model, cavity=cavity, schedule=schedule, sweep=sweep,
        output_dir=Path(data.get("output_dir", "out")), emit=emit,
        command=data.get("command"), options=dict(data.get("options", {})),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return config_from_dict(data, path.parent)


def preset_names() -> list[str]:
    files = resources.files("cavityaqc").joinpath("presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    res = resources.files("cavityaqc").joinpath("presets", f"{name}.json")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    with resources.as_file(res) as path:
        return load_config(path)


# --------------------------------------------------------------------------
# emitters
# --------------------------------------------------------------------------


def fmt(value) -> str:
    """Text form used in every CSV cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{SIG_DIGITS}g}"
    return str(value)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(f"{v:.{SIG_DIGITS}g}")
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if obj is None or isinstance(obj, str):
        return obj
    raise InvalidInput(f"cannot serialise {type(obj).__name__}")


def write_csv(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_ready(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")
    return path
