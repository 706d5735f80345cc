"""Sweep configuration: a flat ``key = value`` document with dotted keys.

Grammar (one assignment per line, UTF-8):

    # comment                      blank lines and '#' comments are ignored
    key = value                    key: [A-Za-z_][A-Za-z0-9_.]*
    value: integer | float | true/false | [v, v, ...] | "quoted" | bare word

Text after '#' is a comment unless the line contains a quote.

Keys are applied in file order after the optional ``preset`` key, which is
always applied first. A repeated key is an error.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

from ..bounds import ScheduleParams
from ..errors import ConfigurationError
from ..kernelcore import CrossForm, Family, KernelSpec
from ..synthdata import WeightingScheme, WeightMode

FULL_N_LIST = (100, 200, 300, 400, 450, 480, 520, 550, 600, 700, 784, 900, 1000, 1200, 1500, 2000)
DEFAULT_MASTER_SEED = 20240611

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


class LambdaKind(str, Enum):
    FIXED_EXPONENT = "fixed_exponent"
    FIXED_VALUE = "fixed_value"
    SCHEDULE = "schedule"


@dataclass(frozen=True)
class LambdaRule:
    """lambda = C n^{-c}, a constant, or the theoretical schedule.

    ``C=None`` means gamma_p / 10, resolved per decay from the linearized kernel.
    """

    kind: LambdaKind = LambdaKind.FIXED_EXPONENT
    c: float = 0.5
    C: Optional[float] = None
    value: float = 1e-3
    schedule: ScheduleParams = field(default_factory=ScheduleParams)


@dataclass(frozen=True)
class BoundConstants:
    C_tilde: float = 1.0
    eps_log: float = 0.05
    delta: float = 0.05
    m_p: float = 8.0
    m_q: float = 8.0


@dataclass(frozen=True)
class SweepConfig:
    d: int = 500
    n_list: Tuple[int, ...] = FULL_N_LIST
    n_test: int = 2500
    decay_list: Tuple[float, ...] = (0.5, 1.0, 1.5)
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.polynomial(5))
    cross_form: CrossForm = CrossForm.TAYLOR
    weighting: WeightingScheme = field(default_factory=WeightingScheme)
    sigma_eps: float = 1.0
    lambda_rule: LambdaRule = field(default_factory=LambdaRule)
    seeds: int = 10
    master_seed: int = DEFAULT_MASTER_SEED
    bound_constants: BoundConstants = field(default_factory=BoundConstants)
    output_dir: str = "results"
    normalize_covariance: bool = False
    perturb_covariance: bool = True
    mc_draws: int = 0
    record_timing: bool = False


PRESETS: Dict[str, Dict[str, Any]] = {
    # CI-sized reproduction used by the acceptance suite
    "desk": {"d": 200, "n_test": 1000, "n_list": [40, 100, 160, 200, 240, 400, 600, 800],
             "seeds": 5, "output_dir": "results/desk"},
    "full": {"d": 500, "n_test": 2500, "n_list": list(FULL_N_LIST), "seeds": 10,
              "output_dir": "results/full"},
}


def parse_value(text: str) -> Any:
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_document(text: str, source: str = "<config>") -> Dict[str, Any]:
    raw: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "#" in stripped and '"' not in stripped and "'" not in stripped:
            stripped = stripped.split("#", 1)[0].strip()
        if "=" not in stripped:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigurationError(f"{source}:{lineno}: malformed key {key!r}")
        if key in raw:
            raise ConfigurationError(f"{source}:{lineno}: key {key!r} assigned twice")
        raw[key] = parse_value(value)
    return raw


def load_config(path) -> SweepConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    return validate_config(parse_document(text, str(path)))


# --- validation helpers -----------------------------------------------------

def _int(key, v, minimum=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigurationError(f"{key}: expected an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigurationError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _float(key, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{key}: expected a number, got {v!r}")
    v = float(v)
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigurationError(f"{key}: must be finite")
    if positive and not v > 0:
        raise ConfigurationError(f"{key}: must be > 0, got {v}")
    if nonneg and v < 0:
        raise ConfigurationError(f"{key}: must be >= 0, got {v}")
    return v


def _bool(key, v):
    if not isinstance(v, bool):
        raise ConfigurationError(f"{key}: expected true or false, got {v!r}")
    return v


def _list(key, v):
    if not isinstance(v, (list, tuple)) or len(v) == 0:
        raise ConfigurationError(f"{key}: expected a nonempty list, got {v!r}")
    return list(v)


def _enum(key, enum_cls, v):
    try:
        return enum_cls(str(v))
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ConfigurationError(f"{key}: {v!r} is not one of {allowed}") from None


_SCHEDULE_FIELDS = {f.name for f in fields(ScheduleParams)}


def validate_config(raw: Mapping[str, Any]) -> SweepConfig:
    """Fully defaulted, invariant-checked config from a flat dotted-key mapping."""
    raw = dict(raw)
    merged: Dict[str, Any] = {}
    if "preset" in raw:
        name = raw.pop("preset")
        if name not in PRESETS:
            raise ConfigurationError(f"preset: unknown preset {name!r} (known: {', '.join(sorted(PRESETS))})")
        merged.update(PRESETS[name])
    merged.update(raw)

    top: Dict[str, Any] = {}
    kernel = {"family": Family.INNER_PRODUCT.value, "profile": "polynomial", "degree": 5}
    weighting = {"mode": WeightMode.TRUNCATED_RATIO.value, "cap": 10.0}
    lam: Dict[str, Any] = {}
    sched: Dict[str, Any] = {}
    bounds: Dict[str, Any] = {}

    for key, v in merged.items():
        if key == "d":
            top["d"] = _int(key, v, 2)
        elif key == "n_list":
            items = _list(key, v)
            out = [_int(f"n_list[{i}]", x, 1) for i, x in enumerate(items)]
            if len(set(out)) != len(out):
                raise ConfigurationError("n_list: entries must be distinct")
            top["n_list"] = tuple(sorted(out))
        elif key == "n_test":
            top["n_test"] = _int(key, v, 1)
        elif key == "decay_list":
            items = _list(key, v)
            top["decay_list"] = tuple(sorted(_float(f"decay_list[{i}]", x, nonneg=True) for i, x in enumerate(items)))
            if len(set(top["decay_list"])) != len(items):
                raise ConfigurationError("decay_list: entries must be distinct")
        elif key == "seeds":
            top["seeds"] = _int(key, v, 1)
        elif key == "master_seed":
            top["master_seed"] = _int(key, v, 0)
            if top["master_seed"] >= 1 << 64:
                raise ConfigurationError("master_seed: must fit in 64 bits")
        elif key == "sigma_eps":
            top["sigma_eps"] = _float(key, v, nonneg=True)
        elif key == "output_dir":
            top["output_dir"] = str(v)
        elif key == "mc_draws":
            top["mc_draws"] = _int(key, v, 0)
        elif key == "record_timing":
            top["record_timing"] = _bool(key, v)
        elif key == "covariance.normalize":
            top["normalize_covariance"] = _bool(key, v)
        elif key == "covariance.perturb":
            top["perturb_covariance"] = _bool(key, v)
        elif key == "kernel.family":
            kernel["family"] = _enum(key, Family, v).value
        elif key == "kernel.profile":
            kernel["profile"] = str(v)
        elif key == "kernel.degree":
            kernel["degree"] = _int(key, v, 1)
        elif key == "kernel.cross_form":
            top["cross_form"] = _enum(key, CrossForm, v)
        elif key == "weighting.mode":
            mode = _enum(key, WeightMode, v)
            if mode is WeightMode.CUSTOM:
                raise ConfigurationError(f"{key}: custom weights cannot be configured from a file")
            weighting["mode"] = mode.value
        elif key == "weighting.cap":
            weighting["cap"] = _float(key, v, positive=True)
        elif key == "lambda.rule":
            lam["kind"] = _enum(key, LambdaKind, v)
        elif key == "lambda.c":
            lam["c"] = _float(key, v, nonneg=True)
        elif key == "lambda.C":
            lam["C"] = None if v == "auto" else _float(key, v, positive=True)
        elif key == "lambda.value":
            lam["value"] = _float(key, v, nonneg=True)
        elif key.startswith("lambda.schedule."):
            name = key[len("lambda.schedule."):]
            if name not in _SCHEDULE_FIELDS:
                raise ConfigurationError(f"{key}: unknown key")
            sched[name] = _float(key, v)
        elif key.startswith("bounds.") and key[len("bounds."):] in {f.name for f in fields(BoundConstants)}:
            bounds[key[len("bounds."):]] = _float(key, v)
        else:
            raise ConfigurationError(f"{key}: unknown key")

    try:
        spec = KernelSpec(kernel["family"], kernel["profile"], degree=kernel["degree"])
    except ConfigurationError as exc:
        raise ConfigurationError(f"kernel: {exc}") from None
    if spec.profile == "custom":
        raise ConfigurationError("kernel.profile: custom profiles cannot be configured from a file")
    try:
        schedule = ScheduleParams(**sched)
    except ConfigurationError as exc:
        raise ConfigurationError(f"lambda.schedule: {exc}") from None
    bc = BoundConstants(**bounds)
    if not 0 < bc.delta < 1:
        raise ConfigurationError(f"bounds.delta: must lie in (0, 1), got {bc.delta}")
    if bc.C_tilde < 0 or bc.eps_log < 0 or bc.m_p < 0 or bc.m_q < 0:
        raise ConfigurationError("bounds: C_tilde, eps_log, m_p and m_q must be >= 0")

    cfg = SweepConfig(**top)
    return replace(
        cfg,
        kernel=spec,
        weighting=WeightingScheme(WeightMode(weighting["mode"]), float(weighting["cap"])),
        lambda_rule=replace(LambdaRule(), schedule=schedule, **lam),
        bound_constants=bc,
    )


def preset_config(name: str, overrides: Optional[Mapping[str, Any]] = None) -> SweepConfig:
    doc: Dict[str, Any] = {"preset": name}
    doc.update(overrides or {})
    return validate_config(doc)
