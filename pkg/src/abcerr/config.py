"""Experiment description: an INI document with one experiment per file.

Sections and keys::

    [experiment]   model, algorithm, seed, workers
    [model]        parameter block handed to the model factory
    [kernel]       family, delta | sigma, metric, c, children
    [algorithm]    n_target | n_proposals | n_steps, burn_in, thin, n_chains,
                   proposal_scale, n, m, batch_size
    [output]       dir, density_table, grid_points, keep_x

``parse_config`` reports every problem it finds, each tagged with the
section/key and, when the key appears in the text, its line number.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigError, ConstraintViolation, ParseError, UnknownName
from .kernels import KERNEL_FAMILIES, METRICS

__all__ = ["ExperimentConfig", "parse_config", "config_from_dict", "ALGORITHMS", "MODEL_PARAMS"]

ALGORITHMS = ("rejection", "weighted", "mcmc-c", "mcmc-d", "evidence")

# typed parameter blocks of the built-in models
MODEL_PARAMS = {
    "toy": {},
    "fossil": {
        "epochs": "floats", "counts": "ints", "lam": "floats", "tau": "floats", "alpha": "floats", "mu": "float",
    },
    "pritchard": {"v_shape": "float", "h_concentration": "float"},
    "discrete": {"seed": "int", "n_theta": "int", "n_out": "int"},
}

_KERNEL_KEYS = {"family": "str", "delta": "float", "sigma": "floats", "metric": "str", "c": "float",
                "children": "str"}
_ALGO_KEYS = {
    "n_target": "int", "n_proposals": "int", "n_steps": "int", "burn_in": "int", "thin": "int",
    "n_chains": "int", "proposal_scale": "floats", "n": "int", "m": "int", "batch_size": "int",
}
_OUTPUT_KEYS = {"dir": "str", "density_table": "bool", "grid_points": "int", "keep_x": "bool"}
_EXPERIMENT_KEYS = {"model": "str", "algorithm": "str", "seed": "int", "workers": "int"}

_DEFAULTS = {
    "experiment": {"seed": 0, "workers": 1},
    "algorithm": {"thin": 1, "burn_in": 0, "n_chains": 1, "batch_size": 10_000},
    "output": {"dir": "abc-output", "density_table": False, "grid_points": 2001, "keep_x": True},
}


@dataclass
class ExperimentConfig:
    model: str
    algorithm: str
    kernel: dict
    algo: dict
    model_params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": {"model": self.model, "algorithm": self.algorithm, "seed": self.seed,
                           "workers": self.workers},
            "model": dict(self.model_params),
            "kernel": dict(self.kernel),
            "algorithm": dict(self.algo),
            "output": dict(self.output),
        }

    def to_ini(self) -> str:
        lines = []
        for section, block in self.to_dict().items():
            lines.append(f"[{section}]")
            for key, value in block.items():
                if isinstance(value, (list, tuple)):
                    value = ", ".join(repr(v) for v in value)
                elif isinstance(value, float):
                    value = repr(value)
                elif isinstance(value, bool):
                    value = str(value).lower()
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


class _Problems:
    def __init__(self, text: Optional[str]):
        self.items = []
        self._lines = {}
        if text:
            section = None
            for no, line in enumerate(text.splitlines(), start=1):
                head = re.match(r"\s*\[([^\]]+)\]", line)
                if head:
                    section = head.group(1).strip()
                    continue
                kv = re.match(r"\s*([A-Za-z_][\w\-]*)\s*[=:]", line)
                if kv and section:
                    self._lines[(section, kv.group(1))] = no

    def add(self, cls, section, key, msg):
        where = f"{section}.{key}" if key else section
        line = self._lines.get((section, key))
        loc = f" (line {line})" if line else ""
        self.items.append((cls, f"{where}{loc}: {msg}"))

    def raise_if_any(self):
        if not self.items:
            return
        kinds = {cls for cls, _ in self.items}
        cls = kinds.pop() if len(kinds) == 1 else ConfigError
        raise cls([msg for _, msg in self.items])


def _coerce(value: Any, kind: str):
    if kind == "str":
        return str(value).strip()
    if kind == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind in ("int", "float"):
        if isinstance(value, bool):
            raise ValueError(f"not a number: {value!r}")
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"not an integer: {value!r}")
            return int(value) if not isinstance(value, str) else int(value.strip())
        return float(value)
    if kind in ("ints", "floats"):
        items = value if isinstance(value, (list, tuple)) else [v for v in str(value).split(",") if v.strip()]
        return [_coerce(v, kind[:-1]) for v in items]
    raise AssertionError(kind)


def _typed_block(raw: dict, schema: dict, section: str, problems: _Problems) -> dict:
    out = {}
    for key, value in raw.items():
        if key not in schema:
            problems.add(UnknownName, section, key, f"unknown key; expected one of {sorted(schema)}")
            continue
        try:
            out[key] = _coerce(value, schema[key])
        except (TypeError, ValueError) as exc:
            problems.add(ParseError, section, key, str(exc))
    return out


def config_from_dict(doc: dict, text: Optional[str] = None) -> ExperimentConfig:
    """Validate a nested ``{section: {key: value}}`` mapping."""
    problems = _Problems(text)
    known = {"experiment", "model", "kernel", "algorithm", "output"}
    for section in doc:
        if section not in known:
            problems.add(UnknownName, section, None, f"unknown section; expected one of {sorted(known)}")

    exp = {**_DEFAULTS["experiment"], **_typed_block(doc.get("experiment", {}), _EXPERIMENT_KEYS, "experiment", problems)}
    model = exp.get("model")
    algorithm = exp.get("algorithm")
    if model is None:
        problems.add(ConstraintViolation, "experiment", "model", "required")
    elif model not in MODEL_PARAMS:
        problems.add(UnknownName, "experiment", "model", f"unknown model {model!r}; registered: {sorted(MODEL_PARAMS)}")
    if algorithm is None:
        problems.add(ConstraintViolation, "experiment", "algorithm", "required")
    elif algorithm not in ALGORITHMS:
        problems.add(UnknownName, "experiment", "algorithm", f"unknown algorithm {algorithm!r}; registered: {list(ALGORITHMS)}")
    for key in ("seed", "workers"):
        if key in exp and key == "workers" and exp[key] < 1:
            problems.add(ConstraintViolation, "experiment", key, "must be at least 1")

    model_params = _typed_block(doc.get("model", {}), MODEL_PARAMS.get(model, {}), "model", problems) \
        if model in MODEL_PARAMS else {}

    kernel = _typed_block(doc.get("kernel", {}), _KERNEL_KEYS, "kernel", problems)
    _check_kernel(kernel, model, problems)

    algo = {**_DEFAULTS["algorithm"], **_typed_block(doc.get("algorithm", {}), _ALGO_KEYS, "algorithm", problems)}
    _check_algorithm(algo, algorithm, problems, set(doc.get("algorithm", {})))

    output = {**_DEFAULTS["output"], **_typed_block(doc.get("output", {}), _OUTPUT_KEYS, "output", problems)}
    if output.get("grid_points", 2) < 2:
        problems.add(ConstraintViolation, "output", "grid_points", "must be at least 2")
    if output.get("density_table") and model not in (None, "toy"):
        problems.add(ConstraintViolation, "output", "density_table", "analytic density tables exist for the toy model only")

    problems.raise_if_any()
    return ExperimentConfig(model, algorithm, kernel, algo, model_params, exp["seed"], exp["workers"], output)


def _check_kernel(kernel, model, problems):
    family = kernel.get("family")
    families = sorted(KERNEL_FAMILIES) + ["model"]
    if family is None:
        problems.add(ConstraintViolation, "kernel", "family", "required")
        return
    if family not in families:
        problems.add(UnknownName, "kernel", "family", f"unknown kernel family {family!r}; registered: {families}")
        return
    if family == "model" and model != "fossil":
        problems.add(ConstraintViolation, "kernel", "family", "only the fossil model defines its own acceptance rule")
    if "delta" in kernel and not (kernel["delta"] > 0 and math.isfinite(kernel["delta"])):
        problems.add(ConstraintViolation, "kernel", "delta", f"must be positive, got {kernel['delta']}")
    if "sigma" in kernel and not all(s > 0 for s in kernel["sigma"]):
        problems.add(ConstraintViolation, "kernel", "sigma", f"must be positive, got {kernel['sigma']}")
    if "c" in kernel and not kernel["c"] > 0:
        problems.add(ConstraintViolation, "kernel", "c", f"must be positive, got {kernel['c']}")
    if family in ("uniform", "epanechnikov") and "delta" not in kernel:
        problems.add(ConstraintViolation, "kernel", "delta", f"required for {family} kernels")
    if family == "gaussian" and "delta" not in kernel and "sigma" not in kernel:
        problems.add(ConstraintViolation, "kernel", "sigma", "gaussian kernels need sigma (or delta)")
    if family == "product" and "children" not in kernel:
        problems.add(ConstraintViolation, "kernel", "children", "required for product kernels")
    metric = kernel.get("metric")
    if metric is not None and metric not in METRICS:
        problems.add(UnknownName, "kernel", "metric", f"unknown metric {metric!r}; registered: {sorted(METRICS)}")
    if "children" in kernel:
        for part in kernel["children"].split(","):
            fam, _, val = part.strip().partition(":")
            if fam not in ("uniform", "epanechnikov", "gaussian"):
                problems.add(UnknownName, "kernel", "children", f"unknown child family {fam!r}")
                continue
            try:
                if not float(val) > 0:
                    raise ValueError
            except ValueError:
                problems.add(ConstraintViolation, "kernel", "children", f"child {part.strip()!r} needs a positive scale")


def _check_algorithm(algo, algorithm, problems, given=frozenset()):
    # keys that were given but failed to parse are already reported
    present = set(algo) | set(given)

    def need(key):
        if key not in present:
            problems.add(ConstraintViolation, "algorithm", key, f"required for {algorithm}")

    for key in ("n_target", "n_proposals", "n_steps", "n_chains", "n", "m", "thin", "batch_size"):
        if key in algo and algo[key] < 1:
            problems.add(ConstraintViolation, "algorithm", key, "must be at least 1")
    if algo.get("burn_in", 0) < 0:
        problems.add(ConstraintViolation, "algorithm", "burn_in", "must be nonnegative")
    if algorithm == "rejection":
        if ("n_target" in present) == ("n_proposals" in present):
            problems.add(ConstraintViolation, "algorithm", "n_target", "set exactly one of n_target and n_proposals")
    elif algorithm == "weighted":
        need("n_proposals")
    elif algorithm in ("mcmc-c", "mcmc-d"):
        need("n_steps")
        if "n_steps" in algo and algo.get("burn_in", 0) >= algo["n_steps"]:
            problems.add(ConstraintViolation, "algorithm", "burn_in", "must be smaller than n_steps")
    elif algorithm == "evidence":
        need("n")
        need("m")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an INI experiment document.

    Raises
    ------
    ParseError
        Malformed document or unconvertible values.
    UnknownName
        Unregistered model, algorithm, kernel family, metric or key.
    ConstraintViolation
        Values that violate a constraint, such as ``delta <= 0``.
    ConfigError
        A mix of the above; ``.errors`` lists every problem.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError([f"malformed config: {exc}".replace("\n", " ")]) from None
    doc = {section: dict(parser[section]) for section in parser.sections()}
    return config_from_dict(doc, text)
