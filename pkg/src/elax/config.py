"""Strict ``key = value`` experiment configuration with optional ``[section]`` headers.

Blank lines and ``#`` comments are ignored.  Keys before the first header
belong to the top-level ``run`` section.  Every problem is reported with its
line number, and all problems are collected before raising.  See README for
the list of keys.
"""

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigurationError

KINDS = ("simulate2d", "simulate3d", "laxcheck2d", "laxcheck3d", "spectrum", "pseudospec", "lyapunov", "expand")


# -- value parsers -------------------------------------------------------------

def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _str(text):
    if not text:
        raise ValueError("empty value")
    return text


def _float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _points(text):
    """``x,y; x,y`` or the word ``saddles``."""
    if text.strip() == "saddles":
        return "saddles"
    out = []
    for chunk in text.split(";"):
        vals = _float_list(chunk)
        if len(vals) != 2:
            raise ValueError(f"point {chunk.strip()!r} needs two coordinates")
        out.append(vals)
    return out


def _optional_int(text):
    return None if text.strip().lower() == "none" else int(text)


# -- schema --------------------------------------------------------------------
# section -> key -> (parser, default, check, message)

def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _even_n(v):
    return v >= 8 and v % 2 == 0


SCHEMA = {
    "run": {
        "kind": (_str, None, lambda v: v in KINDS, f"kind must be one of {', '.join(KINDS)}"),
        "n": (_int, 64, _even_n, "n must be an even integer >= 8"),
        "dt": (_float, 1e-3, _positive, "dt must be positive"),
        "t_end": (_float, 1.0, _nonneg, "t_end must be non-negative"),
        "seed": (_int, 0, _nonneg, "seed must be a non-negative integer"),
        "sobolev": (_float_list, [0.0, 1.0, 2.0], lambda v: len(v) > 0 and all(s >= 0 for s in v), "sobolev indices must be a non-empty list of non-negative numbers"),
        "output_dir": (_str, "elax_out", None, ""),
        "snapshot_every": (_float, 0.0, _nonneg, "snapshot_every must be non-negative (0 = initial and final only)"),
        "output_every": (_float, 0.0, _nonneg, "output_every must be non-negative (0 = every step)"),
    },
    "initial": {
        "name": (_str, None, None, ""),
        "amplitude": (_float, 1.0, None, ""),
        "decay": (_float, 2.0, _positive, "decay must be positive"),
    },
    "lax": {
        "phi0": (_str, "mode:1,0", None, ""),
        "pair": (_str, "ms", lambda v: v in ("ms", "childress"), "pair must be ms or childress"),
        "direction": (_float_list, [0.0, 0.0, 1.0], lambda v: len(v) == 3, "direction needs three components"),
        "pushforward": (_str, "none", None, ""),
    },
    "spectrum": {
        "m": (_int, 32, _positive, "m must be a positive integer"),
        "sector": (_optional_int, None, None, ""),
        "s": (_float, 0.0, _nonneg, "s must be non-negative"),
        "band": (_float_list, [-0.9, 0.9], lambda v: len(v) == 2 and v[0] < v[1], "band needs two increasing numbers"),
    },
    "pseudospec": {
        "rectangle": (_float_list, [-0.5, 0.5, -1.5, 1.5], lambda v: len(v) == 4 and v[0] < v[1] and v[2] < v[3], "rectangle needs xmin, xmax, ymin, ymax with min < max"),
        "resolution": (_int, 64, lambda v: 2 <= v <= 256, "resolution must be between 2 and 256"),
        "eps": (_float_list, [1e-6, 1e-4, 1e-2], lambda v: len(v) > 0 and all(e > 0 for e in v), "eps levels must be positive"),
    },
    "lyapunov": {
        "horizon": (_float, 50.0, _positive, "horizon must be positive"),
        "starts": (_points, "saddles", None, ""),
        "renorm": (_float, 0.5, _positive, "renorm must be positive"),
        "transient": (_float, 0.1, lambda v: 0 <= v < 1, "transient must lie in [0, 1)"),
    },
    "expand": {
        "m": (_int, 12, _positive, "m must be a positive integer"),
        "sector": (_int, 0, None, ""),
    },
    "caps": {
        "dense": (_int, 4096, _positive, "dense cap must be positive"),
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 64
    dt: float = 1e-3
    t_end: float = 1.0
    seed: int = 0
    sobolev: list = field(default_factory=lambda: [0.0, 1.0, 2.0])
    output_dir: str = "elax_out"
    snapshot_every: float = 0.0
    output_every: float = 0.0
    initial: dict = field(default_factory=dict)
    lax: dict = field(default_factory=dict)
    spectrum: dict = field(default_factory=dict)
    pseudospec: dict = field(default_factory=dict)
    lyapunov: dict = field(default_factory=dict)
    expand: dict = field(default_factory=dict)
    caps: dict = field(default_factory=dict)

    @property
    def dim(self):
        return 3 if self.kind in ("simulate3d", "laxcheck3d") else 2


def _defaults(section):
    return {k: (list(v[1]) if isinstance(v[1], list) else v[1]) for k, v in SCHEMA[section].items()}


def parse_config(text, kind=None):
    """Validated :class:`ExperimentConfig`, or ConfigurationError listing every problem.

    ``kind`` (e.g. from the command line) fills in or must agree with the
    ``kind`` key.
    """
    errors = []
    values = {section: {} for section in SCHEMA}
    seen = {}
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {raw.strip()!r}")
                continue
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        if section not in SCHEMA:
            continue  # already reported
        entry = SCHEMA[section].get(key)
        if entry is None:
            errors.append(f"line {lineno}: unknown key {key!r} in [{section}]")
            continue
        if (section, key) in seen:
            errors.append(f"line {lineno}: duplicate key {key!r} (first set on line {seen[(section, key)]})")
            continue
        seen[(section, key)] = lineno
        parser, _, check, message = entry
        try:
            parsed = parser(value)
        except ValueError as exc:
            errors.append(f"line {lineno}: {key}: cannot parse {value!r} ({exc})")
            continue
        if check is not None and not check(parsed):
            errors.append(f"line {lineno}: {key} = {value}: {message}")
            continue
        values[section][key] = parsed

    run = _defaults("run")
    run.update(values["run"])
    if kind is not None:
        if run["kind"] is not None and run["kind"] != kind:
            errors.append(f"line {seen[('run', 'kind')]}: kind {run['kind']!r} conflicts with requested {kind!r}")
        elif kind not in KINDS:
            errors.append(f"kind must be one of {', '.join(KINDS)}")
        run["kind"] = kind
    if run["kind"] is None:
        errors.append("missing required key 'kind'")
    if errors:
        raise ConfigurationError(errors)

    cfg = ExperimentConfig(**{f.name: run[f.name] for f in fields(ExperimentConfig) if f.name in run})
    for sec in SCHEMA:
        if sec == "run":
            continue
        merged = _defaults(sec)
        merged.update(values[sec])
        setattr(cfg, sec, merged)
    if cfg.initial["name"] is None:
        cfg.initial["name"] = "taylor_green" if cfg.dim == 3 else "shear"
    return cfg


def load_config(path, kind=None):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, kind)
