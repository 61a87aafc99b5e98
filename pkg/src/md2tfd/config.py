"""Run configuration: TOML schema, validation and canonical serialization.

Schema (every table optional except [spectral] and [temperature]):

    name = "weak_hot"
    qubit_init = "up"            # up | down | plus_x
    omega0_eV = 1.0              # carried into outputs only
    alpha_c0 = 1.0               # zero-temperature critical coupling
    delta = 0.0                  # tunneling; only 0 is accepted

    [spectral]
    alpha = 0.02                 # or alpha_left / alpha_right
    omega_c = 1.5                # or omega_c_left / omega_c_right

    [temperature]
    T = 2.0                      # mean, split as T(1 +/- 0.005)
    # T_left = 2.01              # or both sides explicitly
    # T_right = 1.99

    [discretization]
    scheme = "id"                # id | log
    tolerance = 1e-4             # id only
    modes = 0                    # log: mode count; id: cap (0 = none)
    omega_max_factor = 10.0

    [ansatz]
    M = 18
    noise = 1e-4
    seed = 0

    [integrator]
    dt = 0.01
    t_final = 10.0
    output_stride = 1
    sigma2_stride = 10

    [oracle]
    n_max = 4
    dim_cap = 200000
    certify_tol = 1e-4
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["RunConfig", "OracleSpec", "ConfigError", "parse_config", "load_config",
           "dump_config", "TEMPERATURE_SPLIT"]

# the two baths sit at T(1 + 0.005) and T(1 - 0.005): a 1% difference
TEMPERATURE_SPLIT = 0.01


class ConfigError(ValueError):
    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None or line is not None:
            where = f"{source or '<config>'}:{line if line is not None else '?'}: "
        super().__init__(where + message)
        self.line = line


@dataclass(frozen=True)
class OracleSpec:
    n_max: int = 4
    dim_cap: int = 200_000
    certify_tol: float = 1e-4


@dataclass(frozen=True)
class RunConfig:
    alpha_left: float
    alpha_right: float
    omega_c_left: float
    omega_c_right: float
    T_left: float
    T_right: float
    scheme: str = "id"
    tolerance: float = 1e-4
    modes: int = 0
    omega_max_factor: float = 10.0
    M: int = 8
    noise: float = 1e-4
    seed: int = 0
    dt: float = 0.01
    t_final: float = 10.0
    output_stride: int = 1
    sigma2_stride: int = 10
    qubit_init: str = "up"
    omega0_eV: float = 1.0
    alpha_c0: float = 1.0
    delta: float = 0.0
    name: str = "run"
    oracle: OracleSpec | None = None

    def __post_init__(self):
        for key in ("alpha_left", "alpha_right", "omega_c_left", "omega_c_right",
                    "T_left", "T_right", "tolerance", "omega_max_factor", "dt", "alpha_c0"):
            v = getattr(self, key)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{key} must be a positive number, got {v!r}")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")
        if self.scheme not in ("id", "log"):
            raise ConfigError(f"scheme must be 'id' or 'log', got {self.scheme!r}")
        if self.scheme == "log" and self.modes < 1:
            raise ConfigError("the log scheme needs modes >= 1")
        if self.M < 1:
            raise ConfigError("M must be at least 1")
        if self.output_stride < 1 or self.sigma2_stride < 1:
            raise ConfigError("strides must be at least 1")
        if self.qubit_init not in ("up", "down", "plus_x"):
            raise ConfigError(f"qubit_init must be up, down or plus_x, got {self.qubit_init!r}")
        if self.delta != 0:
            raise ConfigError("delta must be 0: the equations of motion assume no "
                              "tunneling term (see the decisions ledger)")

    @property
    def T_mean(self):
        return 0.5 * (self.T_left + self.T_right)


_SCHEMA = {
    None: {"name": str, "qubit_init": str, "omega0_eV": float, "alpha_c0": float, "delta": float},
    "spectral": {"alpha": float, "omega_c": float, "alpha_left": float, "alpha_right": float,
                 "omega_c_left": float, "omega_c_right": float},
    "temperature": {"T": float, "T_left": float, "T_right": float},
    "discretization": {"scheme": str, "tolerance": float, "modes": int,
                       "omega_max_factor": float},
    "ansatz": {"M": int, "noise": float, "seed": int},
    "integrator": {"dt": float, "t_final": float, "output_stride": int, "sigma2_stride": int},
    "oracle": {"n_max": int, "dim_cap": int, "certify_tol": float},
}


def _line_of(text, key, table=None):
    """1-based line of ``key = ...`` (inside ``[table]`` when given)."""
    if text is None:
        return None
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[\s*([A-Za-z0-9_]+)\s*\]", line)
        if m:
            current = m.group(1)
            if table is not None and key is None and current == table:
                return n
            continue
        if key is not None and current == table and re.match(rf"{re.escape(key)}\s*=", line):
            return n
    return None


def _coerce(value, kind, key, table, text, source):
    line = _line_of(text, key, table)
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind is str and isinstance(value, str):
        return value
    raise ConfigError(f"'{key}' must be {kind.__name__}, got {value!r}", line, source)


def parse_config(text, source=None):
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"not valid TOML ({exc})", int(m.group(1)) if m else None, source)

    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict):
            if key not in _SCHEMA or key is None:
                raise ConfigError(f"unknown table [{key}]", _line_of(text, None, key), source)
            for sub, v in value.items():
                if sub not in _SCHEMA[key]:
                    raise ConfigError(f"unknown key '{sub}' in [{key}]",
                                      _line_of(text, sub, key), source)
                flat[(key, sub)] = _coerce(v, _SCHEMA[key][sub], sub, key, text, source)
        else:
            if key not in _SCHEMA[None]:
                raise ConfigError(f"unknown key '{key}'", _line_of(text, key), source)
            flat[(None, key)] = _coerce(value, _SCHEMA[None][key], key, None, text, source)

    def get(table, key, default=None):
        return flat.get((table, key), default)

    def per_bath(table, key):
        both = get(table, key)
        left, right = get(table, key + "_left", both), get(table, key + "_right", both)
        if left is None or right is None:
            missing = key if both is None else (key + "_left" if left is None else key + "_right")
            raise ConfigError(f"missing required key '{missing}' in [{table}]",
                              _line_of(text, None, table), source)
        return left, right

    alpha_l, alpha_r = per_bath("spectral", "alpha")
    wc_l, wc_r = per_bath("spectral", "omega_c")
    T = get("temperature", "T")
    T_l, T_r = get("temperature", "T_left"), get("temperature", "T_right")
    if T is not None and (T_l is not None or T_r is not None):
        raise ConfigError("give either T or T_left/T_right, not both",
                          _line_of(text, "T", "temperature"), source)
    if T is not None:
        T_l = T * (1 + 0.5 * TEMPERATURE_SPLIT)
        T_r = T * (1 - 0.5 * TEMPERATURE_SPLIT)
    if T_l is None or T_r is None:
        missing = "T" if T_l is None and T_r is None else ("T_left" if T_l is None else "T_right")
        raise ConfigError(f"missing required key '{missing}' in [temperature]",
                          _line_of(text, None, "temperature"), source)

    kwargs = dict(alpha_left=alpha_l, alpha_right=alpha_r, omega_c_left=wc_l,
                  omega_c_right=wc_r, T_left=T_l, T_right=T_r)
    for (table, key), value in flat.items():
        if table in ("discretization", "ansatz", "integrator") or table is None:
            kwargs[key] = value
    if any(t == "oracle" for t, _ in flat):
        kwargs["oracle"] = OracleSpec(**{k: v for (t, k), v in flat.items() if t == "oracle"})
    try:
        return RunConfig(**kwargs)
    except ConfigError as exc:
        key = next((k for k in kwargs if f"{k} " in str(exc) or f"{k}:" in str(exc)), None)
        table = next((t for t, sch in _SCHEMA.items() if key in sch), None) if key else None
        raise ConfigError(str(exc), _line_of(text, key, table) if key else None, source) from None


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


def _fmt(v):
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    return str(v)


def dump_config(cfg):
    """Canonical TOML text (explicit per-bath values)."""
    d = asdict(cfg)
    out = []
    for key in ("name", "qubit_init", "omega0_eV", "alpha_c0", "delta"):
        out.append(f"{key} = {_fmt(d[key])}")
    sections = {
        "spectral": ("alpha_left", "alpha_right", "omega_c_left", "omega_c_right"),
        "temperature": ("T_left", "T_right"),
        "discretization": ("scheme", "tolerance", "modes", "omega_max_factor"),
        "ansatz": ("M", "noise", "seed"),
        "integrator": ("dt", "t_final", "output_stride", "sigma2_stride"),
    }
    for table, keys in sections.items():
        out.append("")
        out.append(f"[{table}]")
        out.extend(f"{k} = {_fmt(d[k])}" for k in keys)
    if cfg.oracle is not None:
        out.append("")
        out.append("[oracle]")
        out.extend(f"{f.name} = {_fmt(getattr(cfg.oracle, f.name))}" for f in fields(OracleSpec))
    return "\n".join(out) + "\n"
