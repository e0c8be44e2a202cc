"""Configuration loading and CSV/JSON serialisation.

Files use ordinary units (Hz, K, W, kg); angular frequencies exist only
in memory.  CSV files start with a ``#`` header block whose ``units``
line is checked on read.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
from importlib import resources
import json
import math
import os
from pathlib import Path
import re
import sys
import tempfile

import numpy as np

from .experiment import CoolingResult, HeatingModel, KerrCavity, SweepResult
from .physics import (
    CavityParams,
    CouplingParams,
    MechanicalParams,
    SystemParams,
    ThermalEnvironment,
    TWO_PI,
)
from .spectra import NoiseModel, SpectrumTrace, UNIT_TAGS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA_VERSION = 1
CONFIG_ENV_VAR = "BACKACTION_CONFIG"


class ConfigError(ValueError):
    pass


class UnitError(ValueError):
    pass


class CSVFormatError(ValueError):
    pass


# (field, required, check) per section; checks: "pos" > 0, "nonneg" >= 0, "bool".
CONFIG_SCHEMA = {
    "system": {
        "f_c": (True, "pos"),
        "kappa": (True, "pos"),
        "f_m": (True, "pos"),
        "gamma_m0": (True, "pos"),
        "mass": (True, "pos"),
        "g": (True, "pos"),
        "T_0": (True, "nonneg"),
        "T_p": (True, "nonneg"),
    },
    "kerr": {"K": (False, "nonneg")},
    "heating": {
        "alpha": (False, "nonneg"),
        "beta": (False, "pos"),
        "eta": (False, "nonneg"),
        "enabled": (False, "bool"),
    },
    "noise": {"imprecision_ref": (False, "pos"), "P_ref": (False, "pos")},
}

CONFIG_DEFAULTS = {
    "kerr": {"K": 0.0},
    "heating": {"alpha": 0.0, "beta": 1.0, "eta": 0.0, "enabled": False},
    "noise": {"imprecision_ref": 1e-28, "P_ref": 5e-8},
}


@dataclass
class Config:
    system: SystemParams
    kerr: KerrCavity
    heating: HeatingModel
    noise: NoiseModel
    raw: dict = field(default_factory=dict)
    source: str = ""

    @property
    def digest(self) -> str:
        return config_digest(self.raw)


def config_digest(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _key_lines(text: str) -> dict:
    lines, section = {}, ""
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]", s)
        if m:
            section = m.group(1)
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"^([A-Za-z0-9_\-]+)\s*=", s)
        if m:
            lines[(section, m.group(1))] = no
    return lines


def parse_config(text: str, source: str = "<string>") -> Config:
    """Validate TOML config text and build the in-memory parameter objects."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    where = _key_lines(text)

    def loc(section, key=None):
        no = where.get((section, key)) or where.get((section, None))
        return f"{source}:{no}" if no else source

    problems = []
    for section, body in data.items():
        if section not in CONFIG_SCHEMA:
            problems.append(f"{loc(section)}: unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            problems.append(f"{loc(section)}: [{section}] must be a table")
            continue
        for key in body:
            if key not in CONFIG_SCHEMA[section]:
                problems.append(f"{loc(section, key)}: unknown key '{section}.{key}'")

    raw, missing = {}, []
    for section, fields in CONFIG_SCHEMA.items():
        body = data.get(section, {}) if isinstance(data.get(section, {}), dict) else {}
        raw[section] = {}
        for key, (required, check) in fields.items():
            if key not in body:
                if required:
                    missing.append(f"{section}.{key}")
                else:
                    raw[section][key] = CONFIG_DEFAULTS[section][key]
                continue
            v = body[key]
            here = loc(section, key)
            if check == "bool":
                if isinstance(v, bool):
                    raw[section][key] = v
                else:
                    problems.append(f"{here}: '{section}.{key}' must be true or false")
            elif isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                problems.append(f"{here}: '{section}.{key}' must be a finite number")
            elif check == "pos" and not v > 0:
                problems.append(f"{here}: '{section}.{key}' must be > 0, got {v!r}")
            elif check == "nonneg" and v < 0:
                problems.append(f"{here}: '{section}.{key}' must be >= 0, got {v!r}")
            else:
                raw[section][key] = float(v)
    if missing:
        problems.insert(0, f"{source}: missing required fields: {', '.join(missing)}")
    if problems:
        raise ConfigError("\n".join(problems))

    s = raw["system"]
    try:
        cavity = CavityParams(omega_c=TWO_PI * s["f_c"], kappa=TWO_PI * s["kappa"])
    except ValueError as exc:
        raise ConfigError(f"{loc('system', 'kappa')}: {exc}") from None
    system = SystemParams(
        cavity=cavity,
        mech=MechanicalParams(omega_m=TWO_PI * s["f_m"], gamma_m0=TWO_PI * s["gamma_m0"],
                              mass=s["mass"]),
        coupling=CouplingParams(g=TWO_PI * s["g"]),
        env=ThermalEnvironment(T_0=s["T_0"], T_p=s["T_p"]),
    )
    h = raw["heating"]
    return Config(
        system=system,
        kerr=KerrCavity(TWO_PI * raw["kerr"]["K"], cavity),
        heating=HeatingModel(alpha=h["alpha"], beta=h["beta"], eta=h["eta"],
                             enabled=h["enabled"]),
        noise=NoiseModel(**raw["noise"]),
        raw=raw,
        source=source,
    )


def preset_text(name: str = "paper_device") -> str:
    return resources.files("backaction").joinpath(f"data/{name}.toml").read_text("utf-8")


def load_config(path=None) -> Config:
    """Load a TOML config file; ``"paper_device"`` (or no path and no
    ``BACKACTION_CONFIG`` environment variable) selects the bundled preset."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or "paper_device"
    if str(path) == "paper_device":
        return parse_config(preset_text(), source="paper_device")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, source=str(p))


# -- atomic writes ---------------------------------------------------------

def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_clean(obj):
    if isinstance(obj, dict):
        return {str(k): _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return None if not math.isfinite(obj) else float(obj)
    return obj


def write_json(path, payload: dict) -> None:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    atomic_write_text(path, json.dumps(_json_clean(body), indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- CSV -------------------------------------------------------------------

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    v = float(v)
    if math.isnan(v):
        return ""
    return repr(v)


def _parse(token: str, row_no: int, col: str, is_bool: bool):
    token = token.strip()
    if is_bool:
        if token not in ("true", "false"):
            raise CSVFormatError(f"row {row_no}: column {col!r} expects true/false, got {token!r}")
        return token == "true"
    if token == "":
        return math.nan
    if token in ("inf", "-inf"):
        return float(token)
    if not _NUMBER.match(token):
        raise CSVFormatError(f"row {row_no}: column {col!r} has malformed number {token!r}")
    return float(token)


def write_csv(path, kind: str, columns: dict, units: dict, meta: dict | None = None,
              bool_columns=()) -> None:
    """Write gridded data with a ``#`` header carrying kind, units and metadata."""
    names = list(columns)
    if set(units) != set(names):
        raise ValueError("every column needs a unit")
    n = {len(columns[c]) for c in names}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    head = [
        f"# schema_version: {SCHEMA_VERSION}",
        f"# kind: {json.dumps(kind)}",
        f"# units: {json.dumps({c: units[c] for c in names})}",
        f"# bool_columns: {json.dumps(list(bool_columns))}",
    ]
    for k, v in (meta or {}).items():
        head.append(f"# {k}: {json.dumps(_json_clean(v), sort_keys=True)}")
    lines = head + [",".join(names)]
    for row in zip(*(columns[c] for c in names)):
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass
class CSVTable:
    kind: str
    units: dict
    meta: dict
    columns: dict


def read_csv(path, kind: str | None = None, units: dict | None = None) -> CSVTable:
    """Parse a file written by :func:`write_csv`.

    ``kind`` and ``units`` (a subset of columns) are checked when given.
    """
    text = Path(path).read_text(encoding="utf-8")
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, val = line[1:].partition(":")
            if not sep:
                raise CSVFormatError(f"malformed header line {line!r}")
            header[key.strip()] = val.strip()
        else:  # blank lines are data: a lone NaN cell is written as empty
            body.append(line)
    if "units" not in header:
        raise UnitError("missing mandatory units header line")
    if not body:
        raise CSVFormatError("missing column-name row")
    try:
        meta = {k: json.loads(v) for k, v in header.items()}
    except json.JSONDecodeError as exc:
        raise CSVFormatError(f"malformed header value: {exc}") from None
    file_kind = meta.pop("kind", None)
    file_units = meta.pop("units")
    bools = set(meta.pop("bool_columns", []))
    meta.pop("schema_version", None)
    if kind is not None and file_kind != kind:
        raise CSVFormatError(f"expected a {kind!r} file, found {file_kind!r}")
    for col, unit in (units or {}).items():
        if file_units.get(col) != unit:
            raise UnitError(
                f"column {col!r} is in {file_units.get(col)!r}, expected {unit!r}"
            )
    names = [c.strip() for c in body[0].split(",")]
    if set(names) != set(file_units):
        raise UnitError("units line does not match the column names")
    data = {c: [] for c in names}
    for row_no, line in enumerate(body[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(names):
            raise CSVFormatError(
                f"row {row_no}: expected {len(names)} fields, found {len(cells)}"
            )
        for c, tok in zip(names, cells):
            data[c].append(_parse(tok, row_no, c, c in bools))
    cols = {c: np.array(v, dtype=bool if c in bools else float) for c, v in data.items()}
    return CSVTable(kind=file_kind, units=file_units, meta=meta, columns=cols)


SPECTRUM_UNITS = {tag: {"freq": "Hz", "psd": u} for tag, u in UNIT_TAGS.items()}
SWEEP_UNITS = {
    "detuning": "Hz", "n_bar": "1", "Gamma": "Hz", "Omega": "Hz", "gamma_m": "Hz",
    "T_m": "K", "m_bar": "1", "regenerative": "bool", "multistable": "bool",
}
COOLING_UNITS = {
    "P_c": "W", "detuning": "Hz", "Gamma": "Hz", "gamma_m": "Hz", "T_0": "K",
    "T_m": "K", "m_bar": "1", "floor": "m^2/Hz",
}
CALIBRATION_UNITS = {"T": "K", "mean_square_freq": "Hz^2", "sigma": "Hz^2"}


def write_spectrum(path, trace: SpectrumTrace) -> None:
    write_csv(
        path, "spectrum",
        {"freq": trace.freq_grid, "psd": trace.psd},
        SPECTRUM_UNITS[trace.unit_tag],
        meta={"unit_tag": trace.unit_tag, "n_avg": trace.n_avg, "seed": trace.seed,
              "provenance": trace.provenance},
    )


def read_spectrum(path, unit_tag: str | None = None) -> SpectrumTrace:
    """Read a spectrum; ``unit_tag`` rejects files of the other PSD kind."""
    t = read_csv(path, kind="spectrum",
                 units=SPECTRUM_UNITS[unit_tag] if unit_tag else {"freq": "Hz"})
    tag = t.meta.get("unit_tag")
    if SPECTRUM_UNITS.get(tag) != t.units:
        raise UnitError(f"unit tag {tag!r} disagrees with units {t.units!r}")
    return SpectrumTrace(t.columns["freq"], t.columns["psd"], unit_tag=tag,
                         n_avg=int(t.meta.get("n_avg", 1)), seed=t.meta.get("seed"),
                         provenance=t.meta.get("provenance") or {})


def write_sweep(path, sweep: SweepResult) -> None:
    write_csv(path, "sweep", {c: getattr(sweep, c) for c in SweepResult.COLUMNS},
              SWEEP_UNITS, meta=sweep.metadata, bool_columns=("regenerative", "multistable"))


def read_sweep(path) -> SweepResult:
    t = read_csv(path, kind="sweep", units=SWEEP_UNITS)
    return SweepResult(**{c: t.columns[c] for c in SweepResult.COLUMNS}, metadata=t.meta)


def write_cooling(path, result: CoolingResult) -> None:
    write_csv(path, "cooling", {c: getattr(result, c) for c in CoolingResult.COLUMNS},
              COOLING_UNITS, meta=result.metadata)


def read_cooling(path) -> CoolingResult:
    t = read_csv(path, kind="cooling", units=COOLING_UNITS)
    return CoolingResult(**{c: t.columns[c] for c in CoolingResult.COLUMNS}, metadata=t.meta)


def write_calibration_points(path, T, mean_square_freq, sigma=None, meta=None) -> None:
    sigma = np.full(len(T), np.nan) if sigma is None else sigma
    write_csv(path, "calibration",
              {"T": T, "mean_square_freq": mean_square_freq, "sigma": sigma},
              CALIBRATION_UNITS, meta=meta)


def read_calibration_points(path):
    """Return (T, mean_square_freq, sigma or None)."""
    t = read_csv(path, kind="calibration", units={"T": "K", "mean_square_freq": "Hz^2"})
    sigma = t.columns.get("sigma")
    if sigma is not None and np.all(np.isnan(sigma)):
        sigma = None
    return t.columns["T"], t.columns["mean_square_freq"], sigma
