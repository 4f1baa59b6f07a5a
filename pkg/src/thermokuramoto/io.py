"""
Scenario files (TOML), trajectory CSV, JSON reports, and SVG plots.

A scenario file has the sections [model], [initial], [integrator], [claims]
and optionally [perturbation]. Matrices may be written as ``"uniform: c"``,
as a list of rows, or as ``"ring: base, d1, d2, ..."`` where entry (α, β)
takes the value listed for lattice distance min(|α−β|, N−|α−β|), falling
back to ``base`` for distances without an explicit value.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import tomli
import tomli_w

from .errors import ScenarioParseError
from .integrator import IntegratorOptions, Trajectory
from .model import EnsembleState, ModelParams
from .scenario import Perturbation, RandomInitial, Scenario, scenario_to_dict
from .tcs import TcsState

PathLike = Union[str, Path]

SCHEMA: Dict[str, Tuple[str, ...]] = {
    "": ("name",),
    "model": ("n", "kappa1", "kappa2", "eta", "t_star", "nu", "psi", "zeta"),
    "initial": ("time", "phases", "temps", "positions", "velocities", "phase_range", "temp_range", "seed"),
    "integrator": ("method", "dt", "rel_tol", "abs_tol", "t_end", "output_stride", "positivity_floor",
                   "sample_interval", "max_steps"),
    "claims": ("ids", "pairing"),
    "perturbation": ("amplitude", "seed", "offsets"),
}

OBSERVABLE_COLUMNS = ("entropy", "phase_diameter", "temp_diameter", "order_parameter", "conserved_g", "phase_sum")


# -- scenario parsing ----------------------------------------------------------------


def _key_line(text: Optional[str], section: str, key: Optional[str]) -> Optional[int]:
    """1-based line of ``key`` inside ``[section]`` (or of the section header when key is None)."""
    if not text:
        return None
    current = ""
    header = re.compile(r"^\s*\[([^\]]+)\]")
    for i, line in enumerate(text.splitlines(), start=1):
        m = header.match(line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^\s*{re.escape(key)}\s*=", line):
            return i
    return None


class _Reader:
    def __init__(self, data: Dict[str, Any], text: Optional[str]):
        self.data, self.text = data, text

    def fail(self, section: str, key: Optional[str], msg: str) -> ScenarioParseError:
        name = f"{section}.{key}" if section and key else (key or section)
        return ScenarioParseError(msg, field=name, line=_key_line(self.text, section, key))

    def section(self, name: str, required: bool = False) -> Dict[str, Any]:
        sec = self.data.get(name)
        if sec is None:
            if required:
                raise ScenarioParseError(f"missing required section [{name}]", field=name)
            return {}
        if not isinstance(sec, dict):
            raise self.fail("", name, f"[{name}] must be a table")
        unknown = [k for k in sec if k not in SCHEMA[name]]
        if unknown:
            raise self.fail(name, unknown[0], f"unknown field {unknown[0]!r} in [{name}]; "
                                              f"allowed: {', '.join(SCHEMA[name])}")
        return sec

    def number(self, section: str, sec: Dict[str, Any], key: str, default: Any = None) -> Any:
        if key not in sec:
            if default is None:
                raise self.fail(section, key, f"missing required field {section}.{key}")
            return default
        v = sec[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self.fail(section, key, f"{section}.{key} must be a number, got {v!r}")
        return v


def _shorthand(value: str) -> Tuple[str, List[float]]:
    kind, sep, rest = value.partition(":")
    if not sep:
        raise ValueError(f"expected 'kind: values', got {value!r}")
    nums = [float(x) for x in rest.replace(",", " ").split()]
    return kind.strip().lower(), nums


def ring_matrix(n: int, values: Sequence[float]) -> np.ndarray:
    """Circulant matrix whose (α, β) entry depends on the ring distance min(|α−β|, N−|α−β|)."""
    base = values[0]
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :])
    dist = np.minimum(dist, n - dist)
    table = np.full(n, base, dtype=np.float64)
    for d, v in enumerate(values[1:], start=1):
        if d < n:
            table[d] = v
    return table[dist]


def _vector(r: _Reader, section: str, sec: Dict[str, Any], key: str, n: Optional[int]) -> np.ndarray:
    v = sec[key]
    if isinstance(v, str):
        try:
            kind, nums = _shorthand(v)
        except ValueError as exc:
            raise r.fail(section, key, str(exc)) from None
        if kind != "uniform" or len(nums) != 1:
            raise r.fail(section, key, f"{section}.{key}: only 'uniform: c' shorthand is allowed for vectors")
        if n is None:
            raise r.fail(section, key, f"{section}.{key}: shorthand needs model.n")
        return np.full(n, nums[0])
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise r.fail(section, key, f"{section}.{key} must be a list of numbers or 'uniform: c'")
    if n is not None and len(v) != n:
        raise r.fail(section, key, f"{section}.{key} has {len(v)} entries, expected {n}")
    return np.asarray(v, dtype=np.float64)


def _matrix(r: _Reader, sec: Dict[str, Any], key: str, n: int) -> np.ndarray:
    if key not in sec:
        return np.ones((n, n))
    v = sec[key]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return np.full((n, n), float(v))
    if isinstance(v, str):
        try:
            kind, nums = _shorthand(v)
        except ValueError as exc:
            raise r.fail("model", key, str(exc)) from None
        if kind == "uniform" and len(nums) == 1:
            return np.full((n, n), nums[0])
        if kind == "ring" and len(nums) >= 1:
            return ring_matrix(n, nums)
        raise r.fail("model", key, f"model.{key}: expected 'uniform: c' or 'ring: base, neighbor, ...'")
    if (
        isinstance(v, list)
        and len(v) == n
        and all(isinstance(row, list) and len(row) == n for row in v)
    ):
        try:
            return np.asarray(v, dtype=np.float64)
        except (TypeError, ValueError):
            pass
    raise r.fail("model", key, f"model.{key} must be an {n}x{n} list of rows or a shorthand string")


def _pair(r: _Reader, section: str, sec: Dict[str, Any], key: str) -> Tuple[float, float]:
    v = sec[key]
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise r.fail(section, key, f"{section}.{key} must be a two-element list [lo, hi]")
    return float(v[0]), float(v[1])


def scenario_from_dict(data: Dict[str, Any], text: Optional[str] = None) -> Scenario:
    """Build a :class:`Scenario` from a parsed mapping, filling defaults."""
    r = _Reader(data, text)
    top_unknown = [k for k in data if k not in SCHEMA and k != "name"]
    if top_unknown:
        raise r.fail("", top_unknown[0], f"unknown top-level key {top_unknown[0]!r}")
    name = data.get("name", "scenario")
    if not isinstance(name, str):
        raise r.fail("", "name", "name must be a string")

    model = r.section("model", required=True)
    n = model.get("n")
    if n is not None and (isinstance(n, bool) or not isinstance(n, int) or n < 1):
        raise r.fail("model", "n", "model.n must be a positive integer")
    if n is None:
        if isinstance(model.get("nu"), list):
            n = len(model["nu"])
        else:
            raise r.fail("model", "n", "model.n is required unless nu is given as a list")
    nu = _vector(r, "model", model, "nu", n) if "nu" in model else np.zeros(n)
    params = ModelParams(
        kappa1=r.number("model", model, "kappa1", 1.0),
        kappa2=r.number("model", model, "kappa2", 1.0),
        eta=r.number("model", model, "eta", 0.0),
        t_star=r.number("model", model, "t_star", 1.0),
        nat_freq=nu,
        psi=_matrix(r, model, "psi", n),
        zeta=_matrix(r, model, "zeta", n),
    )

    init = r.section("initial", required=True)
    initial: Union[EnsembleState, TcsState, RandomInitial]
    if "phase_range" in init or "temp_range" in init:
        if "seed" not in init:
            raise r.fail("initial", None, "random initial data needs an explicit seed")
        seed = init["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise r.fail("initial", "seed", "initial.seed must be a nonnegative integer")
        for k in ("phase_range", "temp_range"):
            if k not in init:
                raise r.fail("initial", k, f"missing initial.{k}")
        initial = RandomInitial(_pair(r, "initial", init, "phase_range"), _pair(r, "initial", init, "temp_range"),
                                seed)
    elif "positions" in init or "velocities" in init:
        for k in ("positions", "velocities", "temps"):
            if k not in init:
                raise r.fail("initial", k, f"missing initial.{k}")
        t0 = r.number("initial", init, "time", 0.0)
        initial = TcsState(t0, np.asarray(init["positions"], dtype=np.float64),
                           np.asarray(init["velocities"], dtype=np.float64),
                           _vector(r, "initial", init, "temps", n))
    else:
        for k in ("phases", "temps"):
            if k not in init:
                raise r.fail("initial", k, f"missing initial.{k}")
        t0 = r.number("initial", init, "time", 0.0)
        initial = EnsembleState(t0, _vector(r, "initial", init, "phases", n), _vector(r, "initial", init, "temps", n))

    integ = r.section("integrator")
    defaults = IntegratorOptions()
    kwargs: Dict[str, Any] = {}
    for k in SCHEMA["integrator"]:
        if k not in integ:
            continue
        if k == "method":
            if not isinstance(integ[k], str):
                raise r.fail("integrator", k, "integrator.method must be a string")
            kwargs[k] = integ[k]
        else:
            kwargs[k] = r.number("integrator", integ, k, getattr(defaults, k))
    options = IntegratorOptions(**kwargs)

    cl = r.section("claims")
    ids = cl.get("ids", [])
    if isinstance(ids, str):
        ids = [c.strip() for c in ids.split(",") if c.strip()]
    if not isinstance(ids, list) or not all(isinstance(c, str) for c in ids):
        raise r.fail("claims", "ids", "claims.ids must be a list of claim id strings")
    pairing = cl.get("pairing", "none")

    pert = None
    if "perturbation" in data:
        ps = r.section("perturbation")
        offsets = ps.get("offsets")
        pert = Perturbation(
            amplitude=float(r.number("perturbation", ps, "amplitude", 0.1)),
            seed=int(r.number("perturbation", ps, "seed", 0)),
            offsets=tuple(float(x) for x in offsets) if offsets is not None else None,
        )
    return Scenario(name, params, initial, options, tuple(ids), pairing, pert)


def parse_scenario(text: str, overrides: Iterable[str] = ()) -> Scenario:
    """Parse scenario text; ``overrides`` are ``section.key=value`` strings applied first."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioParseError(f"malformed scenario file: {exc}", line=int(m.group(1)) if m else None) from None
    data = apply_overrides(data, overrides)
    return scenario_from_dict(data, text)


def load_scenario(path: PathLike, overrides: Iterable[str] = ()) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read scenario: {exc.strerror}", str(p)) from exc
    return parse_scenario(text, overrides)


def _parse_value(raw: str) -> Any:
    try:
        return tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        return raw.strip()


def apply_overrides(data: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply ``section.key=value`` (or ``name=value``) overrides to parsed scenario data."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ScenarioParseError(f"override {item!r} is not of the form key=value", field=item)
        key = key.strip()
        section, dot, name = key.rpartition(".")
        if not dot:
            section, name = "", key
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ScenarioParseError(f"override refers to unknown field {key!r}", field=key)
        value = _parse_value(raw)
        if section:
            out.setdefault(section, {})[name] = value
        else:
            out[name] = value
    return out


def _matrix_repr(m: np.ndarray) -> Any:
    if np.all(m == m.flat[0]):
        return f"uniform: {float(m.flat[0])!r}"
    return m.tolist()


def emit_scenario(s: Scenario) -> str:
    """TOML text that parses back to an equal scenario."""
    d = scenario_to_dict(s)
    model = d["model"]
    model["psi"] = _matrix_repr(s.params.psi)
    model["zeta"] = _matrix_repr(s.params.zeta)
    nu = s.params.nat_freq
    if np.all(nu == nu[0]):
        model["nu"] = f"uniform: {float(nu[0])!r}"
    return tomli_w.dumps(d)


# -- trajectory CSV ----------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_header(kind: str, n: int) -> List[str]:
    if kind == "tcs":
        cols = ["t"]
        cols += [f"{a}_{i}" for i in range(1, n + 1) for a in ("x", "y")]
        cols += [f"{a}_{i}" for i in range(1, n + 1) for a in ("vx", "vy")]
        cols += [f"temp_{i}" for i in range(1, n + 1)]
        return cols
    return (
        ["t"] + [f"theta_{i}" for i in range(1, n + 1)] + [f"temp_{i}" for i in range(1, n + 1)]
        + list(OBSERVABLE_COLUMNS)
    )


def write_trajectory_csv(traj: Trajectory, path: PathLike) -> None:
    """Write samples with 17 significant digits; an empty trajectory yields the header only."""
    p = Path(path)
    header = trajectory_header(traj.kind, traj.n)
    try:
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            if len(traj) == 0:
                return
            if traj.kind == "tcs":
                body = np.column_stack([traj.times, traj.values])
            else:
                obs = traj.observables
                body = np.column_stack(
                    [traj.times, traj.phases, traj.temps] + [obs[c] for c in OBSERVABLE_COLUMNS]
                )
            for row in body:
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write trajectory CSV: {exc.strerror}", str(p)) from exc


def read_trajectory_csv(path: PathLike) -> Trajectory:
    """Load a CSV written by :func:`write_trajectory_csv` (observable columns are recomputed on demand)."""
    p = Path(path)
    try:
        with p.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read trajectory CSV: {exc.strerror}", str(p)) from exc
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ScenarioParseError(f"{p}: not a trajectory CSV (missing 't' header)")
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=np.float64).reshape(-1, len(header))
    if "x_1" in header:
        n = (len(header) - 1) // 5
        return Trajectory("tcs", n, data[:, 0].copy(), data[:, 1:].copy())
    n = sum(1 for c in header if c.startswith("theta_"))
    return Trajectory("tk", n, data[:, 0].copy(), data[:, 1:1 + 2 * n].copy())


def read_trajectory_columns(path: PathLike) -> Dict[str, np.ndarray]:
    """All CSV columns by header name."""
    p = Path(path)
    with p.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=np.float64).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


# -- reports and plots ------------------------------------------------------------------


def write_report_json(report: Any, path: PathLike) -> None:
    p = Path(path)
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    try:
        p.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(p)) from exc


def plot_svg(
    source: Union[Trajectory, Dict[str, np.ndarray]],
    channels: Sequence[str],
    path: PathLike,
    log_scale: bool = False,
) -> None:
    """Plot the named channels against time as SVG.

    ``source`` is a trajectory or a column mapping from a CSV. A channel is
    an observable name, a single column such as ``theta_3``, or ``theta`` /
    ``temp`` for every oscillator. ``log_scale`` puts the y axis on a log
    scale, which makes exponential decay of the diameter channels linear.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(source, Trajectory):
        cols: Dict[str, np.ndarray] = {"t": source.times}
        if source.kind != "tcs":
            for i in range(source.n):
                cols[f"theta_{i + 1}"] = source.phases[:, i]
                cols[f"temp_{i + 1}"] = source.temps[:, i]
            if len(source):
                cols.update({c: source.observables[c] for c in OBSERVABLE_COLUMNS})
    else:
        cols = source
    t = cols["t"]
    fig, ax = plt.subplots(figsize=(7, 4))
    for ch in channels:
        names = [c for c in cols if c.startswith(ch + "_") and c[len(ch) + 1:].isdigit()] if ch in (
            "theta", "temp") else [ch]
        for name in names:
            if name not in cols:
                plt.close(fig)
                raise ScenarioParseError(f"unknown channel {name!r}; available: {', '.join(cols)}", field=name)
            y = np.asarray(cols[name], dtype=np.float64)
            if log_scale:
                y = np.where(y > 0, y, np.nan)
            ax.plot(t, y, label=name, linewidth=1.0)
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    if len(ax.lines) <= 12:
        ax.legend(fontsize="small")
    fig.tight_layout()
    p = Path(path)
    try:
        fig.savefig(p, format="svg")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write plot: {exc.strerror}", str(p)) from exc
    finally:
        plt.close(fig)
