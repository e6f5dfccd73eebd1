"""Experiment files, sweep orchestration, and result persistence.

An experiment file is flat ``key = value`` text: one setting per line, ``#``
starts a comment, blank lines are ignored.  Keys are either simulation
settings (matching :class:`SystemConfig` field names) or experiment-level
settings (``policies``, ``sweep``, ``sweep_values``, ``output_dir``,
``keep_traces``).  Unknown keys and type mismatches are rejected with the
offending line number.

A run produces, inside the output directory:

* ``results.csv``   - one row per (policy, sweep value), fixed header
* ``meta.json``     - the full experiment echo plus the tool version
* ``series_<policy>.dat`` - two-column (sweep value, mean rate) plot data
* ``traces_<policy>.csv`` - per-slot records, only when keep_traces is on

No file embeds a timestamp, so reruns of the same experiment are
byte-identical.
"""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

from .channel import SWEEPABLE, ConfigError, SystemConfig
from .engine import run_monte_carlo
from .policies import POLICY_NAMES

RESULTS_HEADER = "policy,sweep_var,sweep_value,mean_secrecy_rate,stderr,outage_frac,trials,seed"

_SWEEP_FIELD = {"power": "power", "buffer_size": "buffer_size",
                "threshold": "selection_threshold"}

_EXPERIMENT_KEYS = ("policy", "policies", "sweep", "sweep_values",
                    "output_dir", "keep_traces")


class ExperimentError(ValueError):
    """Experiment file could not be parsed or validated."""


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated experiment: base config, policy list, sweep axis."""

    base: SystemConfig
    policies: tuple[str, ...]
    sweep_var: str
    sweep_values: tuple[float, ...]
    output_dir: str = "results"
    keep_traces: bool = False

    def configs(self):
        """Yield (policy, sweep value, concrete SystemConfig) triples."""
        field = _SWEEP_FIELD[self.sweep_var]
        for policy in self.policies:
            for value in self.sweep_values:
                typed = int(value) if field == "buffer_size" else float(value)
                yield policy, value, self.base.replace(policy=policy,
                                                       **{field: typed})


@dataclass(frozen=True)
class ResultRow:
    """One (policy, sweep value) measurement."""

    policy: str
    sweep_var: str
    sweep_value: float
    mean_secrecy_rate: float
    stderr: float
    outage_frac: float
    trials: int
    seed: int

    def __post_init__(self):
        if not self.stderr >= 0.0:
            raise ExperimentError(f"negative stderr {self.stderr!r}")
        if not 0.0 <= self.outage_frac <= 1.0:
            raise ExperimentError(f"outage fraction {self.outage_frac!r} outside [0, 1]")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(SystemConfig)}


def _parse_bool(raw: str):
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    return None


def _convert(key: str, raw: str, target: type, line_no: int):
    raw = raw.strip()
    if target is bool:
        val = _parse_bool(raw)
        if val is None:
            raise ExperimentError(
                f"line {line_no}: {key} expects true/false, got {raw!r}")
        return val
    if target is int:
        try:
            as_float = float(raw)
        except ValueError:
            raise ExperimentError(
                f"line {line_no}: {key} expects an integer, got {raw!r}") from None
        if as_float != int(as_float):
            raise ExperimentError(
                f"line {line_no}: {key} expects an integer, got {raw!r}")
        return int(as_float)
    if target is float:
        try:
            return float(raw)
        except ValueError:
            raise ExperimentError(
                f"line {line_no}: {key} expects a number, got {raw!r}") from None
    return raw


def parse_experiment(text: str) -> ExperimentSpec:
    """Parse and fully validate an experiment file.

    Raises:
        ExperimentError: unknown key, bad type, or an invalid resulting
            configuration -- always naming the offending line or constraint.
    """
    config_kw: dict = {}
    extras: dict = {}
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ExperimentError(
                f"line {line_no}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in seen:
            raise ExperimentError(
                f"line {line_no}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = line_no
        if key in _CONFIG_FIELDS and key != "policy":
            target = _CONFIG_FIELDS[key].type
            pytype = {"int": int, "float": float, "bool": bool, "str": str}.get(
                target if isinstance(target, str) else target.__name__, str)
            config_kw[key] = _convert(key, raw, pytype, line_no)
        elif key in _EXPERIMENT_KEYS:
            extras[key] = (raw, line_no)
        else:
            known = sorted(set(_CONFIG_FIELDS) | set(_EXPERIMENT_KEYS))
            raise ExperimentError(
                f"line {line_no}: unknown key {key!r} (known keys: {', '.join(known)})")

    if "policy" in extras and "policies" in extras:
        raise ExperimentError(
            f"line {extras['policies'][1]}: give either 'policy' or 'policies', not both")
    if "policies" in extras:
        raw, ln = extras["policies"]
        policies = tuple(p.strip() for p in raw.split(",") if p.strip())
    elif "policy" in extras:
        raw, ln = extras["policy"]
        policies = (raw.strip(),)
    else:
        policies, ln = (SystemConfig().policy,), 0
    if not policies:
        raise ExperimentError(f"line {ln}: empty policy list")
    if len(set(policies)) != len(policies):
        raise ExperimentError(f"line {ln}: duplicate policy names")
    for p in policies:
        if p not in POLICY_NAMES:
            raise ExperimentError(
                f"line {ln}: unknown policy {p!r} (valid: {', '.join(POLICY_NAMES)})")

    if "sweep" in extras:
        sweep_var, ln = extras["sweep"][0].strip(), extras["sweep"][1]
        if sweep_var not in SWEEPABLE:
            raise ExperimentError(
                f"line {ln}: sweep must be one of {', '.join(SWEEPABLE)}")
    else:
        sweep_var = "power"

    base = SystemConfig(**config_kw)
    if "sweep_values" in extras:
        raw, ln = extras["sweep_values"]
        try:
            values = tuple(float(v.strip()) for v in raw.split(",") if v.strip())
        except ValueError:
            raise ExperimentError(
                f"line {ln}: sweep_values expects comma-separated numbers") from None
        if not values:
            raise ExperimentError(f"line {ln}: sweep_values is empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ExperimentError(
                f"line {ln}: sweep_values must be strictly increasing")
    else:
        field = _SWEEP_FIELD[sweep_var]
        values = (float(getattr(base, field)),)

    output_dir = extras.get("output_dir", ("results", 0))[0].strip() or "results"
    keep = False
    if "keep_traces" in extras:
        raw, ln = extras["keep_traces"]
        parsed = _parse_bool(raw)
        if parsed is None:
            raise ExperimentError(f"line {ln}: keep_traces expects true/false")
        keep = parsed

    spec = ExperimentSpec(base=base, policies=policies, sweep_var=sweep_var,
                          sweep_values=values, output_dir=output_dir,
                          keep_traces=keep)
    # every concrete (policy, value) combination must be a valid configuration
    for policy, value, cfg in spec.configs():
        bad = cfg.violations()
        if bad:
            raise ExperimentError(
                f"policy {policy!r} at {sweep_var}={value:g}: " + "; ".join(bad))
    return spec


def serialize_experiment(spec: ExperimentSpec) -> str:
    """Canonical text form; parse_experiment(serialize_experiment(s)) == s."""
    lines = [
        "# relaysec experiment (canonical form)",
        "policies = " + ", ".join(spec.policies),
        f"sweep = {spec.sweep_var}",
        "sweep_values = " + ", ".join(repr(v) for v in spec.sweep_values),
        f"output_dir = {spec.output_dir}",
        f"keep_traces = {str(spec.keep_traces).lower()}",
    ]
    defaults = SystemConfig()
    for f in dataclasses.fields(SystemConfig):
        if f.name == "policy":
            continue
        value = getattr(spec.base, f.name)
        if value != getattr(defaults, f.name):
            if isinstance(value, bool):
                text = str(value).lower()
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def default_spec_text() -> str:
    """Commented example documenting the whole schema, using the defaults."""
    cfg = SystemConfig()
    return f"""\
# relaysec experiment file
# ------------------------
# Flat key = value lines; '#' starts a comment.  Unlisted keys keep the
# defaults shown here.  Validate with:  relaysec validate <file>

# -- what to run ------------------------------------------------------------
policies = sr-exhaustive, greedy, random   # or a single 'policy = <name>'
sweep = power                              # one of: power, buffer_size, threshold
sweep_values = 1, 2, 5, 10, 20             # strictly increasing
output_dir = results
keep_traces = false                        # also write per-slot trace files

# -- network dimensions -----------------------------------------------------
source_antennas = {cfg.source_antennas}
relay_antennas = {cfg.relay_antennas}
jammer_antennas = {cfg.jammer_antennas}
user_antennas = {cfg.user_antennas}
eav_antennas = {cfg.eav_antennas}
num_users = {cfg.num_users}
num_eavs = {cfg.num_eavs}
num_relays = {cfg.num_relays}
active_relays = {cfg.active_relays}        # receiving relays per slot
active_jammers = {cfg.active_jammers}      # transmitting relays per slot

# -- signal and protocol ----------------------------------------------------
power = {cfg.power:g}
noise_power = {cfg.noise_power:g}
buffer_size = {cfg.buffer_size}
iri_cancellation = {str(cfg.iri_cancellation).lower()}
selection_threshold = {cfg.selection_threshold:g}
store_noisy_blocks = {str(cfg.store_noisy_blocks).lower()}
probe_len = {cfg.probe_len}

# -- Monte Carlo ------------------------------------------------------------
slots = {cfg.slots}
trials = {cfg.trials}
seed = {cfg.seed}
"""


# ---------------------------------------------------------------------------
# Running and persistence
# ---------------------------------------------------------------------------


def run_experiment(spec: ExperimentSpec, progress=None):
    """Run the whole sweep; returns (rows, traces).

    traces maps (policy, sweep value) -> the engine's per-slot outcome tuple,
    populated only when the experiment retains traces.  ``progress(done,
    total, label)`` is invoked after each sweep point.
    """
    rows: list[ResultRow] = []
    traces: dict = {}
    points = list(spec.configs())
    for idx, (policy, value, cfg) in enumerate(points, start=1):
        result = run_monte_carlo(cfg, keep_outcomes=spec.keep_traces)
        rows.append(ResultRow(
            policy=policy, sweep_var=spec.sweep_var, sweep_value=value,
            mean_secrecy_rate=result.mean_rate, stderr=result.stderr,
            outage_frac=result.outage_frac, trials=cfg.trials, seed=cfg.seed,
        ))
        if spec.keep_traces:
            traces[(policy, value)] = result.outcomes
        if progress is not None:
            progress(idx, len(points), f"{policy} {spec.sweep_var}={value:g}")
    return rows, traces


def _fmt(x: float) -> str:
    # shortest representation that reparses to exactly the same float
    return repr(float(x))


def write_results(rows, spec: ExperimentSpec, out_dir: str,
                  traces: dict | None = None) -> list[str]:
    """Write results.csv, meta.json, per-policy series, optional traces.

    Returns the list of paths written.  Output is deterministic: no
    timestamps, fixed field order, fixed float formatting.
    """
    from . import __version__

    os.makedirs(out_dir, exist_ok=True)
    written: list[str] = []

    csv_path = os.path.join(out_dir, "results.csv")
    try:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(RESULTS_HEADER + "\n")
            for r in rows:
                fh.write(",".join([
                    r.policy, r.sweep_var, _fmt(r.sweep_value),
                    _fmt(r.mean_secrecy_rate), _fmt(r.stderr),
                    _fmt(r.outage_frac), str(r.trials), str(r.seed),
                ]) + "\n")
    except OSError as err:
        raise ExperimentError(f"cannot write {csv_path}: {err}") from err
    written.append(csv_path)

    meta = {
        "tool": "relaysec",
        "version": __version__,
        "experiment": serialize_experiment(spec),
        "base_config": dataclasses.asdict(spec.base),
        "policies": list(spec.policies),
        "sweep_var": spec.sweep_var,
        "sweep_values": list(spec.sweep_values),
        "rows": len(rows),
    }
    meta_path = os.path.join(out_dir, "meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(meta_path)

    for policy in spec.policies:
        series_path = os.path.join(out_dir, f"series_{policy}.dat")
        with open(series_path, "w", encoding="utf-8") as fh:
            fh.write(f"# {spec.sweep_var} mean_secrecy_rate\n")
            for r in rows:
                if r.policy == policy:
                    fh.write(f"{_fmt(r.sweep_value)} {_fmt(r.mean_secrecy_rate)}\n")
        written.append(series_path)

    if traces:
        for (policy, value), outcomes in sorted(traces.items()):
            path = os.path.join(out_dir, f"traces_{policy}_{value:g}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write("slot,kind,score,secrecy\n")
                for o in outcomes:
                    fh.write(f"{o.slot},{o.kind},{_fmt(o.score)},{_fmt(o.secrecy)}\n")
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# Readers (round-trip closure)
# ---------------------------------------------------------------------------


def read_results(path: str) -> list[ResultRow]:
    """Reparse a results.csv written by write_results."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != RESULTS_HEADER:
        raise ExperimentError(f"{path}: missing or wrong header")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ExperimentError(f"{path}:{n}: expected 8 fields, got {len(parts)}")
        rows.append(ResultRow(
            policy=parts[0], sweep_var=parts[1], sweep_value=float(parts[2]),
            mean_secrecy_rate=float(parts[3]), stderr=float(parts[4]),
            outage_frac=float(parts[5]), trials=int(parts[6]), seed=int(parts[7]),
        ))
    return rows


def read_series(path: str) -> list[tuple[float, float]]:
    """Reparse a series_<policy>.dat file into (sweep value, rate) pairs."""
    points = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ExperimentError(f"{path}:{n}: expected 2 columns")
            points.append((float(parts[0]), float(parts[1])))
    return points


def read_traces(path: str) -> list[tuple[int, str, float, float]]:
    """Reparse a traces file into (slot, kind, score, secrecy) records."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "slot,kind,score,secrecy":
        raise ExperimentError(f"{path}: missing or wrong trace header")
    records = []
    for n, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ExperimentError(f"{path}:{n}: expected 4 fields")
        records.append((int(parts[0]), parts[1], float(parts[2]), float(parts[3])))
    return records
