"""Command-line interface.

Subcommands::

    snsqkd keyrate     optimized key rate for one channel
    snsqkd scan        key rate over a distance or misalignment grid
    snsqkd montecarlo  event-level simulation compared with the analytic model
    snsqkd attack      phase-announcement attack on the original protocol

Parameters come from defaults, then an optional ``--config`` file of flat
``key = value`` lines, then command-line flags (flags win). Config keys are
the ChannelParams and ProtocolParams field names plus the run controls
below; ``lambda`` is accepted for ``phase_slice`` and dashes for
underscores. List values (``decoy_intensities``, ``q_decoy``) are comma
separated.

Output goes to ``--out`` when given, with a short human-readable summary on
standard output. Without ``--out`` the machine-readable output goes to
standard output and the summary to standard error. Floats are written in
shortest round-trip form.

Tally JSON (montecarlo) is a flat object whose keys are the TallySet field
names: ``n_windows``, ``mismatched_windows``, ``z_windows``,
``z_windows_{none_send,alice_only,bob_only,both_send}``,
``z_effective_{...}`` for the same four decisions, ``z_no_click``,
``z_left_only``, ``z_right_only``, ``z_double_click``, ``z1_windows``,
``z1_effective``, and per-intensity lists ``x_windows``, ``x_accepted``,
``x_no_click``, ``x_double_click``, ``x_plus_left``, ``x_plus_right``,
``x_minus_left``, ``x_minus_right``, ``x1_windows``, ``x1_effective``,
``x1_errors`` indexed like ``intensities``.

Exit status is 0 on success, 2 for usage or configuration errors (the message
names the offending field) and 1 for anything else.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import attack, keyrate
from .params import ChannelParams, ProtocolParams

_CHANNEL_KEYS = {f.name for f in fields(ChannelParams)}
_PROTOCOL_KEYS = {f.name for f in fields(ProtocolParams)}
_ALIASES = {"lambda": "phase_slice", "format": "fmt"}
_LIST_KEYS = {"decoy_intensities", "q_decoy"}


class ConfigError(ValueError):
    """Bad configuration; the message starts with the field name."""


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs."""

    mode: str
    protocol: ProtocolParams
    channel: ChannelParams
    n_windows: int = 10**6
    seed: int = 0
    out: Path | None = None
    fmt: str = "json"
    scan_axis: str = "distance"
    grid: tuple[float, ...] = field(default_factory=tuple)
    optimize: bool = True
    workers: int = 1
    mu: float = 0.1
    rho: float = 0.0
    trials: int = 10**4


_RUN_KEYS = {f.name for f in fields(RunConfig)} - {"mode", "protocol", "channel"}


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` with ``stop`` included when it lands on the grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid: expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"grid: non-numeric entry in {text!r}") from None
    if not step > 0:
        raise ConfigError(f"grid: step must be positive, got {step!r}")
    n = math.floor((stop - start) / step + 1e-9) + 1
    if n < 1:
        raise ConfigError(f"grid: {text!r} is empty")
    return tuple(round(start + i * step, 12) for i in range(n))


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        parser.read_string("[config]\n" + text)
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"config: {path} line {lineno - 1} is not 'key = value': {line.strip(chr(39)).removesuffix(chr(92) + 'n')}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config: malformed file {path}: {exc.message.splitlines()[0]}") from None
    return dict(parser["config"])


def _canonical(key: str) -> str:
    key = key.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def _convert(key: str, value):
    if not isinstance(value, str):
        return value
    try:
        if key in _LIST_KEYS:
            return tuple(float(v) for v in value.split(",") if v.strip())
        if key in ("n_windows", "seed", "workers", "trials"):
            return int(value)
        if key == "grid":
            return parse_grid(value)
        if key == "optimize":
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if key in ("decoy_mode", "scan_axis", "fmt", "out"):
            return value
        return float(value)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}") from None


def build_config(mode: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge defaults, config-file values and flags into a validated RunConfig."""
    merged = {}
    for source in (file_values, flag_values):
        for raw_key, value in source.items():
            if value is None:
                continue
            key = _canonical(raw_key)
            if key not in _CHANNEL_KEYS | _PROTOCOL_KEYS | _RUN_KEYS:
                raise ConfigError(f"{raw_key}: unknown setting")
            merged[key] = _convert(key, value)

    try:
        channel = ChannelParams(**{k: v for k, v in merged.items() if k in _CHANNEL_KEYS})
        protocol = ProtocolParams(**{k: v for k, v in merged.items() if k in _PROTOCOL_KEYS})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run = {k: v for k, v in merged.items() if k in _RUN_KEYS}
    if "out" in run:
        run["out"] = Path(run["out"])
    if "fmt" not in run:
        run["fmt"] = "csv" if mode == "scan" else "json"
    cfg = RunConfig(mode=mode, protocol=protocol, channel=channel, **run)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.fmt not in ("json", "csv"):
        raise ConfigError(f"format: must be json or csv, got {cfg.fmt!r}")
    if cfg.scan_axis not in ("distance", "misalignment"):
        raise ConfigError(f"scan_axis: must be distance or misalignment, got {cfg.scan_axis!r}")
    if cfg.mode == "scan" and not cfg.grid:
        raise ConfigError("grid: scan needs a non-empty grid (start:stop:step)")
    if cfg.n_windows < 1:
        raise ConfigError(f"n_windows: must be >= 1, got {cfg.n_windows}")
    if cfg.workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {cfg.workers}")
    if cfg.trials < 1:
        raise ConfigError(f"trials: must be >= 1, got {cfg.trials}")
    if cfg.mode == "attack" and not 0.0 < cfg.mu < 1.0:
        raise ConfigError(f"mu: must lie in (0, 1), got {cfg.mu!r}")
    if cfg.out is not None and cfg.out.parent and not cfg.out.parent.exists():
        raise ConfigError(f"out: directory {cfg.out.parent} does not exist")


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _emit(cfg: RunConfig, payload: str, summary: str) -> None:
    if cfg.out is not None:
        cfg.out.write_text(payload)
        print(summary)
    else:
        sys.stdout.write(payload)
        print(summary, file=sys.stderr)


def _summary_line(report: keyrate.KeyRateReport) -> str:
    flags = f" [{', '.join(report.flags)}]" if report.flags else ""
    return (
        f"L={report.channel.distance_km:g} km e_a={report.channel.misalignment:g}: "
        f"R={report.rate_per_window:.6e} per window at epsilon={report.optimized_epsilon:.4g}, "
        f"mu'={report.optimized_mu_signal:.4g} (e1ph={report.estimate.e1ph_upper:.4g}, E_Z={report.e_z:.4g}){flags}"
    )


def cmd_keyrate(cfg: RunConfig) -> int:
    if cfg.optimize:
        report = keyrate.optimize(cfg.channel, cfg.protocol)
    else:
        report = keyrate.evaluate(cfg.channel, cfg.protocol)
    if cfg.fmt == "csv":
        payload = keyrate.reports_to_csv([report], "distance")
    else:
        payload = _dump_json(report.to_dict())
    _emit(cfg, payload, _summary_line(report))
    return 0


def cmd_scan(cfg: RunConfig) -> int:
    reports = keyrate.scan(cfg.channel, cfg.scan_axis, cfg.grid, cfg.protocol, workers=cfg.workers, optimized=cfg.optimize)
    if cfg.fmt == "csv":
        payload = keyrate.reports_to_csv(reports, cfg.scan_axis)
    else:
        payload = _dump_json({"scan_axis": cfg.scan_axis, "reports": [r.to_dict() for r in reports]})
    positive = [r for r in reports if r.rate_per_window > keyrate.RATE_THRESHOLD]
    if positive:
        last = positive[-1].channel
        edge = last.distance_km if cfg.scan_axis == "distance" else last.misalignment
        summary = f"{len(reports)} points; last point with R > {keyrate.RATE_THRESHOLD:g}: {cfg.scan_axis} = {edge:g}"
    else:
        summary = f"{len(reports)} points; no point with R > {keyrate.RATE_THRESHOLD:g}"
    _emit(cfg, payload, summary)
    return 0


def cmd_montecarlo(cfg: RunConfig) -> int:
    from . import simulator
    from .simulator.stats import compare_with_analytic, format_table

    protocol = cfg.protocol
    if protocol.phase_slice == 0.0:
        protocol = protocol.replace(phase_slice=simulator.DEFAULT_MC_PHASE_SLICE)
    tallies = simulator.run_protocol(protocol, cfg.channel, cfg.n_windows, cfg.seed, workers=cfg.workers)
    rows = compare_with_analytic(tallies, protocol, cfg.channel)
    if cfg.fmt == "csv":
        payload = _rows_to_csv([r.to_dict() for r in rows])
    else:
        payload = _dump_json(
            {
                "n_windows": cfg.n_windows,
                "seed": cfg.seed,
                "protocol": protocol.to_dict(),
                "channel": cfg.channel.to_dict(),
                "tallies": tallies.to_dict(),
                "comparison": [r.to_dict() for r in rows],
            }
        )
    worst = max(abs(r.z_score) for r in rows)
    _emit(cfg, payload, format_table(rows) + f"\nlargest |z| = {worst:.3f}")
    return 0


def cmd_attack(cfg: RunConfig) -> int:
    summary = attack.run_attack(cfg.mu, cfg.rho, cfg.trials, cfg.seed)
    if cfg.fmt == "csv":
        payload = _rows_to_csv([summary.to_dict()])
    else:
        payload = _dump_json(summary.to_dict())
    _emit(cfg, payload, summary.verdict())
    return 0


COMMANDS = {"keyrate": cmd_keyrate, "scan": cmd_scan, "montecarlo": cmd_montecarlo, "attack": cmd_attack}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value file")
    common.add_argument("--distance-km", type=float)
    common.add_argument("--misalignment", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--mu-signal", type=float)
    common.add_argument("--lambda", dest="phase_slice", type=float, help="phase-slice width")
    common.add_argument("--decoy-mode", choices=("three", "infinite"))
    common.add_argument("--n-windows", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", dest="fmt", choices=("json", "csv"))
    common.add_argument("--scan-axis", choices=("distance", "misalignment"))
    common.add_argument("--grid", metavar="START:STOP:STEP")
    common.add_argument("--no-optimize", dest="optimize", action="store_false", default=None,
                        help="use --epsilon/--mu-signal as given instead of optimizing")
    common.add_argument("--mu", type=float, help="attack: intensity per side")
    common.add_argument("--rho", type=float, help="attack: announced random phase")
    common.add_argument("--trials", type=int, help="attack: number of signal windows")

    parser = argparse.ArgumentParser(prog="snsqkd", description="Sending-or-not-sending twin-field QKD toolkit.")
    sub = parser.add_subparsers(dest="mode", required=True)
    sub.add_parser("keyrate", parents=[common], help="optimized key rate for one channel")
    sub.add_parser("scan", parents=[common], help="key rate over a distance or misalignment grid")
    sub.add_parser("montecarlo", parents=[common], help="event-level simulation with analytic comparison")
    sub.add_parser("attack", parents=[common], help="phase-announcement attack demonstration")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = vars(args)
    mode = flags.pop("mode")
    config_path = flags.pop("config")
    try:
        file_values = read_config(config_path) if config_path else {}
        cfg = build_config(mode, file_values, flags)
        return COMMANDS[mode](cfg)
    except ConfigError as exc:
        print(f"snsqkd {mode}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit-code contract
        print(f"snsqkd {mode}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
