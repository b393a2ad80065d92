"""Ingestion of nvidia-smi power logs and run metadata into measured labels.

nvidia-smi writes one CSV row per sampling interval (1 s by default) with a
``power.draw [W]`` column formatted like ``"110.25 W"``.  Power for a run is
the arithmetic mean over all samples.  The performance label is derived from
the workload's static instruction count: instructions-per-second =
static count x inference repetitions / wall-clock seconds, with the
repetition count supplied by the run metadata file.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from datetime import datetime

from .device_catalog import DeviceSpec
from .errors import WattrankError
from .instruction_profiler import InstructionProfile


class MissingColumn(WattrankError):
    pass


class UnparsableValue(WattrankError):
    def __init__(self, row: int, detail: str):
        super().__init__(f"row {row}: {detail}")
        self.row = row


class EmptyTrace(WattrankError):
    pass


class NonPositiveDuration(WattrankError):
    pass


class ImplausiblePower(WattrankError):
    pass


@dataclass(frozen=True)
class PowerTrace:
    """Sampled power draw: (timestamp-or-index, watts) pairs in file order."""

    samples: tuple[tuple[float, float], ...]
    interval_s: float = 1.0


@dataclass(frozen=True)
class RunMeta:
    workload_id: str
    device_name: str
    wall_clock_s: float
    repetitions: int = 1


@dataclass(frozen=True)
class RunRecord:
    """Measured labels for one (workload, device) run."""

    workload_id: str
    device_name: str
    wall_clock_s: float
    static_instruction_count: int
    mean_power_w: float
    perf_ips: float


_TIMESTAMP_FORMATS = ("%Y/%m/%d %H:%M:%S.%f", "%Y/%m/%d %H:%M:%S")


def _parse_timestamp(raw: str) -> float | None:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        pass
    for fmt in _TIMESTAMP_FORMATS:
        try:
            return datetime.strptime(raw, fmt).timestamp()
        except ValueError:
            continue
    try:
        return datetime.fromisoformat(raw).timestamp()
    except ValueError:
        return None


def _parse_watts(raw: str, row: int) -> float:
    text = raw.strip()
    if text.lower().endswith("w"):
        text = text[:-1].strip()
    try:
        watts = float(text)
    except ValueError as exc:
        raise UnparsableValue(row, f"cannot parse power value {raw!r}") from exc
    if watts < 0 or not math.isfinite(watts):
        raise UnparsableValue(row, f"nonphysical power value {raw!r}")
    return watts


def parse_power_csv_text(text: str, interval_s: float = 1.0) -> PowerTrace:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("empty file: no header row") from None

    power_col = None
    time_col = None
    for index, column in enumerate(header):
        name = column.strip().lower()
        if "power.draw" in name and power_col is None:
            power_col = index
        if "timestamp" in name and time_col is None:
            time_col = index
    if power_col is None:
        raise MissingColumn(f"no column matching 'power.draw' in header {header!r}")

    samples: list[tuple[float, float]] = []
    last_ts = -math.inf
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if power_col >= len(row):
            raise UnparsableValue(row_number, f"row has no power field: {row!r}")
        watts = _parse_watts(row[power_col], row_number)
        if watts == 0.0:
            # A powered GPU never reads exactly 0 W; treat as sensor glitch.
            continue
        timestamp = None
        if time_col is not None and time_col < len(row):
            timestamp = _parse_timestamp(row[time_col])
        if timestamp is None:
            timestamp = float(len(samples)) * interval_s
        if timestamp < last_ts:
            raise UnparsableValue(row_number, "timestamps decrease")
        last_ts = timestamp
        samples.append((timestamp, watts))

    if not samples:
        raise EmptyTrace("no power samples in file")
    return PowerTrace(samples=tuple(samples), interval_s=interval_s)


def parse_power_csv(path, interval_s: float = 1.0) -> PowerTrace:
    """Parse an nvidia-smi power log; see :func:`parse_power_csv_text`."""
    with open(path, encoding="utf-8") as fh:
        return parse_power_csv_text(fh.read(), interval_s=interval_s)


def trace_to_csv(trace: PowerTrace) -> str:
    """Serialize a trace back to CSV; re-parsing reproduces the samples."""
    lines = ["timestamp, power.draw [W]"]
    lines.extend(f"{ts!r}, {watts!r} W" for ts, watts in trace.samples)
    return "\n".join(lines) + "\n"


def mean_power(trace: PowerTrace) -> float:
    """Arithmetic mean of the sampled watts over the entire run."""
    if not trace.samples:
        raise EmptyTrace("cannot average an empty trace")
    return math.fsum(watts for _, watts in trace.samples) / len(trace.samples)


def load_run_meta(path) -> RunMeta:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        meta = RunMeta(
            workload_id=str(doc["workload_id"]),
            device_name=str(doc["device_name"]),
            wall_clock_s=float(doc["wall_clock_s"]),
            repetitions=int(doc.get("repetitions", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise UnparsableValue(0, f"bad run metadata: {exc}") from exc
    _check_meta(meta)
    return meta


def _check_meta(meta: RunMeta) -> None:
    if meta.wall_clock_s <= 0:
        raise NonPositiveDuration(f"wall_clock_s = {meta.wall_clock_s}")
    if meta.repetitions < 1:
        raise UnparsableValue(0, f"repetitions must be >= 1, got {meta.repetitions}")


def build_run_record(
    profile: InstructionProfile,
    device: DeviceSpec,
    trace: PowerTrace,
    meta: RunMeta,
) -> RunRecord:
    """Combine a profile, device, and power trace into measured labels.

    The mean power is sanity-checked against the device TDP (plus 20%
    headroom) when the catalog knows it.
    """
    _check_meta(meta)
    watts = mean_power(trace)
    if device.tdp_watts is not None and watts > 1.2 * device.tdp_watts:
        raise ImplausiblePower(
            f"mean power {watts:.1f} W exceeds 1.2 x TDP "
            f"({device.tdp_watts:.1f} W) for {device.name}"
        )
    return RunRecord(
        workload_id=profile.workload_id,
        device_name=device.name,
        wall_clock_s=meta.wall_clock_s,
        static_instruction_count=profile.total,
        mean_power_w=watts,
        perf_ips=profile.total * meta.repetitions / meta.wall_clock_s,
    )
