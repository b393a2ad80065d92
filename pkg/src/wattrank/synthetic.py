"""Synthetic workloads and runs with a planted linear ground truth.

Fabricates PTX text per workload (instruction mixes interpolate between a
compute-heavy and a memory-heavy archetype), pairs every workload with each
cataloged device, and emits nvidia-smi-style power CSVs plus run metadata
whose labels realize ``target = planted linear(features) + noise``.  Because
the generated artifacts go through the real parser/profiler/ingest path,
the planted coefficients give experiments and tests an exactly known ground
truth to recover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_builder import LabeledSample, feature_names, make_sample
from .device_catalog import DeviceSpec, default_catalog, device_to_features
from .instruction_profiler import CLASS_ORDER, InstructionClass, profile, profile_to_features
from .ptx_parser import parse_ptx
from .telemetry_ingest import RunMeta, build_run_record, parse_power_csv_text

_C = InstructionClass

# One representative statement per opcode we fabricate; cycled per class.
_CLASS_STATEMENTS: dict[InstructionClass, tuple[str, ...]] = {
    _C.DATA_MOVEMENT_AND_CONVERSION: (
        "ld.global.f32 %f1, [%rd1];",
        "st.global.f32 [%rd2], %f2;",
        "mov.u32 %r1, %r2;",
        "cvt.u16.u32 %rs1, %r4;",
        "cvta.to.global.u64 %rd3, %rd2;",
    ),
    _C.ARITHMETIC_AND_FLOATING_POINT: (
        "add.f32 %f3, %f1, %f2;",
        "mul.wide.u32 %rd5, %r8, 954437177;",
        "fma.rn.f32 %f4, %f1, %f2, %f3;",
        "sub.s32 %r5, %r6, %r7;",
    ),
    _C.LOGIC_AND_SHIFT: (
        "shl.b32 %r3, %r1, 8;",
        "and.b32 %r12, %r11, 31;",
        "or.b32 %r4, %r3, %r2;",
        "shr.u32 %r10, %r9, 22;",
    ),
    _C.COMPARISON_AND_SELECTION: (
        "setp.lt.s32 %p1, %r4, 10;",
        "selp.b32 %r9, %r1, %r2, %p1;",
    ),
    _C.CONTROL_FLOW: (
        "bra $L__BB0_1;",
        "ret;",
    ),
    _C.ATOMIC_AND_SYNC: (
        "bar.sync 0;",
        "atom.global.add.u32 %r6, [%rd4], 1;",
    ),
    _C.TEXTURE_AND_SURFACE: (
        "tex.2d.v4.f32.f32 {%f1, %f2, %f3, %f4}, [tex0, {%f5, %f6}];",
    ),
    _C.OTHER: ("trap;",),
}

# Class shares of the two workload archetypes (compute- vs memory-heavy).
_ARCHETYPE_COMPUTE = np.array([0.30, 0.45, 0.15, 0.04, 0.04, 0.02, 0.0, 0.0])
_ARCHETYPE_MEMORY = np.array([0.55, 0.10, 0.25, 0.04, 0.04, 0.02, 0.0, 0.0])


@dataclass(frozen=True)
class SyntheticConfig:
    n_workloads: int = 20
    seed: int = 7
    samples_per_trace: int = 30
    noise_frac: float = 0.01  # label noise sigma as a fraction of target range
    power_dominant: str = "arithmetic_and_floating_point"
    perf_dominant: str = "sm_count"
    secondary_weight: float = 0.05  # per-feature weight of non-dominant features
    power_base_w: float = 150.0
    power_spread_w: float = 25.0
    perf_base_ips: float = 7.0e8
    perf_spread_ips: float = 1.5e8
    repetitions: int = 1000


@dataclass(frozen=True)
class SyntheticRun:
    workload_id: str
    device_name: str
    ptx_text: str
    power_csv_text: str
    meta: RunMeta
    true_power_w: float
    true_perf_ips: float


@dataclass(frozen=True)
class SyntheticExperiment:
    runs: list[SyntheticRun]
    devices: list[DeviceSpec]
    config: SyntheticConfig

    def workload_ptx(self) -> dict[str, str]:
        return {run.workload_id: run.ptx_text for run in self.runs}


def make_workload_ptx(counts: dict[InstructionClass, int], name: str, rng) -> str:
    """PTX module text whose instruction profile equals ``counts`` exactly."""
    body: list[str] = []
    for cls in CLASS_ORDER:
        statements = _CLASS_STATEMENTS[cls]
        body.extend(statements[i % len(statements)] for i in range(counts.get(cls, 0)))
    order = rng.permutation(len(body))
    lines = [
        "// synthetic workload",
        ".version 7.1",
        ".target sm_70",
        ".address_size 64",
        "",
        f".visible .entry {name}(",
        f"    .param .u64 {name}_param_0",
        ")",
        "{",
    ]
    lines.extend(f"    {body[i]}" for i in order)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _power_csv(mean_w: float, n_samples: int, rng) -> str:
    """nvidia-smi style CSV whose sample mean is exactly ``mean_w``."""
    jitter = rng.normal(scale=0.5, size=n_samples)
    jitter -= jitter.mean()
    rows = ["timestamp, power.draw [W]"]
    for k, watts in enumerate(mean_w + jitter):
        rows.append(f"2021/03/01 10:{k // 60:02d}:{k % 60:02d}.000, {watts:.4f} W")
    return "\n".join(rows) + "\n"


def _planted_targets(features: np.ndarray, dominant: str, secondary: float, rng):
    """Unit-variance planted score: dominant feature weight 1, others small."""
    names = feature_names()
    stds = features.std(axis=0)
    weights = np.where(stds > 0, secondary, 0.0)
    weights[names.index(dominant)] = 1.0
    safe = np.where(stds > 0, stds, 1.0)
    z = (features - features.mean(axis=0)) / safe @ weights
    return z / z.std()


def generate(config: SyntheticConfig = SyntheticConfig()) -> SyntheticExperiment:
    rng = np.random.default_rng(config.seed)
    devices = default_catalog()

    workloads: list[tuple[str, str, dict[InstructionClass, int]]] = []
    for w in range(config.n_workloads):
        t = rng.uniform()
        mix = t * _ARCHETYPE_COMPUTE + (1.0 - t) * _ARCHETYPE_MEMORY
        total = int(np.exp(rng.uniform(np.log(1500), np.log(12000))))
        counts = {
            cls: int(round(total * share)) for cls, share in zip(CLASS_ORDER, mix)
        }
        name = f"cnn_{w:03d}"
        workloads.append((name, make_workload_ptx(counts, name, rng), counts))

    feature_rows = []
    pairs = []
    for name, ptx_text, _counts in workloads:
        prof = profile(parse_ptx(ptx_text), name)
        for device in devices:
            feature_rows.append(
                np.concatenate(
                    [profile_to_features(prof, "raw"), device_to_features(device)]
                )
            )
            pairs.append((name, ptx_text, prof, device))
    features = np.stack(feature_rows)

    z_power = _planted_targets(
        features, config.power_dominant, config.secondary_weight, rng
    )
    z_perf = _planted_targets(
        features, config.perf_dominant, config.secondary_weight, rng
    )
    power_true = config.power_base_w + config.power_spread_w * z_power
    perf_true = config.perf_base_ips + config.perf_spread_ips * z_perf
    power_label = power_true + rng.normal(
        scale=config.noise_frac * np.ptp(power_true), size=power_true.size
    )
    perf_label = perf_true + rng.normal(
        scale=config.noise_frac * np.ptp(perf_true), size=perf_true.size
    )

    runs = []
    for row, (name, ptx_text, prof, device) in enumerate(pairs):
        wall_clock = prof.total * config.repetitions / perf_label[row]
        runs.append(
            SyntheticRun(
                workload_id=name,
                device_name=device.name,
                ptx_text=ptx_text,
                power_csv_text=_power_csv(
                    float(power_label[row]), config.samples_per_trace, rng
                ),
                meta=RunMeta(
                    workload_id=name,
                    device_name=device.name,
                    wall_clock_s=float(wall_clock),
                    repetitions=config.repetitions,
                ),
                true_power_w=float(power_true[row]),
                true_perf_ips=float(perf_true[row]),
            )
        )
    return SyntheticExperiment(runs=runs, devices=devices, config=config)


def ingest_experiment(experiment: SyntheticExperiment) -> list[LabeledSample]:
    """Run every synthetic artifact through the real ingestion path."""
    by_name = {d.name: d for d in experiment.devices}
    samples = []
    for run in experiment.runs:
        prof = profile(parse_ptx(run.ptx_text), run.workload_id)
        trace = parse_power_csv_text(run.power_csv_text)
        record = build_run_record(prof, by_name[run.device_name], trace, run.meta)
        samples.append(make_sample(prof, by_name[run.device_name], record))
    return samples
