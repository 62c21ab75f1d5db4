"""Experiment configuration (YAML) with strict key checking.

Example::

    seed: 0
    splits: [0.7, 0.1, 0.2]
    datasets:
      - name: sine
        synth: {kind: sinusoid-trend-noise, length: 1200, noise_std: 0.5}
      - name: fx
        csv: data/fx.csv        # relative to the config file
        column: price
    train: {M: 48, H: 24, epochs: 20}
    methods: [predict-only, rts-pto, rts-pno, topk-forecast:1, topk-risk:1]

Per-cell training seeds are ``seed + 1000 * dataset_index``; every method on a
dataset shares that seed so comparisons are paired.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .data import PriceSeries, SynthSpec, generate_synthetic, load_csv
from .errors import ConfigError
from .pipeline import METHODS, TrainConfig

EXTRA_METHODS = ("rts-pno-fixed",)
_PARAM_METHOD = re.compile(r"^(topk-forecast|topk-risk|uncertainty-penalty):([0-9.eE+-]+)$")
TOP_KEYS = ("seed", "splits", "datasets", "train", "methods", "output_dir", "include_oracle", "oracle_unconstrained")
SEED_STRIDE = 1000


def parse_method(name: str) -> tuple[str, float | None]:
    if name in METHODS or name in EXTRA_METHODS:
        return name, None
    m = _PARAM_METHOD.match(name)
    if not m:
        raise ConfigError(f"methods: unknown method {name!r}")
    rule, arg = m.group(1), float(m.group(2))
    if rule != "uncertainty-penalty" and (arg != int(arg) or arg < 1):
        raise ConfigError(f"methods: {name!r} needs an integer k >= 1")
    if arg < 0:
        raise ConfigError(f"methods: {name!r} needs a nonnegative weight")
    return rule, arg


@dataclass
class DatasetConfig:
    name: str
    synth: SynthSpec | None = None
    csv: Path | None = None
    column: str = "price"

    def load(self) -> PriceSeries:
        if self.synth is not None:
            return generate_synthetic(self.synth)
        series = load_csv(self.csv, self.column)
        return PriceSeries(series.timestamps, series.values, name=self.name)

    def echo(self) -> dict:
        if self.synth is not None:
            return {"name": self.name, "synth": {f.name: getattr(self.synth, f.name) for f in fields(SynthSpec)}}
        return {"name": self.name, "csv": str(self.csv), "column": self.column}


@dataclass
class ExperimentConfig:
    datasets: list[DatasetConfig]
    train: TrainConfig
    methods: list[str] = field(default_factory=lambda: ["rts-pno"])
    splits: tuple[float, float, float] = (0.7, 0.1, 0.2)
    seed: int = 0
    output_dir: str | None = None
    include_oracle: bool = False
    oracle_unconstrained: bool = False

    def cell_seed(self, dataset_index: int) -> int:
        return self.seed + SEED_STRIDE * dataset_index

    def dataset(self, name: str | None = None) -> tuple[int, DatasetConfig]:
        if name is None:
            return 0, self.datasets[0]
        for i, d in enumerate(self.datasets):
            if d.name == name:
                return i, d
        raise ConfigError(f"datasets: no dataset named {name!r}")

    def echo(self) -> dict:
        t = {f.name: getattr(self.train, f.name) for f in fields(TrainConfig)}
        return {
            "seed": self.seed,
            "splits": list(self.splits),
            "datasets": [d.echo() for d in self.datasets],
            "train": t,
            "methods": list(self.methods),
            "include_oracle": self.include_oracle,
            "oracle_unconstrained": self.oracle_unconstrained,
        }


def _dataset_from_dict(d: dict, base_dir: Path, index: int) -> DatasetConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"datasets[{index}]: must be a mapping")
    unknown = sorted(set(d) - {"name", "synth", "csv", "column"})
    if unknown:
        raise ConfigError(f"datasets[{index}].{unknown[0]}: unknown key")
    name = str(d.get("name", f"dataset{index}"))
    if ("synth" in d) == ("csv" in d):
        raise ConfigError(f"datasets[{index}]: give exactly one of 'synth' or 'csv'")
    if "synth" in d:
        s = dict(d["synth"] or {})
        known = {f.name for f in fields(SynthSpec)}
        bad = sorted(set(s) - known)
        if bad:
            raise ConfigError(f"datasets[{index}].synth.{bad[0]}: unknown key")
        s.setdefault("name", name)
        spec = SynthSpec(**s)
        try:
            spec.validate()
        except Exception as exc:
            raise ConfigError(f"datasets[{index}].synth.{exc}") from None
        return DatasetConfig(name, synth=spec)
    path = Path(d["csv"])
    if not path.is_absolute():
        path = base_dir / path
    return DatasetConfig(name, csv=path, column=str(d.get("column", "price")))


def config_from_dict(raw: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a mapping")
    unknown = sorted(set(raw) - set(TOP_KEYS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown top-level key")
    if not raw.get("datasets"):
        raise ConfigError("datasets: at least one dataset is required")
    datasets = [_dataset_from_dict(d, Path(base_dir), i) for i, d in enumerate(raw["datasets"])]
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigError("datasets: names must be unique")
    tdict = dict(raw.get("train") or {})
    try:
        train = TrainConfig.from_dict(tdict)
    except ConfigError as exc:
        raise ConfigError(f"train.{exc}") from None
    except TypeError as exc:
        raise ConfigError(f"train: {exc}") from None
    methods = list(raw.get("methods") or [train.method])
    for m in methods:
        parse_method(str(m))
    splits = tuple(float(v) for v in raw.get("splits", (0.7, 0.1, 0.2)))
    if len(splits) != 3 or min(splits) <= 0 or abs(sum(splits) - 1) > 1e-9:
        raise ConfigError(f"splits: need three positive fractions summing to 1, got {list(splits)}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed: must be an integer, got {seed!r}")
    return ExperimentConfig(
        datasets=datasets,
        train=train,
        methods=[str(m) for m in methods],
        splits=splits,
        seed=seed,
        output_dir=raw.get("output_dir"),
        include_oracle=bool(raw.get("include_oracle", False)),
        oracle_unconstrained=bool(raw.get("oracle_unconstrained", False)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: cannot parse {path}: {exc}") from None
    return config_from_dict(raw, base_dir=path.parent)
