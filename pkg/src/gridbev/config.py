"""Declarative pipeline configuration: one YAML/JSON file plus flag overrides.

Unknown keys are rejected so ablation scripts fail loudly on typos.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .anchors import AnchorConfig
from .augment import AugmentConfig
from .evaluation import DEFAULT_IOU_THRESHOLDS, DifficultyThresholds, MergedClass
from .grid import FeatureConfig, GridConfig
from .ground import RobustFitConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    feature_config: FeatureConfig = FeatureConfig.F1
    ground: RobustFitConfig = field(default_factory=RobustFitConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    difficulty: DifficultyThresholds = field(default_factory=DifficultyThresholds)
    iou_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_IOU_THRESHOLDS))
    ap_mode: int = 11
    box_encoding: str = "B1"


def _check_keys(section: dict, allowed, where: str):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def load_pipeline_config(path=None, overrides=None) -> PipelineConfig:
    """Build a PipelineConfig from an optional file and a flat override dict.

    Recognized override keys: cell_size, feature_config, box_encoding,
    ap_mode, seed.
    """
    data = {}
    if path is not None:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    _check_keys(data, {"grid", "feature_config", "ground", "augment", "anchors",
                       "eval", "box_encoding"}, "config")
    overrides = overrides or {}

    g = dict(data.get("grid", {}))
    _check_keys(g, {"extent", "cell_size", "sensor_origin"}, "grid")
    if "cell_size" in overrides and overrides["cell_size"] is not None:
        g["cell_size"] = overrides["cell_size"]
    grid = GridConfig(
        extent=tuple(g.get("extent", (60.0, 60.0))),
        cell_size=float(g.get("cell_size", 0.15)),
        sensor_origin=tuple(g.get("sensor_origin", (0.0, 0.0, 0.0))),
    )

    fc = overrides.get("feature_config") or data.get("feature_config", "F1")
    try:
        feature_config = FeatureConfig(fc)
    except ValueError:
        raise ConfigError(f"unknown feature config '{fc}'") from None

    gr = dict(data.get("ground", {}))
    _check_keys(gr, {"cauchy_scale", "max_iterations", "convergence_tol",
                     "removal_threshold"}, "ground")
    ground = RobustFitConfig(**{k: type(getattr(RobustFitConfig, k))(v)
                                for k, v in gr.items()})

    au = dict(data.get("augment", {}))
    _check_keys(au, {"flip_probability", "rotation_range_deg", "seed"}, "augment")
    augment = AugmentConfig(
        flip_probability=float(au.get("flip_probability", 0.5)),
        rotation_range=math.radians(float(au.get("rotation_range_deg", 15.0))),
        seed=int(overrides.get("seed", au.get("seed", 0)) or 0),
    )

    an = dict(data.get("anchors", {}))
    _check_keys(an, {"sizes", "aspect_ratios", "stride"}, "anchors")
    anchors = AnchorConfig(
        sizes=tuple(an.get("sizes", (1.75, 2.5, 9.0, 22.0))),
        aspect_ratios=tuple(an.get("aspect_ratios", (1.0, 2.0, 0.5))),
        stride=int(an.get("stride", 16)),
        grid=grid,
    )

    ev = dict(data.get("eval", {}))
    _check_keys(ev, {"iou_thresholds", "ap_mode"}, "eval")
    iou = dict(DEFAULT_IOU_THRESHOLDS)
    for name, thr in dict(ev.get("iou_thresholds", {})).items():
        iou[MergedClass(name)] = float(thr)
    ap_mode = int(overrides.get("ap_mode") or ev.get("ap_mode", 11))
    if ap_mode not in (11, 40):
        raise ConfigError(f"ap_mode must be 11 or 40, got {ap_mode}")

    box_encoding = overrides.get("box_encoding") or data.get("box_encoding", "B1")
    if box_encoding not in ("B1", "B2", "B3"):
        raise ConfigError(f"unknown box encoding '{box_encoding}'")

    return PipelineConfig(grid=grid, feature_config=feature_config, ground=ground,
                          augment=augment, anchors=anchors, iou_thresholds=iou,
                          ap_mode=ap_mode, box_encoding=box_encoding)
