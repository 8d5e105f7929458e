"""Pipeline configuration; every tunable constant lives here with its default."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

from .errors import ParseError, SchemaError


@dataclass(frozen=True)
class PipelineConfig:
    detection_offset: float = 1.0
    nms_overlap: float = 0.8
    confidence_weight: float = 1.0
    flow_weight: float = 0.1
    appearance_weight: float = 1.0
    projection_depth: int = 5
    otsu_bins: int = 50
    cap_offset: float = 0.4
    shrink: float = 0.6
    histogram_bins: int = 12
    spline_pieces_center: int = 10
    spline_pieces_dims: int = 5
    hmm_states: int = 5
    hmm_restarts: int = 3
    classifier: str = "hmm"
    k_folds: int = 5
    seed: int = 0
    max_tracks_per_class: int = 2
    appearance_mode: str = "after_first"
    require_track_support: bool = True
    min_track_length: int = 10
    smooth: bool = True
    dtw_zscore: bool = False
    jobs: int = 1

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type in ("float", "int") and f.name not in ("seed",):
                # projection depth 0 turns projection off; everything else is strictly positive
                if f.name == "projection_depth":
                    if not 0 <= v <= 5:
                        raise SchemaError("projection_depth must lie in 0..5")
                elif not v > 0:
                    raise SchemaError(f"{f.name} must be positive, got {v}")
        if self.classifier not in ("hmm", "dtw"):
            raise SchemaError(f"classifier must be 'hmm' or 'dtw', got {self.classifier!r}")
        if self.appearance_mode not in ("after_first", "all", "none"):
            raise SchemaError(f"unknown appearance_mode {self.appearance_mode!r}")

    def to_dict(self):
        return asdict(self)

    def updated(self, **overrides):
        """Copy with the non-None overrides applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, d: dict):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | None):
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except FileNotFoundError:
            raise ParseError(f"{path}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None
