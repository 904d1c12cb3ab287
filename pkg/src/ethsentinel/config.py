"""Engine configuration: every tunable default lives here, loadable
from a flat key-value text file (``key = value`` per line, ``#``
comments)."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import DataError

UNIVARIATE = "univariate"
MULTIVARIATE = "multivariate"
BOTH = "both"

PREDICTIVE_KINDS = ("arima", "sarima", "stl", "knn", "cart", "kridge")
REDUCTION_KINDS = ("pca", "iforest", "ae")
CLUSTERING_KINDS = ("kmeans", "dbscan", "ocsvm")


@dataclass(frozen=True)
class EngineConfig:
    # series construction
    grid_step: int = 60
    window_duration: int = 300
    window_stride: int = 60
    window_vote: str = "all"  # point flag rule over covering windows
    train_ratio: float = 0.7
    # streaming
    database_span: int = 345600  # 4 days
    retrain_interval: int = 345600
    # features / wiring
    features: tuple[str, ...] = ("value", "gasprice", "gaslimit")
    mode: str = BOTH
    predictive_detectors: tuple[str, ...] = PREDICTIVE_KINDS
    reduction_detectors: tuple[str, ...] = REDUCTION_KINDS
    clustering_detectors: tuple[str, ...] = CLUSTERING_KINDS
    alarm_categories: tuple[str, ...] = ()  # empty: OR over all categories
    # predictive bank
    residual_multiplier: float = 3.0
    arima_order: tuple[int, int, int] = (1, 1, 1)
    sarima_period: int = 0  # 0: estimate, fall back to one day
    fallback_period: int = 1440
    knn_lags: int = 5
    knn_k: int = 5
    cart_lags: int = 5
    cart_depth: int = 6
    cart_min_leaf: int = 5
    kridge_lags: int = 5
    kridge_lambda: float = 1.0
    # reduction bank
    pca_explained: float = 0.90
    iforest_trees: int = 100
    iforest_subsample: int = 256
    iforest_cutoff: float = 0.6
    ae_window: int = 32
    ae_hidden: int = 8
    ae_epochs: int = 200
    ae_learning_rate: float = 0.01
    # clustering bank
    kmeans_k: int = 0  # 0: silhouette selection over 2..10
    kmeans_k_max: int = 10
    kmeans_restarts: int = 4
    dbscan_eps: float = 0.0  # 0: k-distance heuristic
    dbscan_eps_scale: float = 1.5  # headroom over the heuristic (auto mode only)
    dbscan_min_pts: int = 4
    ocsvm_nu: float = 0.02
    fit_subsample: int = 512  # row cap for the cubic-cost kernel ridge fit
    boundary_subsample: int = 2048  # row cap for OCSVM / DBSCAN references
    # misc
    keep_failed: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (UNIVARIATE, MULTIVARIATE, BOTH):
            raise DataError(f"unknown mode {self.mode!r}")
        if self.window_duration % self.grid_step or self.window_stride % self.grid_step:
            raise DataError("window duration and stride must be multiples of the grid step")
        if self.window_vote not in ("any", "majority", "all"):
            raise DataError(f"unknown window vote rule {self.window_vote!r}")
        for name in self.predictive_detectors:
            if name not in PREDICTIVE_KINDS:
                raise DataError(f"unknown predictive detector {name!r}")
        for name in self.reduction_detectors:
            if name not in REDUCTION_KINDS:
                raise DataError(f"unknown reduction detector {name!r}")
        for name in self.clustering_detectors:
            if name not in CLUSTERING_KINDS:
                raise DataError(f"unknown clustering detector {name!r}")


def _parse_value(text: str, annotation):
    text = text.strip()
    if annotation == "int":
        return int(text)
    if annotation == "float":
        return float(text)
    if annotation == "bool":
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise DataError(f"not a boolean: {text!r}")
    if annotation.startswith("tuple[int"):
        return tuple(int(part) for part in text.split(",") if part.strip())
    if annotation.startswith("tuple[str"):
        return tuple(part.strip() for part in text.split(",") if part.strip())
    return text


def parse_config_text(text: str, base: EngineConfig | None = None) -> EngineConfig:
    """Build a config from flat ``key = value`` lines over the defaults."""
    base = base if base is not None else EngineConfig()
    known = {f.name: f for f in fields(EngineConfig)}
    overrides = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"config line {line_no}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in known:
            raise DataError(f"config line {line_no}: unknown key {key!r}")
        annotation = known[key].type
        try:
            overrides[key] = _parse_value(value, annotation)
        except ValueError as exc:
            raise DataError(f"config line {line_no}: {exc}") from exc
    return replace(base, **overrides)


def load_config(path, base: EngineConfig | None = None) -> EngineConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)
