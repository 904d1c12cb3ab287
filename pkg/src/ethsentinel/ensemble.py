"""Detector registry, per-category majority voting, and the rolling
streaming engine (5-minute windows against a 4-day reference database).

Wiring: every enabled detector runs once per stream group, where a
group is one feature's univariate grid or the combined per-cell
3-feature rows ("multi"). Votes are strict majorities within a
category per group; a category fires at a point when any of its groups
reaches a majority there, and the final alarm is an OR over the
configured categories.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import clustering, kernels, predictive, reduction
from .config import BOTH, MULTIVARIATE, UNIVARIATE, EngineConfig
from .errors import DataError, FitError, NumericError
from .ingest import FeatureKind, to_feature_series
from .series import (
    TimeSeries,
    estimate_period,
    merge_cooccurring,
    resample,
    rms,
    standardize,
)

MULTI_GROUP = "multi"


class DetectorCategory(enum.Enum):
    PREDICTIVE = "predictive"
    REDUCTION = "reduction"
    CLUSTERING = "clustering"


KIND_CATEGORY = {
    "arima": DetectorCategory.PREDICTIVE,
    "sarima": DetectorCategory.PREDICTIVE,
    "stl": DetectorCategory.PREDICTIVE,
    "knn": DetectorCategory.PREDICTIVE,
    "cart": DetectorCategory.PREDICTIVE,
    "kridge": DetectorCategory.PREDICTIVE,
    "pca": DetectorCategory.REDUCTION,
    "iforest": DetectorCategory.REDUCTION,
    "ae": DetectorCategory.REDUCTION,
    "kmeans": DetectorCategory.CLUSTERING,
    "dbscan": DetectorCategory.CLUSTERING,
    "ocsvm": DetectorCategory.CLUSTERING,
}

_FEATURE_BY_NAME = {
    "value": FeatureKind.PAYMENT_AMOUNT,
    "gasprice": FeatureKind.GAS_PRICE,
    "gaslimit": FeatureKind.GAS_LIMIT,
}


@dataclass(frozen=True)
class DetectorVerdict:
    """One detector's per-point flags (and raw scores when available)."""

    detector_id: str
    category: DetectorCategory
    timestamps: np.ndarray = field(repr=False)
    flags: np.ndarray = field(repr=False)
    scores: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.flags) != len(self.timestamps):
            raise DataError("flags must cover the verdict's point set")


@dataclass
class CategoryTally:
    flagged: np.ndarray
    total: np.ndarray
    decision: np.ndarray


@dataclass
class EnsembleReport:
    timestamps: np.ndarray
    categories: dict[str, CategoryTally]
    alarm: np.ndarray
    flagging_detectors: list[list[str]]
    warnings: list[str] = field(default_factory=list)

    def alarm_timestamps(self) -> np.ndarray:
        return self.timestamps[self.alarm]


def category_vote(verdicts: list[DetectorVerdict]) -> EnsembleReport:
    """Strict-majority vote per category over a shared point set.

    A category's decision at a point is true iff strictly more than
    half of its voters flag it (even-count ties are non-anomalous);
    the final alarm is an OR over category decisions.
    """
    if not verdicts:
        raise DataError("need at least one verdict")
    ts = verdicts[0].timestamps
    for v in verdicts[1:]:
        if not np.array_equal(v.timestamps, ts):
            raise DataError("verdicts cover mismatched point sets")
    seen = set()
    for v in verdicts:
        if v.detector_id in seen:
            raise DataError(f"duplicate detector id {v.detector_id!r}")
        seen.add(v.detector_id)
    n = len(ts)
    categories: dict[str, CategoryTally] = {}
    for cat in DetectorCategory:
        members = [v for v in verdicts if v.category is cat]
        if not members:
            continue
        flagged = np.sum([v.flags.astype(int) for v in members], axis=0)
        total = np.full(n, len(members))
        categories[cat.value] = CategoryTally(
            flagged=flagged, total=total, decision=flagged * 2 > total
        )
    alarm = np.zeros(n, dtype=bool)
    for tally in categories.values():
        alarm |= tally.decision
    flagging = [
        [v.detector_id for v in verdicts if v.flags[i]] for i in range(n)
    ]
    return EnsembleReport(
        timestamps=ts, categories=categories, alarm=alarm, flagging_detectors=flagging
    )


@dataclass(frozen=True)
class FittedDetector:
    detector_id: str
    kind: str
    category: DetectorCategory
    group: str
    payload: dict = field(repr=False)


def _detector_seed(config_seed: int, kind: str, group: str) -> int:
    return (config_seed * 1_000_003 + zlib.crc32(f"{kind}:{group}".encode())) % 2**31


def build_grids(transactions, config: EngineConfig) -> dict[str, TimeSeries]:
    """Per-feature time-domain grids on a common timeline."""
    grids = {}
    for name in config.features:
        feature = _FEATURE_BY_NAME[name]
        sampled = merge_cooccurring(to_feature_series(transactions, feature))
        grids[name] = resample(sampled, config.grid_step)
    spans = {(g.timestamps[0], g.timestamps[-1]) for g in grids.values()}
    if len(spans) != 1:
        raise DataError("feature grids must share a timeline")
    return grids


def _window_matrix(values: np.ndarray, w: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """(matrix of flattened windows, start indices).

    ``values`` may be a 1-D series or an (n, d) row matrix; a window of
    d-column rows flattens to a w*d vector. Empty when the series is
    shorter than one window.
    """
    n = len(values)
    width = w * (values.shape[1] if values.ndim == 2 else 1)
    if n < w:
        return np.empty((0, width)), np.empty(0, dtype=int)
    starts = np.arange(0, n - w + 1, stride)
    matrix = np.stack([np.ravel(values[s : s + w]) for s in starts])
    return matrix, starts


def _apply_standardize(matrix, mean, std):
    return (matrix - mean) / std


def _subsample_rows(matrix: np.ndarray, cap: int, seed: int) -> np.ndarray:
    if len(matrix) <= cap:
        return matrix
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(matrix), size=cap, replace=False))
    return matrix[idx]


# ---------------------------------------------------------------------------
# fitting


def _resolve_period(train: np.ndarray, config: EngineConfig) -> int:
    """Configured seasonal period, or the ACF estimate with a one-day
    fallback when nothing significant shows up."""
    period = config.sarima_period
    if period == 0:
        try:
            period = estimate_period(train)
        except DataError:
            period = 0
        if period < 2:
            period = config.fallback_period
    return period


def _fit_predictive(kind: str, train: np.ndarray, config: EngineConfig, seed: int) -> dict:
    if kind == "arima":
        order = predictive.ArimaOrder(*config.arima_order)
        model = predictive.arima_fit(train, order)
        return {"model": model, "rms": model.residual_rms}
    if kind == "sarima":
        period = _resolve_period(train, config)
        period = min(period, max(2, len(train) // 3))
        p, d, q = config.arima_order
        order = predictive.ArimaOrder(p, d, q, (1, 0, 1, period))
        model = predictive.arima_fit(train, order)
        return {"model": model, "rms": model.residual_rms}
    if kind == "stl":
        period = _resolve_period(train, config)
        period = min(period, max(2, len(train) // 2))
        decomp = predictive.stl_decompose(train, period)
        return {"period": period, "rms": rms(decomp.residual)}
    if kind == "knn":
        lags, k = config.knn_lags, config.knn_k
        X, y = predictive._lag_pairs(train, lags)
        if k >= len(X):
            raise FitError("not enough training pairs for k-NN")
        # leave-self-out residuals, else in-sample RMS degenerates to 0
        dist = _sq_dists(X, X)
        np.fill_diagonal(dist, np.inf)
        preds = _knn_mean_targets(dist, y, k)
        return {"X": X, "y": y, "lags": lags, "k": k, "rms": rms(y - preds)}
    if kind == "cart":
        lags = config.cart_lags
        model = predictive.cart_fit(train, lags, config.cart_depth, config.cart_min_leaf)
        X, y = predictive._lag_pairs(train, lags)
        # honest RMS from a chronological holdout; in-sample residuals of
        # a grown tree underestimate the noise level
        cut = max(1, int(round(0.75 * len(X))))
        if cut < len(X):
            held = predictive.cart_fit(
                train[: cut + lags], lags, config.cart_depth, config.cart_min_leaf
            )
            preds = np.array([predictive.cart_predict(held, row) for row in X[cut:]])
            noise = rms(y[cut:] - preds)
        else:
            preds = np.array([predictive.cart_predict(model, row) for row in X])
            noise = rms(y - preds)
        return {"model": model, "lags": lags, "rms": noise}
    if kind == "kridge":
        lags = config.kridge_lags
        X, y = predictive._lag_pairs(train, lags)
        keep = _subsample_rows(np.arange(len(X))[:, None], config.fit_subsample, seed).ravel()
        model = kernels.kernel_ridge_fit(
            X[keep], y[keep], kernels.KernelSpec(), config.kridge_lambda
        )
        cut = max(1, int(round(0.75 * len(X))))
        if cut < len(X):
            keep_h = keep[keep < cut]
            if len(keep_h) >= 2:
                held = kernels.kernel_ridge_fit(
                    X[keep_h], y[keep_h], kernels.KernelSpec(), config.kridge_lambda
                )
                preds = kernels.kernel_ridge_predict(held, X[cut:])
                noise = rms(y[cut:] - preds)
            else:
                noise = rms(y - kernels.kernel_ridge_predict(model, X))
        else:
            noise = rms(y - kernels.kernel_ridge_predict(model, X))
        return {"model": model, "lags": lags, "rms": noise}
    raise DataError(f"unknown predictive detector {kind!r}")


def _sq_dists(A, B):
    return (
        np.sum(A * A, axis=1)[:, None]
        + np.sum(B * B, axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )


def _knn_mean_targets(sq_dists: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Mean target of the k nearest rows (partial sort; the mean does
    not depend on the order within the selected neighbors)."""
    nearest = np.argpartition(sq_dists, k - 1, axis=1)[:, :k]
    return y[nearest].mean(axis=1)


def _fit_row_detector(kind: str, rows: np.ndarray, config: EngineConfig, seed: int) -> dict:
    """Fit a window/row detector on standardized training rows."""
    std_rows, mean, std = standardize(rows)
    payload: dict = {"mean": mean, "std": std}
    if kind == "kmeans":
        k = config.kmeans_k
        if k == 0:
            k = clustering.select_k(std_rows, 2, config.kmeans_k_max, seed=seed)
        model = clustering.kmeans_fit(std_rows, k, seed=seed, restarts=config.kmeans_restarts)
        payload.update(model=model, threshold=model.train_distance_quantile)
    elif kind == "dbscan":
        eps = config.dbscan_eps
        reference = _subsample_rows(std_rows, config.boundary_subsample, seed)
        if eps == 0.0:
            # the k-distance quantile anchors the elbow from below; scale
            # it up so ~5% of the training rows don't flag by construction
            eps = config.dbscan_eps_scale * clustering.estimate_eps(
                reference, max(1, config.dbscan_min_pts - 1)
            )
        if eps <= 0.0:
            eps = 1e-9
        payload.update(reference=reference, eps=eps, min_pts=config.dbscan_min_pts)
    elif kind == "ocsvm":
        train = _subsample_rows(std_rows, config.boundary_subsample, seed)
        nu = max(config.ocsvm_nu, 1.0 / len(train))
        model = kernels.one_class_fit(train, kernels.KernelSpec(), nu)
        payload.update(model=model)
    elif kind == "pca":
        model = reduction.pca_fit(std_rows, config.pca_explained)
        scores = reduction.pca_score(model, std_rows)
        payload.update(
            model=model,
            threshold=reduction.score_threshold(scores, config.residual_multiplier),
        )
    elif kind == "iforest":
        model = reduction.iforest_fit(
            std_rows, config.iforest_trees, config.iforest_subsample, seed
        )
        payload.update(model=model, threshold=config.iforest_cutoff)
    elif kind == "ae":
        model = reduction.ae_train(
            std_rows,
            config.ae_hidden,
            epochs=config.ae_epochs,
            learning_rate=config.ae_learning_rate,
            seed=seed,
        )
        scores = reduction.ae_score(model, std_rows)
        payload.update(
            model=model,
            threshold=reduction.score_threshold(scores, config.residual_multiplier),
        )
    else:
        raise DataError(f"unknown row detector {kind!r}")
    return payload


def _score_rows(kind: str, payload: dict, rows: np.ndarray) -> np.ndarray:
    """Boolean flag per row for a fitted window/row detector."""
    std_rows = _apply_standardize(rows, payload["mean"], payload["std"])
    if kind == "kmeans":
        return clustering.kmeans_score(payload["model"], std_rows) > payload["threshold"]
    if kind == "dbscan":
        # density rule against the reference database: a row with fewer
        # than min_pts neighbors within eps (itself included) is noise
        sq = _sq_dists(std_rows, payload["reference"])
        counts = np.sum(sq <= payload["eps"] ** 2, axis=1) + 1
        return counts < payload["min_pts"]
    if kind == "ocsvm":
        return np.atleast_1d(kernels.one_class_decision(payload["model"], std_rows)) < 0.0
    if kind == "pca":
        return reduction.pca_score(payload["model"], std_rows) > payload["threshold"]
    if kind == "iforest":
        return reduction.iforest_score(payload["model"], std_rows) > payload["threshold"]
    if kind == "ae":
        return reduction.ae_score(payload["model"], std_rows) > payload["threshold"]
    raise DataError(f"unknown row detector {kind!r}")


def fit_bank(
    grids: dict[str, TimeSeries],
    config: EngineConfig,
    predictive_train_cells: int | None = None,
) -> tuple[list[FittedDetector], list[str]]:
    """Fit every configured detector on every applicable group.

    ``predictive_train_cells`` limits the predictive fits to a
    chronological prefix (batch mode); None trains on everything
    (streaming retrain). Per-detector failures become warnings, not
    errors, as long as the bank retains voters.
    """
    detectors: list[FittedDetector] = []
    warnings: list[str] = []
    w_cells = config.window_duration // config.grid_step
    s_cells = config.window_stride // config.grid_step

    univariate = config.mode in (UNIVARIATE, BOTH)
    multivariate = config.mode in (MULTIVARIATE, BOTH)

    if univariate:
        for name, grid in grids.items():
            values = grid.values
            train = values if predictive_train_cells is None else values[:predictive_train_cells]
            for kind in config.predictive_detectors:
                seed = _detector_seed(config.seed, kind, name)
                try:
                    payload = _fit_predictive(kind, train, config, seed)
                except (DataError, FitError, NumericError) as exc:
                    warnings.append(f"{kind}:{name}: fit failed: {exc}")
                    continue
                detectors.append(
                    FittedDetector(f"{kind}:{name}", kind, KIND_CATEGORY[kind], name, payload)
                )
            window_train, _ = _window_matrix(values, w_cells, s_cells)
            ae_train_matrix, _ = _window_matrix(values, config.ae_window, s_cells)
            for kind in (*config.clustering_detectors, *config.reduction_detectors):
                seed = _detector_seed(config.seed, kind, name)
                matrix = ae_train_matrix if kind == "ae" else window_train
                if len(matrix) < 10:
                    warnings.append(f"{kind}:{name}: fit failed: too few windows")
                    continue
                try:
                    payload = _fit_row_detector(kind, matrix, config, seed)
                except (DataError, FitError, NumericError) as exc:
                    warnings.append(f"{kind}:{name}: fit failed: {exc}")
                    continue
                payload["window_cells"] = config.ae_window if kind == "ae" else w_cells
                payload["stride_cells"] = s_cells
                detectors.append(
                    FittedDetector(f"{kind}:{name}", kind, KIND_CATEGORY[kind], name, payload)
                )

    if multivariate and len(config.features) > 1:
        rows = np.column_stack([grids[name].values for name in config.features])
        matrix, _ = _window_matrix(rows, w_cells, s_cells)
        for kind in (*config.clustering_detectors, *config.reduction_detectors):
            if kind == "ae":
                continue  # the autoencoder is wired univariate (windowed)
            seed = _detector_seed(config.seed, kind, MULTI_GROUP)
            if len(matrix) < 10:
                warnings.append(f"{kind}:{MULTI_GROUP}: fit failed: too few windows")
                continue
            try:
                payload = _fit_row_detector(kind, matrix, config, seed)
            except (DataError, FitError, NumericError) as exc:
                warnings.append(f"{kind}:{MULTI_GROUP}: fit failed: {exc}")
                continue
            payload["window_cells"] = w_cells
            payload["stride_cells"] = s_cells
            detectors.append(
                FittedDetector(
                    f"{kind}:{MULTI_GROUP}", kind, KIND_CATEGORY[kind], MULTI_GROUP, payload
                )
            )
    return detectors, warnings


# ---------------------------------------------------------------------------
# scoring


def _predictive_point_flags(
    det: FittedDetector, values: np.ndarray, start: int, config: EngineConfig
) -> np.ndarray:
    """Flags for cells [start, n) from a fitted predictive detector."""
    n = len(values)
    flags = np.zeros(n - start, dtype=bool)
    mult = config.residual_multiplier
    kind = det.kind
    payload = det.payload
    if kind in ("arima", "sarima"):
        model = payload["model"]
        with np.errstate(over="ignore", invalid="ignore"):
            preds, residuals, offset = predictive.arima_predict_in_sample(model, values)
        lo = max(start, offset)
        region = residuals[lo - offset :]
        flags[lo - start :] = predictive.residual_threshold_detect(
            np.zeros_like(region), region, payload["rms"], mult
        )
        return flags
    if kind == "stl":
        period = payload["period"]
        if n < 2 * period:
            return flags
        decomp = predictive.stl_decompose(values, period)
        region = decomp.residual[start:]
        return predictive.residual_threshold_detect(
            np.zeros_like(region), region, payload["rms"], mult
        )
    lags = payload["lags"]
    lo = max(start, lags)
    if lo >= n:
        return flags
    contexts = np.stack([values[t - lags : t] for t in range(lo, n)])
    actuals = values[lo:]
    if kind == "knn":
        dist = _sq_dists(contexts, payload["X"])
        preds = _knn_mean_targets(dist, payload["y"], payload["k"])
    elif kind == "cart":
        preds = np.array([predictive.cart_predict(payload["model"], c) for c in contexts])
    elif kind == "kridge":
        preds = kernels.kernel_ridge_predict(payload["model"], contexts)
    else:
        raise DataError(f"unknown predictive detector {kind!r}")
    flags[lo - start :] = predictive.residual_threshold_detect(
        preds, actuals, payload["rms"], mult
    )
    return flags


def _window_point_flags(
    det: FittedDetector, values: np.ndarray, start: int, vote: str = "majority"
) -> np.ndarray:
    """Flags for cells [start, n) by voting over the windows covering
    each point: "any" / "majority" (strict) / "all" flagged windows."""
    n = len(values)
    w = det.payload["window_cells"]
    stride = det.payload["stride_cells"]
    flags = np.zeros(n - start, dtype=bool)
    first_start = max(0, start - w + 1)
    matrix, starts = _window_matrix(values, w, stride)
    use = starts >= first_start
    if not use.any():
        return flags
    window_flags = _score_rows(det.kind, det.payload, matrix[use])
    covering = np.zeros(n - start, dtype=int)
    flagged = np.zeros(n - start, dtype=int)
    for s, f in zip(starts[use], window_flags):
        lo = max(s, start) - start
        hi = s + w - start
        covering[lo:hi] += 1
        if f:
            flagged[lo:hi] += 1
    if vote == "any":
        return flagged > 0
    if vote == "all":
        return (covering > 0) & (flagged == covering)
    return flagged * 2 > covering


def score_bank(
    detectors: list[FittedDetector],
    grids: dict[str, TimeSeries],
    config: EngineConfig,
    predictive_start: int,
    unsupervised_start: int = 0,
) -> dict[str, list[DetectorVerdict]]:
    """Score every fitted detector; returns verdicts grouped by stream.

    Predictive verdicts cover cells [predictive_start, n); all other
    banks cover [unsupervised_start, n).
    """
    timeline = next(iter(grids.values())).timestamps
    n = len(timeline)
    multi_rows = None
    if any(det.group == MULTI_GROUP for det in detectors):
        multi_rows = np.column_stack([grids[name].values for name in config.features])
    verdicts: dict[str, list[DetectorVerdict]] = {}
    for det in detectors:
        if det.category is DetectorCategory.PREDICTIVE:
            start = predictive_start
            flags = _predictive_point_flags(
                det, grids[det.group].values, start, config
            )
        else:
            start = unsupervised_start
            values = (
                multi_rows if det.group == MULTI_GROUP else grids[det.group].values
            )
            flags = _window_point_flags(det, values, start, config.window_vote)
        verdicts.setdefault(det.group, []).append(
            DetectorVerdict(
                detector_id=det.detector_id,
                category=det.category,
                timestamps=timeline[start:],
                flags=flags,
            )
        )
    return verdicts


def merge_group_votes(
    group_verdicts: dict[str, list[DetectorVerdict]],
    timeline: np.ndarray,
    alarm_categories: tuple[str, ...] = (),
    warnings: list[str] | None = None,
) -> EnsembleReport:
    """Combine per-group category majorities into one report.

    A category's decision at a point is the OR over groups of that
    group's strict majority; the reported counts come from the group
    with the strongest vote margin there, so decision == (flagged >
    total/2) stays true pointwise.
    """
    n = len(timeline)
    index = {int(t): i for i, t in enumerate(timeline)}
    best_margin: dict[str, np.ndarray] = {}
    categories: dict[str, CategoryTally] = {}
    flagging: list[list[str]] = [[] for _ in range(n)]
    for verdicts in group_verdicts.values():
        for cat in DetectorCategory:
            members = [v for v in verdicts if v.category is cat]
            if not members:
                continue
            ts = members[0].timestamps
            offsets = np.array([index[int(t)] for t in ts])
            flagged = np.sum([v.flags.astype(int) for v in members], axis=0)
            total = len(members)
            margin = 2 * flagged - total
            tally = categories.get(cat.value)
            if tally is None:
                tally = CategoryTally(
                    flagged=np.zeros(n, dtype=int),
                    total=np.zeros(n, dtype=int),
                    decision=np.zeros(n, dtype=bool),
                )
                categories[cat.value] = tally
                best_margin[cat.value] = np.full(n, -np.inf)
            seen = best_margin[cat.value]
            better = margin > seen[offsets]
            upd = offsets[better]
            tally.flagged[upd] = flagged[better]
            tally.total[upd] = total
            seen[upd] = margin[better]
            tally.decision[offsets] |= margin > 0
        for v in verdicts:
            for t, f in zip(v.timestamps, v.flags):
                if f:
                    flagging[index[int(t)]].append(v.detector_id)
    enabled = alarm_categories or tuple(categories.keys())
    alarm = np.zeros(n, dtype=bool)
    for name in enabled:
        if name in categories:
            alarm |= categories[name].decision
    return EnsembleReport(
        timestamps=timeline,
        categories=categories,
        alarm=alarm,
        flagging_detectors=flagging,
        warnings=list(warnings or []),
    )


def run_batch(transactions, config: EngineConfig) -> EnsembleReport:
    """Batch detection: 70/30 chronological split for the predictive
    bank, everything else fits and scores the full span."""
    if not (
        config.predictive_detectors
        or config.reduction_detectors
        or config.clustering_detectors
    ):
        raise DataError("config enables no detectors")
    if not transactions:
        raise DataError("no transactions to analyze")
    grids = build_grids(transactions, config)
    n = len(next(iter(grids.values())))
    split = int(round(config.train_ratio * n))
    split = min(max(split, 1), n - 1) if n > 1 else 1
    detectors, warnings = fit_bank(grids, config, predictive_train_cells=split)
    if not detectors:
        raise FitError(f"every detector failed to fit: {warnings}")
    verdicts = score_bank(detectors, grids, config, predictive_start=split)
    timeline = next(iter(grids.values())).timestamps
    return merge_group_votes(verdicts, timeline, config.alarm_categories, warnings)


# ---------------------------------------------------------------------------
# streaming


@dataclass
class Alarm:
    timestamp: int
    account: str
    categories: dict
    detectors: list[str]
    gap_notice: bool = False


@dataclass
class StreamEngine:
    """Rolling state: reference grids, fitted models, retrain clock."""

    config: EngineConfig
    account: str
    grids: dict[str, TimeSeries]
    detectors: list[FittedDetector]
    warnings: list[str]
    last_retrain: int
    alarmed: set = field(default_factory=set)


def make_engine(transactions, config: EngineConfig, account: str = "") -> StreamEngine:
    """Fit the bank on an initial reference span and start the clock."""
    return engine_from_grids(build_grids(transactions, config), config, account)


def engine_from_grids(
    grids: dict[str, TimeSeries], config: EngineConfig, account: str = ""
) -> StreamEngine:
    grids = _evict(dict(grids), config)
    detectors, warnings = fit_bank(grids, config, predictive_train_cells=None)
    if not detectors:
        raise FitError(f"every detector failed to fit: {warnings}")
    now = int(next(iter(grids.values())).timestamps[-1])
    return StreamEngine(
        config=config,
        account=account,
        grids=grids,
        detectors=detectors,
        warnings=warnings,
        last_retrain=now,
    )


def _evict(grids: dict[str, TimeSeries], config: EngineConfig) -> dict[str, TimeSeries]:
    keep = config.database_span // config.grid_step
    out = {}
    for name, grid in grids.items():
        if len(grid) > keep:
            out[name] = TimeSeries(
                grid.timestamps[-keep:], grid.values[-keep:], step=grid.step
            )
        else:
            out[name] = grid
    return out


def retrain(engine: StreamEngine) -> None:
    """Refit every detector on the current reference database."""
    if not engine.grids or len(next(iter(engine.grids.values()))) == 0:
        raise DataError("cannot retrain on an empty database")
    detectors, warnings = fit_bank(engine.grids, engine.config, predictive_train_cells=None)
    if not detectors:
        raise FitError(f"every detector failed to fit: {warnings}")
    engine.detectors = detectors
    engine.warnings = warnings
    engine.last_retrain = int(next(iter(engine.grids.values())).timestamps[-1])


def stream_advance(engine: StreamEngine, new_points: dict[str, TimeSeries]) -> list[Alarm]:
    """Append new grid cells, score them, and emit alarms for newly
    flagged points. Gaps are zero-filled with a notice; a retrain fires
    when the interval has elapsed."""
    config = engine.config
    step = config.grid_step
    gap = False
    appended = None
    for name in config.features:
        grid = engine.grids[name]
        incoming = new_points[name]
        if incoming.step is not None and incoming.step != step:
            raise DataError("incoming points must be on the engine grid")
        expected = int(grid.timestamps[-1]) + step
        first = int(incoming.timestamps[0])
        if first < expected or (first - expected) % step != 0:
            raise DataError("incoming points must be contiguous with the grid")
        pad = (first - expected) // step
        if pad > 0:
            gap = True
        pad_ts = expected + step * np.arange(pad, dtype=np.int64)
        ts = np.concatenate([grid.timestamps, pad_ts, incoming.timestamps])
        vals = np.concatenate([grid.values, np.zeros(pad), incoming.values])
        engine.grids[name] = TimeSeries(ts, vals, step=step)
        count = pad + len(incoming)
        if appended is None:
            appended = count
        elif appended != count:
            raise DataError("features must advance by the same number of cells")
    engine.grids = _evict(engine.grids, config)
    now = int(next(iter(engine.grids.values())).timestamps[-1])
    if now - engine.last_retrain >= config.retrain_interval:
        retrain(engine)

    n = len(next(iter(engine.grids.values())))
    start = max(0, n - appended)
    verdicts = score_bank(
        engine.detectors,
        engine.grids,
        config,
        predictive_start=start,
        unsupervised_start=start,
    )
    timeline = next(iter(engine.grids.values())).timestamps
    report = merge_group_votes(verdicts, timeline[start:], config.alarm_categories)
    alarms = []
    for i, t in enumerate(report.timestamps):
        if not report.alarm[i]:
            continue
        t = int(t)
        if t in engine.alarmed:
            continue
        engine.alarmed.add(t)
        alarms.append(
            Alarm(
                timestamp=t,
                account=engine.account,
                categories={
                    name: {
                        "flagged": int(tally.flagged[i]),
                        "total": int(tally.total[i]),
                        "decision": bool(tally.decision[i]),
                    }
                    for name, tally in report.categories.items()
                },
                detectors=report.flagging_detectors[i],
                gap_notice=gap,
            )
        )
    # keep the alarmed-set bounded to the database span
    horizon = now - config.database_span
    engine.alarmed = {t for t in engine.alarmed if t >= horizon}
    return alarms
