"""
Execution helpers for sweeps: validation, timed point evaluation, worker pool and CSV output.
"""

from __future__ import annotations

import io
import logging
import math
import numbers
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import pandas as pd

from lib.analysis.metrics import MetricResult, evaluate_metric
from lib.analysis.specfun import SeriesConfig
from lib.config import DefaultConfig
from lib.errors import ConfigError, EngineError, NumericalError, ShapeIntegralityError
from lib.simulation.montecarlo import SimPlan

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "curve",
    "variable",
    "value",
    "metric",
    "method",
    "result",
    "stderr_or_tail",
    "terms_used",
    "wall_ms",
    "result_positive",
    "error",
]
COMPARE_COLUMNS = [
    "curve",
    "variable",
    "value",
    "metric",
    "closed_form",
    "quadrature",
    "monte_carlo",
    "mc_stderr",
    "gap",
    "tolerance",
    "mc_band_low",
    "mc_band_high",
    "passed",
    "mc_strict",
    "physical",
    "error",
]

T = TypeVar("T")
R = TypeVar("R")


def db_to_linear(db: float) -> float:
    """
    Convert decibels to a linear power ratio.

    Parameters:
        db (float): Value in dB.
    Returns:
        float: Linear ratio.
    Raises:
        None
    """
    return 10.0 ** (db / 10.0)


def validate_number(value: Any, name: str) -> float:
    """
    Validate that a configuration value is a finite real number.

    Parameters:
        value (Any): Value to validate.
        name (str): Key used in error messages.
    Returns:
        float: The value as float.
    Raises:
        ConfigError: If the value is missing, not numeric or not finite.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ConfigError(f"must be a number, got {value!r}", name)
    if not math.isfinite(value):
        raise ConfigError(f"must be finite, got {value!r}", name)
    return float(value)


def validate_positive_int(value: Any, name: str) -> int:
    """
    Validate that a configuration value is an integer >= 1.

    Parameters:
        value (Any): Value to validate; integral floats are accepted.
        name (str): Key used in error messages.
    Returns:
        int: The value as int.
    Raises:
        ConfigError: If the value is not a positive integer.
    """
    number = validate_number(value, name)
    if number != int(number) or number < 1:
        raise ConfigError(f"must be a positive integer, got {value!r}", name)
    return int(number)


def validate_choice(value: Any, choices: Sequence[str], name: str) -> str:
    """
    Validate that a configuration value is one of the allowed names.

    Parameters:
        value (Any): Value to validate.
        choices (Sequence[str]): Allowed names.
        name (str): Key used in error messages.
    Returns:
        str: The value.
    Raises:
        ConfigError: If the value is not among choices.
    """
    if value not in choices:
        raise ConfigError(f"must be one of {', '.join(choices)}, got {value!r}", name)
    return value


@dataclass(frozen=True)
class SweepPoint:
    """One metric evaluation of a sweep."""

    curve: str
    variable: str
    value: float
    metric: str
    method: str
    net: Any
    target_rate: float


def evaluate_point(
    point: SweepPoint, trunc: SeriesConfig, plan: SimPlan, workers: Optional[int] = None
) -> Dict[str, Any]:
    """
    Evaluate one sweep point and time it.

    Failures of any kind are recorded in the error column; anything that is not an
    EngineError is reported as a NumericalError.

    Parameters:
        point (SweepPoint): Point to evaluate.
        trunc (SeriesConfig): Series settings.
        plan (SimPlan): Monte-Carlo plan; its network is replaced by the point's.
        workers (Optional[int]): Monte-Carlo block threads.
    Returns:
        Dict[str, Any]: CSV row, with the error column set when the evaluation failed.
    Raises:
        None
    """
    row: Dict[str, Any] = {
        "curve": point.curve,
        "variable": point.variable,
        "value": point.value,
        "metric": point.metric,
        "method": point.method,
        "result": None,
        "stderr_or_tail": None,
        "terms_used": None,
        "wall_ms": None,
        "result_positive": None,
        "error": "",
    }
    start = time.perf_counter()
    try:
        result = evaluate_metric(
            point.metric, point.net, point.target_rate, trunc, point.method, replace(plan, net=point.net), workers
        )
    except Exception as exc:
        logger.error("%s/%s at %s=%s failed: %s", point.metric, point.method, point.variable, point.value, exc)
        row["error"] = _describe(exc)
        row["wall_ms"] = (time.perf_counter() - start) * 1000.0
        return row

    row["wall_ms"] = (time.perf_counter() - start) * 1000.0
    row.update(_result_columns(result))
    if point.metric == "esmc":
        row["result_positive"] = result.positive_part if result.positive_part is not None else max(result.value, 0.0)
    for message in result.warnings:
        logger.debug("%s/%s warning: %s", point.metric, point.method, message)
    return row


def _describe(exc: Exception) -> str:
    if isinstance(exc, EngineError):
        return f"{type(exc).__name__}: {exc}"
    return f"{NumericalError.__name__}: {type(exc).__name__}: {exc}"


def _result_columns(result: MetricResult) -> Dict[str, Any]:
    return {"result": result.value, "stderr_or_tail": result.tail_estimate, "terms_used": result.terms_used}


def block_workers(workers: Optional[int], points: int) -> int:
    """
    Monte-Carlo block threads per point when points share a pool of the given size.

    Parameters:
        workers (Optional[int]): Total threads, DefaultConfig.WORKERS when omitted.
        points (int): Points evaluated on the pool.
    Returns:
        int: Threads per point, at least 1.
    Raises:
        None
    """
    workers = workers or DefaultConfig.WORKERS
    return max(1, workers // max(points, 1))


def run_parallel(func: Callable[[T], R], items: Sequence[T], workers: Optional[int] = None) -> List[R]:
    """
    Map func over items on a thread pool, returning results in input order.

    Parameters:
        func (Callable[[T], R]): Work function.
        items (Sequence[T]): Work items.
        workers (Optional[int]): Pool size, DefaultConfig.WORKERS when omitted.
    Returns:
        List[R]: One result per item, in the order of items.
    Raises:
        None
    """
    workers = workers or DefaultConfig.WORKERS
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def run_sweep(
    points: Sequence[SweepPoint], trunc: SeriesConfig, plan: SimPlan, workers: Optional[int] = None
) -> List[Dict[str, Any]]:
    """
    Evaluate every sweep point on the worker pool.

    Parameters:
        points (Sequence[SweepPoint]): Points in output order.
        trunc (SeriesConfig): Series settings.
        plan (SimPlan): Monte-Carlo plan.
        workers (Optional[int]): Pool size, shared with the Monte-Carlo blocks of each point.
    Returns:
        List[Dict[str, Any]]: One CSV row per point, in the order of points.
    Raises:
        None
    """
    evaluate = partial(evaluate_point, trunc=trunc, plan=plan, workers=block_workers(workers, len(points)))
    rows = run_parallel(evaluate, points, workers)
    failed = sum(1 for row in rows if row["error"])
    logger.info("Sweep finished: %d points, %d failed", len(rows), failed)
    return rows


def compare_row(
    point: SweepPoint,
    trunc: SeriesConfig,
    plan: SimPlan,
    physical: bool = False,
    workers: Optional[int] = None,
) -> Dict[str, Any]:
    """
    Evaluate one point with all three methods and judge their agreement.

    The closed form and quadrature must agree within the metric tolerance, and each must lie
    within the Monte-Carlo 99% band widened by the same tolerance. mc_strict repeats the band
    check without the widening. A closed form that needs integer shapes is skipped rather
    than failed.

    Parameters:
        point (SweepPoint): Point to compare; its method field is ignored.
        trunc (SeriesConfig): Series settings.
        plan (SimPlan): Monte-Carlo plan; its network is replaced by the point's.
        physical (bool): Also report the physical-mode Monte-Carlo estimate.
        workers (Optional[int]): Monte-Carlo block threads.
    Returns:
        Dict[str, Any]: CSV row.
    Raises:
        None
    """
    tolerance = DefaultConfig.TOL_CAPACITY_BITS if point.metric == "esmc" else DefaultConfig.TOL_PROBABILITY
    point_plan = replace(plan, net=point.net)
    row: Dict[str, Any] = {column: None for column in COMPARE_COLUMNS}
    row.update(curve=point.curve, variable=point.variable, value=point.value, metric=point.metric)
    row.update(tolerance=tolerance, passed=False, mc_strict=False, error="")
    errors = []
    values: Dict[str, Optional[MetricResult]] = {}
    for method in ("closed_form", "quadrature", "monte_carlo"):
        try:
            values[method] = evaluate_metric(
                point.metric, point.net, point.target_rate, trunc, method, point_plan, workers
            )
        except ShapeIntegralityError as exc:
            values[method] = None
            errors.append(f"{method} skipped: {exc}")
        except Exception as exc:
            logger.error("compare %s/%s at %s=%s failed: %s", point.metric, method, point.variable, point.value, exc)
            row["error"] = f"{method}: {_describe(exc)}"
            return row

    mc = values["monte_carlo"]
    strict_band = DefaultConfig.MC_CONFIDENCE_Z * mc.tail_estimate
    band = strict_band + tolerance
    row.update(
        closed_form=values["closed_form"].value if values["closed_form"] else None,
        quadrature=values["quadrature"].value,
        monte_carlo=mc.value,
        mc_stderr=mc.tail_estimate,
        mc_band_low=mc.value - band,
        mc_band_high=mc.value + band,
    )
    analytic = [result.value for result in (values["closed_form"], values["quadrature"]) if result is not None]
    gap_ok = True
    if values["closed_form"] is not None:
        row["gap"] = abs(values["closed_form"].value - values["quadrature"].value)
        gap_ok = row["gap"] <= tolerance
    row["passed"] = gap_ok and all(abs(value - mc.value) <= band for value in analytic)
    row["mc_strict"] = all(abs(value - mc.value) <= strict_band for value in analytic)

    if physical:
        try:
            row["physical"] = evaluate_metric(
                point.metric,
                point.net,
                point.target_rate,
                trunc,
                "monte_carlo",
                replace(point_plan, mode="physical"),
                workers,
            ).value
        except EngineError as exc:
            errors.append(f"physical: {exc}")
    row["error"] = "; ".join(errors)
    if not row["passed"]:
        logger.warning("compare failed for %s at %s=%s", point.metric, point.variable, point.value)
    elif not row["mc_strict"]:
        logger.info("compare %s at %s=%s passed only in the widened band", point.metric, point.variable, point.value)
    return row


def write_csv(
    rows: List[Dict[str, Any]],
    columns: Sequence[str],
    out: Optional[Path] = None,
    header_timestamp: bool = True,
) -> str:
    """
    Render rows as CSV with a fixed column order and optionally write them to a file.

    Parameters:
        rows (List[Dict[str, Any]]): Output rows.
        columns (Sequence[str]): Column order.
        out (Optional[Path]): Destination file, or None to only return the text.
        header_timestamp (bool): Prefix a "# generated ..." line and keep wall_ms values.
    Returns:
        str: The CSV text.
    Raises:
        OSError: If the file cannot be written.
    """
    frame = pd.DataFrame(rows, columns=list(columns))
    if not header_timestamp and "wall_ms" in frame:
        frame["wall_ms"] = None
    buffer = io.StringIO()
    if header_timestamp:
        buffer.write(f"# generated {datetime.now().isoformat(timespec='seconds')}\n")
    frame.to_csv(buffer, index=False, float_format="%.10g", lineterminator="\n")
    text = buffer.getvalue()
    if out is not None:
        Path(out).write_text(text, encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(rows), out)
    return text
