"""Concave piecewise-linear functions and the adaptive sandwich of a concave oracle."""

from __future__ import annotations

import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np

from bamlab.errors import BadDeltaError, DomainError, NotConcaveError

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    Oracle = cabc.Callable[[float], float]
    Mapper = cabc.Callable[[Oracle, cabc.Iterable[float]], cabc.Iterable[float]]

logger = logging.getLogger(__name__)

CONCAVITY_TOL = 1e-8
DOMAIN_TOL = 1e-9
STEP_TOL = 1e-12
SLOPE_CAP = 1e6
MAX_QUERIES = 200_000


def _concavity_slack(values: np.ndarray) -> float:
    """How far a breakpoint may sit below its neighbours' chord."""
    return CONCAVITY_TOL * max(1.0, float(np.abs(values).max()))


def _sag(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Height of every interior breakpoint above the chord of its neighbours."""
    x0, x1, x2 = xs[:-2], xs[1:-1], xs[2:]
    y0, y1, y2 = ys[:-2], ys[1:-1], ys[2:]
    return y1 - (y0 + (y2 - y0) * (x1 - x0) / (x2 - x0))


@dc.dataclass(frozen=True, eq=False)
class PiecewiseLinearConcave:
    """Linear interpolation through ``(breakpoints, values)`` on ``[a, b]``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        """Require at least two strictly increasing breakpoints and concavity."""
        xs = np.array(self.breakpoints, dtype=float)
        ys = np.array(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.shape[0] < 2:  # noqa: PLR2004
            msg = "Need matching one-dimensional breakpoints and values, at least two."
            raise DomainError(msg)
        if (np.diff(xs) <= 0).any():
            msg = "Breakpoints must be strictly increasing."
            raise DomainError(msg)
        sag = _sag(xs, ys)
        if (sag < -_concavity_slack(ys)).any():
            worst = int(np.argmin(sag)) + 1
            msg = (
                f"Breakpoint {xs[worst]} lies {-sag[worst - 1]:.3g} below the chord"
                " of its neighbours."
            )
            raise NotConcaveError(msg)
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "values", ys)

    @classmethod
    def linear(
        cls, domain: tuple[float, float], ends: tuple[float, float]
    ) -> PiecewiseLinearConcave:
        """Segment from ``(a, f_a)`` to ``(b, f_b)``."""
        return cls(np.array(domain), np.array(ends))

    @property
    def domain(self) -> tuple[float, float]:
        """Interval ``[a, b]``."""
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def slopes(self) -> np.ndarray:
        """Slope of every segment, non-increasing up to rounding."""
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __call__(self, xi: float | np.ndarray) -> float | np.ndarray:
        """Evaluate by interpolation; queries outside ``[a, b]`` are errors."""
        a, b = self.domain
        arr = np.asarray(xi, dtype=float)
        slack = DOMAIN_TOL * max(1.0, abs(a), abs(b))
        if (arr < a - slack).any() or (arr > b + slack).any():
            msg = f"Query {xi} lies outside [{a}, {b}]."
            raise DomainError(msg)
        out = np.interp(np.clip(arr, a, b), self.breakpoints, self.values)
        return float(out) if out.ndim == 0 else out

    def lines(self) -> list[tuple[float, float]]:
        """``(slope, intercept)`` of every segment; the function is their minimum."""
        slopes = self.slopes
        intercepts = self.values[:-1] - slopes * self.breakpoints[:-1]
        return list(zip(slopes.tolist(), intercepts.tolist(), strict=True))

    def shifted(self, delta: float) -> PiecewiseLinearConcave:
        """Same breakpoints, values raised by ``delta``."""
        return PiecewiseLinearConcave(self.breakpoints, self.values + delta)

    def argmax(self) -> tuple[float, float]:
        """Smallest maximizer and the maximum."""
        idx = int(np.argmax(self.values))
        return float(self.breakpoints[idx]), float(self.values[idx])


@dc.dataclass(frozen=True)
class SandwichEnds:
    """Domain ends, oracle values there and supporting slopes at each end."""

    a: float
    b: float
    f_a: float
    f_b: float
    beta_a: float
    beta_b: float


@dc.dataclass(frozen=True, eq=False)
class SandwichResult:
    """Lower and upper concave bounds of an oracle and the queries spent."""

    lower: PiecewiseLinearConcave
    upper: PiecewiseLinearConcave
    queries: int


@dc.dataclass
class _Normalized:
    """Oracle minus the end-to-end chord, so both ends sit at zero."""

    evaluate: Oracle
    ends: SandwichEnds
    queries: int = 0

    @property
    def chord(self) -> float:
        e = self.ends
        return (e.f_b - e.f_a) / (e.b - e.a)

    def __call__(self, x: float) -> float:
        self.queries += 1
        if self.queries > MAX_QUERIES:
            msg = f"Sandwich exceeded {MAX_QUERIES} oracle queries."
            raise NotConcaveError(msg)
        e = self.ends
        return self.evaluate(x) - (e.f_a + self.chord * (x - e.a))


def _scan(
    oracle: Oracle, span: tuple[float, float], start_slope: float, delta: float
) -> list[tuple[float, float]]:
    """Step inward from one end while the normalized oracle is still rising.

    Works in distance-from-the-end coordinates with ``span = (limit, width)``:
    the gap between the extension of the last chord and the line down to the
    far end at ``width`` grows at rate ``β``, so a step of ``δ/β`` keeps it
    below ``δ``. No step reaches ``limit``. ``β`` is capped at
    :data:`SLOPE_CAP`, so steep stretches are sampled on a uniform grid of
    step ``δ/SLOPE_CAP`` and left to refinement for certification.
    """
    limit, width = span
    floor = STEP_TOL * width
    points = [(0.0, 0.0)]
    slope = start_slope
    while True:
        dist, height = points[-1]
        beta = min(slope + height / (width - dist), SLOPE_CAP)
        if beta <= 0:
            break
        step = dist + delta / beta
        if step - dist <= floor or limit - step <= floor:
            break
        value = oracle(step)
        slope = (value - height) / (step - dist)
        points.append((step, value))
        if slope <= 0:
            break
    return points


def _segment_gap(left: float, chord: float, right: float, width: float) -> float:
    """Largest distance between a chord and the two neighbouring line extensions."""
    rise, fall = left - chord, chord - right
    if rise <= 0 or fall <= 0:
        return 0.0
    if math.isinf(rise):
        return fall * width
    return rise * fall * width / (rise + fall)


def _split_point(x0: float, x1: float, slopes: tuple[float, float, float]) -> float:
    """Where the two neighbouring extensions cross, kept away from the ends."""
    left, chord, right = slopes
    width = x1 - x0
    offset = (chord - right) * width / (left - right)
    return x0 + min(max(offset, 0.05 * width), 0.95 * width)


def _refine(
    points: dict[float, float],
    oracle: Oracle,
    end_slopes: tuple[float, float],
    tol: tuple[float, Mapper],
) -> None:
    """Split segments until every certified gap is at most ``delta``."""
    delta, mapper = tol
    while True:
        xs = sorted(points)
        ys = np.array([points[x] for x in xs])
        chords = np.diff(ys) / np.diff(xs)
        bounds = np.concatenate([[end_slopes[0]], chords, [end_slopes[1]]])
        splits = []
        for k in range(len(xs) - 1):
            triple = (float(bounds[k]), float(chords[k]), float(bounds[k + 2]))
            gap = _segment_gap(*triple, xs[k + 1] - xs[k])
            if gap > delta * (1.0 + 1e-9):
                splits.append(_split_point(xs[k], xs[k + 1], triple))
        if not splits:
            return
        points.update(zip(splits, mapper(oracle, splits), strict=True))


def _upper_hull(xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop points on or under the upper hull, failing on genuine non-concavity.

    Uses the same slack as :class:`PiecewiseLinearConcave`, so whatever
    survives here is accepted there.
    """
    slack = _concavity_slack(ys)
    hull: list[tuple[float, float]] = []
    for x, y in zip(xs.tolist(), ys.tolist(), strict=True):
        while len(hull) >= 2:  # noqa: PLR2004
            (x0, y0), (x1, y1) = hull[-2], hull[-1]
            if (y1 - y0) * (x - x0) > (y - y0) * (x1 - x0):
                break
            drop = y0 + (y - y0) * (x1 - x0) / (x - x0) - y1
            if drop > slack:
                msg = f"Oracle is not concave near {x1}: {drop:.3g} below its chord."
                raise NotConcaveError(msg)
            hull.pop()
        hull.append((x, y))
    return np.array([x for x, _ in hull]), np.array([y for _, y in hull])


def sandwich(
    evaluate: Oracle,
    ends: SandwichEnds,
    delta: float,
    mapper: Mapper = map,
) -> SandwichResult:
    """Bracket a concave oracle between two concave functions ``delta`` apart.

    Scans inward from both ends with adaptive steps, then certifies every
    segment against the extensions of its neighbouring chords and splits
    where the certified gap still exceeds ``delta``. ``mapper`` evaluates a
    batch of independent queries and may be an executor's ``map``.
    """
    if not delta > 0:
        msg = f"Sandwich tolerance must be positive; got {delta}."
        raise BadDeltaError(msg)
    a, b = ends.a, ends.b
    oracle = _Normalized(evaluate, ends)
    if not ends.beta_a <= SLOPE_CAP:
        logger.warning(
            "Left end slope %s exceeds %g; sampling a grid of step %.3g near %g",
            ends.beta_a,
            SLOPE_CAP,
            delta / SLOPE_CAP,
            a,
        )
    beta_a = ends.beta_a - oracle.chord
    beta_b = ends.beta_b - oracle.chord
    scale = max(1.0, abs(ends.f_a), abs(ends.f_b))
    linear = PiecewiseLinearConcave.linear((a, b), (ends.f_a, ends.f_b))
    if abs(beta_a - beta_b) <= 1e-12 * scale:
        return SandwichResult(linear, linear.shifted(delta), 0)
    if beta_a < 0 or beta_b > 0:
        msg = f"End slopes {ends.beta_a}, {ends.beta_b} do not support the chord."
        raise NotConcaveError(msg)
    width = b - a
    forward = _scan(oracle, (width, width), beta_a, delta)
    peak = forward[-1][0]

    def mirrored(dist: float) -> float:
        return oracle(b - dist)

    backward = _scan(mirrored, (width - peak, width), -beta_b, delta)
    points = {a: 0.0, b: 0.0}
    points.update((a + d, v) for d, v in forward[1:])
    points.update((b - d, v) for d, v in backward[1:] if b - d > a + peak)
    _refine(points, oracle, (beta_a, beta_b), (delta, mapper))
    xs = np.array(sorted(points))
    heights = np.array([points[x] for x in xs.tolist()])
    xs, ys = _upper_hull(xs, heights + ends.f_a + oracle.chord * (xs - a))
    lower = PiecewiseLinearConcave(xs, ys)
    logger.debug(
        "Sandwich on [%g, %g]: %d queries, %d breakpoints",
        a,
        b,
        oracle.queries,
        len(xs),
    )
    return SandwichResult(lower, lower.shifted(delta), oracle.queries)


def query_bound(ends: SandwichEnds, peak: float, delta: float) -> float:
    """Query budget ``4·peak/δ + log₂((β_a−β_b)²/|(β_a−β)(β_b−β)|) + 8``.

    ``peak`` is the largest height of the oracle above its end-to-end chord.
    """
    chord = (ends.f_b - ends.f_a) / (ends.b - ends.a)
    spread = ends.beta_a - ends.beta_b
    denom = abs((ends.beta_a - chord) * (ends.beta_b - chord))
    log_term = math.log2(spread**2 / denom) if denom > 0 and spread > 0 else 0.0
    return 4.0 * peak / delta + max(log_term, 0.0) + 8.0


__all__ = [
    "SLOPE_CAP",
    "PiecewiseLinearConcave",
    "SandwichEnds",
    "SandwichResult",
    "query_bound",
    "sandwich",
]
