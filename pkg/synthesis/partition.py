# synthesis/partition.py
"""
Approximate synthesis: split a parameter space into accepting and rejecting
boxes until a coverage target is met.

Samples taken on a grid guide where boxes are cut. Boxes whose samples all
agree are verified under the matching hypothesis; mixed boxes are split
without calling a verifier. Counterexamples returned by the verifiers become
new samples.
"""
import heapq
import io
import itertools
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from django.db import models

from .exceptions import DimensionUnsupported, NoMixedSamples
from .lifting import Hypothesis, NondeterminismRelation
from .regions import Region, RegionStatus
from .smt import SolverSession, solver_available
from .utils import as_fraction, synthesis_setting
from .verification import SMT_ENGINES, VerificationEngine, holds_at, verify_region

logger = logging.getLogger(__name__)


class Splitter(models.TextChoices):
    QUADS = "quads", "Bisection"
    GROWING_RECTANGLES = "growing", "Growing rectangles"


PARTITION_ENGINES = (VerificationEngine.LIFTING, VerificationEngine.SMT_ES, VerificationEngine.SMT_SF)


@dataclass(frozen=True)
class Sample:
    point: dict
    satisfied: bool
    value: object


@dataclass
class PartitionConfig:
    coverage: Fraction = Fraction(19, 20)
    engine: str = VerificationEngine.LIFTING
    splitter: str = Splitter.QUADS
    grid: int = 4
    budget_seconds: float = 600.0
    max_iterations: int = 100000
    workers: int = 1
    smt_fallback_fraction: Fraction = Fraction(1, 1024)
    min_region_fraction: Fraction = Fraction(1, 65536)
    relation: str = NondeterminismRelation.DEMONIC
    smt_command: str = None

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            "coverage": as_fraction(synthesis_setting("PARTITION.COVERAGE", "0.95")),
            "engine": synthesis_setting("PARTITION.ENGINE", VerificationEngine.LIFTING),
            "splitter": synthesis_setting("PARTITION.SPLITTER", Splitter.QUADS),
            "grid": synthesis_setting("PARTITION.GRID", 4),
            "budget_seconds": synthesis_setting("PARTITION.BUDGET_SECONDS", 600.0),
            "max_iterations": synthesis_setting("PARTITION.MAX_ITERATIONS", 100000),
            "workers": synthesis_setting("PARTITION.WORKERS", 1),
            "smt_fallback_fraction": as_fraction(synthesis_setting("PARTITION.SMT_FALLBACK_FRACTION", "1/1024")),
            "min_region_fraction": as_fraction(synthesis_setting("PARTITION.MIN_REGION_FRACTION", "1/65536")),
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


@dataclass
class Candidate:
    id: int
    region: Region
    samples: list
    hypothesis: str
    consistent: bool = True

    def sort_key(self):
        return (-self.region.size, 0 if self.consistent else 1, self.id)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()


@dataclass
class PartitionState:
    space: Region
    accepted: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    undecided: list = field(default_factory=list)
    queue: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    iterations: int = 0
    verifications: int = 0
    budget_exhausted: bool = False
    elapsed: float = 0.0

    @property
    def coverage(self):
        if not self.space.size:
            return Fraction(1) if self.accepted or self.rejected else Fraction(0)
        covered = sum((r.size for r in itertools.chain(self.accepted, self.rejected)), Fraction(0))
        return covered / self.space.size

    def decided(self):
        return [(r, RegionStatus.ALL_SAT) for r in self.accepted] + [(r, RegionStatus.ALL_VIOLATE) for r in self.rejected]

    def boxes(self):
        boxes = self.decided()
        boxes.extend((r, RegionStatus.UNKNOWN) for r in self.undecided)
        boxes.extend((c.region, RegionStatus.UNKNOWN) for c in self.queue)
        return boxes


# sampling


def grid_points(space, k):
    axes = []
    for name, lower, upper in space.intervals:
        step = (upper - lower) / k
        axes.append([(name, lower + step * i + step / 2) for i in range(k)])
    return [dict(combo) for combo in itertools.product(*axes)]


def sample_points(model, spec, points, relation=NondeterminismRelation.DEMONIC):
    samples = []
    for point in points:
        satisfied, value = holds_at(model, spec, point, relation)
        samples.append(Sample(point, satisfied, value))
    return samples


def sample_grid(model, spec, space, k, relation=NondeterminismRelation.DEMONIC):
    return sample_points(model, spec, grid_points(space, k), relation)


def _distance(a, b, space):
    return sum((x - y) ** 2 for x, y in zip(space.normalise(a), space.normalise(b)))


def interpolate_samples(samples, space):
    """
    Midpoints between every sample and its nearest sample of the opposite
    verdict, deduplicated and clipped to ``space``.
    """
    positive = [s for s in samples if s.satisfied]
    negative = [s for s in samples if not s.satisfied]
    if not positive or not negative:
        raise NoMixedSamples("interpolation needs accepting and rejecting samples")
    seen = set()
    points = []
    for sample in samples:
        others = negative if sample.satisfied else positive
        nearest = min(others, key=lambda other: _distance(sample.point, other.point, space))
        midpoint = {}
        for name, lower, upper in space.intervals:
            value = (sample.point[name] + nearest.point[name]) / 2
            midpoint[name] = min(max(value, lower), upper)
        key = tuple(midpoint[name] for name in space.names)
        if key not in seen:
            seen.add(key)
            points.append(midpoint)
    return points


# candidates


def samples_in(region, samples):
    return [s for s in samples if region.contains(s.point)]


def is_pure(samples):
    return len({s.satisfied for s in samples}) <= 1


def hypothesis_for(region, samples, pool=(), decided=(), space=None):
    """
    Accept or reject: from the box's own samples when they agree, otherwise
    from the nearest sample or decided box (by distance of centres, ties accept).
    """
    if samples and is_pure(samples):
        return Hypothesis.ACCEPT if samples[0].satisfied else Hypothesis.REJECT
    space = space or region
    centre = region.center()
    best = None
    for sample in pool:
        candidate = (_distance(centre, sample.point, space), 0 if sample.satisfied else 1)
        best = candidate if best is None or candidate < best else best
    for box, status in decided:
        candidate = (_distance(centre, box.center(), space), 0 if status == RegionStatus.ALL_SAT else 1)
        best = candidate if best is None or candidate < best else best
    if best is None or best[1] == 0:
        return Hypothesis.ACCEPT
    return Hypothesis.REJECT


def _bisect_until_pure(region, samples, min_size):
    if is_pure(samples) or region.size <= min_size:
        return [region]
    boxes = []
    for child in region.split(dimension=region.widest_dimension()):
        boxes.extend(_bisect_until_pure(child, samples_in(child, samples), min_size))
    return boxes


def _grown_corner(region, anchor, opposite, corner):
    """
    Far corner of the largest box grown from the region vertex ``corner``
    towards ``anchor`` that keeps half the distance to every sample of the
    opposite verdict lying in its path.
    """
    scale = Fraction(1)
    for other in opposite:
        ratio = Fraction(0)
        inside = True
        for name in region.names:
            reach = anchor.point[name] - corner[name]
            offset = other.point[name] - corner[name]
            if reach == 0:
                if offset != 0:
                    inside = False
                continue
            share = offset / reach
            if share < 0 or share > 1:
                inside = False
                break
            ratio = max(ratio, share)
        if inside:
            scale = min(scale, ratio / 2)
    return {name: corner[name] + scale * (anchor.point[name] - corner[name]) for name in region.names}


def _grow(region, samples):
    best = None
    for anchor in samples:
        opposite = [s for s in samples if s.satisfied != anchor.satisfied]
        for corner in region.vertices():
            inner = _grown_corner(region, anchor, opposite, corner)
            box = Fraction(1)
            for name in region.names:
                box *= abs(inner[name] - corner[name])
            interior = all(lower < inner[name] < upper for name, lower, upper in region.intervals)
            if box and interior and (best is None or box > best[0]):
                best = (box, inner)
    return best[1] if best else None


def generate_candidates(region, samples, splitter=Splitter.QUADS, pool=(), decided=(), space=None, min_size=0):
    """``(box, samples, hypothesis)`` triples tiling ``region``."""
    samples = samples_in(region, samples)
    if is_pure(samples):
        boxes = [region]
    elif splitter == Splitter.GROWING_RECTANGLES:
        cut = _grow(region, samples)
        boxes = region.split(point=cut) if cut is not None else _bisect_until_pure(region, samples, min_size)
    else:
        boxes = _bisect_until_pure(region, samples, min_size)
    pool = pool or samples
    result = []
    for box in boxes:
        inside = samples_in(box, samples)
        result.append((box, inside, hypothesis_for(box, inside, pool, decided, space or region)))
    return result


def _touches(a, b):
    return all(
        lower <= other_upper and other_lower <= upper
        for (_, lower, upper), (_, other_lower, other_upper) in zip(a.intervals, b.intervals)
    )


def neighbourhood_consistent(region, hypothesis, decided):
    clash = RegionStatus.ALL_VIOLATE if hypothesis == Hypothesis.ACCEPT else RegionStatus.ALL_SAT
    return not any(status == clash and _touches(region, box) for box, status in decided)


# refinement


class _Refinement:
    def __init__(self, model, spec, space, config):
        self.model = model
        self.spec = spec
        self.config = config
        self.state = PartitionState(space)
        self.ids = itertools.count()
        self.local = threading.local()
        self.sessions = []
        self.sessions_lock = threading.Lock()
        self.smt_usable = (
            VerificationEngine(config.engine) in SMT_ENGINES or solver_available(config.smt_command)
        )

    def push(self, region, samples, hypothesis):
        state = self.state
        candidate = Candidate(
            id=next(self.ids),
            region=region,
            samples=samples,
            hypothesis=hypothesis,
            consistent=neighbourhood_consistent(region, hypothesis, state.decided()),
        )
        heapq.heappush(state.queue, candidate)

    def push_all(self, region, samples):
        state = self.state
        for box, inside, hypothesis in generate_candidates(
            region, samples, self.config.splitter, state.samples, state.decided(), state.space,
            self.config.min_region_fraction * state.space.size,
        ):
            self.push(box, inside, hypothesis)

    def session(self):
        session = getattr(self.local, "session", None)
        if session is None:
            session = self.local.session = SolverSession(self.config.smt_command)
            with self.sessions_lock:
                self.sessions.append(session)
        return session

    def verify(self, candidate):
        config = self.config
        engine = VerificationEngine(config.engine)
        kwargs = {"relation": config.relation, "hypothesis": candidate.hypothesis}
        if engine != VerificationEngine.LIFTING:
            return verify_region(self.model, candidate.region, self.spec, engine, session=self.session(), **kwargs)
        verdict = verify_region(self.model, candidate.region, self.spec, engine, **kwargs)
        small = candidate.region.size <= config.smt_fallback_fraction * self.state.space.size
        if not verdict.decided and small and self.smt_usable:
            logger.debug("falling back to the solver on %s", candidate.region)
            verdict = verify_region(
                self.model, candidate.region, self.spec, VerificationEngine.SMT_ES, session=self.session(), **kwargs
            )
        return verdict

    def settle(self, candidate, verdict):
        state = self.state
        if verdict is not None and verdict.status == RegionStatus.ALL_SAT:
            state.accepted.append(candidate.region)
            return
        if verdict is not None and verdict.status == RegionStatus.ALL_VIOLATE:
            state.rejected.append(candidate.region)
            return
        if verdict is not None and verdict.counterexample is not None:
            (sample,) = sample_points(self.model, self.spec, [verdict.counterexample], self.config.relation)
            state.samples.append(sample)
            candidate.samples.append(sample)
        region = candidate.region
        if region.size <= self.config.min_region_fraction * state.space.size:
            state.undecided.append(region)
            return
        if verdict is not None and is_pure(candidate.samples):
            for child in region.split(dimension=region.widest_dimension()):
                self.push_all(child, samples_in(child, candidate.samples))
        else:
            self.push_all(region, candidate.samples)

    def run(self):
        config, state = self.config, self.state
        started = time.monotonic()
        state.samples = sample_grid(self.model, self.spec, state.space, config.grid, config.relation)
        if not is_pure(state.samples):
            points = interpolate_samples(state.samples, state.space)
            state.samples.extend(sample_points(self.model, self.spec, points, config.relation))
        logger.info("partition of %s: %d samples", state.space, len(state.samples))
        self.push_all(state.space, state.samples)

        try:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                while state.queue and state.coverage < config.coverage:
                    if state.iterations >= config.max_iterations:
                        logger.warning("partition stopped after %d iterations", state.iterations)
                        break
                    if time.monotonic() - started > config.budget_seconds:
                        logger.warning("partition budget of %ss exhausted", config.budget_seconds)
                        state.budget_exhausted = True
                        break
                    batch = [heapq.heappop(state.queue) for _ in range(min(config.workers, len(state.queue)))]
                    pending = [c for c in batch if is_pure(c.samples)]
                    verdicts = dict(zip((c.id for c in pending), pool.map(self.verify, pending)))
                    state.verifications += len(pending)
                    for candidate in sorted(batch, key=lambda c: c.id):
                        self.settle(candidate, verdicts.get(candidate.id))
                    state.iterations += 1
                    logger.debug("iteration %d: coverage %s", state.iterations, state.coverage)
        finally:
            for session in self.sessions:
                session.close()
        state.elapsed = time.monotonic() - started
        logger.info(
            "partition done: coverage %.4f, %d accepted, %d rejected, %d undecided",
            float(state.coverage), len(state.accepted), len(state.rejected), len(state.undecided),
        )
        return state


def refine(model, spec, space, config=None):
    return _Refinement(model, spec, space, config or PartitionConfig.from_settings()).run()


# export


class ExportFormat(models.TextChoices):
    CSV = "csv", "CSV"
    SVG = "svg", "SVG"


STATUS_ORDER = {RegionStatus.ALL_SAT: 0, RegionStatus.ALL_VIOLATE: 1, RegionStatus.UNKNOWN: 2}
COLOURS = {RegionStatus.ALL_SAT: "#4caf50", RegionStatus.ALL_VIOLATE: "#e53935", RegionStatus.UNKNOWN: "#bdbdbd"}


def _sorted_boxes(state):
    return sorted(
        state.boxes(),
        key=lambda item: (STATUS_ORDER[item[1]], [(lo, hi) for _, lo, hi in item[0].intervals]),
    )


def export_csv(state):
    dimension = state.space.dimension
    if dimension == 2:
        header = ["xmin", "xmax", "ymin", "ymax"]
    else:
        header = [f"x{i}{end}" for i in range(1, dimension + 1) for end in ("min", "max")]
    out = io.StringIO()
    out.write(",".join(header + ["status"]) + "\n")
    for region, status in _sorted_boxes(state):
        cells = [str(value) for _, lower, upper in region.intervals for value in (lower, upper)]
        out.write(",".join(cells + [status]) + "\n")
    return out.getvalue()


def export_svg(state, size=400, margin=40):
    space = state.space
    if space.dimension != 2:
        raise DimensionUnsupported(f"svg export needs two parameters, not {space.dimension}")
    (x_name, x_lo, x_hi), (y_name, y_lo, y_hi) = space.intervals

    def sx(value):
        return margin + float((value - x_lo) / (x_hi - x_lo)) * size if x_hi != x_lo else margin

    def sy(value):
        return margin + size - (float((value - y_lo) / (y_hi - y_lo)) * size if y_hi != y_lo else 0)

    total = size + 2 * margin
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">',
        f'<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="#ffffff" stroke="#000000"/>',
    ]
    for region, status in _sorted_boxes(state):
        (_, a, b), (_, c, d) = region.intervals
        x, y = sx(a), sy(d)
        lines.append(
            f'<rect x="{x:.3f}" y="{y:.3f}" width="{sx(b) - x:.3f}" height="{sy(c) - y:.3f}" '
            f'fill="{COLOURS[status]}" stroke="#000000" stroke-width="0.5"/>'
        )
    lines.append(f'<text x="{margin + size / 2:.1f}" y="{total - 8}" text-anchor="middle">{x_name}</text>')
    lines.append(f'<text x="12" y="{margin + size / 2:.1f}" text-anchor="middle">{y_name}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_partition(state, fmt=ExportFormat.CSV):
    if ExportFormat(fmt) == ExportFormat.SVG:
        return export_svg(state)
    return export_csv(state)
