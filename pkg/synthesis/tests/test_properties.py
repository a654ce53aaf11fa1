"""Randomised agreement checks between the exact, symbolic and lifted engines."""
import random
from fractions import Fraction

from django.test import SimpleTestCase

from synthesis.elimination import EliminationOrder, solution_function, synthesise
from synthesis.lifting import check_region
from synthesis.models import Specification, check_point, is_graph_preserving_point
from synthesis.partition import PartitionConfig, export_csv, refine
from synthesis.ratfunc import RationalFunction, evaluate, make_ring
from synthesis.regions import Region
from synthesis.smt import Comparison, _compare, transform_rf_constraint

from .helpers import corpus

CORPUS_PMCS = (
    ("toy4", "target"),
    ("five_state", "target"),
    ("knuth_yao", "two"),
    ("geometric", "done"),
    ("retransmission", "delivered"),
)
ORACLE_ORDERS = (EliminationOrder.FORWARD, EliminationOrder.DPEN)


def random_point(rng, region):
    return {
        name: lower + (upper - lower) * Fraction(rng.randint(0, 40), 40)
        for name, lower, upper in region.intervals
    }


def random_box(rng, region):
    bounds = {}
    for name, lower, upper in region.intervals:
        ends = sorted(lower + (upper - lower) * Fraction(rng.randint(0, 40), 40) for _ in range(2))
        bounds[name] = tuple(ends)
    return Region.from_bounds(bounds)


class OracleAgreementTests(SimpleTestCase):

    def test_solution_functions_match_the_exact_checker(self):
        rng = random.Random(7)
        for name, label in CORPUS_PMCS:
            model = corpus(name)
            spec = Specification.parse(f"P <= 1/2 reach {label}")
            space = Region.unit(model.parameters).shrink_open("1/100")
            functions = {order: solution_function(model, model.targets(label), order) for order in ORACLE_ORDERS}
            for _ in range(20):
                point = random_point(rng, space)
                self.assertTrue(is_graph_preserving_point(model, point))
                exact = check_point(model, spec, point)
                for order, f in functions.items():
                    with self.subTest(model=name, order=order, point=point):
                        self.assertEqual(evaluate(f, point), exact)

    def test_expected_reward_matches_the_exact_checker(self):
        rng = random.Random(11)
        model = corpus("geometric")
        spec = Specification.parse("E <= 2 reach done")
        f = synthesise(model, spec)
        for _ in range(5):
            point = {"p": Fraction(rng.randint(1, 99), 100)}
            self.assertEqual(evaluate(f, point), check_point(model, spec, point))


class LiftingPropertyTests(SimpleTestCase):

    def setUp(self):
        self.model = corpus("five_state")
        self.region = Region.parse("1/10<=p<=4/5, 2/5<=q<=7/10", self.model.parameters)
        # fails on every non-degenerate box, so both bounds get computed
        self.spec = Specification.parse("P <= 0 reach target")

    def bounds(self, region):
        verdict = check_region(self.model, region, self.spec)
        return verdict.lower, verdict.upper

    def test_bounds_sandwich_the_exact_values(self):
        rng = random.Random(3)
        for name, label in CORPUS_PMCS:
            model = corpus(name)
            # fails on every non-degenerate box, so both bounds get computed
            spec = Specification.parse(f"P <= 0 reach {label}")
            space = Region.unit(model.parameters).shrink_open("1/100")
            for _ in range(10):
                box = random_box(rng, space)
                verdict = check_region(model, box, spec)
                for _ in range(30):
                    point = random_point(rng, box)
                    value = check_point(model, spec, point)
                    with self.subTest(model=name, box=str(box), point=point):
                        self.assertLessEqual(verdict.lower, value)
                        self.assertLessEqual(value, verdict.upper)

    def test_refinement_tightens_the_bounds(self):
        lower, upper = self.bounds(self.region)
        for child in self.region.split():
            child_lower, child_upper = self.bounds(child)
            self.assertLessEqual(lower, child_lower)
            self.assertLessEqual(child_upper, upper)

    def test_degenerate_regions_are_exact(self):
        point = {"p": Fraction(1, 2), "q": Fraction(1, 2)}
        box = Region.from_bounds({name: (value, value) for name, value in point.items()})
        exact = check_point(self.model, self.spec, point)
        self.assertEqual(self.bounds(box), (exact, exact))


class TransformPropertyTests(SimpleTestCase):

    def test_rational_constraints_keep_their_solutions(self):
        rng = random.Random(5)
        ring = make_ring(("p", "q"))
        functions = [RationalFunction.parse(text, ring) for text in ("p/(q+1)", "(p-q)/(p*q-1/2)", "1-p+p*q")]
        for f in functions:
            for relation in Comparison.values:
                threshold = Fraction(rng.randint(-4, 4), 4)
                formula = transform_rf_constraint(f, relation, threshold)
                for _ in range(10):
                    point = {"p": Fraction(rng.randint(-8, 8), 4), "q": Fraction(rng.randint(-8, 8), 4)}
                    value = evaluate(f, point)
                    if value is None:
                        continue
                    with self.subTest(f=str(f), relation=relation, threshold=threshold, point=point):
                        self.assertEqual(formula.holds(point), _compare(value - threshold, relation))


class PartitionPropertyTests(SimpleTestCase):

    def test_knuth_yao_partition_is_sound(self):
        model = corpus("knuth_yao")
        spec = Specification.parse("P > 3/20 reach two")
        space = Region.unit(model.parameters).shrink_open("1/100")
        state = refine(model, spec, space, PartitionConfig(coverage=Fraction(19, 20), grid=4))
        self.assertGreaterEqual(state.coverage, Fraction(19, 20))
        rng = random.Random(13)
        for _ in range(400):
            point = random_point(rng, space)
            satisfied = spec.holds(check_point(model, spec, point))
            if any(box.contains(point) for box in state.accepted):
                self.assertTrue(satisfied, point)
            if any(box.contains(point) for box in state.rejected):
                self.assertFalse(satisfied, point)

    def test_partition_is_deterministic(self):
        model = corpus("toy4")
        spec = Specification.parse("P <= 9/10 reach target")
        space = Region.unit(model.parameters).shrink_open("1/100")
        config = PartitionConfig(coverage=Fraction(1, 2), grid=3, workers=2)
        first = export_csv(refine(model, spec, space, config))
        self.assertEqual(first, export_csv(refine(model, spec, space, config)))
