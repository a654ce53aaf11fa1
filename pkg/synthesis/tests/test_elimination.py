from django.test import SimpleTestCase

from synthesis.elimination import (
    EliminationOrder,
    Engine,
    FlexibleMatrix,
    build_matrix,
    eliminate_state,
    solution_function,
    solution_vector,
    strongly_connected_components,
    synthesise,
)
from synthesis.exceptions import RewardDiverges, UnsupportedSpecification
from synthesis.models import Specification
from synthesis.ratfunc import RationalFunction, evaluate, semantically_equal, stats

from .helpers import F, corpus


class SolutionFunctionTests(SimpleTestCase):

    def setUp(self):
        self.toy4 = corpus("toy4")
        self.five = corpus("five_state")
        self.knuth_yao = corpus("knuth_yao")

    def expected(self, model, text):
        return RationalFunction.parse(text, model.ring)

    def test_toy4_in_canonical_form(self):
        f = solution_function(self.toy4, {2})
        self.assertEqual(str(f), "p*q - p + 1")

    def test_every_order_and_engine_agree(self):
        cases = (
            (self.toy4, {2}, "p*q - p + 1"),
            (self.five, {3}, "(p+q-p*q)/(1+q)"),
            (self.knuth_yao, self.knuth_yao.targets("two"), "p*(1-q)*(1-p)/(1-p*q)"),
        )
        for model, targets, text in cases:
            expected = self.expected(model, text)
            for order in EliminationOrder.values:
                for engine in Engine.values:
                    with self.subTest(model=model.name, order=order, engine=engine):
                        f = solution_function(model, targets, order, engine)
                        self.assertTrue(semantically_equal(f, expected))
        point = {"p": F("4/5"), "q": F("3/5")}
        self.assertEqual(evaluate(solution_function(self.five, {3}), point), F("23/40"))

    def test_explicit_sink_variant(self):
        f = solution_function(self.five, {3}, one_step=False)
        self.assertTrue(semantically_equal(f, self.expected(self.five, "(p+q-p*q)/(1+q)")))

    def test_knuth_yao_face_two(self):
        f = solution_function(self.knuth_yao, self.knuth_yao.targets("two"))
        self.assertEqual(stats(f), (3, 2, 4, 2))
        self.assertTrue(semantically_equal(f, self.expected(self.knuth_yao, "p*(1-q)*(1-p)/(1-p*q)")))
        self.assertEqual(evaluate(f, {"p": F("1/2"), "q": F("1/2")}), F("1/6"))

    def test_knuth_yao_faces_sum_to_one(self):
        total = RationalFunction(self.knuth_yao.ring.zero)
        for face in ("one", "two", "three", "four", "five", "six"):
            total = total + solution_function(self.knuth_yao, self.knuth_yao.targets(face), EliminationOrder.REGEX)
        self.assertTrue(semantically_equal(total, RationalFunction.constant(self.knuth_yao.ring, 1)))

    def test_trivial_initial_states(self):
        self.assertTrue(solution_function(self.toy4, {0}).is_one)
        self.assertEqual(str(solution_function(self.toy4, {1})), "p")
        self.assertTrue(solution_function(self.toy4, frozenset()).is_zero)

    def test_vector(self):
        vector = solution_vector(self.toy4, {2})
        self.assertEqual(len(vector), 4)
        self.assertTrue(semantically_equal(vector[1], self.expected(self.toy4, "q")))
        self.assertTrue(vector[2].is_one)
        self.assertTrue(vector[3].is_zero)

    def test_pmdp_is_refused(self):
        with self.assertRaises(UnsupportedSpecification):
            solution_function(corpus("toy_pmdp"), {2})


class SynthesiseTests(SimpleTestCase):

    def test_expected_reward(self):
        model = corpus("geometric")
        f = synthesise(model, Specification.parse("E <= 2 reach done"))
        self.assertTrue(semantically_equal(f, RationalFunction.parse("1/p", model.ring)))
        for engine in (Engine.STATE_ELIMINATION, Engine.GAUSSIAN):
            with self.subTest(engine=engine):
                g = synthesise(model, Specification.parse("E <= 2 reach done"), engine=engine)
                self.assertEqual(evaluate(g, {"p": F("1/2")}), 2)

    def test_reward_diverges_when_a_reachable_state_misses_the_target(self):
        with self.assertRaises(RewardDiverges):
            synthesise(corpus("retransmission"), Specification.parse("E <= 3 reach delivered"))

    def test_step_bounded(self):
        model = corpus("toy4")
        for steps, text in ((0, "0"), (1, "1-p"), (2, "1-p+p*q"), (3, "1-p+p*q")):
            with self.subTest(steps=steps):
                f = synthesise(model, Specification.parse(f"P >= 1/2 within {steps} reach target"))
                self.assertTrue(semantically_equal(f, RationalFunction.parse(text, model.ring)))


class MatrixTests(SimpleTestCase):

    def test_eliminating_a_state_redirects_its_predecessors(self):
        model = corpus("five_state")
        matrix = build_matrix(model, {0, 1, 2}, {3})
        eliminate_state(matrix, 2)
        self.assertEqual(matrix.states, [0, 1])
        self.assertTrue(semantically_equal(matrix.get(1, 1), RationalFunction.parse("q^2", model.ring)))
        self.assertIsNone(matrix.get(0, 2))

    def test_zero_entries_are_not_stored(self):
        model = corpus("toy4")
        matrix = FlexibleMatrix(model.ring, [0, 1])
        matrix.set(0, 1, RationalFunction(model.ring.zero))
        self.assertEqual(matrix.transition_count(), 0)

    def test_components_come_out_sinks_first(self):
        successors = {0: [1], 1: [2], 2: [1, 3], 3: []}
        components = strongly_connected_components([0, 1, 2, 3], successors.__getitem__)
        self.assertEqual([sorted(c) for c in components], [[3], [1, 2], [0]])
