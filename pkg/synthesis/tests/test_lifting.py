from django.test import SimpleTestCase

from synthesis.exceptions import (
    EngineUnavailable,
    NotLocallyMonotone,
    RegionNotGraphPreserving,
    UnsupportedSpecification,
)
from synthesis.lifting import Hypothesis, NondeterminismRelation, build_substitution, check_region
from synthesis.models import Specification, check_point
from synthesis.regions import Region, RegionStatus
from synthesis.verification import VerificationEngine, holds_at, verify_region

from .helpers import F, corpus, pmc


def region(model, text):
    return Region.parse(text, model.parameters)


class PmcLiftingTests(SimpleTestCase):

    def test_bound_holds_on_the_whole_region(self):
        model = corpus("five_state")
        verdict = check_region(model, region(model, "1/10<=p<=4/5, 2/5<=q<=7/10"), Specification.parse("P <= 4/5 reach target"))
        self.assertEqual(verdict.status, RegionStatus.ALL_SAT)
        self.assertEqual(verdict.upper, F("47/60"))
        self.assertEqual(verdict.bound, F("47/60"))
        self.assertIsNone(verdict.counterexample)

    def test_toy4_accepting_and_rejecting(self):
        model = corpus("toy4")
        box = region(model, "2/5<=p<=3/5, 1/5<=q<=1/2")
        accepted = check_region(model, box, Specification.parse("P <= 9/10 reach target"))
        self.assertEqual(accepted.status, RegionStatus.ALL_SAT)
        self.assertEqual(accepted.upper, F("4/5"))
        rejected = check_region(model, box, Specification.parse("P <= 2/5 reach target"))
        self.assertEqual(rejected.status, RegionStatus.ALL_VIOLATE)
        self.assertEqual(rejected.lower, F("13/25"))
        self.assertTrue(box.contains(rejected.counterexample))

    def test_toy4_far_corner_accepts(self):
        model = corpus("toy4")
        verdict = check_region(model, region(model, "4/5<=p<=9/10, 1/10<=q<=1/5"), Specification.parse("P <= 2/5 reach target"))
        self.assertEqual(verdict.status, RegionStatus.ALL_SAT)
        self.assertEqual(verdict.upper, F("9/25"))

    def test_reject_hypothesis_tries_the_violation_first(self):
        model = corpus("toy4")
        box = region(model, "2/5<=p<=3/5, 1/5<=q<=1/2")
        verdict = check_region(model, box, Specification.parse("P <= 2/5 reach target"), hypothesis=Hypothesis.REJECT)
        self.assertEqual(verdict.status, RegionStatus.ALL_VIOLATE)
        self.assertEqual(verdict.diagnostics["games_solved"], 1)

    def test_counterexample_comes_from_the_refuted_bound(self):
        model = corpus("toy4")
        box = region(model, "2/5<=p<=3/5, 1/5<=q<=1/2")
        spec = Specification.parse("P <= 3/5 reach target")
        verdict = check_region(model, box, spec, hypothesis=Hypothesis.REJECT)
        self.assertEqual(verdict.status, RegionStatus.UNKNOWN)
        self.assertEqual((verdict.lower, verdict.upper), (F("13/25"), F("4/5")))
        self.assertTrue(box.contains(verdict.counterexample))
        self.assertFalse(spec.holds(check_point(model, spec, verdict.counterexample)))

    def test_bounds_are_attained_at_vertices(self):
        # each parameter occurs at exactly one state
        model = corpus("toy4")
        box = region(model, "1/5<=p<=3/5, 1/4<=q<=3/4")
        spec = Specification.parse("P <= 0 reach target")
        verdict = check_region(model, box, spec)
        values = [check_point(model, spec, vertex) for vertex in box.vertices()]
        self.assertEqual(verdict.upper, max(values))
        self.assertEqual(verdict.lower, min(values))

    def test_expected_reward_bounds(self):
        model = corpus("geometric")
        box = region(model, "1/2<=p<=3/4")
        at_most = check_region(model, box, Specification.parse("E <= 2 reach done"))
        self.assertEqual(at_most.status, RegionStatus.ALL_SAT)
        self.assertEqual(at_most.upper, 2)
        below = check_region(model, box, Specification.parse("E < 2 reach done"))
        self.assertEqual(below.status, RegionStatus.UNKNOWN)
        self.assertEqual((below.lower, below.upper), (F("4/3"), 2))
        self.assertEqual(below.counterexample, {"p": F("1/2")})

    def test_region_must_be_graph_preserving(self):
        model = corpus("five_state")
        with self.assertRaises(RegionNotGraphPreserving):
            check_region(model, Region.unit(model.parameters), Specification.parse("P <= 4/5 reach target"))

    def test_step_bounds_are_not_lifted(self):
        model = corpus("toy4")
        with self.assertRaises(UnsupportedSpecification):
            check_region(model, region(model, "2/5<=p<=3/5, 1/5<=q<=1/2"), Specification.parse("P <= 1/2 within 2 reach target"))

    def test_non_monotone_rows_are_refused(self):
        model = pmc(
            "states 2 init 0\nlabel target 1\ntransition 0 1 p*p\ntransition 0 0 1-p*p\ntransition 1 1 1",
            parameters="p",
        )
        with self.assertRaises(NotLocallyMonotone):
            check_region(model, region(model, "1/4<=p<=3/4"), Specification.parse("P >= 1/2 reach target"))

    def test_substitution_deduplicates_vertices(self):
        model = corpus("toy4")
        substitution = build_substitution(model, region(model, "2/5<=p<=3/5, 1/5<=q<=1/2"))
        self.assertEqual(substitution.action_count(0), 2)
        self.assertEqual(substitution.action_count(2), 1)
        self.assertEqual(substitution.vertices[0], [{"p": F("2/5")}, {"p": F("3/5")}])


class PmdpLiftingTests(SimpleTestCase):

    def setUp(self):
        self.model = corpus("toy_pmdp")
        self.box = region(self.model, "2/5<=p<=1/2, 2/5<=q<=1/2")
        self.spec = Specification.parse("P > 4/5 reach target")

    def test_angelic_acceptance(self):
        verdict = check_region(self.model, self.box, self.spec, relation=NondeterminismRelation.ANGELIC)
        self.assertEqual(verdict.status, RegionStatus.ALL_SAT)

    def test_demonic_rejection_with_counterexample(self):
        verdict = check_region(self.model, self.box, self.spec, relation=NondeterminismRelation.DEMONIC)
        self.assertEqual(verdict.status, RegionStatus.ALL_VIOLATE)
        self.assertEqual(verdict.counterexample, {"p": F("1/2"), "q": F("2/5")})
        self.assertEqual(verdict.lower, F("7/10"))
        satisfied, value = holds_at(self.model, self.spec, verdict.counterexample)
        self.assertFalse(satisfied)
        self.assertEqual(value, F("7/10"))

    def test_pair_states_belong_to_the_parameter_player(self):
        substitution = build_substitution(self.model, self.box)
        game = substitution.game
        self.assertEqual(game.owners[:4], (0, 0, 0, 0))
        self.assertTrue(all(owner == 1 for owner in game.owners[4:]))
        self.assertEqual(substitution.action_count(0), 2)


class VerifyRegionTests(SimpleTestCase):

    def test_lifting_is_the_default_engine(self):
        model = corpus("toy4")
        verdict = verify_region(model, region(model, "2/5<=p<=3/5, 1/5<=q<=1/2"), Specification.parse("P <= 9/10 reach target"))
        self.assertEqual(verdict.status, RegionStatus.ALL_SAT)

    def test_strategy_engines_need_a_pmdp(self):
        model = corpus("toy4")
        with self.assertRaises(UnsupportedSpecification):
            verify_region(
                model, region(model, "2/5<=p<=3/5, 1/5<=q<=1/2"), Specification.parse("P <= 9/10 reach target"),
                VerificationEngine.SMT_DEMONIC,
            )

    def test_missing_solver(self):
        model = corpus("toy4")
        with self.assertRaises(EngineUnavailable):
            verify_region(
                model, region(model, "2/5<=p<=3/5, 1/5<=q<=1/2"), Specification.parse("P <= 9/10 reach target"),
                VerificationEngine.SMT_ES, command="paramsynth-no-such-solver",
            )
