from django.test import SimpleTestCase, override_settings

from synthesis.exceptions import DimensionUnsupported, NoMixedSamples
from synthesis.lifting import Hypothesis
from synthesis.models import Specification, check_point
from synthesis.partition import (
    PartitionConfig,
    PartitionState,
    Sample,
    Splitter,
    export_csv,
    export_svg,
    generate_candidates,
    grid_points,
    hypothesis_for,
    interpolate_samples,
    neighbourhood_consistent,
    refine,
    sample_grid,
)
from synthesis.regions import Region, RegionStatus
from synthesis.serializers import PartitionConfigSerializer

from .helpers import F, corpus


def sample(p, satisfied, q=None):
    point = {"p": F(p)} if q is None else {"p": F(p), "q": F(q)}
    return Sample(point, satisfied, None)


class SamplingTests(SimpleTestCase):

    def test_grid_points_are_cell_centres(self):
        points = grid_points(Region.unit(("p", "q")), 2)
        self.assertEqual(len(points), 4)
        self.assertEqual(points[0], {"p": F("1/4"), "q": F("1/4")})
        self.assertEqual(points[-1], {"p": F("3/4"), "q": F("3/4")})

    def test_sample_grid_records_values(self):
        model = corpus("toy4")
        samples = sample_grid(model, Specification.parse("P <= 9/10 reach target"), Region.unit(("p", "q")), 2)
        low = samples[0]
        self.assertEqual(low.value, check_point(model, Specification.parse("P <= 9/10 reach target"), low.point))
        self.assertTrue(low.satisfied)

    def test_interpolation_needs_both_verdicts(self):
        with self.assertRaises(NoMixedSamples):
            interpolate_samples([sample("1/4", True), sample("3/4", True)], Region.unit(("p",)))

    def test_interpolation_deduplicates_midpoints(self):
        points = interpolate_samples([sample("1/4", True), sample("3/4", False)], Region.unit(("p",)))
        self.assertEqual(points, [{"p": F("1/2")}])


class CandidateTests(SimpleTestCase):

    def test_hypothesis_from_own_samples(self):
        box = Region.unit(("p",))
        self.assertEqual(hypothesis_for(box, [sample("1/2", False)]), Hypothesis.REJECT)
        self.assertEqual(hypothesis_for(box, [sample("1/2", True)]), Hypothesis.ACCEPT)

    def test_hypothesis_from_the_nearest_sample(self):
        space = Region.unit(("p",))
        box = Region.from_bounds({"p": (0, F("1/4"))})
        pool = [sample("1/8", False), sample("7/8", True)]
        self.assertEqual(hypothesis_for(box, [], pool, (), space), Hypothesis.REJECT)
        self.assertEqual(hypothesis_for(box, [], (), (), space), Hypothesis.ACCEPT)

    def test_quads_split_until_pure(self):
        space = Region.unit(("p", "q"))
        samples = [sample("1/4", True, "1/4"), sample("3/4", False, "3/4")]
        candidates = generate_candidates(space, samples, Splitter.QUADS)
        self.assertEqual(sum(box.size for box, _, _ in candidates), 1)
        self.assertEqual(len(candidates), 2)
        for box, inside, hypothesis in candidates:
            self.assertEqual(len(inside), 1)
            expected = Hypothesis.ACCEPT if inside[0].satisfied else Hypothesis.REJECT
            self.assertEqual(hypothesis, expected)

    def test_growing_rectangles_tile_the_region(self):
        space = Region.unit(("p", "q"))
        samples = [sample("1/4", True, "1/4"), sample("3/4", False, "3/4")]
        candidates = generate_candidates(space, samples, Splitter.GROWING_RECTANGLES)
        self.assertEqual(sum(box.size for box, _, _ in candidates), 1)
        self.assertGreater(len(candidates), 1)

    def test_neighbourhood_consistency(self):
        box = Region.from_bounds({"p": (0, F("1/2"))})
        rejected = Region.from_bounds({"p": (F("1/2"), 1)})
        decided = [(rejected, RegionStatus.ALL_VIOLATE)]
        self.assertFalse(neighbourhood_consistent(box, Hypothesis.ACCEPT, decided))
        self.assertTrue(neighbourhood_consistent(box, Hypothesis.REJECT, decided))


class RefinementTests(SimpleTestCase):

    def setUp(self):
        self.model = corpus("toy4")
        self.spec = Specification.parse("P <= 9/10 reach target")
        self.space = Region.unit(self.model.parameters).shrink_open("1/100")

    def test_decided_boxes_are_sound(self):
        state = refine(self.model, self.spec, self.space, PartitionConfig(coverage=F("1/2"), grid=4))
        self.assertGreaterEqual(state.coverage, F("1/2"))
        self.assertTrue(state.accepted or state.rejected)
        for box in state.accepted:
            for vertex in box.vertices():
                self.assertTrue(self.spec.holds(check_point(self.model, self.spec, vertex)))
        for box in state.rejected:
            for vertex in box.vertices():
                self.assertFalse(self.spec.holds(check_point(self.model, self.spec, vertex)))

    def test_boxes_tile_the_space(self):
        state = refine(self.model, self.spec, self.space, PartitionConfig(coverage=F("3/5"), grid=3))
        self.assertEqual(sum(box.size for box, _ in state.boxes()), self.space.size)

    def test_parallel_workers(self):
        config = PartitionConfig(coverage=F("1/2"), grid=4, workers=3)
        state = refine(self.model, self.spec, self.space, config)
        self.assertGreaterEqual(state.coverage, F("1/2"))

    def test_iteration_cap(self):
        state = refine(self.model, self.spec, self.space, PartitionConfig(coverage=1, grid=4, max_iterations=2))
        self.assertEqual(state.iterations, 2)
        self.assertLess(state.coverage, 1)

    def test_exhausted_budget_is_reported(self):
        state = refine(self.model, self.spec, self.space, PartitionConfig(coverage=1, grid=2, budget_seconds=0))
        self.assertTrue(state.budget_exhausted)
        self.assertEqual(state.iterations, 0)


class ConfigTests(SimpleTestCase):

    def test_defaults_come_from_settings(self):
        config = PartitionConfig.from_settings(workers=3, grid=None)
        self.assertEqual(config.workers, 3)
        self.assertEqual(config.grid, 4)
        self.assertEqual(config.coverage, F("19/20"))

    @override_settings(PARAMSYNTH={"PARTITION": {"GRID": 6, "COVERAGE": "3/4"}})
    def test_settings_override(self):
        config = PartitionConfig.from_settings()
        self.assertEqual(config.grid, 6)
        self.assertEqual(config.coverage, F("3/4"))
        self.assertEqual(config.splitter, Splitter.QUADS)

    def test_serializer_validation(self):
        serializer = PartitionConfigSerializer(data={"coverage": "0.9", "grid": 3, "splitter": "growing"})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.coverage, F("9/10"))
        self.assertEqual(config.splitter, Splitter.GROWING_RECTANGLES)
        for data in ({"coverage": "3/2"}, {"coverage": "many"}, {"grid": 1}, {"engine": "smt-demonic"}):
            with self.subTest(data=data):
                self.assertFalse(PartitionConfigSerializer(data=data).is_valid())


class ExportTests(SimpleTestCase):

    def setUp(self):
        space = Region.unit(("p", "q"))
        left, right = space.split(dimension="p")
        self.state = PartitionState(space, accepted=[right], rejected=[left])

    def test_csv(self):
        self.assertEqual(
            export_csv(self.state),
            "xmin,xmax,ymin,ymax,status\n1/2,1,0,1,AllSat\n0,1/2,0,1,AllViolate\n",
        )

    def test_csv_header_beyond_two_dimensions(self):
        state = PartitionState(Region.unit(("a", "b", "c")), undecided=[Region.unit(("a", "b", "c"))])
        header, row = export_csv(state).splitlines()
        self.assertEqual(header, "x1min,x1max,x2min,x2max,x3min,x3max,status")
        self.assertEqual(row, "0,1,0,1,0,1,Unknown")

    def test_svg(self):
        svg = export_svg(self.state)
        self.assertTrue(svg.startswith("<svg"))
        self.assertEqual(svg.count("<rect"), 3)
        self.assertIn('fill="#4caf50"', svg)
        self.assertEqual(svg, export_svg(self.state))

    def test_svg_needs_two_parameters(self):
        with self.assertRaises(DimensionUnsupported):
            export_svg(PartitionState(Region.unit(("p",))))
