import io
import json
import tempfile
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from synthesis.management.commands import check_instance, export_smt, partition, solve_function, verify_region

TOY4_BOX = "2/5<=p<=3/5, 1/5<=q<=1/2"


class CommandTestCase(SimpleTestCase):

    def call(self, module, *args, **options):
        command = module.Command()
        out, err = io.StringIO(), io.StringIO()
        call_command(command, *args, stdout=out, stderr=err, **options)
        self.err = err.getvalue()
        return command, out.getvalue()

    def assertExitCode(self, code, module, *args, **options):
        with self.assertRaises(CommandError) as caught:
            self.call(module, *args, **options)
        self.assertEqual(caught.exception.returncode, code)


class CheckInstanceTests(CommandTestCase):

    def test_violated_point(self):
        command, out = self.call(check_instance, "toy4", spec="P <= 2/5 reach target", point="p=1/2, q=3/10")
        self.assertEqual(command.exit_code, 1)
        self.assertIn("value=13/20", out)
        self.assertIn("satisfied=false", out)
        self.assertIn("exit_code=1", out)

    def test_satisfied_point(self):
        command, out = self.call(check_instance, "toy4", spec="P >= 3/5 reach target", point="p=1/2, q=3/10")
        self.assertEqual(command.exit_code, 0)
        self.assertIn("satisfied=true", out)

    def test_knuth_yao_face(self):
        command, out = self.call(check_instance, "knuth_yao", spec="P > 3/20 reach two", point="p=2/5, q=7/10")
        self.assertEqual(command.exit_code, 1)
        self.assertIn("value=1/10", out)

    def test_ill_defined_point(self):
        self.assertExitCode(2, check_instance, "toy4", spec="P <= 2/5 reach target", point="p=3/2, q=3/10")

    def test_unknown_label(self):
        self.assertExitCode(2, check_instance, "toy4", spec="P <= 2/5 reach nowhere", point="p=1/2, q=3/10")


class SolveFunctionTests(CommandTestCase):

    def test_solution_function(self):
        command, out = self.call(solve_function, "toy4", spec="P <= 2/5 reach target")
        self.assertEqual(command.exit_code, 0)
        self.assertIn("function=p*q - p + 1", out)
        self.assertIn("degree_numerator=2", out)

    def test_vector(self):
        _, out = self.call(solve_function, "toy4", "--vector", spec="P <= 2/5 reach target")
        vector = next(line for line in out.splitlines() if line.startswith("vector="))
        self.assertIn("s2=1", vector)
        self.assertIn("s3=0", vector)

    def test_json(self):
        _, out = self.call(solve_function, "toy4", "--json", spec="P <= 2/5 reach target")
        report = json.loads(out)
        self.assertEqual(report["command"], "solve_function")
        self.assertEqual(report["result"]["function"], "p*q - p + 1")
        self.assertEqual(report["exit_code"], 0)

    def test_pmdp_is_refused(self):
        self.assertExitCode(2, solve_function, "toy_pmdp", spec="P > 4/5 reach target")


class VerifyRegionTests(CommandTestCase):

    def test_accepting_region(self):
        command, out = self.call(
            verify_region, "five_state", spec="P <= 4/5 reach target", region="1/10<=p<=4/5, 2/5<=q<=7/10",
        )
        self.assertEqual(command.exit_code, 0)
        self.assertIn("status=AllSat", out)
        self.assertIn("bound=47/60", out)

    def test_rejecting_region(self):
        command, out = self.call(verify_region, "toy4", spec="P <= 2/5 reach target", region=TOY4_BOX)
        self.assertEqual(command.exit_code, 1)
        self.assertIn("status=AllViolate", out)
        self.assertIn("counterexample=", out)

    def test_region_must_be_graph_preserving(self):
        self.assertExitCode(
            2, verify_region, "five_state", spec="P <= 4/5 reach target", region="0<=p<=1, 0<=q<=1",
        )

    def test_missing_solver(self):
        self.assertExitCode(
            3, verify_region, "toy4", spec="P <= 2/5 reach target", region=TOY4_BOX,
            engine="smt-es", smt_command="paramsynth-no-such-solver",
        )


class PartitionTests(CommandTestCase):

    def test_partition_with_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            target = Path(directory) / "toy4.csv"
            command, out = self.call(
                partition, "toy4", spec="P <= 9/10 reach target", coverage="1/2", grid=3, csv=str(target),
            )
            rows = target.read_text(encoding="utf-8").splitlines()
        self.assertEqual(command.exit_code, 0)
        self.assertIn("coverage=", out)
        self.assertEqual(rows[0], "xmin,xmax,ymin,ymax,status")
        self.assertGreater(len(rows), 1)

    def test_invalid_options(self):
        self.assertExitCode(2, partition, "toy4", spec="P <= 9/10 reach target", grid=1)


class ExportSmtTests(CommandTestCase):

    def test_script_on_stdout(self):
        _, out = self.call(export_smt, "toy4", spec="P <= 2/5 reach target", region=TOY4_BOX)
        self.assertTrue(out.startswith("; toy4"))
        self.assertIn("(check-sat)", out)
        self.assertNotIn("exit_code=", out)
        self.assertIn("model=toy4", self.err)
        self.assertIn("variables=6", self.err)
        self.assertIn("exit_code=0", self.err)

    def test_json_report_on_stderr(self):
        command, out = self.call(export_smt, "toy4", "--json", spec="P <= 2/5 reach target", region=TOY4_BOX)
        self.assertTrue(out.startswith("; toy4"))
        report = json.loads(self.err)
        self.assertEqual(report["command"], "export_smt")
        self.assertEqual(report["result"]["variables"], 6)
        self.assertEqual(command.exit_code, 0)

    def test_script_to_file(self):
        with tempfile.TemporaryDirectory() as directory:
            target = Path(directory) / "toy4.smt2"
            _, out = self.call(export_smt, "toy4", spec="P <= 2/5 reach target", region=TOY4_BOX, output=str(target))
            script = target.read_text(encoding="utf-8")
        self.assertIn("variables=6", out)
        self.assertEqual(self.err, "")
        self.assertIn("(set-logic QF_NRA)", script)
