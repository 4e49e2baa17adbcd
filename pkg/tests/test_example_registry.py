import pytest

from almlab.example_registry import ExampleOutcome, ExampleRegistry


@pytest.fixture
def registry(plan):
    """Example registry with the shared sampling plan"""
    return ExampleRegistry(plan)


class TestExampleRegistry:
    """Test example registry lookup and validation"""

    def test_get_example_valid(self, registry):
        """Test getting a known example"""
        handlers = registry.get_example("ex2-k3")
        assert "validate" in handlers
        assert "execute" in handlers
        assert "report" in handlers

    def test_get_example_invalid(self, registry):
        """Test unknown names list the available examples"""
        with pytest.raises(ValueError, match="Unknown example: ex9. Available examples: ex1-k1"):
            registry.get_example("ex9")

    def test_names(self, registry):
        """Test every example is registered"""
        assert registry.names == ["ex1-k1", "ex1-k2", "ex2-k3", "ex2-k4", "alm-toy", "eigen"]

    def test_validate_offset(self, registry):
        """Test the offset examples need r > 0 and alpha > 2r"""
        assert registry._validate_offset({"alpha": 1.0, "r": 0.25}) == (True, None)
        valid, details = registry._validate_offset({"alpha": 0.4, "r": 0.25})
        assert valid is False
        assert details["field"] == "alpha"
        valid, details = registry._validate_offset({"r": -1.0})
        assert details["field"] == "r"

    def test_validate_beta_and_n(self, registry):
        """Test beta > 0 and n >= 3"""
        assert registry._validate_beta({"beta": 0.0})[0] is False
        assert registry._validate_eigen({"n": 2})[1]["field"] == "n"

    def test_run_rejects_invalid_params(self, registry):
        """Test run raises on validation failure"""
        with pytest.raises(ValueError, match="beta must be positive"):
            registry.run("alm-toy", {"beta": -1.0})


class TestExamples:
    """Test every built-in example reproduces its known results"""

    @pytest.mark.parametrize("name", ["ex1-k1", "ex1-k2", "ex2-k3", "ex2-k4", "alm-toy", "eigen"])
    def test_defaults_pass(self, registry, name):
        """Test default parameters"""
        outcome = registry.run(name, {})
        failed = [label for label, ok in outcome.checks.items() if not ok]
        assert outcome.passed, failed

    @pytest.mark.parametrize("name, params", [
        ("ex1-k1", {"alpha": 0.0}),
        ("ex1-k1", {"alpha": -1.0}),
        ("ex1-k2", {"alpha": 0.0}),
        ("ex1-k2", {"alpha": -1.0}),
        ("ex2-k3", {"alpha": 2.0, "r": 0.5}),
        ("ex2-k4", {"alpha": 2.0, "r": 0.5}),
        ("alm-toy", {"beta": 10.0}),
        ("eigen", {"n": 31}),
    ])
    def test_parameter_variants(self, registry, name, params):
        """Test other parameter choices"""
        outcome = registry.run(name, params)
        failed = [label for label, ok in outcome.checks.items() if not ok]
        assert outcome.passed, failed

    def test_wedge_constructs_multipliers(self, registry):
        """Test constructed multipliers have first entry alpha"""
        outcome = registry.run("ex1-k2", {"alpha": 1.0})
        assert outcome.data["constructed"]
        assert all(abs(lam[0] - 1.0) <= 1e-10 and lam[1] <= 0.0 for lam in outcome.data["constructed"])

    def test_toy_trace_length(self, registry):
        """Test the toy run keeps the start and thirty updates"""
        outcome = registry.run("alm-toy", {})
        assert len(outcome.data["trace"]) == 31


class TestReport:
    """Test report rendering"""

    def test_report_lines(self):
        """Test lines, check marks and verdict"""
        outcome = ExampleOutcome("demo")
        outcome.say("hello")
        outcome.check("good", True)
        outcome.check("bad", False)
        text = ExampleRegistry._report(outcome)
        assert text.splitlines() == ["example demo", "  hello", "  [ok] good", "  [FAILED] bad", "  verdict: fail"]
