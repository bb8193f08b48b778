import numpy as np
import pytest

from conftest import make_planted_splits
from coevonet import neural
from coevonet.genome import SearchSpaceConfig, bits_to_string, encode, Architecture
from coevonet.neural import ActivationKind, ScgConfig, Topology
from coevonet.objectives import (
    CoevolutionProblem, EvalConfig, EvalRecord, ObjectiveVector, ScalarizedConfig,
    TopologyOnlyProblem, cycle_seed, evaluate, penalty, scalarized_value,
)

TANH = ActivationKind.TANH
SPACE = SearchSpaceConfig(n_features=8)  # matches the tiny planted splits
FAST = ScgConfig(max_iter=40)


@pytest.fixture(scope="module")
def splits():
    return make_planted_splits(n_features=8, seed=4)


def genome_for(features, layers=()):
    arch = Architecture(tuple(features), Topology(tuple(layers)))
    return bits_to_string(encode(arch, SPACE))


class TestObjectiveVector:
    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            ObjectiveVector(1.2, 0.5, 0.5)
        with pytest.raises(ValueError):
            ObjectiveVector(0.5, 0.5, float("nan"))

    def test_tuple_view(self):
        assert ObjectiveVector(0.1, 0.2, 0.3).as_tuple() == (0.1, 0.2, 0.3)


class TestEvaluate:
    def test_deterministic_across_calls(self, splits):
        bits = genome_for([0, 1], [(3, TANH)])
        cfg = EvalConfig(cycles=1, scg=FAST, master_seed=5)
        v1 = evaluate(bits, splits, cfg, SPACE)
        v2 = evaluate(bits, splits, cfg, SPACE)
        assert v1 == v2

    def test_components_within_bounds(self, splits):
        cfg = EvalConfig(cycles=2, scg=FAST, master_seed=5)
        problem = CoevolutionProblem(splits, SPACE, cfg)
        rng = np.random.default_rng(0)
        from coevonet.genome import random_genome
        for _ in range(5):
            rec = problem.evaluate(random_genome(SPACE, rng))
            for v in rec.objectives.as_tuple():
                assert 0.0 <= v <= 1.0

    def test_cycle_mean_property(self, splits):
        bits = genome_for([0, 2], [(4, TANH)])
        cfg = EvalConfig(cycles=3, scg=FAST, master_seed=9)
        rec = CoevolutionProblem(splits, SPACE, cfg).evaluate(bits)
        # independently seeded single-cycle trainings reproduce the mean
        singles = []
        for k in (1, 2, 3):
            seed = cycle_seed(9, bits, k)
            x = splits.d_train.features[:, [0, 2]]
            model = neural.scg_train(Topology(((4, TANH),)), x, splits.d_train.labels,
                                     FAST, seed)
            pred = neural.predict(model, splits.d_test.features[:, [0, 2]])
            singles.append(neural.balanced_error(neural.confusion(pred, splits.d_test.labels)))
        assert rec.cycle_errors_test == tuple(singles)
        assert rec.objectives.e_cv == pytest.approx(np.mean(singles))

    def test_mother_complexity_is_one(self, splits):
        bits = genome_for(range(8), [(127, TANH), (127, TANH)])
        cfg = EvalConfig(cycles=1, scg=ScgConfig(max_iter=5), master_seed=1)
        assert evaluate(bits, splits, cfg, SPACE).c == 1.0

    def test_direct_network_learns_separable_problem(self, splits):
        # the planted label is sign(feature 0): no hidden layer needed
        bits = genome_for([0])
        cfg = EvalConfig(cycles=1, scg=ScgConfig(max_iter=100), master_seed=3)
        vec = evaluate(bits, splits, cfg, SPACE)
        assert vec.e_cv < 0.5
        assert vec.e_pr < 0.5

    def test_cache_and_fe_accounting(self, splits):
        cfg = EvalConfig(cycles=1, scg=FAST, master_seed=2)
        problem = CoevolutionProblem(splits, SPACE, cfg)
        bits = genome_for([1, 3], [(2, TANH)])
        problem.evaluate(bits)
        assert (problem.fe_count, problem.cache_hits) == (1, 0)
        problem.evaluate(bits)
        assert (problem.fe_count, problem.cache_hits) == (1, 1)

    def test_aborted_cycle_scores_worst_case(self, splits, monkeypatch):
        def fake_train(topology, x, y, cfg, seed, feature_indices=None):
            return neural.TrainedModel(topology, (), [], float("nan"), 0, aborted=True)

        monkeypatch.setattr(neural, "scg_train", fake_train)
        cfg = EvalConfig(cycles=2, scg=FAST, master_seed=2)
        rec = CoevolutionProblem(splits, SPACE, cfg).evaluate(genome_for([0]))
        assert rec.objectives.e_cv == 1.0
        assert rec.objectives.e_pr == 1.0
        assert rec.test_mcc == -1.0

    def test_sealed_holdout_never_read(self, splits):
        # evaluation touches pr/train/test only; a sealed hold split is fine
        cfg = EvalConfig(cycles=1, scg=FAST, master_seed=1)
        assert splits.d_hold.sealed
        evaluate(genome_for([0]), splits, cfg, SPACE)

    def test_trace_log_written(self, splits, tmp_path):
        trace = tmp_path / "trace.jsonl"
        cfg = EvalConfig(cycles=1, scg=FAST, master_seed=1)
        problem = CoevolutionProblem(splits, SPACE, cfg, trace_path=trace)
        problem.evaluate(genome_for([0, 1]))
        import json
        entry = json.loads(trace.read_text().splitlines()[0])
        assert set(entry) == {"genome", "objectives", "cycle_errors_test",
                              "cycle_errors_pr", "wall_time"}


class TestTopologyOnly:
    def test_sixteen_bit_genomes(self, splits):
        cfg = EvalConfig(cycles=1, scg=FAST, master_seed=1)
        problem = TopologyOnlyProblem(splits, SPACE, cfg, fixed_feature_count=8)
        assert problem.n_bits == 16
        rec = problem.evaluate("0010010" + "1" + "0000000" + "0")
        # feature term frozen at d/n_f
        assert rec.objectives.c == pytest.approx((8 / 8 + 1 / 2 + 18 / 127) / 3)


class TestScalarized:
    def make_record(self, e=0.3, c=0.2, test_mcc=0.3, pr_mcc=0.3, pr_err=0.3):
        return EvalRecord(
            objectives=ObjectiveVector(e, c, e),
            cycle_errors_test=(e,), cycle_errors_pr=(e,),
            test_error_rate=e, pr_error_rate=pr_err,
            test_mcc=test_mcc, pr_mcc=pr_mcc,
        )

    def test_no_penalty_when_constraints_hold(self):
        cfg = ScalarizedConfig(theta_e=0.5, theta_c=0.5)
        rec = self.make_record()
        assert penalty(rec, cfg) == 0.0
        assert scalarized_value(rec, cfg) == pytest.approx(0.5 * 0.3 + 0.5 * 0.2)

    def test_mcc_shortfall_penalty(self):
        cfg = ScalarizedConfig(eps1=0.2)
        rec = self.make_record(test_mcc=0.1)
        assert penalty(rec, cfg) == pytest.approx(0.5)

    def test_pr_error_threshold_penalty(self):
        cfg = ScalarizedConfig(eps3=0.25)
        rec = self.make_record(pr_err=0.45)
        assert penalty(rec, cfg) == pytest.approx(5 * 0.2)

    def test_penalty_free_always_preferred_at_equal_weighted_sum(self):
        cfg = ScalarizedConfig()
        clean = self.make_record()
        dirty = self.make_record(test_mcc=-0.2)
        assert scalarized_value(clean, cfg) < scalarized_value(dirty, cfg)

    def test_preference_scenarios_exposed(self):
        from coevonet.baselines import SCALARIZED_SCENARIOS
        assert SCALARIZED_SCENARIOS["efficacy"].theta_e == 0.75
        assert SCALARIZED_SCENARIOS["efficacy"].theta_c == 0.25
        assert SCALARIZED_SCENARIOS["balanced"].theta_e == 0.50
        assert SCALARIZED_SCENARIOS["complexity"].theta_c == 0.75

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            ScalarizedConfig(eps1=2.0)
        with pytest.raises(ValueError):
            ScalarizedConfig(theta_e=-0.1)
