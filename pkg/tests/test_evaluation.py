import numpy as np
import pytest
from sklearn.metrics import f1_score, precision_score, recall_score

from ontocomplete.dl import Ontology
from ontocomplete.evaluation import (BenchConfig, StageError, compare_scorers, f1, prepare,
                                     run_benchmark, sweep_threshold)
from ontocomplete.hybrid import MockClient
from ontocomplete.negatives import write_worksheet
from ontocomplete.synth import SynthSpec, generate

SMALL = SynthSpec(families=10, seed=3)


@pytest.fixture(scope="module")
def small():
    rules, store = generate(SMALL)
    return Ontology(rules), store


class TestMetrics:
    def test_against_sklearn(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            probs = rng.random(40)
            labels = rng.integers(0, 2, 40)
            s = f1(probs, labels, 0.4)
            pred = (probs >= 0.4).astype(int)
            assert s.precision == pytest.approx(precision_score(labels, pred, zero_division=0))
            assert s.recall == pytest.approx(recall_score(labels, pred, zero_division=0))
            assert s.f1 == pytest.approx(f1_score(labels, pred, zero_division=0))
            assert s.tp + s.fp + s.fn + s.tn == 40

    def test_threshold_is_inclusive(self):
        assert f1([0.5], [1]).tp == 1

    def test_no_positive_predictions(self):
        s = f1([0.1, 0.2], [1, 0])
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            f1([0.1], [1, 0])

    def test_sweep(self):
        assert sweep_threshold([0.3, 0.35, 0.2], [1, 1, 0]) == 0.3
        assert sweep_threshold([0.9, 0.1], [1, 0]) == 0.5  # already optimal at 0.5


class TestConfig:
    def test_from_file(self, tmp_path):
        path = tmp_path / "b.cfg"
        path.write_text("# comment\nseed = 4\nlarge = true  # flag\nscorer = transe\n"
                        "learning_rate = 0.02\n")
        cfg = BenchConfig.from_file(path)
        assert (cfg.seed, cfg.large, cfg.scorer, cfg.learning_rate) == (4, True, "transe", 0.02)
        assert cfg.epochs == 200

    @pytest.mark.parametrize("text,msg", [("seed 4\n", "key = value"), ("colour = red\n", "unknown"),
                                          ("seed = x\n", "bad int"), ("large = maybe\n", "bad bool")])
    def test_errors_name_the_line(self, tmp_path, text, msg):
        path = tmp_path / "b.cfg"
        path.write_text("# header\n" + text)
        with pytest.raises(ValueError, match=f"line 2.*{msg}|{msg}"):
            BenchConfig.from_file(path)

    def test_override_ignores_none(self):
        cfg = BenchConfig(seed=2).override(seed=None, scorer="transe")
        assert cfg.seed == 2 and cfg.scorer == "transe"

    def test_hyper_and_train_config(self):
        cfg = BenchConfig(layers=3, hidden=16, epochs=7, seed=9)
        h = cfg.hyper("bt")
        assert (h.mode, h.layers, h.hidden) == ("bt", 3, 16)
        assert cfg.train_config().epochs == 7 and cfg.train_config().seed == 9


class TestPipeline:
    def test_prepare_disjoint_splits(self, small):
        onto, store = small
        data = prepare(onto, store, BenchConfig(seed=1))
        ids = [{x.rule.id for x in part if x.label == 1} for part in (data.train, data.dev, data.test)]
        assert not (ids[0] & ids[1] or ids[0] & ids[2] or ids[1] & ids[2])
        assert sum(map(len, ids)) == len(onto)
        assert all(x.origin == "hard-negative" for x in data.test if x.label == 0)
        negatives = {x.rule.id for part in (data.train, data.dev, data.test) for x in part
                     if x.label == 0}
        assert not negatives & {r.id for r in onto}
        assert data.kappa == 1.0

    def test_benchmark_systems(self, small):
        onto, store = small
        report = run_benchmark(onto, store, BenchConfig(seed=1, epochs=40))
        assert list(report.systems) == ["GCN(UT)", "GCN(BT)", "GCN(UT+BT)", "GCN(UT+BT)+fallback"]
        n_test = report.systems["GCN(UT)"].scores
        total = n_test.tp + n_test.fp + n_test.fn + n_test.tn
        for res in report.systems.values():
            assert sum(res.provenance.values()) == total
        assert report.systems["GCN(UT+BT)+fallback"].provenance["no-template"] == 0

    def test_no_fallback(self, small):
        onto, store = small
        report = run_benchmark(onto, store, BenchConfig(seed=1, epochs=5, fallback="none"))
        assert "GCN(UT+BT)+fallback" not in report.systems

    def test_custom_client(self, small):
        onto, store = small
        client = MockClient(default="True")
        report = run_benchmark(onto, store, BenchConfig(seed=1, epochs=5), client=client)
        fb = report.systems["GCN(UT+BT)+fallback"].provenance["fallback"]
        assert len(client.calls) == fb

    def test_report_format(self, small, tmp_path):
        onto, store = small
        report = run_benchmark(onto, store, BenchConfig(seed=1, epochs=5))
        report.write(tmp_path)
        tsv = (tmp_path / "report.tsv").read_text().splitlines()
        assert tsv[0].split("\t")[:4] == ["system", "precision", "recall", "f1"]
        assert len(tsv) == 1 + len(report.systems)
        text = (tmp_path / "report.txt").read_text()
        assert "seed = 1" in text and "GCN(UT)" in text

    def test_worksheet_annotations(self, small, tmp_path):
        onto, store = small
        # first pass with truth annotations to learn which candidates exist
        base = prepare(onto, store, BenchConfig(seed=1))
        from ontocomplete.negatives import gen_hard_negative_candidates, split, SplitSpec
        sp = split(onto, SplitSpec(seed=1))
        cands = gen_hard_negative_candidates(sp.test, store, onto.atomic_concepts, 5, 1,
                                             protected=list(onto))
        write_worksheet(cands, tmp_path / "ws.tsv")
        lines = (tmp_path / "ws.tsv").read_text().splitlines()
        (tmp_path / "ws.tsv").write_text("\n".join(
            [lines[0]] + [ln.rstrip("\t") + ("\tneg\tneg" if i else "\tpos\tneg")
                          for i, ln in enumerate(lines[1:])]) + "\n")
        data = prepare(onto, store, BenchConfig(seed=1, annotations="ws.tsv"), base=tmp_path)
        n_neg = sum(1 for x in data.test if x.label == 0)
        assert n_neg == len(cands) - 1
        assert data.kappa < 1.0
        assert len(base.test) >= n_neg

    def test_stage_errors(self, small, tmp_path):
        onto, store = small
        with pytest.raises(StageError, match="load"):
            run_benchmark(tmp_path / "missing.dlr", store, BenchConfig())
        tiny = Ontology(list(onto)[:5])
        with pytest.raises(StageError, match="split"):
            run_benchmark(tiny, store, BenchConfig())

    def test_compare_scorers(self, small):
        onto, store = small
        out = compare_scorers(onto, store, BenchConfig(seed=1, epochs=20))
        assert set(out) == {"distmult", "transe"}
        assert all(0.0 <= s.f1 <= 1.0 for s in out.values())
