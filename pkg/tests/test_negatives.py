import numpy as np
import pytest

from ontocomplete.dl import (Atomic, Entailment, Ontology, Rule, atoms, occurrences,
                             parse_rule, replace_at)
from ontocomplete.negatives import (AnnotationError, LabeledRule, SplitSpec, candidate_stream,
                                    cohen_kappa, finalize_annotations,
                                    gen_hard_negative_candidates, gen_training_negatives,
                                    read_labeled, read_worksheet, split, write_labeled,
                                    write_worksheet)
from ontocomplete.embeddings import resolve
from ontocomplete.verbalize import verbalize_rule

from oracles import cosine_top_k, saturate


def numbered(n):
    return [parse_rule(f"C{i:03d} SubClassOf D{i % 7}") for i in range(n)]


class TestSplit:
    @pytest.mark.parametrize("n,test,dev", [(100, 20, 8), (200, 40, 16), (20, 4, 2)])
    def test_default_fractions(self, n, test, dev):
        s = split(numbered(n), SplitSpec(seed=1))
        assert (len(s.test), len(s.dev), len(s.train)) == (test, dev, n - test - dev)

    def test_large_flag(self):
        s = split(numbered(100), SplitSpec.large(seed=1))
        assert len(s.test) == 5

    def test_partition_and_determinism(self):
        rules = numbered(50)
        a, b = split(rules, SplitSpec(seed=3)), split(list(reversed(rules)), SplitSpec(seed=3))
        assert a.test == b.test and a.dev == b.dev
        ids = [r.id for part in (a.train, a.dev, a.test) for r in part]
        assert sorted(ids) == sorted(r.id for r in rules)
        assert split(rules, SplitSpec(seed=4)).test != a.test

    def test_too_small(self):
        with pytest.raises(ValueError):
            split(numbered(9))

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            SplitSpec(test_fraction=0.0)


class TestTrainingNegatives:
    def test_origins_and_labels(self, wine_rules):
        negs = gen_training_negatives(wine_rules, seed=0)
        assert negs and all(n.label == 0 for n in negs)
        assert {n.origin for n in negs} <= {"inversion", "head-swap", "body-swap",
                                            "concept-replacement", "disjointness"}

    def test_inversion_of_unentailed_rule(self):
        pos = [parse_rule("A SubClassOf B"), parse_rule("C SubClassOf D")]
        ids = {n.rule.id: n.origin for n in gen_training_negatives(pos, seed=0)}
        assert ids["B SubClassOf A"] == "inversion"
        assert ids["A and B SubClassOf Nothing"] == "disjointness"

    def test_disjointness_keeps_written_order(self):
        pos = [parse_rule("Zeta SubClassOf Alpha"), parse_rule("C SubClassOf D")]
        dis = [n.rule for n in gen_training_negatives(pos, seed=0) if n.origin == "disjointness"]
        assert "Zeta and Alpha implies Contradiction" in [verbalize_rule(r).statement for r in dis]

    def test_protected_rules_never_emitted(self, wine_rules):
        protected = [parse_rule("Wine SubClassOf RedWine")]
        for seed in range(20):
            ids = {n.rule.id for n in gen_training_negatives(wine_rules, seed=seed,
                                                              protected=protected)}
            assert "Wine SubClassOf RedWine" not in ids

    def test_entailed_candidates_filtered(self):
        pos = [parse_rule("A SubClassOf B"), parse_rule("B SubClassOf C"),
               parse_rule("D SubClassOf E")]
        ids = {n.rule.id for n in gen_training_negatives(pos, seed=0, exhaustive=True)}
        assert "A SubClassOf C" not in ids

    def test_exhaustive_matches_independent_enumeration(self, wine_rules):
        """The exhaustive generator equals a hand-written enumeration of the
        four strategies, filtered by the saturation oracle."""
        pos = wine_rules
        concepts = Ontology(pos).atomic_concepts
        expected = set()
        for i, r in enumerate(pos):
            if r.is_atomic:
                expected.add(Rule(r.head, r.body))
                for e in concepts:
                    if e not in (r.body.name, r.head.name):
                        expected.add(Rule(Atomic(e), r.head))
                        expected.add(Rule(r.body, Atomic(e)))
                expected.add(parse_rule(f"{r.body.name} and {r.head.name} SubClassOf Nothing"))
            for j, q in enumerate(pos):
                if i != j:
                    expected.add(Rule(r.body, q.head))
                    expected.add(Rule(q.body, r.head))
        rel = saturate(pos, [c for x in expected for c in (x.body, x.head)])
        positive_ids = {r.id for r in pos}
        expected = {x.id for x in expected
                    if x.id not in positive_ids and (x.body, x.head) not in rel}
        got = {n.rule.id for n in gen_training_negatives(pos, exhaustive=True)}
        assert got == expected

    def test_sampled_subset_of_exhaustive(self, sport_rules):
        full = {n.rule.id for n in gen_training_negatives(sport_rules, exhaustive=True)}
        for seed in range(10):
            assert {n.rule.id for n in gen_training_negatives(sport_rules, seed=seed)} <= full

    def test_empty_positives(self):
        with pytest.raises(ValueError):
            gen_training_negatives([])

    def test_stream_is_seeded(self, wine_rules):
        c = Ontology(wine_rules).atomic_concepts
        a = list(candidate_stream(wine_rules, c, np.random.default_rng(5)))
        b = list(candidate_stream(wine_rules, c, np.random.default_rng(5)))
        assert a == b


class TestHardNegatives:
    def test_replacement_within_top_k(self, wine_rules, wine_store):
        concepts = Ontology(wine_rules).atomic_concepts
        vectors = {c: resolve(c, wine_store).vector for c in concepts}
        for rule in wine_rules:
            for cand in gen_hard_negative_candidates([rule], wine_store, concepts, k=5, seed=2,
                                                     per_rule=3):
                ok = any(replace_at(rule, path, Atomic(c)) == cand.rule
                         for path, name in occurrences(rule)
                         for c in cosine_top_k(name, concepts, vectors, 5))
                assert ok, cand.rule.id
                assert cand.origin == "hard-negative" and cand.label == 0

    def test_protected_and_positive_collisions_dropped(self, wine_rules, wine_store):
        concepts = Ontology(wine_rules).atomic_concepts
        cands = gen_hard_negative_candidates(wine_rules, wine_store, concepts, seed=0,
                                             per_rule=5, protected=wine_rules)
        ids = [c.rule.id for c in cands]
        assert len(ids) == len(set(ids))
        assert not set(ids) & {r.id for r in wine_rules}

    def test_oov_concept_skipped(self, wine_store):
        rule = parse_rule("Unknown SubClassOf Mystery")
        assert gen_hard_negative_candidates([rule], wine_store, ["Wine"]) == []


class TestAnnotation:
    def test_kappa_worked_example(self):
        # 100 items: 45 both neg, 15 neg/pos, 25 pos/neg, 15 both pos
        pairs = ([("neg", "neg")] * 45 + [("neg", "pos")] * 15 + [("pos", "neg")] * 25
                 + [("pos", "pos")] * 15)
        # p_o = 0.6; p_e = 0.6*0.7 + 0.4*0.3 = 0.54; kappa = 0.06 / 0.46
        assert cohen_kappa(pairs) == pytest.approx(0.06 / 0.46, abs=1e-12)

    def test_kappa_symmetric_disagreement(self):
        pairs = ([("neg", "neg")] * 40 + [("neg", "pos")] * 5 + [("pos", "neg")] * 5
                 + [("pos", "pos")] * 50)
        # frozen from the contingency table: p_o = 0.9, p_e = 0.45^2 + 0.55^2 = 0.505
        assert cohen_kappa(pairs) == pytest.approx(0.7979797979797979, abs=1e-12)

    def test_perfect_agreement_mixed_labels(self):
        assert cohen_kappa([("neg", "neg"), ("pos", "pos")] * 3) == 1.0

    def test_kappa_against_sklearn(self):
        from sklearn.metrics import cohen_kappa_score
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.choice(["neg", "pos"], size=30)
            b = np.where(rng.random(30) < 0.7, a, rng.choice(["neg", "pos"], size=30))
            assert cohen_kappa(list(zip(a, b))) == pytest.approx(cohen_kappa_score(a, b), abs=1e-12)

    def test_kappa_degenerate(self):
        assert cohen_kappa([("neg", "neg")] * 4) == 1.0
        with pytest.raises(ValueError):
            cohen_kappa([])

    def test_worksheet_round_trip(self, tmp_path, wine_rules, wine_store):
        concepts = Ontology(wine_rules).atomic_concepts
        cands = gen_hard_negative_candidates(wine_rules, wine_store, concepts, seed=1)
        write_worksheet(cands, tmp_path / "ws.tsv")
        lines = (tmp_path / "ws.tsv").read_text().splitlines()
        assert lines[0] == "rule_id\tstatement\tannotator1\tannotator2"
        filled = [lines[0]] + [
            line.rstrip("\t") + ("\tneg\tneg" if i % 3 else "\tneg\tpos")
            for i, line in enumerate(lines[1:])]
        (tmp_path / "ws.tsv").write_text("\n".join(filled) + "\n")
        kept, kappa = finalize_annotations(cands, read_worksheet(tmp_path / "ws.tsv"))
        assert len(kept) == sum(1 for i in range(len(cands)) if i % 3)
        assert all(k.annotations == ("neg", "neg") for k in kept)
        assert kappa == 0.0  # annotator 1 always says neg

    def test_worksheet_errors(self, tmp_path):
        path = tmp_path / "ws.tsv"
        path.write_text("rule_id\tstatement\tannotator1\tannotator2\nA SubClassOf B\tx\tneg\tmaybe\n")
        with pytest.raises(AnnotationError, match="line 2"):
            read_worksheet(path)
        path.write_text("rule_id\tstatement\tannotator1\tannotator2\nA SubClassOf B\tx\tneg\t\n")
        with pytest.raises(AnnotationError, match="missing"):
            read_worksheet(path)

    def test_missing_judgment(self):
        cand = LabeledRule(parse_rule("A SubClassOf B"), 0, "hard-negative")
        with pytest.raises(AnnotationError):
            finalize_annotations([cand], {})


class TestLabeledFiles:
    def test_round_trip(self, tmp_path, wine_rules):
        items = [LabeledRule(r, 1) for r in wine_rules] + gen_training_negatives(wine_rules)
        write_labeled(items, tmp_path / "l.tsv")
        back = read_labeled(tmp_path / "l.tsv")
        assert [(x.rule, x.label, x.origin) for x in back] == \
            [(x.rule, x.label, x.origin) for x in items]

    def test_invalid_rows(self, tmp_path):
        (tmp_path / "l.tsv").write_text("A SubClassOf B\t2\tontology\n")
        with pytest.raises(ValueError, match="line 1"):
            read_labeled(tmp_path / "l.tsv")

    def test_label_validation(self):
        with pytest.raises(ValueError):
            LabeledRule(parse_rule("A SubClassOf B"), 1, "inversion")
        with pytest.raises(ValueError):
            LabeledRule(parse_rule("A SubClassOf B"), 0, "made-up")


class TestSoundness:
    @pytest.mark.parametrize("fixture", ["wine_rules", "sport_rules"])
    def test_audit_over_seeds(self, fixture, request):
        pos = request.getfixturevalue(fixture)
        runs = [gen_training_negatives(pos, seed=s) for s in range(100)]
        cands = {n.rule for run in runs for n in run}
        rel = saturate(pos, [c for r in cands for c in (r.body, r.head)])
        ids = {r.id for r in pos}
        ent = Entailment(pos)
        for run in runs:
            for n in run:
                assert (n.rule.body, n.rule.head) not in rel, n.rule.id
                assert n.rule.id not in ids
                assert not ent(n.rule)
                assert atoms(n.rule)
