import numpy as np
import pytest
from sklearn.metrics.pairwise import cosine_similarity

from ontocomplete.embeddings import (EmbeddingFormatError, EmbeddingStore, resolve,
                                     top_k_similar)


def write(tmp_path, text):
    path = tmp_path / "v.txt"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoading:
    def test_round_trip(self, tmp_path, wine_store):
        wine_store.save(tmp_path / "v.txt")
        back = EmbeddingStore.load(tmp_path / "v.txt")
        assert back.tokens == wine_store.tokens
        np.testing.assert_array_equal(back.matrix, wine_store.matrix)

    def test_bad_header(self, tmp_path):
        with pytest.raises(EmbeddingFormatError, match="line 1"):
            EmbeddingStore.load(write(tmp_path, "two 3\nred 1 2 3\n"))

    def test_wrong_width_names_the_line(self, tmp_path):
        with pytest.raises(EmbeddingFormatError, match="line 3"):
            EmbeddingStore.load(write(tmp_path, "2 2\nred 1 2\nwine 1\n"))

    def test_non_numeric(self, tmp_path):
        with pytest.raises(EmbeddingFormatError, match="non-numeric"):
            EmbeddingStore.load(write(tmp_path, "1 2\nred 1 x\n"))

    def test_duplicate_keeps_first(self, tmp_path, caplog):
        store = EmbeddingStore.load(write(tmp_path, "2 2\nred 1 0\nred 0 1\n"))
        assert len(store) == 1 and list(store["red"]) == [1.0, 0.0]
        assert "duplicate" in caplog.text

    def test_matrix_is_read_only(self, wine_store):
        with pytest.raises(ValueError):
            wine_store.matrix[0, 0] = 1.0


class TestResolution:
    def test_phrase_then_words_then_zero(self):
        store = EmbeddingStore.from_dict({"red_wine": [1, 0], "red": [0, 2], "wine": [2, 0]})
        assert resolve("RedWine", store).resolution == "exact-phrase"
        mean = resolve("RedGrape", store)
        assert mean.resolution == "token-mean" and list(mean.vector) == [0.0, 2.0]
        both = resolve("WineRed", store)
        assert list(both.vector) == [1.0, 1.0]
        assert resolve("Beer", store).resolution == "zero-oov"


class TestTopK:
    def test_matches_sklearn_cosine(self, wine_store, wine_rules):
        from ontocomplete.dl import Ontology
        pool = Ontology(wine_rules).atomic_concepts
        feats = np.array([resolve(c, wine_store).vector for c in pool])
        sims = cosine_similarity(feats)
        for i, name in enumerate(pool):
            order = sorted((j for j in range(len(pool)) if j != i), key=lambda j: (-sims[i, j], pool[j]))
            expected = [pool[j] for j in order[:5]]
            got = top_k_similar(name, 5, wine_store, pool)
            assert [c for c, _ in got] == expected
            np.testing.assert_allclose([s for _, s in got], [sims[i, j] for j in order[:5]], rtol=1e-12)

    def test_ties_break_by_name(self):
        store = EmbeddingStore.from_dict({"a": [1, 0], "c": [1, 0], "b": [1, 0], "d": [0, 1]})
        assert [c for c, _ in top_k_similar("A", 2, store, ["A", "B", "C", "D"])] == ["B", "C"]

    def test_oov_query_rejected(self, wine_store):
        with pytest.raises(ValueError):
            top_k_similar("Unknown", 3, wine_store, ["Wine"])

    def test_k_must_be_positive(self, wine_store):
        with pytest.raises(ValueError):
            top_k_similar("Wine", 0, wine_store, ["Wine"])
