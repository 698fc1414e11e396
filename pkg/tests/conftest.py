import numpy as np
import pytest

from ontocomplete.dl import Ontology, parse_rule
from ontocomplete.embeddings import EmbeddingStore
from ontocomplete.verbalize import split_name

WINE = """
RedWine SubClassOf Wine
WhiteWine SubClassOf Wine
RoseWine SubClassOf Wine
Merlot SubClassOf RedWine
Zinfandel SubClassOf RedWine
CheninBlanc SubClassOf WhiteWine
Riesling SubClassOf WhiteWine
Muscadet SubClassOf WhiteWine
Merlot SubClassOf (hasColor some Red)
Zinfandel SubClassOf (hasColor some Red)
CheninBlanc SubClassOf (hasFlavor some Moderate)
Riesling SubClassOf (hasFlavor some Delicate)
Muscadet SubClassOf (madeFromGrape some PinotBlancGrape)
Wine and (hasColor some Red) SubClassOf RedWine
Wine and (hasColor some White) SubClassOf WhiteWine
Sauternes SubClassOf (locatedIn some SauterneRegion)
Chianti SubClassOf (locatedIn some ChiantiRegion)
Sauternes SubClassOf WhiteWine
Chianti SubClassOf RedWine
RedWine and WhiteWine SubClassOf Nothing
"""

# a second small fixture with more conjunctions and nesting
SPORT = """
Rings SubClassOf ArtisticGymnastics
Vault SubClassOf ArtisticGymnastics
ArtisticGymnastics SubClassOf Gymnastics
Platform SubClassOf Diving
Springboard SubClassOf Diving
Diving SubClassOf Aquatics
Gymnastics SubClassOf Sport
Aquatics SubClassOf Sport
TeamEvent and IndividualEvent SubClassOf Nothing
WomensTeam SubClassOf (hasMember some Woman)
MensTeam SubClassOf (hasMember some Man)
WomensTeam SubClassOf Team
MensTeam SubClassOf Team
Team and (competesIn some TeamEvent) SubClassOf Participant
Rings SubClassOf (usesApparatus some (Apparatus and Metal))
Vault SubClassOf (usesApparatus some Apparatus)
Athlete and (hasMember some Woman) SubClassOf WomensTeam
"""


def rules_from(text):
    return [parse_rule(line) for line in text.strip().splitlines()]


def random_store(names, dim=16, seed=0):
    """One random vector per concept, keyed by its lowercased phrase."""
    rng = np.random.default_rng(seed)
    tokens = sorted({"_".join(w.lower() for w in split_name(n)) for n in names})
    return EmbeddingStore(tokens, rng.normal(size=(len(tokens), dim)))


@pytest.fixture
def wine_rules():
    return rules_from(WINE)


@pytest.fixture
def sport_rules():
    return rules_from(SPORT)


@pytest.fixture
def wine_store(wine_rules):
    return random_store(Ontology(wine_rules).atomic_concepts)


# (criterion number, line) pairs collected by tests/test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
