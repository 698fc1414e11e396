import pytest

from ontocomplete.dl import parse_concept, parse_rule
from ontocomplete.verbalize import split_name, verbalize_concept, verbalize_rule

# (rule text, expected statement): the published example statements
GOLDEN_RULES = [
    ("CheninBlanc SubClassOf (hasFlavor some Moderate)",
     "Chenin Blanc implies something that has flavor Moderate"),
    ("Beaujolais SubClassOf (hasSugar some Dry)", "Beaujolais implies something that has sugar Dry"),
    ("Avocado SubClassOf GroceryProduce", "Avocado implies Grocery Produce"),
    ("Ready-To-EatBakeryProduct SubClassOf BakeryFoodProduct",
     "Ready-To-Eat Bakery Product implies Bakery Food Product"),
    ("Smoked_and_FrozenCodFillet SubClassOf CodFillet",
     "Smoked and Frozen Cod Fillet implies Cod Fillet"),
    ("Rings SubClassOf ArtisticGymnastics", "Rings implies Artistic Gymnastics"),
    ("Platform SubClassOf Diving", "Platform implies Diving"),
    ("LCAC SubClassOf MilitaryVehicle", "LCAC implies Military Vehicle"),
    ("Abort SubClassOf ComputerProcess", "Abort implies Computer Process"),
    ("FoodDistributionOperation SubClassOf MilitaryOperation",
     "Food Distribution Operation implies Military Operation"),
    ("HeadEndCar SubClassOf Railcar", "Head End Car implies Railcar"),
    ("PetiteSyrah SubClassOf (hasSugar some Dry)", "Petite Syrah implies something that has sugar Dry"),
    ("Pauillac SubClassOf (hasBody some Full)", "Pauillac implies something that has body Full"),
    ("TeamEvent and IndividualEvent SubClassOf Nothing",
     "Team Event and Individual Event implies Contradiction"),
    ("RailroadTrack and Bulkhead SubClassOf Nothing",
     "Railroad Track and Bulkhead implies Contradiction"),
    ("HumanHabitationArtifact and ShipDeck SubClassOf Nothing",
     "Human Habitation Artifact and Ship Deck implies Contradiction"),
    ("Sauternes SubClassOf (locatedIn some SauterneRegion)",
     "Sauternes implies something located in Sauterne Region"),
    ("Muscadet SubClassOf (madeFromGrape some PinotBlancGrape)",
     "Muscadet implies something made from grape Pinot Blanc Grape"),
    ("Chianti SubClassOf (locatedIn some ChiantiRegion)",
     "Chianti implies something located in Chianti Region"),
    ("FireBoat SubClassOf EmergencyVehicle", "Fire Boat implies Emergency Vehicle"),
    ("CanalSystem SubClassOf WaterTransportationSystem",
     "Canal System implies Water Transportation System"),
    ("RadioNavigationBeacon SubClassOf AidToNavigation",
     "Radio Navigation Beacon implies Aid To Navigation"),
    ("Machine SubClassOf Machinery", "Machine implies Machinery"),
    ("War SubClassOf ViolentContest", "War implies Violent Contest"),
    ("Telegraph SubClassOf ElectricDevice", "Telegraph implies Electric Device"),
    ("WomensTeam SubClassOf (hasMember some Woman)",
     "Womens Team implies something that has member Woman"),
    ("ArtisticGymnastics SubClassOf Gymnastics", "Artistic Gymnastics implies Gymnastics"),
    ("SummerGames SubClassOf OlympicGames", "Summer Games implies Olympic Games"),
    ("Cocaine SubClassOf Narcotic", "Cocaine implies Narcotic"),
    ("Plastic SubClassOf ManufacturedProduct", "Plastic implies Manufactured Product"),
    ("CoffeeBean SubClassOf PlantAgriculturalProduct",
     "Coffee Bean implies Plant Agricultural Product"),
]

GOLDEN_CONCEPTS = [
    ("RedWine", "red wine"),
    ("Wine and (hasColor some Red)", "wine that has color red"),
    ("hasColor some Red", "something that has color red"),
]


class TestGoldenCorpus:
    @pytest.mark.parametrize("text,expected", GOLDEN_RULES)
    def test_rule_statement(self, text, expected):
        assert verbalize_rule(parse_rule(text)).statement == expected

    @pytest.mark.parametrize("text,expected", GOLDEN_CONCEPTS)
    def test_concept_phrase(self, text, expected):
        assert verbalize_concept(parse_concept(text)) == expected


class TestRendering:
    def test_split_name(self):
        assert split_name("UKScientist") == ["UK", "Scientist"]
        assert split_name("Ready-To-EatBakeryProduct") == ["Ready-To-Eat", "Bakery", "Product"]
        assert split_name("Kind01Member2") == ["Kind", "01", "Member", "2"]

    def test_lower_keeps_acronyms(self):
        assert verbalize_concept(parse_concept("UKScientist")) == "UK scientist"

    def test_conjunct_order_follows_the_source_text(self):
        a = verbalize_rule(parse_rule("TeamEvent and IndividualEvent SubClassOf Nothing"))
        b = verbalize_rule(parse_rule("IndividualEvent and TeamEvent SubClassOf Nothing"))
        assert a.body_text == "Team Event and Individual Event"
        assert b.body_text == "Individual Event and Team Event"

    def test_several_restrictions(self):
        c = parse_concept("Wine and (hasColor some Red) and (locatedIn some France)")
        assert verbalize_concept(c) == "wine that has color red and located in france"

    def test_nested_restriction(self):
        c = parse_concept("hasPart some (Grape and (hasColor some Red))")
        assert verbalize_concept(c) == "something that has part grape that has color red"

    def test_unknown_casing(self):
        with pytest.raises(ValueError):
            verbalize_concept(parse_concept("A"), casing="title")

    def test_deterministic(self, wine_rules):
        first = [verbalize_rule(r).statement for r in wine_rules]
        assert first == [verbalize_rule(r).statement for r in wine_rules]
