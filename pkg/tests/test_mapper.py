import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES
from ner_forge.linker import FOUND, NOT_FOUND, OWL_THING, EntityClassRecord
from ner_forge.mapper import (
    PriorityTable,
    TableError,
    UnerMapping,
    UnerTag,
    compact_iri,
    expand_iri,
    load_priorities,
    load_tables,
    load_uner_map,
    map_to_uner,
    resolve_class,
    seed_table_paths,
    tag_entity,
)

GAMES = ["dbo:Event", "dbo:SoccerTournament", "dbo:SocietalEvent", "dbo:SportsEvent", "owl:Thing"]


@pytest.fixture(scope="module")
def seed():
    return load_tables(*seed_table_paths())


def brute_force_choice(classes, prio):
    """Max priority, first occurrence on ties, None when nothing scores above zero."""
    scores = [prio.get(c, 0) for c in classes]
    if not scores or max(scores) == 0:
        return None
    return classes[scores.index(max(scores))]


def test_games_resolve_to_soccer_tournament(seed):
    priorities, _ = seed
    assert resolve_class([expand_iri(c) for c in GAMES], priorities) == expand_iri("dbo:SoccerTournament")


def test_tie_broken_by_list_order(seed):
    priorities, _ = seed
    reordered = ["dbo:SportsEvent", "dbo:SoccerTournament", "owl:Thing"]
    assert resolve_class(reordered, priorities) == "dbo:SportsEvent"


def test_single_candidate(seed):
    assert resolve_class(["owl:Thing"], seed[0]) == "owl:Thing"


def test_empty_and_unknown(seed):
    assert resolve_class([], seed[0]) is None
    assert resolve_class(["dbo:Unlisted", "dbo:Other"], seed[0]) is None


def test_random_lists_match_brute_force():
    rng = random.Random(20210901)
    names = [f"dbo:C{i}" for i in range(12)]
    for _ in range(1000):
        prio = {n: rng.randint(1, 5) for n in rng.sample(names, rng.randint(0, 12))}
        classes = [rng.choice(names) for _ in range(rng.randint(0, 8))]
        table = PriorityTable({expand_iri(k): v for k, v in prio.items()})
        assert resolve_class(classes, table) == brute_force_choice(classes, prio)


@given(
    st.lists(st.sampled_from("ABCDEFG"), max_size=8),
    st.dictionaries(st.sampled_from("ABCDEFG"), st.integers(1, 6)),
    st.integers(1, 10),
)
def test_raising_the_winner_keeps_it(classes, prio, bump):
    table = PriorityTable(dict(prio))
    chosen = resolve_class(classes, table)
    assert chosen is None or chosen in classes
    if chosen is not None:
        raised = PriorityTable({**prio, chosen: prio[chosen] + bump})
        assert resolve_class(classes, raised) == chosen


@pytest.mark.parametrize(
    "cls, tag",
    [
        ("dbo:SoccerTournament", "Name-Event-Occasion-Game"),
        ("dbo:Event", "Name-Event-Historical-Event"),
        ("dbo:SocietalEvent", "Name-Event-Historical-Event"),
        ("dbo:SportsEvent", "Name-Event-Occasion-Game"),
        ("dbo:EthnicGroup", "Name-Organization-Ethnic_Group_other"),
    ],
)
def test_seed_mapping(seed, cls, tag):
    assert str(map_to_uner(cls, seed[1])) == tag


def test_thing_maps_to_nothing(seed):
    assert map_to_uner("owl:Thing", seed[1]) is None
    assert map_to_uner(OWL_THING, seed[1]) is None


def test_missing_mapping_logged_once(caplog):
    mapping = UnerMapping({})
    with caplog.at_level("INFO", logger="ner_forge.mapper"):
        for _ in range(3):
            assert map_to_uner("dbo:Nowhere", mapping) is None
    assert len(caplog.records) == 1
    assert mapping.gaps == {expand_iri("dbo:Nowhere")}


def test_tag_entity_games(seed):
    rec = EntityClassRecord("2015_European_Games", tuple(map(expand_iri, GAMES)), "t", FOUND)
    assert str(tag_entity(rec, *seed)) == "Name-Event-Occasion-Game"


def test_tag_entity_no_classes(seed):
    assert tag_entity(EntityClassRecord("X", (), "t", NOT_FOUND), *seed) is None


def test_buddhism_mistag_reproduced(seed):
    rec = EntityClassRecord("Buddhism", (expand_iri("dbo:EthnicGroup"), OWL_THING), "t", FOUND)
    assert str(tag_entity(rec, *seed)) == "Name-Organization-Ethnic_Group_other"


@given(st.lists(st.sampled_from(GAMES + ["dbo:EthnicGroup", "dbo:Unknown"]), max_size=6))
def test_tag_entity_is_the_composition(classes):
    priorities, mapping = load_tables(*seed_table_paths())
    rec = EntityClassRecord("X", tuple(classes), "t", FOUND if classes else NOT_FOUND)
    assert tag_entity(rec, priorities, mapping) == map_to_uner(resolve_class(classes, priorities), mapping)


# -- tags and tables ---------------------------------------------------------


@pytest.mark.parametrize(
    "rendered, levels",
    [
        ("Name-Event-Historical-Event", ("Name", "Event", "Historical-Event")),
        ("Name-Person-Name", ("Name", "Person", "Name")),
        ("Name-Location-GPE-GPE_Other", ("Name", "Location", "GPE-GPE_Other")),
        ("Name-Product", ("Name", "Product", None)),
    ],
)
def test_uner_tag_round_trip(rendered, levels):
    tag = UnerTag.parse(rendered)
    assert (tag.category, tag.type, tag.subtype) == levels
    assert str(tag) == rendered


@pytest.mark.parametrize("bad", ["Name", "", "Name-", "Name-Per son"])
def test_bad_tags_rejected(bad):
    with pytest.raises(ValueError):
        UnerTag.parse(bad)


def test_iri_prefixes():
    assert expand_iri("dbo:City") == "http://dbpedia.org/ontology/City"
    assert compact_iri(OWL_THING) == "owl:Thing"
    assert compact_iri("http://example.org/x") == "http://example.org/x"


def test_duplicate_key_is_a_load_error(tmp_path):
    p = tmp_path / "p.tsv"
    p.write_text("owl:Thing\t1\n# comment\ndbo:A\t2\nhttp://dbpedia.org/ontology/A\t3\n")
    with pytest.raises(TableError, match="duplicate"):
        load_priorities(p)


@pytest.mark.parametrize(
    "content, message",
    [
        ("dbo:A\t2\n", "owl:Thing"),
        ("owl:Thing\t1\ndbo:A\ttwo\n", "not an integer"),
        ("owl:Thing\t1\ndbo:A\t0\n", ">= 1"),
        ("owl:Thing 1\n", "2 tab-separated"),
    ],
)
def test_priority_table_errors(tmp_path, content, message):
    p = tmp_path / "p.tsv"
    p.write_text(content)
    with pytest.raises(TableError, match=message):
        load_priorities(p)


def test_every_prioritized_class_needs_a_mapping(tmp_path):
    p, m = tmp_path / "p.tsv", tmp_path / "m.tsv"
    p.write_text("owl:Thing\t1\ndbo:City\t3\n")
    m.write_text("owl:Thing\tNULL\n")
    with pytest.raises(TableError, match="dbo:City"):
        load_tables(p, m)


def test_fixture_tables_extend_the_seed():
    seed_p, seed_m = (t for t in seed_table_paths())
    fp, fm = load_priorities(FIXTURES / "priorities.tsv"), load_uner_map(FIXTURES / "uner_map.tsv")
    sp, sm = load_priorities(seed_p), load_uner_map(seed_m)
    assert sp.entries.items() <= fp.entries.items()
    assert sm.entries.items() <= fm.entries.items()
