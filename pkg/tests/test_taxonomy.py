import pytest

from paraspeech.taxonomy import (
    ENV_VAR,
    DuplicateSurface,
    EmptyTaxonomy,
    MalformedSurface,
    load_taxonomy,
    load_taxonomy_file,
    resolve_surface,
    serialize_config,
)

MINIMAL = """
version: mini
categories:
  - id: laughter
    surface: "[Laughter]"
    kind: physiological
"""

PAPER_NAMED_IDS = {
    "laughter",
    "cough",
    "breathing",
    "crying",
    "uhm",
    "confirmation-en",
    "question-ah",
    "question-en",
    "surprise-oh",
    "surprise-yo",
    "shh",
}


def test_default_config_has_18_categories(taxonomy):
    assert len(taxonomy) == 18
    assert PAPER_NAMED_IDS <= set(taxonomy.category_ids())
    assert taxonomy.none_surface == "[None]"


def test_default_ordering_preserved(taxonomy):
    assert taxonomy.category_ids()[0] == "laughter"


def test_minimal_config():
    t = load_taxonomy(MINIMAL)
    assert len(t) == 1
    assert t.categories[0].id == "laughter"


def test_duplicate_surface_rejected():
    config = """
version: dup
categories:
  - {id: a, surface: "[Laughter]", kind: physiological}
  - {id: b, surface: "[Laughter]", kind: interjection}
"""
    with pytest.raises(DuplicateSurface) as exc:
        load_taxonomy(config)
    assert exc.value.surface == "[Laughter]"
    assert exc.value.entry == "b"


def test_alias_collision_rejected():
    config = """
version: dup
categories:
  - {id: a, surface: "[A]", kind: interjection, aliases: ["[X]"]}
  - {id: b, surface: "[X]", kind: interjection}
"""
    with pytest.raises(DuplicateSurface):
        load_taxonomy(config)


@pytest.mark.parametrize(
    "surface", ["Laughter", "[Laughter", "Laughter]", "[]", "[  ]", "[La[ugh]ter]"]
)
def test_malformed_surfaces_rejected(surface):
    config = f"""
version: bad
categories:
  - {{id: x, surface: "{surface}", kind: interjection}}
"""
    with pytest.raises(MalformedSurface):
        load_taxonomy(config)


def test_empty_taxonomy_rejected():
    with pytest.raises(EmptyTaxonomy):
        load_taxonomy("version: none\ncategories: []\n")


def test_resolve_surface_exact(taxonomy):
    assert resolve_surface(taxonomy, "[Laughter]").id == "laughter"
    assert resolve_surface(taxonomy, "[laughter]") is None  # case-sensitive
    assert resolve_surface(taxonomy, "[Sneeze]") is None


def test_resolve_alias_maps_to_category(taxonomy):
    assert resolve_surface(taxonomy, "[Laugh]").id == "laughter"


def test_every_surface_resolves_to_its_category(taxonomy):
    for cat in taxonomy.categories:
        assert resolve_surface(taxonomy, cat.surface) is cat
        for alias in cat.aliases:
            assert resolve_surface(taxonomy, alias) is cat


def test_config_round_trip(taxonomy):
    again = load_taxonomy(serialize_config(taxonomy))
    assert again.version == taxonomy.version
    assert again.none_surface == taxonomy.none_surface
    assert again.categories == taxonomy.categories


def test_env_var_overrides_default_config(tmp_path, monkeypatch):
    path = tmp_path / "tiny.yaml"
    path.write_text(MINIMAL, encoding="utf-8")
    monkeypatch.setenv(ENV_VAR, str(path))
    assert len(load_taxonomy_file()) == 1
    # explicit "default" always wins over the environment
    assert len(load_taxonomy_file("default")) == 18


def test_no_two_categories_share_a_resolving_string(taxonomy):
    surfaces = [c.surface for c in taxonomy.categories]
    surfaces += [a for c in taxonomy.categories for a in c.aliases]
    assert len(surfaces) == len(set(surfaces))
