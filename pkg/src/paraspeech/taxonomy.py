"""Closed set of paralinguistic vocalization categories.

A Taxonomy is the single source of truth for which bracketed tags may appear
inline in a transcript. It is loaded from a YAML config and immutable after
load, so it is safe to share across threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import yaml

from .errors import ParaspeechError

DEFAULT_CONFIG_PATH = Path(__file__).parent / "data" / "taxonomy_default.yaml"
ENV_VAR = "PARASPEECH_TAXONOMY"

KINDS = ("physiological", "discourse-marker", "interjection")


class TaxonomyError(ParaspeechError):
    pass


class DuplicateSurface(TaxonomyError):
    def __init__(self, entry: str, surface: str):
        self.entry = entry
        self.surface = surface
        super().__init__(f"category {entry!r}: surface or alias {surface!r} already taken")


class MalformedSurface(TaxonomyError):
    def __init__(self, entry: str, surface: str, reason: str):
        self.entry = entry
        self.surface = surface
        super().__init__(f"category {entry!r}: surface {surface!r} is malformed ({reason})")


class EmptyTaxonomy(TaxonomyError):
    def __init__(self):
        super().__init__("taxonomy config defines no categories")


@dataclass(frozen=True)
class ParaCategory:
    """One paralinguistic category: stable id plus its inline surface form."""

    id: str
    surface: str
    kind: str
    aliases: tuple[str, ...] = ()


@dataclass(frozen=True)
class Taxonomy:
    categories: tuple[ParaCategory, ...]
    version: str
    none_surface: str = "[None]"
    _by_surface: dict[str, ParaCategory] = field(default_factory=dict, repr=False, compare=False)
    _by_id: dict[str, ParaCategory] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for cat in self.categories:
            self._by_id[cat.id] = cat
            self._by_surface[cat.surface] = cat
            for alias in cat.aliases:
                self._by_surface[alias] = cat

    def __len__(self) -> int:
        return len(self.categories)

    def category_ids(self) -> list[str]:
        return [c.id for c in self.categories]

    def by_id(self, cat_id: str) -> ParaCategory:
        return self._by_id[cat_id]


def _check_surface(entry_id: str, surface: str) -> None:
    if not (surface.startswith("[") and surface.endswith("]")):
        raise MalformedSurface(entry_id, surface, "must be bracketed")
    inner = surface[1:-1]
    if not inner or inner.isspace():
        raise MalformedSurface(entry_id, surface, "whitespace-only content")
    if "[" in inner or "]" in inner:
        raise MalformedSurface(entry_id, surface, "nested bracket")


def build_taxonomy(entries: Iterable[dict], version: str, none_surface: str = "[None]") -> Taxonomy:
    """Assemble and validate a Taxonomy from already-parsed config entries."""
    categories: list[ParaCategory] = []
    seen_ids: set[str] = set()
    seen_surfaces: set[str] = set()
    for raw in entries:
        cat_id = str(raw["id"])
        surface = str(raw["surface"])
        kind = str(raw.get("kind", "interjection"))
        aliases = tuple(str(a) for a in raw.get("aliases") or ())
        if kind not in KINDS:
            raise TaxonomyError(f"category {cat_id!r}: unknown kind {kind!r}")
        if cat_id in seen_ids:
            raise TaxonomyError(f"duplicate category id {cat_id!r}")
        _check_surface(cat_id, surface)
        for alias in aliases:
            _check_surface(cat_id, alias)
        for s in (surface, *aliases):
            if s in seen_surfaces:
                raise DuplicateSurface(cat_id, s)
            seen_surfaces.add(s)
        seen_ids.add(cat_id)
        categories.append(ParaCategory(cat_id, surface, kind, aliases))
    if not categories:
        raise EmptyTaxonomy()
    if none_surface in seen_surfaces:
        raise DuplicateSurface("none_surface", none_surface)
    return Taxonomy(tuple(categories), version=version, none_surface=none_surface)


def load_taxonomy(config_text: str) -> Taxonomy:
    """Parse a YAML taxonomy config into a validated Taxonomy.

    The document must carry ``version``, optionally ``none_surface``, and a
    ``categories`` array of ``{id, surface, kind, aliases}``. Ordering of the
    array is preserved.
    """
    doc = yaml.safe_load(config_text)
    if not isinstance(doc, dict) or "categories" not in doc:
        raise TaxonomyError("config must be a mapping with a 'categories' array")
    return build_taxonomy(
        doc["categories"] or (),
        version=str(doc.get("version", "unversioned")),
        none_surface=str(doc.get("none_surface", "[None]")),
    )


def load_taxonomy_file(path: str | Path | None = None) -> Taxonomy:
    """Load a taxonomy config file.

    Resolution order: explicit path, the PARASPEECH_TAXONOMY environment
    variable, then the shipped default. The literal value "default" always
    means the shipped config.
    """
    if path is None:
        path = os.environ.get(ENV_VAR) or DEFAULT_CONFIG_PATH
    if str(path) == "default":
        path = DEFAULT_CONFIG_PATH
    return load_taxonomy(Path(path).read_text(encoding="utf-8"))


def serialize_config(t: Taxonomy) -> str:
    """Render a Taxonomy back into config form (round-trips through load)."""
    doc = {
        "version": t.version,
        "none_surface": t.none_surface,
        "categories": [
            {"id": c.id, "surface": c.surface, "kind": c.kind, "aliases": list(c.aliases)}
            for c in t.categories
        ],
    }
    return yaml.safe_dump(doc, allow_unicode=True, sort_keys=False)


def resolve_surface(t: Taxonomy, s: str) -> ParaCategory | None:
    """Look up a surface or alias, case-sensitive and byte-exact.

    Unknown surfaces return None; this is a value, not an error.
    """
    return t._by_surface.get(s)
