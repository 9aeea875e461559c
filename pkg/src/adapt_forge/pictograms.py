"""Keyword-to-pictogram mapping backed by a YAML manifest.

The map is a total function on its declared keywords and every pictogram id
must resolve to a bundled asset. Steps are annotated by scanning their words
against the keyword table; one pictogram appears at most once per step.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .errors import ParseError, UnmappedPictogramError, ValidationError
from .model import PictogramAnnotation

_WORD_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class PictogramAsset:
    pictogram_id: str
    asset_path: str
    alt_text: str

    def to_dict(self) -> dict:
        return {
            "pictogramId": self.pictogram_id,
            "asset": self.asset_path,
            "alt": self.alt_text,
        }


class PictogramMap:
    def __init__(
        self,
        assets: dict[str, PictogramAsset],
        keyword_to_id: dict[str, str],
        asset_loader=None,
    ) -> None:
        for keyword, pid in keyword_to_id.items():
            if pid not in assets:
                raise ValidationError(
                    f"keyword {keyword!r} maps to unknown pictogram {pid!r}"
                )
        self._assets = dict(assets)
        self._keywords = {k.lower(): v for k, v in keyword_to_id.items()}
        self._asset_loader = asset_loader

    def lookup(self, keyword: str) -> Optional[str]:
        return self._keywords.get(keyword.lower())

    def has_id(self, pictogram_id: str) -> bool:
        return pictogram_id in self._assets

    def asset(self, pictogram_id: str) -> PictogramAsset:
        try:
            return self._assets[pictogram_id]
        except KeyError:
            raise UnmappedPictogramError(
                f"unknown pictogram id: {pictogram_id!r}"
            ) from None

    def asset_bytes(self, pictogram_id: str) -> bytes:
        asset = self.asset(pictogram_id)
        if self._asset_loader is None:
            raise UnmappedPictogramError(
                f"no asset source configured for {pictogram_id!r}"
            )
        return self._asset_loader(asset.asset_path)

    def pictogram_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._assets))

    def keywords(self) -> tuple[str, ...]:
        return tuple(sorted(self._keywords))

    def manifest(self) -> list[dict]:
        out = []
        for pid in self.pictogram_ids():
            entry = self._assets[pid].to_dict()
            entry["keywords"] = sorted(
                k for k, v in self._keywords.items() if v == pid
            )
            out.append(entry)
        return out

    def annotate_steps(
        self, steps: Sequence[str]
    ) -> tuple[PictogramAnnotation, ...]:
        """Keyword-scan each step in order; first keyword wins per
        (step, pictogram) pair so a step never shows the same icon twice."""
        annotations: list[PictogramAnnotation] = []
        for index, step in enumerate(steps, start=1):
            seen: set[str] = set()
            for word in _WORD_RE.findall(step.lower()):
                pid = self._keywords.get(word)
                if pid is None or pid in seen:
                    continue
                seen.add(pid)
                annotations.append(
                    PictogramAnnotation(
                        step_index=index, keyword=word, pictogram_id=pid
                    )
                )
        return tuple(annotations)


def parse_manifest(text: str, asset_loader=None) -> PictogramMap:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"pictogram manifest is not valid YAML: {exc}") from None
    if not isinstance(doc, dict) or "pictograms" not in doc:
        raise ParseError("pictogram manifest must have a top-level 'pictograms' list")
    assets: dict[str, PictogramAsset] = {}
    keywords: dict[str, str] = {}
    for entry in doc["pictograms"]:
        pid = entry.get("id")
        if not pid:
            raise ParseError("pictogram entry missing 'id'")
        if pid in assets:
            raise ParseError(f"duplicate pictogram id: {pid}")
        if not entry.get("asset") or not entry.get("alt"):
            raise ParseError(f"pictogram {pid}: 'asset' and 'alt' are required")
        assets[pid] = PictogramAsset(
            pictogram_id=pid, asset_path=entry["asset"], alt_text=entry["alt"]
        )
        for kw in entry.get("keywords", []):
            kw = str(kw).lower()
            if kw in keywords:
                raise ParseError(
                    f"keyword {kw!r} declared for both {keywords[kw]} and {pid}"
                )
            keywords[kw] = pid
    return PictogramMap(assets, keywords, asset_loader=asset_loader)


def load_pictogram_file(path) -> PictogramMap:
    path = Path(path)
    base = path.parent

    def loader(rel: str) -> bytes:
        target = base / rel
        if not target.is_file():
            raise UnmappedPictogramError(f"asset file missing: {target}")
        return target.read_bytes()

    pmap = parse_manifest(path.read_text(encoding="utf-8"), asset_loader=loader)
    for pid in pmap.pictogram_ids():
        # fail at load, not at first request
        loader(pmap.asset(pid).asset_path)
    return pmap


def load_default_pictograms() -> PictogramMap:
    from importlib.resources import files

    data = files("adapt_forge").joinpath("data")

    def loader(rel: str) -> bytes:
        res = data.joinpath(rel)
        if not res.is_file():
            raise UnmappedPictogramError(f"bundled asset missing: {rel}")
        return res.read_bytes()

    pmap = parse_manifest(
        data.joinpath("pictograms.yaml").read_text(encoding="utf-8"),
        asset_loader=loader,
    )
    for pid in pmap.pictogram_ids():
        loader(pmap.asset(pid).asset_path)
    return pmap
