"""Domain records: assets, metadata, caption levels, and manifest construction.

Manifest layouts are explicit per source dataset (never sniffed):

* ``objaverse`` — model files anywhere under the root, asset id = file stem;
  optional ``metadata/<asset_id>.json`` sidecars with sketchfab-style
  ``{name, tags, description}``.
* ``objaverse_xl`` — same file scan, ``.ply`` assets excluded; optional
  ``metadata/<asset_id>.json`` sidecars kept as an opaque blob.
* ``shapenet`` — ``<synset_id>/<model_id>/`` directories; an optional
  ``taxonomy.json`` at the root (list of ``{synsetId, name}``) maps synset
  ids to category names.
* ``pix3d`` / ``omniobject3d`` / ``toys4k`` / ``gso`` — ``<category>/<model>``
  directories; the top-level folder name is the category.
* ``abo`` — model file scan plus optional ``listings.jsonl`` with
  ``{item_id, text}`` lines; listing text becomes the description (translated
  at ingest by a text backend when one is supplied).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

from .jsonl import iter_jsonl, write_jsonl

VIEW_TAGS = ("front", "back", "left", "right")

MODEL_EXTENSIONS = {".glb", ".gltf", ".obj", ".ply", ".stl", ".fbx", ".usdz", ".blend"}

#: Per-level word budgets (min_words, max_words). Level 5 counts concepts.
LEVEL_BUDGETS = {
    1: (150, 200),
    2: (100, 150),
    3: (50, 100),
    4: (0, 30),
    5: (10, 20),
}


class Dataset(str, Enum):
    OBJAVERSE = "objaverse"
    OBJAVERSE_XL = "objaverse_xl"
    SHAPENET = "shapenet"
    PIX3D = "pix3d"
    OMNIOBJECT3D = "omniobject3d"
    TOYS4K = "toys4k"
    GSO = "gso"
    ABO = "abo"


#: Datasets whose metadata is a single taxonomy/folder category.
CATEGORY_DATASETS = frozenset(
    {Dataset.SHAPENET, Dataset.PIX3D, Dataset.OMNIOBJECT3D, Dataset.TOYS4K, Dataset.GSO}
)


class ManifestError(Exception):
    """Base for manifest construction failures."""


class UnreadableRoot(ManifestError):
    """Source root missing or not a directory."""


class UnknownLayout(ManifestError):
    """Directory tree does not match the dataset's documented structure."""


@dataclass
class RawMetadata:
    """Human metadata as found in the source dataset. Nothing is fabricated."""

    name: str | None = None
    tags: list[str] = field(default_factory=list)
    description: str | None = None
    category: str | None = None
    extra: dict = field(default_factory=dict)

    def is_empty(self) -> bool:
        return not (self.name or self.tags or self.description or self.category or self.extra)

    def to_dict(self) -> dict:
        d: dict = {}
        if self.name:
            d["name"] = self.name
        if self.tags:
            d["tags"] = list(self.tags)
        if self.description:
            d["description"] = self.description
        if self.category:
            d["category"] = self.category
        if self.extra:
            d["extra"] = dict(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RawMetadata":
        return cls(
            name=d.get("name"),
            tags=list(d.get("tags", [])),
            description=d.get("description"),
            category=d.get("category"),
            extra=dict(d.get("extra", {})),
        )


@dataclass
class ViewRef:
    """One rendered view of an asset."""

    tag: str
    path: str

    def __post_init__(self):
        if self.tag not in VIEW_TAGS:
            raise ValueError(f"view tag must be one of {VIEW_TAGS}, got {self.tag!r}")


@dataclass
class AssetRecord:
    """One 3D asset: identity, source, raw metadata, and render views."""

    asset_id: str
    dataset: Dataset
    source_uri: str
    raw_metadata: RawMetadata | None = None
    views: list[ViewRef] = field(default_factory=list)

    def __post_init__(self):
        if not self.asset_id:
            raise ValueError("asset_id must be non-empty")
        if len(self.views) > 4:
            raise ValueError("an asset carries at most 4 views")

    def to_dict(self) -> dict:
        d = {
            "asset_id": self.asset_id,
            "dataset": self.dataset.value,
            "source_uri": self.source_uri,
            "views": [{"tag": v.tag, "path": v.path} for v in self.views],
        }
        if self.raw_metadata is not None:
            d["metadata"] = self.raw_metadata.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AssetRecord":
        meta = d.get("metadata")
        return cls(
            asset_id=d["asset_id"],
            dataset=Dataset(d["dataset"]),
            source_uri=d["source_uri"],
            raw_metadata=RawMetadata.from_dict(meta) if meta is not None else None,
            views=[ViewRef(v["tag"], v["path"]) for v in d.get("views", [])],
        )


@dataclass
class LevelSet:
    """The five hierarchical captions for one asset, most to least detailed."""

    level1: str
    level2: str
    level3: str
    level4: str
    level5: str

    def get(self, level: int) -> str:
        return getattr(self, f"level{level}")

    def items(self) -> list[tuple[int, str]]:
        return [(i, self.get(i)) for i in range(1, 6)]

    def replace(self, level: int, text: str) -> "LevelSet":
        values = {f"level{i}": t for i, t in self.items()}
        values[f"level{level}"] = text
        return LevelSet(**values)

    def to_dict(self) -> dict:
        return {f"level{i}": t for i, t in self.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "LevelSet":
        return cls(**{f"level{i}": d[f"level{i}"] for i in range(1, 6)})


class ValidationReason(str, Enum):
    NO_RENDERABLE_VIEWS = "NoRenderableViews"
    ZERO_LENGTH_ANNOTATION = "ZeroLengthAnnotation"
    EXCLUDED_EXTENSION = "ExcludedExtension"


@dataclass
class ValidationResult:
    keep: bool
    reasons: list[ValidationReason] = field(default_factory=list)

    def __post_init__(self):
        if self.keep != (not self.reasons):
            raise ValueError("keep must be true exactly when reasons is empty")


def validate_record(asset: AssetRecord, levels: LevelSet | None = None) -> ValidationResult:
    """Admissibility check: renderable views present, no zero-length captions."""
    reasons = []
    if not asset.views:
        reasons.append(ValidationReason.NO_RENDERABLE_VIEWS)
    if asset.dataset is Dataset.OBJAVERSE_XL and asset.source_uri.lower().endswith(".ply"):
        reasons.append(ValidationReason.EXCLUDED_EXTENSION)
    if levels is not None and any(not text.strip() for _, text in levels.items()):
        reasons.append(ValidationReason.ZERO_LENGTH_ANNOTATION)
    return ValidationResult(keep=not reasons, reasons=reasons)


def extract_metadata(record: AssetRecord) -> RawMetadata | None:
    """Project raw source metadata into the fields each dataset contributes.

    Objaverse keeps name/tags/description, the six category datasets keep
    only the taxonomy/folder category, objaverse_xl keeps the opaque blob,
    and abo keeps the (pre-translated) listing description. Returns None
    when the source carried nothing: the pipeline still runs without it.
    """
    raw = record.raw_metadata
    if raw is None or raw.is_empty():
        return None
    if record.dataset is Dataset.OBJAVERSE:
        meta = RawMetadata(name=raw.name, tags=list(raw.tags), description=raw.description)
    elif record.dataset is Dataset.OBJAVERSE_XL:
        meta = RawMetadata(extra=dict(raw.extra))
    elif record.dataset in CATEGORY_DATASETS:
        meta = RawMetadata(category=raw.category)
    else:  # abo
        meta = RawMetadata(description=raw.description)
    return None if meta.is_empty() else meta


def _attach_views(asset_id: str, views_root: Path | None) -> list[ViewRef]:
    if views_root is None:
        return []
    views = []
    for tag in VIEW_TAGS:
        path = views_root / asset_id / f"{tag}.png"
        if path.is_file():
            views.append(ViewRef(tag=tag, path=str(path)))
    return views


def _scan_model_files(root: Path) -> list[Path]:
    files = [
        p
        for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in MODEL_EXTENSIONS and "metadata" not in p.parts
    ]
    return sorted(files)


def _sidecar_metadata(root: Path, asset_id: str) -> RawMetadata | None:
    sidecar = root / "metadata" / f"{asset_id}.json"
    if not sidecar.is_file():
        return None
    blob = json.loads(sidecar.read_text(encoding="utf-8"))
    return blob


def _build_flat(root: Path, dataset: Dataset, views_root: Path | None) -> list[AssetRecord]:
    records = []
    for path in _scan_model_files(root):
        if dataset is Dataset.OBJAVERSE_XL and path.suffix.lower() == ".ply":
            continue
        asset_id = path.stem
        blob = _sidecar_metadata(root, asset_id)
        meta: RawMetadata | None = None
        if blob:
            if dataset is Dataset.OBJAVERSE:
                meta = RawMetadata(
                    name=blob.get("name"),
                    tags=list(blob.get("tags", [])),
                    description=blob.get("description"),
                )
            else:
                meta = RawMetadata(extra=blob)
            if meta.is_empty():
                meta = None
        records.append(
            AssetRecord(
                asset_id=asset_id,
                dataset=dataset,
                source_uri=str(path),
                raw_metadata=meta,
                views=_attach_views(asset_id, views_root),
            )
        )
    return records


def _shapenet_taxonomy(root: Path) -> dict[str, str]:
    taxonomy = root / "taxonomy.json"
    if not taxonomy.is_file():
        return {}
    mapping = {}
    for entry in json.loads(taxonomy.read_text(encoding="utf-8")):
        name = entry.get("name", "")
        # taxonomy names are comma-separated synonym lists; keep the first
        mapping[entry["synsetId"]] = name.split(",")[0].strip()
    return mapping


def _build_categorized(root: Path, dataset: Dataset, views_root: Path | None) -> list[AssetRecord]:
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    loose = [p for p in root.iterdir() if p.is_file() and p.name != "taxonomy.json"]
    if not subdirs:
        if loose:
            raise UnknownLayout(
                f"{dataset.value} expects <category>/<model> directories, found loose files in {root}"
            )
        return []
    taxonomy = _shapenet_taxonomy(root) if dataset is Dataset.SHAPENET else {}
    records = []
    for cat_dir in subdirs:
        category = taxonomy.get(cat_dir.name, cat_dir.name) if dataset is Dataset.SHAPENET else cat_dir.name
        for model in sorted(cat_dir.iterdir()):
            asset_id = f"{cat_dir.name}/{model.stem if model.is_file() else model.name}"
            records.append(
                AssetRecord(
                    asset_id=asset_id,
                    dataset=dataset,
                    source_uri=str(model),
                    raw_metadata=RawMetadata(category=category),
                    views=_attach_views(asset_id, views_root),
                )
            )
    return records


def _build_abo(
    root: Path, views_root: Path | None, translate: Callable[[str], str] | None
) -> list[AssetRecord]:
    listings: dict[str, str] = {}
    listings_path = root / "listings.jsonl"
    if listings_path.is_file():
        for row in iter_jsonl(listings_path):
            listings[row["item_id"]] = row.get("text", "")
    records = []
    for path in _scan_model_files(root):
        asset_id = path.stem
        text = listings.get(asset_id, "")
        if text and translate is not None:
            text = translate(text)
        meta = RawMetadata(description=text) if text else None
        records.append(
            AssetRecord(
                asset_id=asset_id,
                dataset=Dataset.ABO,
                source_uri=str(path),
                raw_metadata=meta,
                views=_attach_views(asset_id, views_root),
            )
        )
    return records


def build_manifest(
    source_root: str | Path,
    dataset: Dataset,
    views_root: str | Path | None = None,
    translate: Callable[[str], str] | None = None,
) -> list[AssetRecord]:
    """Scan a source tree into asset records, ordered by asset id.

    Deterministic: two scans of the same tree produce identical manifests.
    ``translate`` is the optional text backend hook used for abo listings.
    """
    root = Path(source_root)
    if not root.is_dir():
        raise UnreadableRoot(f"source root not readable: {root}")
    vroot = Path(views_root) if views_root is not None else None
    if dataset in CATEGORY_DATASETS:
        records = _build_categorized(root, dataset, vroot)
    elif dataset is Dataset.ABO:
        records = _build_abo(root, vroot, translate)
    else:
        records = _build_flat(root, dataset, vroot)
    records.sort(key=lambda r: r.asset_id)
    seen: set[str] = set()
    for rec in records:
        if rec.asset_id in seen:
            raise UnknownLayout(f"duplicate asset id {rec.asset_id!r} in {root}")
        seen.add(rec.asset_id)
    return records


def write_manifest(path: str | Path, records: list[AssetRecord]) -> None:
    write_jsonl(path, (r.to_dict() for r in records))


def read_manifest(path: str | Path) -> list[AssetRecord]:
    return [AssetRecord.from_dict(d) for d in iter_jsonl(path)]
