"""Tab-separated dataset manifests.

Format::

    #size 64 64
    #norm 0.5 0.5 0.5 0.25 0.25 0.25     (optional: per-channel mean then std)
    id<TAB>image_path<TAB>mask_path

Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from .images import DataError, load_image, load_mask
from .prepare import Sample, check_target, prepare


@dataclass
class ManifestEntry:
    id: str
    image: Path
    mask: Path


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry]
    size: Tuple[int, int]
    mean: Optional[Tuple[float, ...]] = None
    std: Optional[Tuple[float, ...]] = None
    path: Optional[Path] = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    def load_sample(self, entry: ManifestEntry) -> Sample:
        image, mask = load_image(entry.image), load_mask(entry.mask)
        if image.shape[1:] != mask.shape:
            raise DataError(
                f"sample {entry.id}: image {entry.image} is {image.shape[1]}x{image.shape[2]} "
                f"but mask {entry.mask} is {mask.shape[0]}x{mask.shape[1]}"
            )
        return prepare(Sample(image, mask, entry.id), self.size, self.mean, self.std)

    def load_samples(self) -> List[Sample]:
        return [self.load_sample(e) for e in self.entries]

    def to_text(self, base: Optional[Path] = None) -> str:
        lines = [f"#size {self.size[0]} {self.size[1]}"]
        if self.mean is not None:
            lines.append("#norm " + " ".join(f"{v:.6f}" for v in tuple(self.mean) + tuple(self.std)))
        for e in self.entries:
            img, msk = (e.image, e.mask) if base is None else (_rel(e.image, base), _rel(e.mask, base))
            lines.append(f"{e.id}\t{img}\t{msk}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_text(base=path.parent))


def _rel(p: Path, base: Path) -> str:
    try:
        return str(Path(p).relative_to(base))
    except ValueError:
        return str(p)


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc})") from exc
    size = None
    mean = std = None
    entries = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        if line.startswith("#"):
            parts = line[1:].split()
            try:
                if parts and parts[0] == "size":
                    size = check_target((int(parts[1]), int(parts[2])))
                elif parts and parts[0] == "norm":
                    vals = tuple(float(v) for v in parts[1:])
                    if len(vals) != 6 or min(vals[3:]) <= 0:
                        raise ValueError("#norm needs 3 means and 3 positive stds")
                    mean, std = vals[:3], vals[3:]
            except (IndexError, ValueError) as exc:
                raise DataError(f"{where}: bad header line ({exc})") from exc
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"{where}: expected id<TAB>image<TAB>mask, got {len(fields)} fields")
        sid, img, msk = (f.strip() for f in fields)
        if sid in seen:
            raise DataError(f"{where}: duplicate id {sid!r}")
        seen.add(sid)
        entries.append(ManifestEntry(sid, path.parent / img, path.parent / msk))
    if size is None:
        raise DataError(f"{path}: missing '#size H W' header")
    if not entries:
        raise DataError(f"{path}: manifest lists no samples")
    for e in entries:
        for p in (e.image, e.mask):
            if not p.exists():
                raise DataError(f"{path}: sample {e.id}: {p} does not exist")
    return DatasetManifest(entries, size, mean, std, path=path)
