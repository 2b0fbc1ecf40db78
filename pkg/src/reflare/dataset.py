"""Image and dataset persistence: PNG/PFM codecs, bracket ingestion,
triplet serialization, and the run manifest."""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import cv2
import numpy as np

from .image import Domain, Image, LINEAR, encoded

logger = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = (".png", ".pfm")


# codecs ---------------------------------------------------------------------

def save_image(path, img: Image, bit_depth: int = 16) -> None:
    """Write PNG (8- or 16-bit fixed point, values clipped to [0,1]) or PFM
    (float32, either domain). Format chosen by file suffix."""
    path = Path(path)
    if path.suffix == ".pfm":
        save_pfm(path, img)
        return
    if path.suffix != ".png":
        raise ValueError(f"unsupported format {path.suffix!r}")
    if bit_depth == 16:
        scale, dtype = 65535, np.uint16
    elif bit_depth == 8:
        scale, dtype = 255, np.uint8
    else:
        raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")
    q = np.round(np.clip(img.data, 0.0, 1.0) * scale).astype(dtype)
    if not cv2.imwrite(str(path), q[:, :, ::-1]):  # RGB -> BGR
        raise OSError(f"failed to write {path}")


def load_image(path, domain: Domain | None = None) -> Image:
    """Load PNG (normalized v / (2^bits - 1), Encoded domain with unknown
    gamma by default) or PFM (domain from its header tag)."""
    path = Path(path)
    if path.suffix == ".pfm":
        return load_pfm(path, domain)
    if path.suffix != ".png":
        raise ValueError(f"unsupported format {path.suffix!r}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise OSError(f"cannot read {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None].repeat(3, axis=2)
    if raw.shape[2] == 4:
        raw = raw[:, :, :3]
    peak = 65535.0 if raw.dtype == np.uint16 else 255.0
    data = raw[:, :, ::-1].astype(np.float64) / peak
    return Image(data, encoded() if domain is None else domain)


def save_pfm(path, img: Image) -> None:
    """Float32 PFM, little endian, bottom-up rows.

    The header scale magnitude doubles as the domain tag: 1.0 means linear
    samples, any other magnitude is the gamma of an encoded image. Encoded
    images with unknown gamma cannot be round-tripped; pass a tagged one.
    """
    if img.domain.is_linear:
        scale = 1.0
    else:
        if img.domain.gamma is None or img.domain.gamma == 1.0:
            raise ValueError("PFM needs a known, non-unit gamma for encoded images")
        scale = float(img.domain.gamma)
    with open(path, "wb") as fh:
        fh.write(b"PF\n")
        fh.write(f"{img.width} {img.height}\n".encode())
        fh.write(f"{-scale!r}\n".encode())
        fh.write(np.ascontiguousarray(
            img.data[::-1].astype("<f4")).tobytes())


def load_pfm(path, domain: Domain | None = None) -> Image:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"PF":
            raise ValueError(f"{path}: not a color PFM file")
        w, h = (int(v) for v in fh.readline().split())
        scale = float(fh.readline())
        buf = fh.read(w * h * 3 * 4)
    dt = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(buf, dtype=dt).reshape(h, w, 3)[::-1].astype(np.float64)
    if domain is None:
        mag = abs(scale)
        domain = LINEAR if mag == 1.0 else encoded(mag)
    return Image(data, domain)


def file_checksum(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# bracket ingestion ----------------------------------------------------------

@dataclass(frozen=True)
class BracketPair:
    """Normal + lowest exposure shot of one bracketed group."""

    normal: Image
    low: Image
    group_id: str = ""
    ev_step: float = 3.0

    def __post_init__(self):
        if not self.normal.same_shape(self.low):
            raise ValueError(f"bracket pair {self.group_id}: dimension mismatch")
        if self.normal.domain.is_linear or self.low.domain.is_linear:
            raise ValueError("bracket shots must be gamma-encoded")


EXPOSURE_SIDECAR = "exposures.json"


def _order_shots(group_dir: Path) -> list[Path]:
    """Shots ordered darkest first. Default: lexicographic filename order
    (brightest last); an ``exposures.json`` sidecar mapping filename -> EV
    overrides it."""
    shots = sorted(p for p in group_dir.iterdir()
                   if p.suffix.lower() in SUPPORTED_SUFFIXES)
    sidecar = group_dir / EXPOSURE_SIDECAR
    if sidecar.exists():
        evs = json.loads(sidecar.read_text())
        shots = sorted(shots, key=lambda p: (float(evs[p.name]), p.name))
    return shots


def scan_bracket_groups(root_dir, group_size: int = 5,
                        ) -> tuple[list[BracketPair], list[str]]:
    """Ingest a ``root/<group_id>/<shot>`` tree into bracket pairs.

    Per group, the middle exposure becomes the normal shot and the darkest
    becomes the low shot. Groups with the wrong shot count are skipped and
    reported in the returned warning list. Output order is the sorted
    group id order, independent of filesystem enumeration.
    """
    root = Path(root_dir)
    pairs: list[BracketPair] = []
    warnings: list[str] = []
    for group_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        shots = _order_shots(group_dir)
        if len(shots) != group_size:
            msg = (f"group {group_dir.name!r}: expected {group_size} shots, "
                   f"found {len(shots)}; skipped")
            warnings.append(msg)
            logger.warning(msg)
            continue
        low = load_image(shots[0])
        normal = load_image(shots[len(shots) // 2])
        pairs.append(BracketPair(normal=normal, low=low, group_id=group_dir.name))
    return pairs, warnings


# triplet + manifest persistence ---------------------------------------------

TRIPLET_FILES = ("corrupted", "flare_free", "flare", "mask", "prior")


@dataclass
class ManifestRecord:
    pair_id: str
    paths: dict[str, str]
    split: str = "train"
    checksums: dict[str, str] = field(default_factory=dict)
    seed: int | None = None


@dataclass
class DatasetManifest:
    records: list[ManifestRecord] = field(default_factory=list)

    def add(self, record: ManifestRecord) -> None:
        if any(r.pair_id == record.pair_id for r in self.records):
            raise ValueError(f"duplicate manifest id {record.pair_id!r}")
        self.records.append(record)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        m = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                m.add(ManifestRecord(**json.loads(line)))
        return m

    def validate(self, base_dir=".") -> None:
        """Check that all files exist and their checksums still match."""
        base = Path(base_dir)
        for r in self.records:
            for key, rel in r.paths.items():
                p = base / rel
                if not p.exists():
                    raise FileNotFoundError(f"{r.pair_id}: missing {rel}")
                want = r.checksums.get(key)
                if want and file_checksum(p) != want:
                    raise ValueError(f"{r.pair_id}: checksum mismatch on {rel}")


def write_triplet(out_dir, triplet, manifest: DatasetManifest,
                  pair_id: str, prior: Image | None = None,
                  base_dir=None) -> ManifestRecord:
    """Persist one synthesized triplet under ``out_dir/<pair_id>/`` and
    register it in the manifest. Images go to 16-bit PNG, the mask to
    8-bit PNG, and the sampled parameters to a JSON sidecar."""
    out_dir = Path(out_dir)
    base = Path(base_dir) if base_dir is not None else out_dir
    item_dir = out_dir / pair_id
    item_dir.mkdir(parents=True, exist_ok=True)
    images = {
        "corrupted": triplet.corrupted,
        "flare_free": triplet.flare_free,
        "flare": triplet.flare,
        "mask": Image(triplet.mask[:, :, None].repeat(3, axis=2).astype(np.float64),
                      encoded()),
    }
    if prior is not None:
        images["prior"] = prior
    paths, checksums = {}, {}
    for name, img in images.items():
        p = item_dir / f"{name}.png"
        save_image(p, img, bit_depth=8 if name == "mask" else 16)
        paths[name] = str(p.relative_to(base))
        checksums[name] = file_checksum(p)
    sidecar = item_dir / "params.json"
    sidecar.write_text(json.dumps(triplet.params.to_dict(), indent=2, sort_keys=True))
    paths["params"] = str(sidecar.relative_to(base))
    checksums["params"] = file_checksum(sidecar)
    record = ManifestRecord(pair_id=pair_id, paths=paths, checksums=checksums,
                            seed=triplet.params.seed)
    manifest.add(record)
    return record


def read_triplet(item_dir):
    """Load a persisted triplet directory back into a FlareTriplet."""
    from .synthesis import FlareTriplet, SampledParams

    item_dir = Path(item_dir)
    params = SampledParams.from_dict(json.loads((item_dir / "params.json").read_text()))
    dom = encoded(params.gamma)
    return FlareTriplet(
        corrupted=load_image(item_dir / "corrupted.png", dom),
        flare_free=load_image(item_dir / "flare_free.png", dom),
        flare=load_image(item_dir / "flare.png", dom),
        mask=load_image(item_dir / "mask.png").data[:, :, 0] > 0.5,
        params=params,
    )
