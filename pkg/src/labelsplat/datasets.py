"""On-disk formats: scene bundles, Gaussian checkpoints, tracker frames.

A scene bundle is a directory holding one cameras.json manifest plus per-view
rasters named by view id:

    cameras.json                 manifest; unknown keys preserved on round trip
    images/{id}.png              8-bit RGB
    labels/{id}.png              16-bit grayscale, pixel value = label id
    depth/{id}.lgsd              optional raw float32 (header below)
    unocclusion/{id}_{k}.png     optional 8-bit binary mask per (view, label)

Depth files carry a 16-byte header (magic "LGSD", u32 width, u32 height,
u32 reserved, little endian) followed by row-major float32. Smaller depth =
nearer; disparity-style maps must be loaded with disparity=True, which maps
d -> 1/d (nonpositive disparity becomes the far sentinel).

Checkpoints are binary little-endian PLY with the vanilla-3DGS vertex layout
(x,y,z, nx,ny,nz, f_dc_0..2, opacity, scale_0..2, rot_0..3, all float32)
plus a uint label property, so stock viewers can open the geometry and the
label survives. f_dc stores (color - 0.5) / 0.28209479177387814 (degree-0
spherical-harmonic convention). Round trips are byte-exact.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from PIL import Image

from .scene import Camera, DepthMap, GaussianScene, LabelMap, ViewRecord

DEPTH_MAGIC = b"LGSD"
FAR_SENTINEL = 1e6
SH_C0 = 0.28209479177387814

_MANIFEST_VIEW_KEYS = ("id", "width", "height", "fx", "fy", "cx", "cy",
                       "rotation", "translation", "split")


@dataclass
class SceneBundle:
    """Views plus their train/test splits and any unrecognized manifest data
    (kept verbatim so foreign tooling's annotations survive a round trip)."""

    views: List[ViewRecord]
    splits: List[str]
    extra: Dict = field(default_factory=dict)
    view_extra: List[Dict] = None

    def __post_init__(self):
        if self.view_extra is None:
            self.view_extra = [{} for _ in self.views]
        if len(self.views) != len(self.splits):
            raise ValueError("one split per view required")
        if len(self.views) != len(self.view_extra):
            raise ValueError("one extra dict per view required")
        for s in self.splits:
            if s not in ("train", "test"):
                raise ValueError(f"split must be 'train' or 'test', got {s!r}")

    def train_views(self) -> List[ViewRecord]:
        return [v for v, s in zip(self.views, self.splits) if s == "train"]

    def test_views(self) -> List[ViewRecord]:
        return [v for v, s in zip(self.views, self.splits) if s == "test"]


def _save_image_u8(path, image: np.ndarray) -> None:
    # path may be a filesystem path or a binary file object; the explicit
    # format keeps the bytes identical either way
    arr = np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0),
                  0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def _load_image_u8(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def _save_labels_u16(path, ids: np.ndarray) -> None:
    if ids.max(initial=0) > 65535:
        raise ValueError("label ids above 65535 do not fit the 16-bit "
                         "label PNG format")
    Image.fromarray(ids.astype(np.uint16)).save(path, format="PNG")


def _load_labels_u16(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img, dtype=np.int32)


def save_depth(path: Path, depth: np.ndarray) -> None:
    depth = np.ascontiguousarray(depth, dtype=np.float32)
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC + struct.pack("<III", w, h, 0))
        f.write(depth.tobytes())


def load_depth(path: Path, disparity: bool = False) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != DEPTH_MAGIC:
        raise ValueError(f"{path}: not a depth file (bad magic)")
    w, h, _ = struct.unpack("<III", raw[4:16])
    payload = np.frombuffer(raw[16:], dtype="<f4")
    if payload.size != w * h:
        raise ValueError(f"{path}: payload holds {payload.size} values, "
                         f"header says {w}x{h}")
    depth = payload.reshape(h, w).astype(np.float64)
    if not np.all(np.isfinite(depth)):
        raise ValueError(f"{path}: non-finite depth values")
    if disparity:
        with np.errstate(divide="ignore"):
            depth = np.where(depth > 0, 1.0 / depth, FAR_SENTINEL)
    return depth


def _camera_entry(cam: Camera, split: str) -> Dict:
    return {
        "id": cam.id,
        "width": cam.width, "height": cam.height,
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "rotation": [float(x) for x in cam.rotation.reshape(-1)],
        "translation": [float(x) for x in cam.translation],
        "split": split,
    }


def _camera_from_entry(entry: Dict, where: str) -> Camera:
    for key in _MANIFEST_VIEW_KEYS:
        if key not in entry:
            raise ValueError(f"{where}: manifest entry missing field {key!r}")
    R = np.asarray(entry["rotation"], dtype=np.float64)
    if R.size != 9:
        raise ValueError(f"{where}: rotation must hold 9 row-major floats")
    return Camera(
        id=str(entry["id"]), width=int(entry["width"]), height=int(entry["height"]),
        fx=float(entry["fx"]), fy=float(entry["fy"]),
        cx=float(entry["cx"]), cy=float(entry["cy"]),
        rotation=R.reshape(3, 3),
        translation=np.asarray(entry["translation"], dtype=np.float64),
    )


def save_bundle(bundle: SceneBundle, path) -> None:
    """Write the bundle directory. Images quantize to 8 bits (the on-disk
    format); everything else is lossless."""
    if not bundle.views:
        raise ValueError("refusing to save a bundle with no views")
    root = Path(path)
    for sub in ("images", "labels"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    entries = []
    for view, split, extra in zip(bundle.views, bundle.splits, bundle.view_extra):
        entry = _camera_entry(view.camera, split)
        for k, v in extra.items():
            if k not in entry:
                entry[k] = v
        entries.append(entry)
        vid = view.camera.id
        _save_image_u8(root / "images" / f"{vid}.png", view.image)
        _save_labels_u16(root / "labels" / f"{vid}.png", view.label_map.ids)
        if view.depth_map is not None:
            (root / "depth").mkdir(exist_ok=True)
            save_depth(root / "depth" / f"{vid}.lgsd", view.depth_map.values)
        if view.unocclusion:
            (root / "unocclusion").mkdir(exist_ok=True)
            for k, mask in sorted(view.unocclusion.items()):
                arr = (np.asarray(mask, dtype=bool) * np.uint8(255))
                Image.fromarray(arr).save(
                    root / "unocclusion" / f"{vid}_{k}.png")
    manifest = {"views": entries}
    for k, v in bundle.extra.items():
        if k != "views":
            manifest[k] = v
    (root / "cameras.json").write_text(json.dumps(manifest, indent=1))


def load_bundle(path, disparity: bool = False) -> SceneBundle:
    """Read a bundle directory back; see save_bundle. disparity=True treats
    depth payloads as disparity maps and inverts them on load."""
    root = Path(path)
    manifest_path = root / "cameras.json"
    if not manifest_path.is_file():
        raise ValueError(f"{manifest_path}: missing cameras manifest")
    manifest = json.loads(manifest_path.read_text())
    entries = manifest.get("views", [])
    if not entries:
        raise ValueError(f"{manifest_path}: bundle has no views")
    views, splits, view_extra = [], [], []
    extra = {k: v for k, v in manifest.items() if k != "views"}
    for entry in entries:
        where = f"{manifest_path}[{entry.get('id', '?')}]"
        cam = _camera_from_entry(entry, where)
        img_path = root / "images" / f"{cam.id}.png"
        lab_path = root / "labels" / f"{cam.id}.png"
        for p, fieldname in ((img_path, "image"), (lab_path, "labels")):
            if not p.is_file():
                raise ValueError(f"{where}: missing {fieldname} file {p}")
        image = _load_image_u8(img_path)
        if image.shape[:2] != (cam.height, cam.width):
            raise ValueError(f"{img_path}: image is {image.shape[1]}x"
                             f"{image.shape[0]}, manifest says "
                             f"{cam.width}x{cam.height}")
        ids = _load_labels_u16(lab_path)
        if ids.shape != (cam.height, cam.width):
            raise ValueError(f"{lab_path}: label map is {ids.shape[1]}x"
                             f"{ids.shape[0]}, manifest says "
                             f"{cam.width}x{cam.height}")
        depth_path = root / "depth" / f"{cam.id}.lgsd"
        depth = None
        if depth_path.is_file():
            d = load_depth(depth_path, disparity=disparity)
            if d.shape != (cam.height, cam.width):
                raise ValueError(f"{depth_path}: depth is {d.shape[1]}x"
                                 f"{d.shape[0]}, manifest says "
                                 f"{cam.width}x{cam.height}")
            depth = DepthMap(d)
        unocc = {}
        unocc_dir = root / "unocclusion"
        if unocc_dir.is_dir():
            for p in sorted(unocc_dir.glob(f"{cam.id}_*.png")):
                k = int(p.stem[len(cam.id) + 1:])
                with Image.open(p) as img:
                    mask = np.asarray(img.convert("L")) > 127
                if mask.shape != (cam.height, cam.width):
                    raise ValueError(f"{p}: mask is {mask.shape[1]}x"
                                     f"{mask.shape[0]}, manifest says "
                                     f"{cam.width}x{cam.height}")
                unocc[k] = mask
        views.append(ViewRecord(camera=cam, image=image, label_map=LabelMap(ids),
                                depth_map=depth, unocclusion=unocc or None))
        splits.append(str(entry["split"]))
        view_extra.append({k: v for k, v in entry.items()
                           if k not in _MANIFEST_VIEW_KEYS})
    return SceneBundle(views=views, splits=splits, extra=extra,
                       view_extra=view_extra)


_PLY_FLOAT_PROPS = ("x", "y", "z", "nx", "ny", "nz",
                    "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
                    "scale_0", "scale_1", "scale_2",
                    "rot_0", "rot_1", "rot_2", "rot_3")


def save_checkpoint(scene: GaussianScene, path) -> None:
    n = len(scene)
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {n}"]
    header += [f"property float {p}" for p in _PLY_FLOAT_PROPS]
    header += ["property uint label", "end_header"]
    rec = np.zeros(n, dtype=_ply_dtype(with_label=True))
    rec["x"], rec["y"], rec["z"] = scene.means.T.astype(np.float32)
    f_dc = ((scene.colors - 0.5) / SH_C0).astype(np.float32)
    rec["f_dc_0"], rec["f_dc_1"], rec["f_dc_2"] = f_dc.T
    rec["opacity"] = scene.opacity_logits.astype(np.float32)
    rec["scale_0"], rec["scale_1"], rec["scale_2"] = \
        scene.log_scales.T.astype(np.float32)
    rec["rot_0"], rec["rot_1"], rec["rot_2"], rec["rot_3"] = \
        scene.rotations.T.astype(np.float32)
    rec["label"] = scene.labels.astype(np.uint32)
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(rec.tobytes())


def _ply_dtype(with_label: bool) -> np.dtype:
    fields = [(p, "<f4") for p in _PLY_FLOAT_PROPS]
    if with_label:
        fields.append(("label", "<u4"))
    return np.dtype(fields)


_PLY_TYPES = {"float": "<f4", "uint": "<u4", "uchar": "<u1", "int": "<i4",
              "ushort": "<u2", "double": "<f8"}


def load_checkpoint(path) -> GaussianScene:
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise ValueError(f"{path}: not a PLY checkpoint")
    lines = raw[:end].decode("ascii").splitlines()
    if not any(l.startswith("format binary_little_endian") for l in lines):
        raise ValueError(f"{path}: only binary little-endian PLY supported")
    n = None
    props: List[tuple] = []
    for line in lines:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "property":
            if parts[1] not in _PLY_TYPES:
                raise ValueError(f"{path}: unsupported property type {parts[1]}")
            props.append((parts[2], _PLY_TYPES[parts[1]]))
    if n is None:
        raise ValueError(f"{path}: no vertex element")
    rec = np.frombuffer(raw[end + len(b"end_header\n"):],
                        dtype=np.dtype(props), count=n)
    names = {p[0] for p in props}
    missing = [p for p in _PLY_FLOAT_PROPS if p not in names]
    if missing:
        raise ValueError(f"{path}: checkpoint lacks properties {missing}")
    means = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    f_dc = np.stack([rec["f_dc_0"], rec["f_dc_1"], rec["f_dc_2"]],
                    axis=1).astype(np.float64)
    colors = np.clip(f_dc * SH_C0 + 0.5, 0.0, 1.0)
    log_scales = np.stack([rec["scale_0"], rec["scale_1"], rec["scale_2"]],
                          axis=1).astype(np.float64)
    rots = np.stack([rec[f"rot_{i}"] for i in range(4)], axis=1).astype(np.float64)
    # renormalize only rows that need it: float32 quantization of unit
    # quaternions stays within tolerance, and untouched rows keep the
    # round trip byte-exact
    norms = np.linalg.norm(rots, axis=1)
    bad = np.abs(norms - 1.0) > 1e-6
    if bad.any():
        rots[bad] /= np.where(norms[bad] > 0, norms[bad], 1.0)[:, None]
    if "label" in names:
        labels = rec["label"].astype(np.int32)
    else:
        warnings.warn(f"{path}: no label property; loading all Gaussians "
                      "unlabeled (vanilla checkpoint)")
        labels = np.zeros(n, dtype=np.int32)
    return GaussianScene(
        means=means, log_scales=log_scales, rotations=rots,
        opacity_logits=rec["opacity"].astype(np.float64),
        colors=colors, labels=labels,
    )


def adopt_bundle_background(scene: GaussianScene,
                            bundle: SceneBundle) -> GaussianScene:
    """Render a checkpoint against the background its bundle declares.

    Checkpoints serialize per-Gaussian rows only (stock viewers expect no
    scene-level fields), so a loaded scene starts on black; bundles may carry
    the true background under the manifest key "background"."""
    bg = bundle.extra.get("background")
    if bg is not None:
        bg = np.asarray([float(c) for c in bg], dtype=np.float64)
        if bg.shape != (3,):
            raise ValueError("bundle background must be 3 floats")
        scene.background_color = bg
    return scene


def save_frame_sequence(frames: Sequence, path) -> None:
    """Write a densified view path for an external tracker: numbered 8-bit
    PNGs plus path.json recording which indices are original training views."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    index = []
    for i, frame in enumerate(frames):
        name = f"{i:05d}.png"
        _save_image_u8(root / name, frame.image)
        index.append({"index": i, "file": name, "camera_id": frame.camera.id,
                      "is_original": bool(frame.is_original)})
    (root / "path.json").write_text(json.dumps({"frames": index}, indent=1))
