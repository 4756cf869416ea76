"""Dataset generation: scene planning, rendering and the manifest.

Each image index gets its own random stream seeded by ``(seed, index)``, so the
output does not depend on how many workers run or in which order they finish.
With ``all_blend_same_image`` one plan is rendered once per blend method and
the renders share a ``group_id``.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .background import background_from_dir, list_frames
from .compositor import (
    AugmentSpec,
    CompositeResult,
    GapConfig,
    Inpaint,
    ObjectCutout,
    Placement,
    compose_scene,
    place_mask,
    sample_placement,
    transform_cutout,
)
from .config import SynthConfig
from .errors import (
    EmptyAssetDirError,
    MissingOriginError,
    NoValidPlacementError,
    PastesynthError,
    SynthesisAbortedError,
)
from .imaging import load_image, load_mask, mask_to_rle, save_image
from .inpaint import fill_gap
from .morphology import GapMode

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
PLACEMENT_TRIES = 20
ABORT_FRACTION = 0.10


# Assets --------------------------------------------------------------------


def list_cutouts(cutout_dir) -> list[str]:
    """Stems of ``name.png`` files that have a ``name.mask.png`` partner."""
    d = Path(cutout_dir)
    if not d.is_dir():
        raise EmptyAssetDirError(f"cutout directory not found: {d}")
    stems = sorted(
        p.name[: -len(".png")]
        for p in d.glob("*.png")
        if not p.name.endswith(".mask.png") and (d / (p.name[: -len(".png")] + ".mask.png")).is_file()
    )
    if not stems:
        raise EmptyAssetDirError(f"no image/mask cutout pairs in {d}")
    return stems


def load_cutout(cutout_dir, stem: str) -> ObjectCutout:
    d = Path(cutout_dir)
    image = load_image(d / f"{stem}.png")
    mask = load_mask(d / f"{stem}.mask.png")
    category, origin = stem, None
    sidecar = d / f"{stem}.json"
    if sidecar.is_file():
        meta = json.loads(sidecar.read_text())
        category = meta.get("category") or stem
        if meta.get("origin") is not None:
            origin = tuple(int(v) for v in meta["origin"])
    return ObjectCutout(image, mask, category, origin)


@dataclass(frozen=True)
class Assets:
    backgrounds: tuple[str, ...]
    cutouts: tuple[str, ...]
    background_dir: Path
    cutout_dir: Path
    median_window: int | None

    @classmethod
    def scan(cls, cfg: SynthConfig) -> "Assets":
        bdir = cfg.resolve(cfg.background_dir)
        if not bdir.is_dir():
            raise EmptyAssetDirError(f"background directory not found: {bdir}")
        bgs = tuple(p.name for p in list_frames(bdir))
        if not bgs:
            raise EmptyAssetDirError(f"no PNG/JPEG backgrounds in {bdir}")
        cdir = cfg.resolve(cfg.cutout_dir)
        window = cfg.median_window if cfg.gap_mode is GapMode.FOREGROUND else None
        return cls(bgs, tuple(list_cutouts(cdir)), bdir, cdir, window)

    def background(self, name: str) -> np.ndarray:
        return _load_background(str(self.background_dir), name, self.median_window)

    def cutout(self, stem: str) -> ObjectCutout:
        return _load_cutout_cached(str(self.cutout_dir), stem)


@lru_cache(maxsize=64)
def _load_background(bdir: str, name: str, window: int | None) -> np.ndarray:
    if window is not None:
        return background_from_dir(bdir, window)
    return load_image(Path(bdir) / name)


@lru_cache(maxsize=512)
def _load_cutout_cached(cdir: str, stem: str) -> ObjectCutout:
    return load_cutout(cdir, stem)


# Planning ------------------------------------------------------------------


@dataclass(frozen=True)
class PlannedObject:
    source: str
    augment: AugmentSpec
    cutout: ObjectCutout
    placement: Placement


@dataclass(frozen=True)
class ScenePlan:
    image_index: int
    background_source: str
    background: np.ndarray
    objects: tuple[PlannedObject, ...]
    blend_choice: int
    inpaint_seed: int

    @property
    def group_id(self) -> str:
        return f"{self.image_index:06d}"


def scene_rng(seed: int, image_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, image_index]))


def _occlusion_ok(masks: list[np.ndarray], new: np.ndarray, max_occlusion: float) -> bool:
    """Would pasting ``new`` on top leave every earlier visible mask large enough?"""
    covered = new.copy()
    for m in reversed(masks):
        area = m.sum()
        if area and (m & covered).sum() / area > max_occlusion:
            return False
        covered |= m
    return True


def _sample_augment(cfg: SynthConfig, rng: np.random.Generator) -> AugmentSpec:
    a = cfg.augment
    return AugmentSpec(
        scale=float(rng.uniform(*a.scale)),
        rotation_deg=float(rng.uniform(*a.rotation_deg)),
        flip_h=bool(rng.random() < a.flip_prob),
        gain=float(rng.uniform(*a.gain)),
    )


def plan_scene(cfg: SynthConfig, assets: Assets, image_index: int, rng: np.random.Generator | None = None) -> ScenePlan:
    """Choose background, cutouts, augmentations and placements for one scene.

    Instance mode samples everything at random.  Foreground mode uses the
    median background and pastes each cutout untransformed at its recorded
    origin.
    """
    rng = rng if rng is not None else scene_rng(cfg.seed, image_index)
    foreground = cfg.gap_mode is GapMode.FOREGROUND
    if foreground and cfg.median_window:
        bg_source = f"median:{cfg.median_window}"
        bg_name = assets.backgrounds[0]
    else:
        bg_name = assets.backgrounds[int(rng.integers(len(assets.backgrounds)))]
        bg_source = bg_name
    bg = assets.background(bg_name)
    bh, bw = bg.shape[:2]

    lo, hi = cfg.objects_per_image
    k = int(rng.integers(lo, hi + 1))
    if foreground:
        picks = rng.permutation(len(assets.cutouts))[: min(k, len(assets.cutouts))]
    else:
        picks = rng.integers(len(assets.cutouts), size=k)

    objects: list[PlannedObject] = []
    canvas: list[np.ndarray] = []
    for ci in picks:
        stem = assets.cutouts[int(ci)]
        base = assets.cutout(stem)
        if foreground:
            if base.origin is None:
                raise MissingOriginError(f"cutout {stem!r} has no origin; foreground mode needs one")
            aug = AugmentSpec()
            cut = base
            candidates = [Placement(*base.origin)]
        else:
            aug = _sample_augment(cfg, rng)
            cut = transform_cutout(base, aug)
            candidates = None
        for attempt in range(1 if foreground else PLACEMENT_TRIES):
            if candidates is not None:
                p = candidates[0]
            else:
                try:
                    p = sample_placement(rng, bw, bh, cut.width, cut.height, cfg.max_truncation, cut.mask)
                except NoValidPlacementError:
                    logger.debug("scene %d: %s does not fit, dropped", image_index, stem)
                    break
            m = place_mask(cut.mask, p, (bh, bw))
            if m.any() and _occlusion_ok(canvas, m, cfg.max_occlusion):
                objects.append(PlannedObject(stem, aug, cut, p))
                canvas.append(m)
                break
        else:
            logger.debug("scene %d: no acceptable placement for %s, dropped", image_index, stem)

    blend_choice = int(rng.integers(len(cfg.blend_methods)))
    inpaint_seed = int(rng.integers(2**32))
    return ScenePlan(image_index, bg_source, bg, tuple(objects), blend_choice, inpaint_seed)


# Rendering -----------------------------------------------------------------


def render_scene(plan: ScenePlan, blend, cfg: SynthConfig) -> tuple[CompositeResult, np.ndarray]:
    """Compose the plan with one blend method; inpainting also fills the gap."""
    gap_cfg = GapConfig(cfg.gap_mode, cfg.gap.se_out, cfg.gap.se_in)
    placed = [(o.cutout, o.placement, blend) for o in plan.objects]
    result = compose_scene(plan.background, placed, gap_cfg)
    if isinstance(blend, Inpaint):
        backend = blend.backend or cfg.inpaint.make_backend(plan.inpaint_seed)
        return result, fill_gap(result, backend)
    return result, result.image


def _render_group(cfg: SynthConfig, assets: Assets, image_index: int, out_dir: Path | None):
    """Plan and render one scene; returns (images, annotations, errors) as JSON dicts."""
    blends = cfg.blends()
    try:
        plan = plan_scene(cfg, assets, image_index)
    except PastesynthError as exc:
        return [], [], [{"image_index": image_index, "blend_method": None, "error": f"{type(exc).__name__}: {exc}"}]
    chosen = blends if cfg.all_blend_same_image else [blends[plan.blend_choice]]
    rendered = []
    for blend in chosen:
        try:
            result, final = render_scene(plan, blend, cfg)
        except PastesynthError as exc:
            # a partial group would break the same-placement contract
            return [], [], [
                {"image_index": image_index, "blend_method": blend.tag, "error": f"{type(exc).__name__}: {exc}"}
            ]
        rendered.append((blend, result, final))

    images, annotations = [], []
    for blend, result, final in rendered:
        image_id = f"{plan.group_id}_{blend.tag}"
        fname = f"{image_id}.png"
        if out_dir is not None:
            save_image(final, out_dir / fname)
        h, w = final.shape[:2]
        images.append(
            {
                "image_id": image_id,
                "file": fname,
                "width": w,
                "height": h,
                "background_source": plan.background_source,
                "group_id": plan.group_id,
                "blend_method": blend.tag,
                "gap": mask_to_rle(result.gap).to_json(),
            }
        )
        for ann in result.annotations:
            rec = ann.to_json()
            rec["image_id"] = image_id
            rec["blend_method"] = blend.tag
            annotations.append(rec)
    return images, annotations, []


_WORKER_STATE: dict = {}


def _worker_init(cfg: SynthConfig, assets: Assets, out_dir: Path | None):
    _WORKER_STATE.update(cfg=cfg, assets=assets, out_dir=out_dir)


def _worker_run(image_index: int):
    s = _WORKER_STATE
    return image_index, _render_group(s["cfg"], s["assets"], image_index, s["out_dir"])


def build_manifest(cfg: SynthConfig, results) -> dict:
    images, annotations, errors = [], [], []
    for _, (imgs, anns, errs) in sorted(results, key=lambda r: r[0]):
        images.extend(imgs)
        annotations.extend(anns)
        errors.extend(errs)
    echo = cfg.to_dict()
    echo.pop("output_dir")
    return {
        "version": MANIFEST_VERSION,
        "config": echo,
        "images": images,
        "annotations": annotations,
        "errors": errors,
    }


def check_assets(cfg: SynthConfig) -> Assets:
    """Scan asset directories and decode every cutout and the first background."""
    assets = Assets.scan(cfg)
    for stem in assets.cutouts:
        c = assets.cutout(stem)
        if cfg.gap_mode is GapMode.FOREGROUND and c.origin is None:
            raise MissingOriginError(f"cutout {stem!r} has no origin; foreground mode needs one")
    assets.background(assets.backgrounds[0])
    plan_scene(cfg, assets, 0)
    return assets


def generate_dataset(cfg: SynthConfig, workers: int | None = None, dry_run: bool = False) -> dict:
    """Render ``cfg.num_images`` scene plans and write PNGs plus ``manifest.json``.

    With ``dry_run`` the config and assets are validated and nothing is written.
    """
    assets = check_assets(cfg)
    if dry_run:
        return build_manifest(cfg, [])
    out_dir = cfg.resolve(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = workers or os.cpu_count() or 1
    indices = range(cfg.num_images)
    if workers <= 1:
        results = [(i, _render_group(cfg, assets, i, out_dir)) for i in indices]
    else:
        with ProcessPoolExecutor(workers, initializer=_worker_init, initargs=(cfg, assets, out_dir)) as pool:
            results = list(pool.map(_worker_run, indices))
    manifest = build_manifest(cfg, results)
    failed = len({e["image_index"] for e in manifest["errors"]})
    if failed > ABORT_FRACTION * cfg.num_images:
        raise SynthesisAbortedError(
            f"{failed} of {cfg.num_images} scenes failed; first error: {manifest['errors'][0]['error']}"
        )
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return json.loads(path.read_text())
