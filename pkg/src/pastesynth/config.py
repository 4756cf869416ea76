"""Synthesis configuration: JSON schema, parsing and presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .compositor import BlendMethod, Gaussian, Inpaint, NoBlend, Poisson
from .errors import ConfigError
from .inpaint import PatchMatchParams, ServiceEndpoint
from .morphology import GapMode, StructElem

PRESETS = ("gmu-instance", "cdnet-foreground")

_range = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_int_range = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SynthConfig",
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "seed", "num_images", "background_dir", "cutout_dir", "blend_methods", "output_dir"],
    "properties": {
        "mode": {"enum": ["instance", "foreground"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "num_images": {"type": "integer", "minimum": 1},
        "objects_per_image": _int_range,
        "background_dir": {"type": "string", "minLength": 1},
        "cutout_dir": {"type": "string", "minLength": 1},
        "augment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scale": _range,
                "rotation_deg": _range,
                "flip_prob": {"type": "number", "minimum": 0, "maximum": 1},
                "gain": _range,
            },
        },
        "blend_methods": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["type"],
                "properties": {
                    "type": {"enum": ["noblend", "gaussian", "poisson", "inpaint"]},
                    "sigma": {"type": "number", "exclusiveMinimum": 0},
                    "guidance": {"enum": ["source", "mixed"]},
                    "tol": {"type": "number", "exclusiveMinimum": 0},
                    "max_iter": {"type": ["integer", "null"], "minimum": 1},
                },
                "additionalProperties": False,
            },
        },
        "all_blend_same_image": {"type": "boolean"},
        "gap": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r_out": {"type": "integer", "minimum": 1},
                "r_in": {"type": "integer", "minimum": 1},
                "shape": {"enum": ["square", "disc"]},
            },
        },
        "inpaint": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "backend": {"enum": ["patchmatch", "service"]},
                "patch_size": {"type": "integer", "minimum": 1},
                "pyramid_levels": {"type": ["integer", "null"], "minimum": 1},
                "iters_per_level": {"type": "integer", "minimum": 1},
                "em_rounds": {"type": "integer", "minimum": 1},
                "search_radius_decay": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "endpoint": {"type": ["string", "null"]},
                "timeout_ms": {"type": "integer", "minimum": 1},
                "retries": {"type": "integer", "minimum": 0},
            },
        },
        "max_truncation": {"type": "number", "minimum": 0, "maximum": 1},
        "max_occlusion": {"type": "number", "minimum": 0, "maximum": 1},
        "median_window": {"type": ["integer", "null"], "minimum": 1},
        "output_dir": {"type": "string", "minLength": 1},
    },
}


@dataclass
class AugmentRanges:
    scale: tuple[float, float] = (0.8, 1.2)
    rotation_deg: tuple[float, float] = (-20.0, 20.0)
    flip_prob: float = 0.5
    gain: tuple[float, float] = (0.8, 1.2)


@dataclass
class GapSettings:
    r_out: int = 3
    r_in: int = 3
    shape: str = "square"

    @property
    def se_out(self) -> StructElem:
        return StructElem(self.shape, self.r_out)

    @property
    def se_in(self) -> StructElem:
        return StructElem(self.shape, self.r_in)


@dataclass
class InpaintSettings:
    backend: str = "patchmatch"
    patch_size: int = 7
    pyramid_levels: int | None = None
    iters_per_level: int = 5
    em_rounds: int = 3
    search_radius_decay: float = 0.5
    endpoint: str | None = None
    timeout_ms: int = 30000
    retries: int = 2

    def make_backend(self, seed: int):
        if self.backend == "service":
            if not self.endpoint:
                raise ConfigError("inpaint.backend 'service' needs inpaint.endpoint")
            return ServiceEndpoint(self.endpoint, timeout_ms=self.timeout_ms, retries=self.retries)
        return PatchMatchParams(
            patch_size=self.patch_size,
            pyramid_levels=self.pyramid_levels,
            iters_per_level=self.iters_per_level,
            em_rounds=self.em_rounds,
            search_radius_decay=self.search_radius_decay,
            seed=seed,
        )


@dataclass
class SynthConfig:
    mode: str
    seed: int
    num_images: int
    background_dir: str
    cutout_dir: str
    blend_methods: list[dict]
    output_dir: str
    objects_per_image: tuple[int, int] = (1, 3)
    augment: AugmentRanges = field(default_factory=AugmentRanges)
    all_blend_same_image: bool = False
    gap: GapSettings = field(default_factory=GapSettings)
    inpaint: InpaintSettings = field(default_factory=InpaintSettings)
    max_truncation: float = 0.25
    max_occlusion: float = 0.5
    median_window: int | None = None
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def __post_init__(self):
        lo, hi = self.objects_per_image
        if lo > hi:
            raise ConfigError("objects_per_image: min > max")
        for name in ("scale", "rotation_deg", "gain"):
            a, b = getattr(self.augment, name)
            if a > b:
                raise ConfigError(f"augment.{name}: min > max")
        if self.augment.scale[0] <= 0 or self.augment.gain[0] <= 0:
            raise ConfigError("augment scale and gain must be positive")
        if self.all_blend_same_image and len(self.blend_methods) < 2:
            raise ConfigError("all_blend_same_image needs at least two blend methods")
        tags = [m["type"] for m in self.blend_methods]
        if len(set(tags)) != len(tags):
            raise ConfigError(f"blend methods must have distinct types, got {tags}")
        if self.mode == "instance" and lo < 1:
            raise ConfigError("instance mode needs at least one object per image")

    @property
    def gap_mode(self) -> GapMode:
        return GapMode(self.mode)

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def blends(self) -> list[BlendMethod]:
        return [parse_blend(m) for m in self.blend_methods]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["objects_per_image"] = list(self.objects_per_image)
        for k in ("scale", "rotation_deg", "gain"):
            d["augment"][k] = list(d["augment"][k])
        return d

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | str = ".") -> "SynthConfig":
        validate(data)
        d = dict(data)
        if "augment" in d:
            a = d["augment"]
            d["augment"] = AugmentRanges(
                **{k: (tuple(v) if isinstance(v, list) else v) for k, v in a.items()}
            )
        if "gap" in d:
            d["gap"] = GapSettings(**d["gap"])
        if "inpaint" in d:
            d["inpaint"] = InpaintSettings(**d["inpaint"])
        if "objects_per_image" in d:
            d["objects_per_image"] = tuple(d["objects_per_image"])
        d["blend_methods"] = [dict(m) for m in d["blend_methods"]]
        return cls(base_dir=Path(base_dir), **d)

    def with_overrides(self, **kw) -> "SynthConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self


def parse_blend(m: dict) -> BlendMethod:
    kind = m["type"]
    if kind == "noblend":
        return NoBlend()
    if kind == "gaussian":
        return Gaussian(sigma=float(m.get("sigma", 2.0)))
    if kind == "poisson":
        return Poisson(guidance=m.get("guidance", "source"), tol=float(m.get("tol", 1e-6)), max_iter=m.get("max_iter"))
    if kind == "inpaint":
        return Inpaint()
    raise ConfigError(f"unknown blend method {kind!r}")


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {loc}: {exc.message}") from exc


def load_config(path) -> SynthConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return SynthConfig.from_dict(data, base_dir=path.parent)


def preset_path(name: str) -> Path:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    return Path(str(resources.files("pastesynth") / "presets" / f"{name}.json"))


def toy_assets_dir() -> Path:
    return Path(str(resources.files("pastesynth") / "data" / "toy"))
