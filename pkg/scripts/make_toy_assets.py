"""Regenerate the bundled toy asset pack (deterministic)."""

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from pastesynth.imaging import save_image, save_mask  # noqa: E402

W, H = 128, 96
OUT = Path(__file__).resolve().parents[1] / "src" / "pastesynth" / "data" / "toy"


def background(rng, kind):
    yy, xx = np.mgrid[:H, :W].astype(float)
    base = rng.uniform(40, 200, 3)
    grad = rng.uniform(-0.6, 0.6, (2, 3))
    img = base + xx[..., None] * grad[0] + yy[..., None] * grad[1]
    if kind % 2 == 0:
        img += 25 * (((xx // 8 + yy // 8) % 2)[..., None] - 0.5)
    else:
        img += 20 * np.sin(xx / rng.uniform(3, 7))[..., None]
    img += rng.normal(0, 4, img.shape)
    return np.clip(img.round(), 0, 255).astype(np.uint8)


def shape_mask(kind, h, w):
    yy, xx = np.mgrid[:h, :w].astype(float)
    cy, cx = (h - 1) / 2, (w - 1) / 2
    ry, rx = h / 2 - 3, w / 2 - 3
    if kind == 0:
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
    if kind == 1:
        return (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
    if kind == 2:
        return (yy >= 3) & (yy <= h - 4) & (np.abs(xx - cx) <= (yy - 3) / max(h - 7, 1) * rx + 0.5)
    return (np.abs(yy - cy) / ry + np.abs(xx - cx) / rx) <= 1


def main():
    rng = np.random.default_rng(2024)
    for sub in ("backgrounds", "cutouts", "frames"):
        (OUT / sub).mkdir(parents=True, exist_ok=True)
    bgs = [background(rng, k) for k in range(5)]
    for k, bg in enumerate(bgs):
        save_image(bg, OUT / "backgrounds" / f"bg{k:02d}.png")

    names = ["soda", "coffee", "cereal", "sauce", "rice", "bar", "soap", "popcorn", "chips", "energy"]
    for k, name in enumerate(names):
        h, w = int(rng.integers(18, 34)), int(rng.integers(18, 34))
        mask = shape_mask(k % 4, h, w)
        color = rng.uniform(30, 230, 3)
        yy, xx = np.mgrid[:h, :w].astype(float)
        obj = color + 30 * np.sin(yy / 2.5 + k)[..., None] * (xx[..., None] / w)
        context = rng.uniform(60, 190, 3) + rng.normal(0, 6, (h, w, 3))
        img = np.where(mask[..., None], obj, context)
        img = np.clip(img.round(), 0, 255).astype(np.uint8)
        save_image(img, OUT / "cutouts" / f"{name}.png")
        save_mask(mask, OUT / "cutouts" / f"{name}.mask.png")
        origin = [int(rng.integers(0, W - w)), int(rng.integers(0, H - h))]
        (OUT / "cutouts" / f"{name}.json").write_text(json.dumps({"category": name, "origin": origin}) + "\n")

    # static scene with a few small movers; each pixel is covered in well under half the frames
    static = bgs[0]
    for f in range(50):
        frame = static.copy()
        for j, (y0, speed, size) in enumerate([(10, 3, 10), (40, 4, 12), (70, 5, 8)]):
            x0 = (f * speed + 17 * j) % (W - size)
            frame[y0 : y0 + size, x0 : x0 + size] = (220 - 60 * j, 40 + 70 * j, 90)
        save_image(frame, OUT / "frames" / f"frame{f:04d}.png")


if __name__ == "__main__":
    main()
