"""Rebuild the bundled default NIQE model from scikit-image sample images.

Images listed in HELD_OUT are kept out of the fit so tests can use them as
unseen pristine content.
"""

from pathlib import Path

from skimage import data

from stvqa.niqe import fit_model
from stvqa.pixelmath import luma709_rgb

TRAIN = ["astronaut", "camera", "chelsea", "coffee", "rocket", "grass", "gravel",
         "brick", "coins", "moon", "cat", "clock"]
HELD_OUT = ["immunohistochemistry", "hubble_deep_field", "text", "page"]


def luma(name):
    img = getattr(data, name)().astype(float)
    img /= 65535.0 if img.max() > 255 else 255.0
    return luma709_rgb(img[..., :3]) if img.ndim == 3 else img


if __name__ == "__main__":
    model = fit_model([luma(n) for n in TRAIN])
    out = Path(__file__).resolve().parents[1] / "src" / "stvqa" / "data" / "niqe_default.json"
    model.save(out)
    print(f"wrote {out}: {len(model.mean_vector)} features")
