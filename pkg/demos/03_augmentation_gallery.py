"""Apply each augmentation stage to one synthetic scan and save the results.

Writes a PNG per stage plus three full random pipeline draws into
demos/_gallery/. Run: python demos/03_augmentation_gallery.py
"""

import os

from lcnn.augment import (
    AugmentConfig,
    augment_sample,
    autocrop_black,
    color_jitter,
    gaussian_blur,
    rotate,
    translate,
    zoom_resize,
)
from lcnn.synthetic import save_png, synth_image
from lcnn.tensor import derive_rng, make_rng

out_dir = os.path.join(os.path.dirname(__file__), "_gallery")
os.makedirs(out_dir, exist_ok=True)

img = synth_image(derive_rng(7, "gallery"), positive=True)
save_png(img, os.path.join(out_dir, "0_original.png"))

stages = {
    "1_blur": gaussian_blur(img, 1.2),
    "2_jitter": color_jitter(img, 0.08, 1.15),
    "3_rotate": rotate(img, 12.0),
    "4_translate": translate(img, 8, -5),
    "5_zoom": zoom_resize(img, 1.1, *img.shape),
    "6_autocrop": autocrop_black(rotate(img, 12.0), 0.02),
}
for name, result in stages.items():
    save_png(result, os.path.join(out_dir, f"{name}.png"))
    print(name, result.shape)

cfg = AugmentConfig()
for seed in (1, 2, 3):
    sample = augment_sample(img, cfg, make_rng(seed))
    save_png(sample, os.path.join(out_dir, f"pipeline_seed{seed}.png"))
print(f"wrote {len(stages) + 4} images to {out_dir}")
