from pathlib import Path

import pytest
from PIL import Image, ImageDraw


@pytest.fixture
def image_folder(tmp_path):
    """20 images in 2 class folders: filled circles vs outlined squares."""
    root = tmp_path / "imgs"
    for cls, shape in (("circle", "ellipse"), ("square", "rectangle")):
        d = root / cls
        d.mkdir(parents=True)
        for i in range(10):
            img = Image.new("RGB", (48, 48), (250 - 4 * i, 250, 250))
            draw = ImageDraw.Draw(img)
            box = (6 + i, 6 + i, 40 - i, 40 - i)
            if shape == "ellipse":
                draw.ellipse(box, fill=(20, 30 + 5 * i, 200))
            else:
                draw.rectangle(box, outline=(200, 30, 30 + 5 * i), width=3)
            img.save(d / f"{shape}_{i:02d}.png")
    return root


def make_image_folder(root: Path, classes: dict[str, tuple[int, int, int]], n: int = 10):
    for cls, color in classes.items():
        d = root / cls
        d.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            img = Image.new("RGB", (48, 48), (245, 245, 245))
            draw = ImageDraw.Draw(img)
            draw.ellipse((4 + i, 4, 44 - i, 44), fill=color)
            img.save(d / f"{cls}_{i:02d}.png")
    return root
