"""Frozen backbone registry.

The torch-based families match the evaluated model lineup (SWAG ViT-H/14
with and without ImageNet-1K finetuning, DINOv2 ViT-G/14, ResNet-152); they
are loaded lazily and need torch plus downloadable weights. The
"pixel_projection" stand-in needs neither: grayscale 32x32 pixels projected
through a fixed-seed Gaussian matrix, deterministic on any machine, good
enough to exercise the file format and the downstream pipeline.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

STANDIN_DIM = 64
_STANDIN_SIDE = 32
_STANDIN_SEED = 0x5EED


class PixelProjectionBackbone:
    """Deterministic stand-in: resized grayscale pixels, random projection."""

    name = "pixel_projection"
    preprocessing = (
        f"grayscale, bilinear resize to {_STANDIN_SIDE}x{_STANDIN_SIDE}, mean-centered, "
        f"fixed-seed gaussian projection, L2-normalized"
    )

    def __init__(self, dim: int = STANDIN_DIM):
        self.dim = dim
        rng = np.random.default_rng(_STANDIN_SEED)
        self._proj = rng.normal(size=(_STANDIN_SIDE * _STANDIN_SIDE, dim)).astype(np.float64)
        self._proj /= np.sqrt(_STANDIN_SIDE * _STANDIN_SIDE)

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        rows = []
        for img in images:
            g = img.convert("L").resize((_STANDIN_SIDE, _STANDIN_SIDE), Image.BILINEAR)
            x = np.asarray(g, dtype=np.float64).reshape(-1) / 255.0
            x = x - x.mean()
            v = x @ self._proj
            norm = np.linalg.norm(v)
            rows.append(v / norm if norm > 0 else v)
        return np.stack(rows).astype(np.float32)


class TorchHubBackbone:
    """Shared wrapper for the torch model families (inference only)."""

    def __init__(self, name, dim, loader, input_side=224, center_crop=None):
        self.name = name
        self.dim = dim
        self._loader = loader
        self._side = input_side
        self._crop = center_crop or input_side
        self._model = None
        self._device = "cpu"
        self.preprocessing = (
            f"RGB, bicubic resize to {self._side}, center-crop {self._crop}, "
            f"imagenet mean/std normalization"
        )

    def to(self, device: str):
        self._device = device
        return self

    def _ensure(self):
        if self._model is None:
            try:
                import torch  # noqa: F401
            except ImportError as e:
                raise RuntimeError(
                    f"backbone {self.name!r} needs torch/torchvision; "
                    f"install the 'torch' extra or use pixel_projection"
                ) from e
            self._model = self._loader().eval().to(self._device)

    def embed_batch(self, images: list[Image.Image]) -> np.ndarray:
        import torch
        from torchvision import transforms

        self._ensure()
        prep = transforms.Compose(
            [
                transforms.Resize(self._side, interpolation=transforms.InterpolationMode.BICUBIC),
                transforms.CenterCrop(self._crop),
                transforms.ToTensor(),
                transforms.Normalize(
                    mean=[0.485, 0.456, 0.406], std=[0.229, 0.224, 0.225]
                ),
            ]
        )
        batch = torch.stack([prep(img.convert("RGB")) for img in images]).to(self._device)
        with torch.no_grad():
            out = self._model(batch)
        if out.ndim > 2:
            out = out.flatten(1)
        return out.cpu().numpy().astype(np.float32)


def _load_resnet152():
    from torchvision.models import ResNet152_Weights, resnet152
    import torch

    model = resnet152(weights=ResNet152_Weights.IMAGENET1K_V2)
    model.fc = torch.nn.Identity()  # pooled 2048-d features
    return model


def _load_swag(finetuned: bool):
    import torch

    name = "vit_h14_in1k" if finetuned else "vit_h14"
    return torch.hub.load("facebookresearch/swag", model=name)


def _load_dinov2():
    import torch

    return torch.hub.load("facebookresearch/dinov2", "dinov2_vitg14")


def get_backbone(name: str, device: str = "cpu", dim: int = STANDIN_DIM):
    """Instantiate a backbone by id; see BACKBONES for the known names."""
    if name == "pixel_projection":
        return PixelProjectionBackbone(dim=dim)
    if name not in BACKBONES:
        raise ValueError(f"unknown backbone {name!r}; known: {sorted(BACKBONES)}")
    return BACKBONES[name]().to(device)


BACKBONES = {
    "pixel_projection": lambda: PixelProjectionBackbone(),
    "swag_vit_h14": lambda: TorchHubBackbone(
        "swag_vit_h14", 1280, lambda: _load_swag(False), input_side=518, center_crop=518
    ),
    "swag_vit_h14_in1k": lambda: TorchHubBackbone(
        "swag_vit_h14_in1k", 1280, lambda: _load_swag(True), input_side=518, center_crop=518
    ),
    "dinov2_vit_g14": lambda: TorchHubBackbone(
        "dinov2_vit_g14", 1536, _load_dinov2, input_side=224, center_crop=224
    ),
    "resnet152": lambda: TorchHubBackbone("resnet152", 2048, _load_resnet152),
}
