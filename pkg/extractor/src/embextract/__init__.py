"""EMB1 embedding extraction from images, plus a synthetic generator."""

from .backbones import BACKBONES, PixelProjectionBackbone, get_backbone
from .emb1 import write_emb1
from .extract import extract, list_images
from .synth import synth

__version__ = "0.1.0"
