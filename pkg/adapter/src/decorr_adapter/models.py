"""Tiny self-contained dual encoder used to exercise the file contracts.

"tiny-random" is a fixed-architecture random-weight model: a small conv
stack for images and a hashed bag-of-words for text, both projecting
into the same dimension. Weights are drawn from a seeded generator at
construction, so a model id names one exact set of weights — two loads
of "tiny-random:d32:s7" embed identically, which is what the round-trip
tests rely on. Nothing is downloaded and nothing is trained.
"""

from __future__ import annotations

import re
import zlib

import numpy as np
import torch

from .errors import ModelLoadError

IMAGE_SIZE = 32
N_BUCKETS = 512
_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def token_bucket(token: str) -> int:
    # crc32 is stable across processes and platforms, unlike hash()
    return zlib.crc32(token.encode("utf-8")) % N_BUCKETS


class TinyDualEncoder(torch.nn.Module):
    def __init__(self, dim: int = 32, seed: int = 0):
        super().__init__()
        self.dim = dim
        self.seed = seed
        gen = torch.Generator().manual_seed(seed)

        def randn(*shape):
            return torch.nn.Parameter(
                torch.randn(*shape, generator=gen) * 0.1)

        self.conv1 = randn(8, 3, 3, 3)
        self.conv2 = randn(16, 8, 3, 3)
        self.image_proj = randn(dim, 16)
        self.image_bias = randn(dim)
        self.bag = randn(N_BUCKETS, dim)
        self.text_proj = randn(dim, dim)
        self.text_bias = randn(dim)
        self.eval()

    @torch.no_grad()
    def encode_images(self, pixels: torch.Tensor) -> torch.Tensor:
        """(batch, 3, 32, 32) float in [0, 1] -> (batch, dim)."""
        x = torch.nn.functional.conv2d(pixels, self.conv1, stride=2, padding=1)
        x = torch.relu(x)
        x = torch.nn.functional.conv2d(x, self.conv2, stride=2, padding=1)
        x = torch.relu(x)
        x = x.mean(dim=(2, 3))
        return x @ self.image_proj.T + self.image_bias

    @torch.no_grad()
    def encode_texts(self, texts: list[str]) -> torch.Tensor:
        rows = []
        for text in texts:
            buckets = [token_bucket(t) for t in tokenize(text)] or [0]
            rows.append(self.bag[buckets].mean(dim=0))
        x = torch.stack(rows)
        return x @ self.text_proj.T + self.text_bias


def load_model(model_id: str, device: str = "cpu") -> TinyDualEncoder:
    """Parse ids like "tiny-random", "tiny-random:d16", "tiny-random:d16:s3"."""
    parts = model_id.split(":")
    if parts[0] != "tiny-random":
        raise ModelLoadError(f"unknown model {model_id!r} (this adapter ships "
                             f"only the tiny-random reference encoder)")
    dim, seed = 32, 0
    for part in parts[1:]:
        if re.fullmatch(r"d[0-9]+", part):
            dim = int(part[1:])
        elif re.fullmatch(r"s[0-9]+", part):
            seed = int(part[1:])
        else:
            raise ModelLoadError(f"bad model option {part!r} in {model_id!r}")
    if dim < 1:
        raise ModelLoadError("embedding dimension must be positive")
    try:
        return TinyDualEncoder(dim=dim, seed=seed).to(device)
    except RuntimeError as exc:  # unknown device string, OOM, ...
        raise ModelLoadError(f"cannot instantiate {model_id!r} on "
                             f"{device!r}: {exc}") from exc


def preprocess_image(array: np.ndarray) -> torch.Tensor:
    """(H, W, 3) uint8 -> (3, 32, 32) float32 in [0, 1], nearest resize.

    Nearest-neighbour keeps the preprocessing free of resampling-library
    choices, so embeddings are reproducible anywhere."""
    h, w = array.shape[:2]
    rows = (np.arange(IMAGE_SIZE) * h // IMAGE_SIZE).clip(0, h - 1)
    cols = (np.arange(IMAGE_SIZE) * w // IMAGE_SIZE).clip(0, w - 1)
    small = array[np.ix_(rows, cols)].astype(np.float32) / 255.0
    return torch.from_numpy(small).permute(2, 0, 1)
