import numpy as np
import pytest
import torch

from decorr_adapter.errors import ModelLoadError
from decorr_adapter.models import (
    IMAGE_SIZE,
    load_model,
    preprocess_image,
    tokenize,
)


def test_model_id_parsing():
    model = load_model("tiny-random")
    assert model.dim == 32 and model.seed == 0
    model = load_model("tiny-random:d16")
    assert model.dim == 16
    model = load_model("tiny-random:d16:s5")
    assert model.dim == 16 and model.seed == 5


@pytest.mark.parametrize("bad", ["clip-vit-b32", "tiny-random:x4",
                                 "tiny-random:d0"])
def test_unknown_model_rejected(bad):
    with pytest.raises(ModelLoadError):
        load_model(bad)


def test_same_id_loads_identical_weights():
    a = load_model("tiny-random:d8:s3")
    b = load_model("tiny-random:d8:s3")
    texts = ["a dog in the park", "the frisbee flies"]
    assert torch.equal(a.encode_texts(texts), b.encode_texts(texts))
    pixels = torch.rand(2, 3, IMAGE_SIZE, IMAGE_SIZE,
                        generator=torch.Generator().manual_seed(0))
    assert torch.equal(a.encode_images(pixels), b.encode_images(pixels))


def test_different_seeds_differ():
    a = load_model("tiny-random:d8:s3")
    b = load_model("tiny-random:d8:s4")
    out_a = a.encode_texts(["a dog"])
    out_b = b.encode_texts(["a dog"])
    assert not torch.equal(out_a, out_b)


def test_output_shapes_and_finiteness():
    model = load_model("tiny-random:d12")
    pixels = torch.rand(3, 3, IMAGE_SIZE, IMAGE_SIZE,
                        generator=torch.Generator().manual_seed(1))
    images = model.encode_images(pixels)
    texts = model.encode_texts(["one", "two words here", ""])
    assert images.shape == (3, 12)
    assert texts.shape == (3, 12)
    assert torch.isfinite(images).all()
    assert torch.isfinite(texts).all()  # empty caption must not yield NaN


def test_preprocess_resizes_any_input():
    rng = np.random.default_rng(9)
    for h, w in [(200, 200), (17, 300), (32, 32), (5, 5)]:
        array = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        tensor = preprocess_image(array)
        assert tensor.shape == (3, IMAGE_SIZE, IMAGE_SIZE)
        assert 0.0 <= float(tensor.min()) and float(tensor.max()) <= 1.0


def test_tokenize_is_lowercase_alphanumeric():
    assert tokenize("A dog, chasing THE frisbee!") == \
        ["a", "dog", "chasing", "the", "frisbee"]
    assert tokenize("...") == []
