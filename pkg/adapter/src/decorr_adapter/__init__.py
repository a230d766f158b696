"""Model-side companion to the decorr toolkit.

Everything crosses the boundary as files: EMBD embeddings, SIMM score
matrices, and the planning manifest. The adapter owns the ML-framework
dependencies so the evaluation toolkit can stay framework-free.
"""

from .embed import (
    AdapterJob,
    EmbedResult,
    cosine_reference,
    embed_captions,
    embed_images,
    images_from_manifest,
    load_caption_records,
)
from .errors import AdapterError, DuplicateIdError, FormatError, ModelLoadError
from .formats import FORMAT_VERSION, read_embd, read_simm, write_embd
from .inpaint import InpaintReport, inpaint_from_manifest, load_engine
from .models import TinyDualEncoder, load_model

__version__ = "0.1.0"

__all__ = [
    "AdapterJob",
    "AdapterError",
    "DuplicateIdError",
    "EmbedResult",
    "FormatError",
    "FORMAT_VERSION",
    "InpaintReport",
    "ModelLoadError",
    "TinyDualEncoder",
    "cosine_reference",
    "embed_captions",
    "embed_images",
    "images_from_manifest",
    "inpaint_from_manifest",
    "load_caption_records",
    "load_engine",
    "load_model",
    "read_embd",
    "read_simm",
    "write_embd",
]
