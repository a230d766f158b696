"""Object-decorrelation dataset synthesis and retrieval evaluation."""

from .dataset import (
    BBox,
    CaptionRecord,
    ClassVocabulary,
    DatasetBundle,
    ImageRecord,
    NounPhraseSpan,
    ObjectAnnotation,
    ValidationReport,
    load_captions,
    load_instances,
    load_np_chunks,
    naive_np_chunk,
    tokenize,
)
from .matching import (
    AnnotatedPairsMode,
    MatchTable,
    WordListMode,
    caption_class_set,
    load_match_table,
    match_class_np,
)
from .masks import (
    MaskRaster,
    mask_to_rle,
    overlap_ratio,
    rasterize_box,
    rle_to_mask,
    union_mask,
)
from .planner import (
    FillMode,
    MaskFormat,
    PlanConfig,
    PlanKind,
    RemovalPlan,
    apply_fill,
    export_masks,
    plan_all,
    plan_for_class,
)
from .captions import (
    PromptSet,
    SyntheticPair,
    SynthesisMethod,
    assemble_pairs,
    load_prompt_templates,
    prompt_caption,
    remove_matched_nps,
)
from .metrics import (
    ApNorm,
    EmbeddingSet,
    GalleryMeta,
    MetricReport,
    QueryMeta,
    RelevanceMode,
    SimilarityMatrix,
    ap_at_k,
    build_gallery,
    cooccurrence_stats,
    cosine_sim,
    od_relevance,
    odmap_at_k,
    rank,
    recall_at_k,
)
from .embfiles import read_embd, read_simm, write_embd, write_simm

__version__ = "0.1.0"
