"""gamerge: geometry-aware cached token merging for multi-frame attention.

Pipeline: tokenize frames, score each token's geometric importance from
pixel gradients and token variance, partition tokens into salient / dst /
src, merge src tokens into their most similar dst before global attention,
unmerge afterwards, and cache merge plans across layers. The bench module
measures token counts, attention FLOPs, and wall-clock against an unmerged
baseline.
"""

from .attention import (
    MERGE_GA,
    MERGE_OFF,
    ForwardOutput,
    MergeContext,
    Model,
    ModelConfig,
    build_model,
    forward,
    frame_attention_layer,
    global_attention_layer,
    multi_head_attention,
)
from .bench import (
    MODES,
    DeviationStats,
    RunConfig,
    compare_outputs,
    count_attention_flops,
    emit_report,
    load_config_file,
    run_benchmark,
)
from .gamap import (
    GaMap,
    GradMap,
    VarMap,
    compute_ga_map,
    downsample_to_tokens,
    fuse_ga_map,
    gradient_magnitude,
    minmax_normalize,
    sobel_gradients,
    token_variance,
)
from .ingest import (
    SPECIALS_PER_FRAME,
    GrayImage,
    ImageFrame,
    SceneSpec,
    TokenGrid,
    TokenizerParams,
    build_tokenizer_params,
    load_image,
    synth_scene,
    to_grayscale,
    tokenize,
)
from .layout import SequenceLayout, concat_sequence, layout_for
from .merge import (
    MergePlan,
    PlanCache,
    apply_merge,
    apply_unmerge,
    compute_merge_plan,
    cosine_similarity,
    dump_plan,
    get_or_compute,
    plan_to_dict,
)
from .metrics import RunMetrics
from .partition import (
    PartitionLabels,
    TokenLabel,
    build_partition,
    select_dst,
    select_salient,
)

__version__ = "0.1.0"
