"""causaltext: turn causal maps into natural-language text and evaluate it."""

__version__ = "0.1.0"

from .errors import CausalTextError
from .graph import (
    CausalGraph,
    Component,
    Edge,
    GraphFormat,
    Node,
    Polarity,
    ValidationReport,
    decompose,
    parse_graph,
    union,
    validate_graph,
)
from .linearize import (
    TAGS,
    LinearizationMode,
    LinearizedText,
    linearize,
    no_tags,
    parse_linearized,
    strip_polarity,
)
from .prompts import (
    PairRecord,
    PromptBundle,
    SplitSpec,
    build_few_shot,
    build_zero_shot,
    estimate_tokens,
    export_finetune,
    load_pairs,
    split_dataset,
    write_pairs,
)
from .client import (
    CompletionRequest,
    CompletionResponse,
    RemoteBackend,
    ReplayBackend,
    ReplayCache,
    TemplateBackend,
    complete,
    complete_many,
    template_generate,
)
from .metrics import (
    MetricReport,
    PolarityLexicon,
    ScoredPair,
    aggregate,
    cohen_kappa,
    external_score,
    meteor_lite,
    polarity_accuracy,
    rouge_l,
    score_pair,
    tokenize,
)
from .runner import (
    CellResult,
    ExperimentCell,
    FewShot,
    FineTuned,
    GridConfig,
    ZeroShot,
    plan_grid,
    run_cell,
    run_grid,
)
from .annotation import (
    AnnotationTask,
    LabelRecord,
    Session,
    SessionStore,
    create_session,
)

__all__ = [name for name in dir() if not name.startswith("_")]
