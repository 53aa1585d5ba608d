"""Shapley-value modality attribution for audio-text language models."""

from .audio import load_wav, resample, save_wav, truncate_clip
from .conformance import ConformanceCheck, assert_conformant, run_conformance_suite
from .corpus import (
    MC_NPI,
    MC_PI,
    McOption,
    McQuestion,
    PromptTemplate,
    build_prompt,
    load_corpus,
    match_answer,
)
from .endpoints import (
    EndpointInfo,
    ModelEndpoint,
    SyntheticClassifierEndpoint,
    SyntheticEndpoint,
    SyntheticModelSpec,
    mask_policy_from,
    synthetic_endpoint,
)
from .errors import (
    CoalitionIndexError,
    ConnectFailedError,
    CorpusSchemaError,
    EmptyGenerationError,
    EmptyMaskableSetError,
    EndpointTimeoutError,
    ExactTooLargeError,
    MissingAttributionError,
    MissingExampleError,
    ModelUnavailableError,
    ModshapError,
    ProtocolViolationError,
)
from .masking import (
    DEFAULT_PROTECTED_TOKEN_SURFACES,
    MaskPolicy,
    apply_coalition,
    build_partition,
    plan_audio_windows,
    select_maskable_tokens,
)
from .metrics import modality_contribution
from .plotting import emit_plot, plot_payload
from .runner import (
    QuestionResult,
    RunConfig,
    RunReport,
    aggregate_report,
    attribution_from_artifact,
    load_run_artifacts,
    render_report,
    run_corpus,
    run_question,
)
from .scoring import (
    GenerationScoringContext,
    baseline_answer,
    classification_value_fn,
    generation_value_fn,
)
from .shapley import (
    EstimatorConfig,
    ValueFunction,
    estimate_attributions,
    evaluation_budget,
    exact_shapley,
    permutation_shapley,
    scalar_game,
)
from .stub_server import StubServer
from .types import (
    AnswerTrace,
    AttributionMatrix,
    AudioClip,
    Coalition,
    EstimatorMeta,
    FeaturePartition,
    ModalityScore,
    Token,
    TokenizedPrompt,
)
from .wire import WireEndpoint, wire_client_connect

__version__ = "0.1.0"
