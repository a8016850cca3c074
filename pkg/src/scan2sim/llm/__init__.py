from .backend import (
    RESPONSE_SCHEMAS,
    Backend,
    HttpBackend,
    LlmRequest,
    MockBackend,
    Transcript,
    load_mock_rules,
    make_backend,
    mock_scale,
)
from .queries import (
    MAX_REPROMPTS,
    PlacementAnswer,
    ScaleAnswer,
    clamp_scale,
    parse_json_answer,
    query_placement,
    query_scale,
    query_script,
)

__all__ = [
    "MAX_REPROMPTS",
    "RESPONSE_SCHEMAS",
    "Backend",
    "HttpBackend",
    "LlmRequest",
    "MockBackend",
    "PlacementAnswer",
    "ScaleAnswer",
    "Transcript",
    "clamp_scale",
    "load_mock_rules",
    "make_backend",
    "mock_scale",
    "parse_json_answer",
    "query_placement",
    "query_scale",
    "query_script",
]
