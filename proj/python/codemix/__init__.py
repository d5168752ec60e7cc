"""Python bindings for the codemix library.

Thin wrappers over the native module; the heavy lifting (tokenizer training,
language-model and classifier training) runs in C++.
"""

import json

from ._codemix import (
    CodemixError,
    Vocab,
    count_tokens,
    dataset_stats,
    is_roman_only,
    normalize_text,
    parse_matrix,
    preprocess,
    preset_matrix,
    run_cli,
    sample_states,
    synthesize,
    transition_frequencies,
)

__all__ = [
    "CodemixError",
    "Vocab",
    "count_tokens",
    "dataset_stats",
    "evaluate",
    "is_roman_only",
    "normalize_text",
    "parse_matrix",
    "preprocess",
    "preset_matrix",
    "run_cli",
    "sample_states",
    "synthesize",
    "transition_frequencies",
]


def evaluate(golds, preds):
    """Weighted precision/recall/F1 report as a dict (same layout as `eval --json`)."""
    from ._codemix import evaluate_json

    return json.loads(evaluate_json(list(golds), list(preds)))
