"""Session-dropout prediction toolkit.

Sessionizes mobile-learning activity logs and trains a masked
encoder-decoder that scores, for every interaction, the probability that
the student ends the study session there. The heavy lifting lives in the
compiled extension; this package re-exports its public surface.

Configuration is a plain ``dict`` using the same keys as the command-line
tool (``preset``, ``d_model``, ``epochs``, ``out_dir``, ...). Precedence
matches the CLI, with the dict in the role of command-line flags:
defaults < preset < ``DAS_*`` environment variables < dict entries.
"""

from das._core import (
    Error,
    auc,
    effective_config,
    hazard_probability,
    noam_lr,
    run_ablate,
    run_evaluate,
    run_predict,
    run_sessionize,
    run_synth,
    run_train,
)

__all__ = [
    "Error",
    "auc",
    "effective_config",
    "hazard_probability",
    "noam_lr",
    "run_ablate",
    "run_evaluate",
    "run_predict",
    "run_sessionize",
    "run_synth",
    "run_train",
]
