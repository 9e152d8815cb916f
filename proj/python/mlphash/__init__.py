"""Cancelable biometric template protection: MLP-Hash, BioHashing and IoM.

Thin wrapper over the C++ core. The extension module carries the actual
implementations; this package only re-exports them under stable names.
"""

from ._core import (
    SchemeConfig,
    Template,
    cosine_score,
    gen_orthonormal_layer,
    hamming_score,
    identity_key,
    invert_template,
    protect,
    synth_dataset,
    threshold_at_fmr,
    tmr_at_threshold,
    unlinkability,
)

__all__ = [
    "SchemeConfig",
    "Template",
    "cosine_score",
    "gen_orthonormal_layer",
    "hamming_score",
    "identity_key",
    "invert_template",
    "protect",
    "synth_dataset",
    "threshold_at_fmr",
    "tmr_at_threshold",
    "unlinkability",
]
