"""Gradient-enhanced sparse polynomial chaos recovery.

Thin python layer over the compiled ``_core`` extension. Study reports come
back as plain dictionaries with the same layout as the CLI's report.json.
"""

import json

from ._core import *  # noqa: F401,F403
from ._core import _recovery_study_json, build_id


def run_recovery_study(problem, n_grid, gradient_fraction, replications, seed,
                       noise_variance=0.0, noise_target="both", workers=1):
    """Run a replicated recovery study on a manufactured problem."""
    return json.loads(_recovery_study_json(
        problem, list(n_grid), gradient_fraction, replications, seed,
        noise_variance, noise_target, workers))


__version__ = "0.1.0"
