"""GLM fitting when one covariate is interval-censored.

The heavy lifting lives in the compiled ``_gelc`` extension; this package adds
a thin convenience layer (dict-based scenario input for simulation studies).
"""

import json as _json

from ._gelc import (  # noqa: F401
    GelcError,
    GelcParseError,
    GelcRankError,
    compute_metrics,
    fit,
    npmle,
    run_study_json,
)

__all__ = [
    "GelcError",
    "GelcParseError",
    "GelcRankError",
    "compute_metrics",
    "fit",
    "npmle",
    "run_study",
    "run_study_json",
]


def run_study(scenarios, jobs=1, quad_tol=1e-8, reps_override=0):
    """Run a simulation study from a list of scenario dicts.

    Each dict mirrors the scenario JSON schema: name, family, n, replications,
    seed, z_mean, censor_mean_width, true_theta {alpha, gamma, phi, beta?}.
    """
    return run_study_json(
        _json.dumps(list(scenarios)), jobs=jobs, quad_tol=quad_tol, reps_override=reps_override
    )
