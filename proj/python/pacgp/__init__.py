"""PAC-Bayes certified Gaussian process regression."""

import json

from . import _core
from ._core import (
    SCHEMA_VERSION,
    DimensionError,
    DomainError,
    IoError,
    NumericError,
    UsageError,
    binary_kl,
    gibbs_risk,
    klinv,
    klinv_complement,
    klinv_partials,
    load_dataset,
    log_theta_cardinality,
    pac_bound,
)

__all__ = [
    "SCHEMA_VERSION",
    "DimensionError",
    "DomainError",
    "IoError",
    "NumericError",
    "UsageError",
    "binary_kl",
    "fit",
    "gibbs_risk",
    "klinv",
    "klinv_complement",
    "klinv_partials",
    "load_dataset",
    "log_theta_cardinality",
    "pac_bound",
    "run",
    "selfcheck",
]


def run(workers=0, **config):
    """Train and certify over repeated splits.

    Keyword names follow the command-line flags with underscores, e.g.
    ``run(dataset="boston", objective="pac-kl", epsilon=0.6, repeats=10)``.
    Returns the run document: per-repeat reports, aggregate, failures.
    """
    return json.loads(_core.run_json(json.dumps(config), workers))


def fit(X, y, X_test, y_test, **kwargs):
    """Fit one model on arrays that are already on the working scale.

    Returns a dict with the certificate ``report`` and the predictive
    ``mean`` and ``var`` at ``X_test``.
    """
    out = _core.fit(X, y, X_test, y_test, **kwargs)
    out["report"] = json.loads(out["report"])
    return out


def selfcheck():
    """Run the numerical property suite; list of result dicts."""
    return _core.selfcheck()
