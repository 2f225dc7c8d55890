"""Consensus-gated version control for research artefacts."""

import json as _json

from ._curator import CuratorError, Repository, aggregate, cli, dis, evaluate, gpref
from ._curator import replay as _replay

__all__ = [
    "CuratorError",
    "Repository",
    "aggregate",
    "cli",
    "dis",
    "evaluate",
    "gpref",
    "replay",
    "stats",
    "audit",
]


def replay(script, dest):
    """Replay a JSON event script into ``dest`` and return the repository."""
    return _replay(str(script), str(dest))


def stats(repo):
    """Per-phase statistics of ``repo`` as a dict."""
    return _json.loads(repo.stats_json())


def audit(repo):
    """Gate audit report of ``repo`` as a dict."""
    return _json.loads(repo.audit_json())
