"""Scene-level fusion of per-view scenario scores by elementwise max."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class FusedScores:
    values: np.ndarray  # (k,) in [0, 1]
    contributing: frozenset  # view indices fused so far

    @property
    def views(self) -> tuple[int, ...]:
        return tuple(sorted(self.contributing))


def fuse_views(scores, view_indices=None) -> FusedScores:
    """Elementwise maximum over one or more per-view score vectors."""
    scores = [np.asarray(s, dtype=float) for s in scores]
    if not scores:
        raise ValueError("need at least one view to fuse")
    k = scores[0].shape[0]
    for s in scores[1:]:
        if s.shape != (k,):
            raise ValueError(f"score length mismatch: {s.shape} vs ({k},)")
    if view_indices is None:
        view_indices = range(len(scores))
    view_indices = list(view_indices)
    if len(view_indices) != len(scores):
        raise ValueError("view_indices must align with scores")
    stacked = np.stack(scores, axis=0)
    return FusedScores(values=stacked.max(axis=0), contributing=frozenset(view_indices))


def incremental_fuse(current: FusedScores, new_scores, view_index: int) -> FusedScores:
    """Fold one more view in; equals batch fusion over the full prefix."""
    new_scores = np.asarray(new_scores, dtype=float)
    if new_scores.shape != current.values.shape:
        raise ValueError(
            f"score length mismatch: {new_scores.shape} vs {current.values.shape}"
        )
    if view_index in current.contributing:
        return current
    return FusedScores(
        values=np.maximum(current.values, new_scores),
        contributing=current.contributing | {view_index},
    )
