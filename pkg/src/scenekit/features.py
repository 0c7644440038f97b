"""Feature builders shared by the classifiers and the experiment harness."""

from __future__ import annotations

import numpy as np

from .dataset import SceneEpisode


def scene_matrix(scene: SceneEpisode) -> np.ndarray:
    """(m, V) object-presence matrix of one scene's views."""
    return np.stack([v.object_presence for v in scene.views], axis=1)


def scene_blocks(score_matrix: np.ndarray, n_scenes: int, views_per_scene: int):
    """Iterate per-scene (k, V) blocks of a corpus-wide score matrix."""
    for i in range(n_scenes):
        yield score_matrix[:, i * views_per_scene : (i + 1) * views_per_scene]


def all_view_features(score_matrix: np.ndarray, n_scenes: int, views_per_scene: int) -> np.ndarray:
    """Per-scene max-fused features over every view; shape (n_scenes, k)."""
    out = np.empty((n_scenes, score_matrix.shape[0]))
    for i, block in enumerate(scene_blocks(score_matrix, n_scenes, views_per_scene)):
        out[i] = block.max(axis=1)
    return out


def sample_fused_features(
    score_matrix: np.ndarray,
    scenes: list[SceneEpisode],
    scene_labels: np.ndarray,
    rng: np.random.Generator,
    samples_per_scene: int = 2,
    min_views: int = 1,
    include_full_view: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Fused features over 1..V randomly sampled views per scene.

    Emits ``samples_per_scene`` feature rows per scene so the classifier
    sees partial-evidence states like the ones the exploring agent visits.
    With ``include_full_view`` one of the rows is always the all-view
    fusion, anchoring the training cloud at the full-evidence state.
    """
    if not scenes:
        raise ValueError("no scenes to featurize")
    if samples_per_scene < 1:
        raise ValueError("samples_per_scene must be >= 1")
    views_per_scene = scenes[0].n_views
    k = score_matrix.shape[0]
    features = np.empty((len(scenes) * samples_per_scene, k))
    labels = np.empty(len(scenes) * samples_per_scene, dtype=int)
    row = 0
    for i, _ in enumerate(scenes):
        block = score_matrix[:, i * views_per_scene : (i + 1) * views_per_scene]
        for s in range(samples_per_scene):
            if s == 0 and include_full_view:
                features[row] = block.max(axis=1)
            else:
                count = int(rng.integers(min_views, views_per_scene + 1))
                chosen = rng.choice(views_per_scene, size=count, replace=False)
                features[row] = block[:, chosen].max(axis=1)
            labels[row] = scene_labels[i]
            row += 1
    return features, labels
