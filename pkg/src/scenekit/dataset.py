"""Synthetic multi-view scene corpora with planted scenario structure.

A corpus is a set of scenes, each observed from ``views_per_scene`` camera
positions on an even circular grid.  Every view records binary object
presence.  Views are built as unions of per-class object templates (the
planted scenarios), optionally corrupted by object dropout, distractor
objects, and adversarial views drawn from a different class.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

UNKNOWN_CLASS = "unknown"

_CORPUS_FORMAT_VERSION = 1


class CorpusFormatError(ValueError):
    """Raised when an on-disk corpus fails to parse or validate."""


@dataclass
class GeneratorSpec:
    """Parameters fully determining a synthetic corpus.

    ``class_scenario_templates[c]`` lists the object subsets planted for
    class ``c``.  Each view activates each template of its class with
    probability ``template_rate`` and takes the union; dropout then removes
    present objects, distractors add absent ones, and with probability
    ``adversarial_view_rate`` the whole view is drawn from another class's
    templates instead.
    """

    num_classes: int
    scenes_per_class: int
    object_vocabulary: list[str]
    class_scenario_templates: list[list[list[str]]]
    views_per_scene: int = 8
    template_rate: float = 1.0
    object_dropout_rate: float = 0.0
    distractor_rate: float = 0.0
    adversarial_view_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if not self.object_vocabulary:
            raise ValueError("object_vocabulary must be nonempty")
        if len(set(self.object_vocabulary)) != len(self.object_vocabulary):
            raise ValueError("object_vocabulary contains duplicate names")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if len(self.class_scenario_templates) != self.num_classes:
            raise ValueError(
                f"expected {self.num_classes} template sets, got "
                f"{len(self.class_scenario_templates)}"
            )
        if self.scenes_per_class < 1:
            raise ValueError("scenes_per_class must be >= 1")
        if self.views_per_scene < 1:
            raise ValueError("views_per_scene must be >= 1")
        for name, rate in (
            ("template_rate", self.template_rate),
            ("object_dropout_rate", self.object_dropout_rate),
            ("distractor_rate", self.distractor_rate),
            ("adversarial_view_rate", self.adversarial_view_rate),
        ):
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        if self.adversarial_view_rate > 0 and self.num_classes < 2:
            raise ValueError("adversarial views need at least 2 classes")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        vocab = set(self.object_vocabulary)
        for c, templates in enumerate(self.class_scenario_templates):
            if not templates:
                raise ValueError(f"class {c} has no scenario templates")
            for t, objects in enumerate(templates):
                if not objects:
                    raise ValueError(f"class {c} template {t} is empty")
                unknown = set(objects) - vocab
                if unknown:
                    raise ValueError(
                        f"class {c} template {t} uses objects not in the "
                        f"vocabulary: {sorted(unknown)}"
                    )


@dataclass
class SplitSpec:
    """Per-class train/val/test scene counts."""

    train: int
    val: int
    test: int
    seed: int = 0

    def validate(self) -> None:
        for name, count in (("train", self.train), ("val", self.val), ("test", self.test)):
            if count < 0:
                raise ValueError(f"{name} count must be >= 0")


@dataclass(eq=False)
class ViewObservation:
    view_index: int
    object_presence: np.ndarray  # (m,) int8 in {0, 1}


@dataclass(eq=False)
class SceneEpisode:
    scene_id: str
    class_name: str
    views: list[ViewObservation]
    visited_mask: np.ndarray  # bool per view, all False on a fresh episode

    @property
    def n_views(self) -> int:
        return len(self.views)

    def is_fresh(self) -> bool:
        return not self.visited_mask.any()

    def fresh(self) -> "SceneEpisode":
        """Copy sharing view data but with a clean visited mask."""
        return SceneEpisode(
            scene_id=self.scene_id,
            class_name=self.class_name,
            views=self.views,
            visited_mask=np.zeros(len(self.views), dtype=bool),
        )


@dataclass(eq=False)
class PlantedTruth:
    """Ground-truth factors behind a generated corpus.

    ``w`` holds one column per distinct template; ``h`` marks which
    templates were active in each view before noise was applied.  With all
    noise rates at zero, ``min(w @ h, 1)`` equals the corpus matrix exactly.
    """

    w: np.ndarray  # (m, k) int8
    h: np.ndarray  # (k, n_views) int8
    template_objects: list[list[str]]
    template_class: list[int]

    def equals(self, other: "PlantedTruth") -> bool:
        return (
            np.array_equal(self.w, other.w)
            and np.array_equal(self.h, other.h)
            and self.template_objects == other.template_objects
            and self.template_class == other.template_class
        )


@dataclass(eq=False)
class Corpus:
    object_vocabulary: list[str]
    class_names: list[str]
    scenes: list[SceneEpisode]
    a_views: np.ndarray  # (m, n_views) int8
    views_per_scene: int
    planted: PlantedTruth | None = None
    generator_spec: GeneratorSpec | None = None

    @property
    def n_objects(self) -> int:
        return len(self.object_vocabulary)

    @property
    def n_scenes(self) -> int:
        return len(self.scenes)

    @property
    def n_views(self) -> int:
        return self.a_views.shape[1]

    def scene_view_slice(self, scene_index: int) -> slice:
        v = self.views_per_scene
        return slice(scene_index * v, (scene_index + 1) * v)

    def view_class_names(self) -> list[str]:
        return [s.class_name for s in self.scenes for _ in range(self.views_per_scene)]

    def view_labels(self) -> np.ndarray:
        """Per-view class indices (-1 for classes outside class_names)."""
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index.get(c, -1) for c in self.view_class_names()], dtype=int)

    def scene_labels(self) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.class_names)}
        return np.array([index.get(s.class_name, -1) for s in self.scenes], dtype=int)

    def scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes]

    def equals(self, other: "Corpus") -> bool:
        if (
            self.object_vocabulary != other.object_vocabulary
            or self.class_names != other.class_names
            or self.views_per_scene != other.views_per_scene
            or len(self.scenes) != len(other.scenes)
            or not np.array_equal(self.a_views, other.a_views)
        ):
            return False
        for a, b in zip(self.scenes, other.scenes):
            if a.scene_id != b.scene_id or a.class_name != b.class_name:
                return False
        if (self.planted is None) != (other.planted is None):
            return False
        if self.planted is not None and not self.planted.equals(other.planted):
            return False
        if self.generator_spec != other.generator_spec:
            return False
        return True


def _dedupe_templates(spec: GeneratorSpec, vocab_index: dict[str, int]):
    """Distinct templates across classes, keyed by their object index sets."""
    template_objects: list[list[str]] = []
    template_class: list[int] = []
    template_masks: list[np.ndarray] = []
    by_key: dict[frozenset[int], int] = {}
    class_templates: list[list[int]] = []
    m = len(vocab_index)
    for c, templates in enumerate(spec.class_scenario_templates):
        ids = []
        for objects in templates:
            key = frozenset(vocab_index[o] for o in objects)
            if key not in by_key:
                mask = np.zeros(m, dtype=np.int8)
                mask[sorted(key)] = 1
                by_key[key] = len(template_masks)
                template_masks.append(mask)
                template_objects.append(sorted(set(objects), key=vocab_index.get))
                template_class.append(c)
            ids.append(by_key[key])
        class_templates.append(ids)
    return template_masks, template_objects, template_class, class_templates


def generate_corpus(spec: GeneratorSpec) -> Corpus:
    """Deterministically generate a corpus from ``spec`` (including seed)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    vocab_index = {name: i for i, name in enumerate(spec.object_vocabulary)}
    m = len(spec.object_vocabulary)
    masks, template_objects, template_class, class_templates = _dedupe_templates(spec, vocab_index)
    k = len(masks)
    class_names = [f"class{c:02d}" for c in range(spec.num_classes)]

    scenes: list[SceneEpisode] = []
    columns: list[np.ndarray] = []
    h_columns: list[np.ndarray] = []
    for c in range(spec.num_classes):
        for s in range(spec.scenes_per_class):
            views = []
            for v in range(spec.views_per_scene):
                source = c
                if rng.random() < spec.adversarial_view_rate:
                    other = int(rng.integers(spec.num_classes - 1))
                    source = other if other < c else other + 1
                active = [t for t in class_templates[source] if rng.random() < spec.template_rate]
                vec = np.zeros(m, dtype=np.int8)
                h_col = np.zeros(k, dtype=np.int8)
                for t in active:
                    vec |= masks[t]
                    h_col[t] = 1
                drop = rng.random(m) < spec.object_dropout_rate
                vec = vec & ~drop
                foreign = (vec == 0) & (rng.random(m) < spec.distractor_rate)
                vec = (vec | foreign).astype(np.int8)
                views.append(ViewObservation(view_index=v, object_presence=vec))
                columns.append(vec)
                h_columns.append(h_col)
            scenes.append(
                SceneEpisode(
                    scene_id=f"{class_names[c]}-{s:03d}",
                    class_name=class_names[c],
                    views=views,
                    visited_mask=np.zeros(spec.views_per_scene, dtype=bool),
                )
            )

    a_views = (
        np.stack(columns, axis=1) if columns else np.zeros((m, 0), dtype=np.int8)
    )
    planted = PlantedTruth(
        w=np.stack(masks, axis=1) if masks else np.zeros((m, 0), dtype=np.int8),
        h=np.stack(h_columns, axis=1) if h_columns else np.zeros((k, 0), dtype=np.int8),
        template_objects=template_objects,
        template_class=template_class,
    )
    return Corpus(
        object_vocabulary=list(spec.object_vocabulary),
        class_names=class_names,
        scenes=scenes,
        a_views=a_views,
        views_per_scene=spec.views_per_scene,
        planted=planted,
        generator_spec=spec,
    )


def _subcorpus(corpus: Corpus, scene_indices: list[int]) -> Corpus:
    scenes = [corpus.scenes[i].fresh() for i in scene_indices]
    if scene_indices:
        blocks = [corpus.a_views[:, corpus.scene_view_slice(i)] for i in scene_indices]
        a = np.concatenate(blocks, axis=1)
    else:
        a = np.zeros((corpus.n_objects, 0), dtype=corpus.a_views.dtype)
    planted = None
    if corpus.planted is not None:
        if scene_indices:
            hblocks = [corpus.planted.h[:, corpus.scene_view_slice(i)] for i in scene_indices]
            h = np.concatenate(hblocks, axis=1)
        else:
            h = np.zeros((corpus.planted.w.shape[1], 0), dtype=corpus.planted.h.dtype)
        planted = PlantedTruth(
            w=corpus.planted.w,
            h=h,
            template_objects=corpus.planted.template_objects,
            template_class=corpus.planted.template_class,
        )
    return Corpus(
        object_vocabulary=list(corpus.object_vocabulary),
        class_names=list(corpus.class_names),
        scenes=scenes,
        a_views=a,
        views_per_scene=corpus.views_per_scene,
        planted=planted,
        generator_spec=corpus.generator_spec,
    )


def split_corpus(corpus: Corpus, split: SplitSpec) -> tuple[Corpus, Corpus, Corpus]:
    """Class-stratified split at scene granularity (views stay together)."""
    split.validate()
    rng = np.random.default_rng(split.seed)
    need = split.train + split.val + split.test
    per_class: dict[str, list[int]] = {name: [] for name in corpus.class_names}
    for i, scene in enumerate(corpus.scenes):
        per_class.setdefault(scene.class_name, []).append(i)
    train_idx: list[int] = []
    val_idx: list[int] = []
    test_idx: list[int] = []
    for name in corpus.class_names:
        idxs = per_class.get(name, [])
        if len(idxs) < need:
            raise ValueError(
                f"class {name!r} has {len(idxs)} scenes but the split needs {need}"
            )
        perm = rng.permutation(len(idxs))
        chosen = [idxs[j] for j in perm]
        train_idx.extend(sorted(chosen[: split.train]))
        val_idx.extend(sorted(chosen[split.train : split.train + split.val]))
        test_idx.extend(sorted(chosen[split.train + split.val : need]))
    return (
        _subcorpus(corpus, sorted(train_idx)),
        _subcorpus(corpus, sorted(val_idx)),
        _subcorpus(corpus, sorted(test_idx)),
    )


def select_classes(corpus: Corpus, class_names: list[str]) -> Corpus:
    """Corpus restricted to ``class_names`` (which also become its label order)."""
    missing = [c for c in class_names if c not in corpus.class_names]
    if missing:
        raise ValueError(f"classes not in corpus: {missing}")
    indices = [i for i, s in enumerate(corpus.scenes) if s.class_name in set(class_names)]
    sub = _subcorpus(corpus, indices)
    sub.class_names = list(class_names)
    return sub


def filter_rare_objects(corpus: Corpus, min_views: int = 5) -> Corpus:
    """Drop objects that appear in fewer than ``min_views`` views."""
    keep = np.flatnonzero(corpus.a_views.sum(axis=1) >= min_views)
    vocab = [corpus.object_vocabulary[i] for i in keep]
    kept_set = set(vocab)
    scenes = []
    for scene in corpus.scenes:
        views = [
            ViewObservation(v.view_index, v.object_presence[keep]) for v in scene.views
        ]
        scenes.append(
            SceneEpisode(scene.scene_id, scene.class_name, views, np.zeros(len(views), dtype=bool))
        )
    planted = None
    if corpus.planted is not None:
        planted = PlantedTruth(
            w=corpus.planted.w[keep],
            h=corpus.planted.h,
            template_objects=[
                [o for o in objs if o in kept_set] for objs in corpus.planted.template_objects
            ],
            template_class=list(corpus.planted.template_class),
        )
    return Corpus(
        object_vocabulary=vocab,
        class_names=list(corpus.class_names),
        scenes=scenes,
        a_views=corpus.a_views[keep],
        views_per_scene=corpus.views_per_scene,
        planted=planted,
        generator_spec=None,
    )


def _spec_to_dict(spec: GeneratorSpec) -> dict:
    return dataclasses.asdict(spec)


def _spec_from_dict(d: dict) -> GeneratorSpec:
    return GeneratorSpec(**d)


def persist_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus directory: vocab.txt, views.csv, and a meta file."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "vocab.txt").write_text(
        "".join(name + "\n" for name in corpus.object_vocabulary), encoding="utf-8"
    )
    m = corpus.n_objects
    with open(root / "views.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "class", "view_index"] + [f"obj_{i}" for i in range(m)])
        col = 0
        for scene in corpus.scenes:
            for view in scene.views:
                writer.writerow(
                    [scene.scene_id, scene.class_name, view.view_index]
                    + corpus.a_views[:, col].tolist()
                )
                col += 1
    meta: dict = {
        "format_version": _CORPUS_FORMAT_VERSION,
        "class_names": list(corpus.class_names),
        "views_per_scene": corpus.views_per_scene,
        "generator_spec": _spec_to_dict(corpus.generator_spec)
        if corpus.generator_spec is not None
        else None,
    }
    if corpus.planted is not None:
        meta["planted"] = {
            "template_objects": corpus.planted.template_objects,
            "template_class": corpus.planted.template_class,
            "active_templates": [
                np.flatnonzero(corpus.planted.h[:, j]).tolist()
                for j in range(corpus.planted.h.shape[1])
            ],
        }
    else:
        meta["planted"] = None
    (root / "meta").write_text(yaml.safe_dump(meta, sort_keys=True), encoding="utf-8")


def read_corpus(path: str | Path) -> Corpus:
    """Read a corpus directory written by :func:`persist_corpus`."""
    root = Path(path)
    for required in ("vocab.txt", "views.csv", "meta"):
        if not (root / required).exists():
            raise CorpusFormatError(f"{root}: missing {required}")
    vocab = (root / "vocab.txt").read_text(encoding="utf-8").splitlines()
    vocab = [v for v in vocab if v != ""]
    try:
        meta = yaml.safe_load((root / "meta").read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise CorpusFormatError(f"{root}/meta: invalid YAML ({exc})") from exc
    if not isinstance(meta, dict) or "class_names" not in meta:
        raise CorpusFormatError(f"{root}/meta: expected a mapping with class_names")
    class_names = list(meta["class_names"])
    views_per_scene = int(meta["views_per_scene"])
    m = len(vocab)

    scene_rows: dict[str, list[tuple[int, str, np.ndarray]]] = {}
    scene_order: list[str] = []
    with open(root / "views.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["scene_id", "class", "view_index"] + [f"obj_{i}" for i in range(m)]
        if header != expected:
            raise CorpusFormatError(
                f"{root}/views.csv line 1: header does not match vocabulary "
                f"({len(header or []) - 3} object columns for {m} vocabulary entries)"
            )
        for ln, row in enumerate(reader, start=2):
            if len(row) != 3 + m:
                raise CorpusFormatError(
                    f"{root}/views.csv line {ln}: expected {3 + m} fields, got {len(row)}"
                )
            scene_id, class_name, view_index = row[0], row[1], row[2]
            if class_name not in class_names:
                raise CorpusFormatError(
                    f"{root}/views.csv line {ln}: unknown class {class_name!r}"
                )
            try:
                vi = int(view_index)
            except ValueError:
                raise CorpusFormatError(
                    f"{root}/views.csv line {ln}: view_index {view_index!r} is not an integer"
                ) from None
            vec = np.zeros(m, dtype=np.int8)
            for j, cell in enumerate(row[3:]):
                if cell == "0":
                    continue
                if cell == "1":
                    vec[j] = 1
                    continue
                raise CorpusFormatError(
                    f"{root}/views.csv line {ln}, column obj_{j}: presence value "
                    f"{cell!r} is not 0 or 1"
                )
            if scene_id not in scene_rows:
                scene_rows[scene_id] = []
                scene_order.append(scene_id)
            scene_rows[scene_id].append((vi, class_name, vec))

    scenes: list[SceneEpisode] = []
    columns: list[np.ndarray] = []
    for scene_id in scene_order:
        rows = scene_rows[scene_id]
        if len(rows) != views_per_scene:
            raise CorpusFormatError(
                f"{root}/views.csv: scene {scene_id!r} has {len(rows)} views, "
                f"expected {views_per_scene}"
            )
        rows.sort(key=lambda r: r[0])
        if [r[0] for r in rows] != list(range(views_per_scene)):
            raise CorpusFormatError(
                f"{root}/views.csv: scene {scene_id!r} view indices are not 0.."
                f"{views_per_scene - 1}"
            )
        classes = {r[1] for r in rows}
        if len(classes) != 1:
            raise CorpusFormatError(
                f"{root}/views.csv: scene {scene_id!r} spans multiple classes {sorted(classes)}"
            )
        views = [ViewObservation(i, rows[i][2]) for i in range(views_per_scene)]
        scenes.append(
            SceneEpisode(scene_id, rows[0][1], views, np.zeros(views_per_scene, dtype=bool))
        )
        columns.extend(r[2] for r in rows)

    a_views = np.stack(columns, axis=1) if columns else np.zeros((m, 0), dtype=np.int8)
    planted = None
    if meta.get("planted"):
        pm = meta["planted"]
        template_objects = [list(t) for t in pm["template_objects"]]
        template_class = [int(c) for c in pm["template_class"]]
        k = len(template_objects)
        vocab_index = {name: i for i, name in enumerate(vocab)}
        w = np.zeros((m, k), dtype=np.int8)
        for t, objs in enumerate(template_objects):
            for o in objs:
                if o not in vocab_index:
                    raise CorpusFormatError(
                        f"{root}/meta: planted template {t} object {o!r} not in vocab.txt"
                    )
                w[vocab_index[o], t] = 1
        active = pm["active_templates"]
        if len(active) != a_views.shape[1]:
            raise CorpusFormatError(
                f"{root}/meta: planted active_templates has {len(active)} entries "
                f"for {a_views.shape[1]} views"
            )
        h = np.zeros((k, a_views.shape[1]), dtype=np.int8)
        for j, ids in enumerate(active):
            h[list(ids), j] = 1
        planted = PlantedTruth(w, h, template_objects, template_class)
    spec = None
    if meta.get("generator_spec"):
        spec = _spec_from_dict(meta["generator_spec"])
    return Corpus(
        object_vocabulary=vocab,
        class_names=class_names,
        scenes=scenes,
        a_views=a_views,
        views_per_scene=views_per_scene,
        planted=planted,
        generator_spec=spec,
    )


def random_templates(
    num_classes: int,
    object_vocabulary: list[str],
    rng: np.random.Generator,
    templates_per_class: tuple[int, int] = (2, 4),
    objects_per_template: tuple[int, int] = (3, 8),
    overlap_rate: float = 0.0,
) -> list[list[list[str]]]:
    """Sample planted templates, optionally re-using templates across classes.

    With probability ``overlap_rate`` a class template is copied from an
    already-built class instead of sampled fresh, so the same object group
    can back several scene classes.
    """
    if not 0.0 <= overlap_rate <= 1.0:
        raise ValueError("overlap_rate must be in [0, 1]")
    m = len(object_vocabulary)
    lo_t, hi_t = templates_per_class
    lo_o, hi_o = objects_per_template
    if lo_t < 1 or hi_t < lo_t:
        raise ValueError("templates_per_class bounds must satisfy 1 <= lo <= hi")
    if lo_o < 1 or hi_o < lo_o or hi_o > m:
        raise ValueError("objects_per_template bounds must fit the vocabulary")
    all_templates: list[list[str]] = []
    out: list[list[list[str]]] = []
    for _ in range(num_classes):
        count = int(rng.integers(lo_t, hi_t + 1))
        templates = []
        for _ in range(count):
            if all_templates and rng.random() < overlap_rate:
                templates.append(list(all_templates[int(rng.integers(len(all_templates)))]))
                continue
            size = int(rng.integers(lo_o, hi_o + 1))
            chosen = rng.choice(m, size=size, replace=False)
            template = [object_vocabulary[i] for i in sorted(chosen)]
            templates.append(template)
            all_templates.append(template)
        out.append(templates)
    return out
