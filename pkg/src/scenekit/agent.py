"""Active view-selection agent: the exploration MDP and a linear Q-learner.

The agent walks a scene's circular ring of views.  Its state is the
open-set classifier's per-class score vector, the rejection score (one
minus the best class score), and the fraction of views seen.  Four actions:
predict now, reject and stop, move to the nearest unseen view, move to the
furthest unseen view.  Rewards follow a fixed table; the wrongful-move and
correct-decision entries carry an exploration bonus of
``remaining_unseen ** psi`` that trades accuracy against sensing cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .dataset import SceneEpisode
from .fusion import FusedScores, incremental_fuse
from .wsvm import WsvmModel, wsvm_decide

UNKNOWN = -1


class InfeasibleActionError(RuntimeError):
    pass


class Action(IntEnum):
    PREDICT = 0
    REJECT = 1
    MOVE_NEAREST = 2
    MOVE_FURTHEST = 3


@dataclass
class RewardSpec:
    psi: float = 1.5
    correct_base: float = 8.0
    wrong: float = -8.0
    wrongful_reject: float = -8.0
    move_when_correct: float = -1.0
    # unstated cases: correct rejection mirrors correct prediction so the
    # reject action stays learnable; non-wasteful moves cost nothing
    reject_unknown_base: float = 8.0
    reject_otherwise: float = 0.0
    move_otherwise: float = 0.0


def exploration_bonus(remaining: int, psi: float) -> float:
    """remaining ** psi, with 0 remaining defined as 0 for every psi >= 0."""
    if remaining <= 0:
        return 0.0
    return float(remaining) ** psi


def action_reward(
    action: Action,
    would_be_correct: bool,
    truly_unknown: bool,
    remaining_unseen: int,
    spec: RewardSpec,
) -> float:
    """The full reward table as a pure function, enumerable in tests."""
    if action == Action.PREDICT:
        if would_be_correct:
            return spec.correct_base + exploration_bonus(remaining_unseen, spec.psi)
        return spec.wrong
    if action == Action.REJECT:
        if would_be_correct:
            return spec.wrongful_reject
        if truly_unknown:
            return spec.reject_unknown_base + exploration_bonus(remaining_unseen, spec.psi)
        return spec.reject_otherwise
    if would_be_correct:
        return spec.move_when_correct
    return spec.move_otherwise


@dataclass
class AgentState:
    class_probs: np.ndarray
    rejection_score: float
    views_seen_norm: float

    def vector(self) -> np.ndarray:
        return np.concatenate(
            [self.class_probs, [self.rejection_score, self.views_seen_norm]]
        )


def build_state(
    fused: FusedScores, wsvm: WsvmModel, views_seen: int, total_views: int
) -> AgentState:
    if views_seen < 1:
        raise ValueError("state needs at least one seen view")
    decision = wsvm_decide(wsvm, fused.values)
    probs = decision.per_class
    return AgentState(
        class_probs=probs,
        rejection_score=float(1.0 - probs.max()) if probs.size else 1.0,
        views_seen_norm=views_seen / total_views,
    )


def circular_distance(a: int, b: int, total: int) -> int:
    d = abs(a - b) % total
    return min(d, total - d)


def _move_target(current: int, visited: np.ndarray, furthest: bool) -> int | None:
    """Nearest/furthest unseen view by ring distance, clockwise on ties."""
    total = len(visited)
    distances = range(total // 2, 0, -1) if furthest else range(1, total // 2 + 1)
    for d in distances:
        for candidate in ((current + d) % total, (current - d) % total):
            if not visited[candidate]:
                return candidate
    return None


@dataclass(eq=False)
class AgentModels:
    """Bundle handed to the environment: classifier plus per-view scores."""

    wsvm: WsvmModel
    scores_by_scene: dict[str, np.ndarray] = field(default_factory=dict)
    detector: object | None = None

    def episode_scores(self, episode: SceneEpisode) -> np.ndarray:
        cached = self.scores_by_scene.get(episode.scene_id)
        if cached is not None:
            return cached
        if self.detector is None:
            raise KeyError(
                f"no cached scores for scene {episode.scene_id!r} and no detector to score it"
            )
        scores = np.stack(
            [self.detector.score_view(v.object_presence) for v in episode.views], axis=1
        )
        self.scores_by_scene[episode.scene_id] = scores
        return scores


class SceneEnv:
    """One scene's exploration episode."""

    def __init__(
        self,
        episode: SceneEpisode,
        view_scores: np.ndarray,
        wsvm: WsvmModel,
        reward_spec: RewardSpec,
    ):
        self.episode = episode
        self.view_scores = view_scores
        self.wsvm = wsvm
        self.reward_spec = reward_spec
        self.total_views = episode.n_views
        try:
            self.true_label = wsvm.class_names.index(episode.class_name)
        except ValueError:
            self.true_label = UNKNOWN
        self.visited = np.zeros(self.total_views, dtype=bool)
        self.current_view = 0
        self.fused: FusedScores | None = None
        self.decision = None
        self.state: AgentState | None = None
        self.done = False

    def reset(self, start_view: int = 0) -> AgentState:
        self.visited[:] = False
        self.visited[start_view] = True
        self.current_view = start_view
        self.fused = FusedScores(
            values=self.view_scores[:, start_view].copy(), contributing=frozenset({start_view})
        )
        self.done = False
        self._rebuild_state()
        return self.state

    def _rebuild_state(self) -> None:
        self.decision = wsvm_decide(self.wsvm, self.fused.values)
        probs = self.decision.per_class
        self.state = AgentState(
            class_probs=probs,
            rejection_score=float(1.0 - probs.max()) if probs.size else 1.0,
            views_seen_norm=int(self.visited.sum()) / self.total_views,
        )

    def remaining_unseen(self) -> int:
        return int((~self.visited).sum())

    def feasible_actions(self) -> list[Action]:
        actions = [Action.PREDICT, Action.REJECT]
        if self.remaining_unseen() > 0:
            actions += [Action.MOVE_NEAREST, Action.MOVE_FURTHEST]
        return actions

    def would_predict_correctly(self) -> bool:
        return self.true_label != UNKNOWN and self.decision.forced == self.true_label

    def step(self, action: Action):
        """Returns (next_state or None, reward, done)."""
        if self.done:
            raise InfeasibleActionError("episode already terminal")
        correct_now = self.would_predict_correctly()
        remaining = self.remaining_unseen()
        if action in (Action.PREDICT, Action.REJECT):
            reward = action_reward(
                action, correct_now, self.true_label == UNKNOWN, remaining, self.reward_spec
            )
            self.done = True
            return None, reward, True
        if remaining == 0:
            raise InfeasibleActionError("no unseen views left to move to")
        target = _move_target(
            self.current_view, self.visited, furthest=action == Action.MOVE_FURTHEST
        )
        reward = action_reward(
            action, correct_now, self.true_label == UNKNOWN, remaining, self.reward_spec
        )
        self.visited[target] = True
        self.current_view = target
        self.fused = incremental_fuse(self.fused, self.view_scores[:, target], target)
        self._rebuild_state()
        return self.state, reward, False


def env_step(env: SceneEnv, action: Action):
    return env.step(action)


@dataclass
class QConfig:
    learning_rate: float = 0.01
    discount: float = 0.98
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    replay_capacity: int = 10_000
    batch_size: int = 32
    episodes: int = 20_000
    seed: int = 0


@dataclass(eq=False)
class QPolicy:
    weights: np.ndarray  # (actions, state_dim + 1); last column is the bias

    @classmethod
    def zeros(cls, state_dim: int) -> "QPolicy":
        return cls(weights=np.zeros((len(Action), state_dim + 1)))

    def q_values(self, state_vec: np.ndarray) -> np.ndarray:
        return self.weights[:, :-1] @ state_vec + self.weights[:, -1]

    def greedy_action(self, state_vec: np.ndarray, feasible: list[Action]) -> Action:
        q = self.q_values(state_vec)
        best = max(feasible, key=lambda a: (q[a], -int(a)))
        return best


@dataclass
class Transition:
    state: np.ndarray
    action: Action
    reward: float
    next_state: np.ndarray | None
    done: bool
    next_move_feasible: bool


def _feasible_next(next_move_feasible: bool) -> list[Action]:
    actions = [Action.PREDICT, Action.REJECT]
    if next_move_feasible:
        actions += [Action.MOVE_NEAREST, Action.MOVE_FURTHEST]
    return actions


def q_update(
    policy: QPolicy, transition: Transition, learning_rate: float, discount: float
) -> QPolicy:
    """TD(0) update of the taken action's weights (bias as a constant-1 feature)."""
    s = np.concatenate([transition.state, [1.0]])
    if not np.isfinite(s).all() or not np.isfinite(transition.reward):
        raise ValueError("transition contains non-finite values")
    q_sa = float(policy.weights[transition.action] @ s)
    target = transition.reward
    if not transition.done:
        q_next = policy.q_values(transition.next_state)
        target += discount * max(q_next[a] for a in _feasible_next(transition.next_move_feasible))
    policy.weights[transition.action] += learning_rate * (target - q_sa) * s
    return policy


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[Transition] = []
        self._head = 0

    def push(self, item: Transition) -> None:
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self._head] = item
            self._head = (self._head + 1) % self.capacity

    def sample(self, rng: np.random.Generator, size: int) -> list[Transition]:
        idx = rng.integers(0, len(self.items), size=size)
        return [self.items[i] for i in idx]

    def __len__(self) -> int:
        return len(self.items)


def epsilon_at(episode: int, config: QConfig) -> float:
    half = max(1, config.episodes // 2)
    if episode >= half:
        return config.epsilon_end
    frac = episode / half
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac


@dataclass
class Trajectory:
    states: list[AgentState]
    actions: list[Action]
    rewards: list[float]
    outcome: str  # "correct" | "wrong" | "rejected"

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def episode_return(self) -> float:
        return float(sum(self.rewards))


def _run_one(
    env: SceneEnv,
    policy: QPolicy,
    rng: np.random.Generator | None,
    epsilon: float,
    start_view: int,
    buffer: ReplayBuffer | None = None,
) -> Trajectory:
    state = env.reset(start_view)
    states = [state]
    actions: list[Action] = []
    rewards: list[float] = []
    outcome = "rejected"
    for _ in range(env.total_views + 1):
        feasible = env.feasible_actions()
        if rng is not None and epsilon > 0 and rng.random() < epsilon:
            action = feasible[int(rng.integers(len(feasible)))]
        else:
            action = policy.greedy_action(state.vector(), feasible)
        correct_now = env.would_predict_correctly()
        next_state, reward, done = env.step(action)
        actions.append(action)
        rewards.append(reward)
        if buffer is not None:
            buffer.push(
                Transition(
                    state=state.vector(),
                    action=action,
                    reward=reward,
                    next_state=None if done else next_state.vector(),
                    done=done,
                    next_move_feasible=bool(not done and env.remaining_unseen() > 0),
                )
            )
        if done:
            if action == Action.PREDICT:
                outcome = "correct" if correct_now else "wrong"
            else:
                outcome = "rejected"
            break
        state = next_state
        states.append(state)
    return Trajectory(states=states, actions=actions, rewards=rewards, outcome=outcome)


def run_episode(
    policy: QPolicy,
    episode: SceneEpisode,
    models: AgentModels,
    reward_spec: RewardSpec,
    greedy: bool = True,
    rng: np.random.Generator | None = None,
    start_view: int | None = None,
    epsilon: float = 0.0,
) -> Trajectory:
    if not episode.is_fresh():
        raise ValueError(f"episode {episode.scene_id!r} has already been explored")
    env = SceneEnv(episode.fresh(), models.episode_scores(episode), models.wsvm, reward_spec)
    if start_view is None:
        if rng is None:
            start_view = 0
        else:
            start_view = int(rng.integers(env.total_views))
    eps = 0.0 if greedy else epsilon
    return _run_one(env, policy, rng, eps, start_view)


def train_policy(
    scenes: list[SceneEpisode],
    models: AgentModels,
    reward_spec: RewardSpec,
    config: QConfig | None = None,
) -> tuple[QPolicy, list[tuple[int, float, float]]]:
    """Epsilon-greedy episodes with a ring replay buffer and per-step minibatches.

    Returns the trained policy and the (episode, return, epsilon) curve.
    Deterministic given ``config.seed``.
    """
    config = config or QConfig()
    if not scenes:
        raise ValueError("no training scenes")
    rng = np.random.default_rng(config.seed)
    state_dim = models.wsvm.n_classes + 2
    policy = QPolicy.zeros(state_dim)
    buffer = ReplayBuffer(config.replay_capacity)
    curve: list[tuple[int, float, float]] = []
    for ep in range(config.episodes):
        eps = epsilon_at(ep, config)
        scene = scenes[int(rng.integers(len(scenes)))]
        env = SceneEnv(
            scene.fresh(), models.episode_scores(scene), models.wsvm, reward_spec
        )
        start = int(rng.integers(env.total_views))
        state = env.reset(start)
        episode_return = 0.0
        for _ in range(env.total_views + 1):
            feasible = env.feasible_actions()
            if rng.random() < eps:
                action = feasible[int(rng.integers(len(feasible)))]
            else:
                action = policy.greedy_action(state.vector(), feasible)
            next_state, reward, done = env.step(action)
            episode_return += reward
            buffer.push(
                Transition(
                    state=state.vector(),
                    action=action,
                    reward=reward,
                    next_state=None if done else next_state.vector(),
                    done=done,
                    next_move_feasible=bool(not done and env.remaining_unseen() > 0),
                )
            )
            if len(buffer) >= config.batch_size:
                for tr in buffer.sample(rng, config.batch_size):
                    q_update(policy, tr, config.learning_rate, config.discount)
            if done:
                break
            state = next_state
        curve.append((ep, episode_return, eps))
    return policy, curve


def save_policy(policy: QPolicy, config: QConfig, path: str | Path) -> None:
    payload = {
        "format": "q-policy",
        "actions": [a.name for a in Action],
        "weights": policy.weights.tolist(),
        "hyperparameters": {
            "learning_rate": config.learning_rate,
            "discount": config.discount,
            "epsilon_start": config.epsilon_start,
            "epsilon_end": config.epsilon_end,
            "replay_capacity": config.replay_capacity,
            "batch_size": config.batch_size,
            "episodes": config.episodes,
            "seed": config.seed,
        },
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_policy(path: str | Path) -> tuple[QPolicy, QConfig]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "q-policy":
        raise ValueError(f"{path}: not a policy file")
    hp = payload["hyperparameters"]
    return (
        QPolicy(weights=np.asarray(payload["weights"], dtype=float)),
        QConfig(
            learning_rate=hp["learning_rate"],
            discount=hp["discount"],
            epsilon_start=hp["epsilon_start"],
            epsilon_end=hp["epsilon_end"],
            replay_capacity=hp["replay_capacity"],
            batch_size=hp["batch_size"],
            episodes=hp["episodes"],
            seed=hp["seed"],
        ),
    )


def update_on_new_class(
    train_corpus,
    new_scenes: list[SceneEpisode],
    new_class_name: str,
    dictionary,
    detector_spec,
    pbmf_config,
    wsvm_config,
    samples_per_scene: int = 2,
    seed: int = 0,
):
    """Stage-4 update once a person confirms a batch of scenes as a new class.

    Extends the dictionary from the new class's object data (existing
    columns frozen), rebuilds the detector over the extended dictionary, and
    refits the open-set classifier with the new class included.  Returns
    (dictionary, detector, wsvm model, class names).
    """
    from .detector import make_detector
    from .features import sample_fused_features, scene_matrix
    from .pbmf import dynamic_extend
    from .wsvm import fit_wsvm

    if len(new_scenes) < 10:
        raise ValueError(
            f"need at least 10 confirmed scenes of {new_class_name!r}, got {len(new_scenes)}"
        )
    a_new = np.concatenate([scene_matrix(s) for s in new_scenes], axis=1)
    extended, _ = dynamic_extend(dictionary, a_new, pbmf_config, class_name=new_class_name)
    det = make_detector(extended, detector_spec)
    class_names = list(train_corpus.class_names) + [new_class_name]
    rng = np.random.default_rng(seed)
    feats = []
    labels = []
    old_scores = det.score_matrix(train_corpus.a_views)
    f_old, l_old = sample_fused_features(
        old_scores, train_corpus.scenes, train_corpus.scene_labels(), rng, samples_per_scene
    )
    feats.append(f_old)
    labels.append(l_old)
    new_scores = np.concatenate(
        [det.score_matrix(scene_matrix(s)) for s in new_scenes], axis=1
    )
    new_label = len(class_names) - 1
    f_new, l_new = sample_fused_features(
        new_scores,
        new_scenes,
        np.full(len(new_scenes), new_label),
        rng,
        samples_per_scene,
    )
    feats.append(f_new)
    labels.append(l_new)
    model = fit_wsvm(
        np.concatenate(feats, axis=0),
        np.concatenate(labels),
        class_names,
        wsvm_config,
    )
    return extended, det, model, class_names
