import numpy as np
import pytest

from scenekit.agent import (
    Action,
    AgentModels,
    InfeasibleActionError,
    QConfig,
    QPolicy,
    ReplayBuffer,
    RewardSpec,
    SceneEnv,
    Transition,
    action_reward,
    build_state,
    circular_distance,
    env_step,
    epsilon_at,
    exploration_bonus,
    load_policy,
    q_update,
    run_episode,
    save_policy,
    train_policy,
    _move_target,
)
from scenekit.dataset import SceneEpisode, ViewObservation
from scenekit.fusion import FusedScores


class StubWsvm:
    """Per-view score lookup disguised as a classifier.

    ``table`` maps a fused-values tuple to a per-class score vector; anything
    missing scores zero everywhere.
    """

    def __init__(self, class_names, table=None, default=None):
        self.class_names = class_names
        self.table = table or {}
        self.default = default

    @property
    def n_classes(self):
        return len(self.class_names)

    def lookup(self, values):
        key = tuple(np.round(values, 9))
        if key in self.table:
            return np.asarray(self.table[key], dtype=float)
        if self.default is not None:
            return np.asarray(self.default, dtype=float)
        return np.zeros(self.n_classes)


# route wsvm_decide through the stub
import scenekit.agent as agent_mod
from scenekit.wsvm import WsvmDecision


def _stub_decide(model, values):
    if isinstance(model, StubWsvm):
        per_class = model.lookup(values)
        forced = int(np.argmax(per_class)) if per_class.size else 0
        label = forced if per_class.max() > 0 else None
        return WsvmDecision(label, per_class, per_class, per_class, forced)
    raise AssertionError("stub only")


@pytest.fixture(autouse=True)
def patch_decide(monkeypatch):
    monkeypatch.setattr(agent_mod, "wsvm_decide", _stub_decide)


def make_episode(n_views=8, class_name="class00", m=4):
    views = [ViewObservation(v, np.zeros(m, dtype=np.int8)) for v in range(n_views)]
    return SceneEpisode("s0", class_name, views, np.zeros(n_views, dtype=bool))


def env_for(episode, scores, class_names=("class00", "class01"), table=None, default=None, psi=1.5):
    wsvm = StubWsvm(list(class_names), table=table, default=default)
    return SceneEnv(episode, scores, wsvm, RewardSpec(psi=psi))


# -------------------------------------------------------------- reward table


def test_exploration_bonus_zero_convention():
    assert exploration_bonus(0, 0.0) == 0.0
    assert exploration_bonus(0, 1.5) == 0.0
    assert exploration_bonus(1, 0.0) == 1.0
    assert exploration_bonus(3, 1.5) == pytest.approx(3.0**1.5)


@pytest.mark.parametrize("psi", [0.0, 1.5])
@pytest.mark.parametrize("remaining", range(8))
def test_reward_table_enumeration(psi, remaining):
    spec = RewardSpec(psi=psi)
    bonus = 0.0 if remaining == 0 else float(remaining) ** psi
    assert action_reward(Action.PREDICT, True, False, remaining, spec) == 8.0 + bonus
    assert action_reward(Action.PREDICT, False, False, remaining, spec) == -8.0
    assert action_reward(Action.PREDICT, False, True, remaining, spec) == -8.0
    assert action_reward(Action.REJECT, True, False, remaining, spec) == -8.0
    assert action_reward(Action.REJECT, False, True, remaining, spec) == 8.0 + bonus
    assert action_reward(Action.REJECT, False, False, remaining, spec) == 0.0
    for move in (Action.MOVE_NEAREST, Action.MOVE_FURTHEST):
        assert action_reward(move, True, False, remaining, spec) == -1.0
        assert action_reward(move, False, False, remaining, spec) == 0.0


def test_reward_paper_value():
    spec = RewardSpec(psi=1.5)
    r = action_reward(Action.PREDICT, True, False, 3, spec)
    assert r == pytest.approx(8.0 + 3.0**1.5)
    assert r == pytest.approx(13.196152422706632)


# -------------------------------------------------------------------- states


def test_build_state_hand_fixture():
    wsvm = StubWsvm(["a", "b"], default=[0.5, 0.3])
    fused = FusedScores(values=np.array([1.0, 0.0]), contributing=frozenset({0, 1}))
    state = build_state(fused, wsvm, views_seen=2, total_views=8)
    assert state.class_probs.tolist() == [0.5, 0.3]
    assert state.rejection_score == pytest.approx(0.5)
    assert state.views_seen_norm == pytest.approx(0.25)
    assert state.vector().tolist() == [0.5, 0.3, 0.5, 0.25]


def test_build_state_zero_scores_full_rejection():
    wsvm = StubWsvm(["a", "b"])
    fused = FusedScores(values=np.zeros(2), contributing=frozenset({0}))
    state = build_state(fused, wsvm, 1, 8)
    assert state.rejection_score == 1.0
    state = build_state(fused, wsvm, 8, 8)
    assert state.views_seen_norm == 1.0


# ----------------------------------------------------------------- movement


def test_circular_distance():
    assert circular_distance(0, 7, 8) == 1
    assert circular_distance(0, 4, 8) == 4
    assert circular_distance(2, 6, 8) == 4


def test_move_targets_nearest_furthest_clockwise_ties():
    visited = np.zeros(8, dtype=bool)
    visited[0] = True
    # from 0: nearest unseen is 1 (clockwise beats 7), furthest is 4
    assert _move_target(0, visited, furthest=False) == 1
    assert _move_target(0, visited, furthest=True) == 4
    visited[1] = True
    assert _move_target(0, visited, furthest=False) == 7
    visited[4] = True
    # distance-3 candidates: clockwise 3 preferred over 5
    assert _move_target(0, visited, furthest=True) == 3
    assert _move_target(0, np.ones(8, dtype=bool), furthest=False) is None


# ---------------------------------------------------------------- env steps


def test_env_predict_rewards():
    scores = np.zeros((2, 8))
    scores[0, :] = 1.0
    table = {tuple(np.round(scores[:, 0], 9)): [0.9, 0.1]}
    env = env_for(make_episode(), scores, table=table, default=[0.9, 0.1])
    env.reset(0)
    state, reward, done = env.step(Action.PREDICT)
    assert done and state is None
    assert reward == pytest.approx(8.0 + 7.0**1.5)


def test_env_wrong_predict_and_move_penalty():
    scores = np.zeros((2, 8))
    env = env_for(make_episode(class_name="class01"), scores, default=[0.9, 0.1])
    env.reset(0)
    # forced prediction is class00, truth class01: moving costs nothing
    state, reward, done = env.step(Action.MOVE_NEAREST)
    assert not done and reward == 0.0
    state, reward, done = env.step(Action.PREDICT)
    assert done and reward == -8.0


def test_env_move_when_correct_costs_one():
    scores = np.zeros((2, 8))
    env = env_for(make_episode(class_name="class00"), scores, default=[0.9, 0.1])
    env.reset(0)
    _, reward, done = env.step(Action.MOVE_FURTHEST)
    assert reward == -1.0 and not done


def test_env_reject_on_unknown_and_known():
    scores = np.zeros((2, 8))
    env = env_for(make_episode(class_name="classXX"), scores, default=[0.0, 0.0])
    env.reset(0)
    _, reward, done = env.step(Action.REJECT)
    assert done and reward == pytest.approx(8.0 + 7.0**1.5)
    # wrongful reject: correct prediction was available
    env = env_for(make_episode(class_name="class00"), scores, default=[0.9, 0.1])
    env.reset(0)
    _, reward, done = env.step(Action.REJECT)
    assert reward == -8.0
    # reject on a known class the model would have gotten wrong anyway
    env = env_for(make_episode(class_name="class01"), scores, default=[0.9, 0.1])
    env.reset(0)
    _, reward, _ = env.step(Action.REJECT)
    assert reward == 0.0


def test_env_move_updates_fusion_and_masks():
    scores = np.zeros((2, 8))
    scores[0, 0] = 0.2
    scores[1, 3] = 0.7
    env = env_for(make_episode(), scores, default=[0.0, 0.0])
    env.reset(0)
    assert env.fused.values.tolist() == [0.2, 0.0]
    env.step(Action.MOVE_FURTHEST)  # to view 4
    env.step(Action.MOVE_NEAREST)  # to view 3 (clockwise from 4 is 5... nearest unseen)
    assert env.visited[0] and env.visited[4]
    assert env.fused.values[0] == pytest.approx(0.2)
    assert env.state.views_seen_norm == pytest.approx(3 / 8)


def test_env_infeasible_move_raises():
    scores = np.zeros((2, 2))
    env = env_for(make_episode(n_views=2), scores, default=[0.0, 0.0])
    env.reset(0)
    env.step(Action.MOVE_NEAREST)
    with pytest.raises(InfeasibleActionError):
        env_step(env, Action.MOVE_NEAREST)
    env.step(Action.PREDICT)
    with pytest.raises(InfeasibleActionError):
        env.step(Action.PREDICT)


# --------------------------------------------------------------------- q


def test_q_update_terminal_from_zero():
    policy = QPolicy.zeros(3)
    s = np.array([0.5, 0.2, 1.0])
    tr = Transition(s, Action.PREDICT, 4.0, None, True, False)
    q_update(policy, tr, learning_rate=0.1, discount=0.9)
    expected = 0.1 * 4.0 * np.array([0.5, 0.2, 1.0, 1.0])
    assert np.allclose(policy.weights[Action.PREDICT], expected)
    assert np.all(policy.weights[Action.REJECT] == 0)


def test_q_update_zero_td_error_no_change():
    policy = QPolicy.zeros(2)
    policy.weights[Action.REJECT] = np.array([1.0, 0.0, 1.0])
    s = np.array([2.0, 0.0])
    q_sa = policy.q_values(s)[Action.REJECT]
    tr = Transition(s, Action.REJECT, float(q_sa), None, True, False)
    before = policy.weights.copy()
    q_update(policy, tr, 0.5, 0.9)
    assert np.array_equal(policy.weights, before)


def test_q_update_converges_geometrically_to_reward():
    policy = QPolicy.zeros(2)
    s = np.array([1.0, -1.0])
    tr = Transition(s, Action.PREDICT, 5.0, None, True, False)
    for _ in range(2000):
        q_update(policy, tr, 0.05, 0.9)
    assert policy.q_values(s)[Action.PREDICT] == pytest.approx(5.0, abs=1e-6)


def test_q_update_uses_feasible_next_actions():
    policy = QPolicy.zeros(1)
    policy.weights[Action.MOVE_NEAREST, -1] = 100.0  # huge move bias
    s = np.array([0.0])
    tr = Transition(s, Action.PREDICT, 0.0, np.array([0.0]), False, False)
    q_update(policy, tr, 1.0, 1.0)
    # move was infeasible next, so the target used predict/reject (both 0)
    assert policy.q_values(s)[Action.PREDICT] == pytest.approx(0.0)


def test_q_update_rejects_nan():
    policy = QPolicy.zeros(2)
    tr = Transition(np.array([np.nan, 0.0]), Action.PREDICT, 1.0, None, True, False)
    with pytest.raises(ValueError, match="finite"):
        q_update(policy, tr, 0.1, 0.9)


def test_replay_ring_overwrites():
    buf = ReplayBuffer(capacity=3)
    for i in range(5):
        buf.push(Transition(np.array([float(i)]), Action.PREDICT, 0.0, None, True, False))
    assert len(buf) == 3
    stored = sorted(t.state[0] for t in buf.items)
    assert stored == [2.0, 3.0, 4.0]


def test_epsilon_schedule_endpoints():
    cfg = QConfig(episodes=1000)
    assert epsilon_at(0, cfg) == 1.0
    assert epsilon_at(499, cfg) > 0.05
    assert epsilon_at(500, cfg) == 0.05
    assert epsilon_at(999, cfg) == 0.05


# ------------------------------------------------------------------ episodes


def agent_models(scores, class_names=("class00", "class01"), default=None, table=None):
    wsvm = StubWsvm(list(class_names), table=table, default=default)
    return AgentModels(wsvm=wsvm, scores_by_scene={"s0": scores})


def test_run_episode_immediate_predictor():
    scores = np.zeros((2, 8))
    models = agent_models(scores, default=[0.9, 0.1])
    policy = QPolicy.zeros(4)
    policy.weights[Action.PREDICT, -1] = 1.0
    traj = run_episode(policy, make_episode(), models, RewardSpec(), start_view=0)
    assert traj.n_actions == 1
    assert traj.actions == [Action.PREDICT]
    assert traj.outcome == "correct"


def test_run_episode_move_bound_and_forced_terminal():
    scores = np.zeros((2, 8))
    models = agent_models(scores, default=[0.0, 0.0])
    policy = QPolicy.zeros(4)
    policy.weights[Action.MOVE_NEAREST, -1] = 10.0
    policy.weights[Action.REJECT, -1] = 1.0
    traj = run_episode(policy, make_episode(class_name="nope"), models, RewardSpec(), start_view=2)
    moves = sum(1 for a in traj.actions if a in (Action.MOVE_NEAREST, Action.MOVE_FURTHEST))
    assert moves == 7  # 8-view scene: at most 7 moves, then a forced decision
    assert traj.actions[-1] == Action.REJECT
    assert traj.outcome == "rejected"
    assert traj.n_actions <= 8


def test_run_episode_requires_fresh_and_is_deterministic():
    scores = np.zeros((2, 8))
    models = agent_models(scores, default=[0.4, 0.6])
    policy = QPolicy.zeros(4)
    episode = make_episode()
    episode.visited_mask[0] = True
    with pytest.raises(ValueError, match="explored"):
        run_episode(policy, episode, models, RewardSpec())
    episode = make_episode()
    a = run_episode(policy, episode, models, RewardSpec(), rng=np.random.default_rng(3), greedy=True)
    b = run_episode(policy, episode, models, RewardSpec(), rng=np.random.default_rng(3), greedy=True)
    assert a.actions == b.actions
    assert a.rewards == b.rewards


def test_train_policy_zero_episodes_is_initialization():
    scores = np.zeros((2, 8))
    models = agent_models(scores, default=[0.5, 0.5])
    policy, curve = train_policy(
        [make_episode()], models, RewardSpec(), QConfig(episodes=0)
    )
    assert np.all(policy.weights == 0)
    assert curve == []


def test_train_policy_deterministic_and_learns_sign():
    scores = np.zeros((2, 8))
    scores[0, :] = 0.8
    models = agent_models(scores, default=[0.9, 0.05])
    cfg = QConfig(episodes=300, seed=11, replay_capacity=500)
    p1, c1 = train_policy([make_episode()], models, RewardSpec(psi=1.5), cfg)
    p2, c2 = train_policy([make_episode()], models, RewardSpec(psi=1.5), cfg)
    assert np.array_equal(p1.weights, p2.weights)
    assert c1 == c2
    # with a perfectly confident classifier the predict action dominates
    state_vec = np.array([0.9, 0.05, 0.1, 1 / 8, 1.0])[:5]
    q = p1.q_values(np.array([0.9, 0.05, 0.1, 0.125]))
    assert q[Action.PREDICT] == max(q)


def test_train_policy_empty_scene_list():
    models = agent_models(np.zeros((2, 8)))
    with pytest.raises(ValueError, match="no training scenes"):
        train_policy([], models, RewardSpec(), QConfig(episodes=1))


def test_policy_persistence_roundtrip(tmp_path):
    policy = QPolicy.zeros(4)
    policy.weights[:] = np.arange(policy.weights.size).reshape(policy.weights.shape)
    cfg = QConfig(episodes=123, seed=7)
    save_policy(policy, cfg, tmp_path / "p.json")
    loaded, loaded_cfg = load_policy(tmp_path / "p.json")
    assert np.array_equal(loaded.weights, policy.weights)
    assert loaded_cfg == cfg


def test_agent_models_requires_scores_or_detector():
    models = AgentModels(wsvm=StubWsvm(["a"]), scores_by_scene={})
    with pytest.raises(KeyError, match="no cached scores"):
        models.episode_scores(make_episode())
