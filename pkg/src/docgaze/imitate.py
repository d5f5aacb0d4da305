"""Adversarial imitation of viewing behavior with linear function
approximators.

A linear-softmax policy over per-cell state features is trained against a
logistic discriminator: the discriminator separates human state-action
pairs from generated ones, its confusion is the policy reward, and the
policy/critic pair is updated with clipped-surrogate (PPO-style) steps.
Everything is small enough to verify by finite differences.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .density import Scanpath
from .simulate import (
    GRID_COLS,
    GRID_ROWS,
    N_ACTIONS,
    BeliefState,
    foveate_update,
    point_to_cell,
)

log = logging.getLogger(__name__)

N_FEATURES = 15
N_WEIGHTS = N_FEATURES + 1  # trailing bias


def feature_matrix(b: BeliefState) -> np.ndarray:
    """Per-action features, shape (640, 16).

    Per cell: 6 channel values, 6 local 3x3 channel means, normalized row
    and column, visited fraction, bias.
    """
    ch = b.channels  # (6, 20, 32)
    padded = np.pad(ch, ((0, 0), (1, 1), (1, 1)), mode="edge")
    local = np.zeros_like(ch)
    for dy in range(3):
        for dx in range(3):
            local += padded[:, dy : dy + GRID_ROWS, dx : dx + GRID_COLS]
    local /= 9.0
    rows, cols = np.mgrid[0:GRID_ROWS, 0:GRID_COLS]
    visited_frac = len(b.visited) / N_ACTIONS
    feats = np.empty((N_ACTIONS, N_WEIGHTS))
    feats[:, 0:6] = ch.reshape(6, -1).T
    feats[:, 6:12] = local.reshape(6, -1).T
    feats[:, 12] = (rows / (GRID_ROWS - 1)).ravel()
    feats[:, 13] = (cols / (GRID_COLS - 1)).ravel()
    feats[:, 14] = visited_frac
    feats[:, 15] = 1.0
    return feats


@dataclass
class ImitationConfig:
    lr: float = 1e-2
    critic_lr: float = 1e-2
    disc_lr: float = 0.1
    clip_eps: float = 0.2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    epochs: int = 15
    batch_size: int = 32  # images per update round
    ppo_epochs: int = 4
    horizon: int = 7
    episodes_per_image: int = 2
    fovea_radius: float = 3.0
    disc_steps: int = 3
    seed: int = 0


@dataclass
class ImitationModel:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(N_WEIGHTS))
    critic: np.ndarray = field(default_factory=lambda: np.zeros(N_WEIGHTS))
    disc: np.ndarray = field(default_factory=lambda: np.zeros(N_WEIGHTS))
    epoch: int = 0

    def copy(self) -> "ImitationModel":
        return ImitationModel(
            theta=self.theta.copy(),
            critic=self.critic.copy(),
            disc=self.disc.copy(),
            epoch=self.epoch,
        )

    def check_finite(self):
        for name, w in (("policy", self.theta), ("critic", self.critic),
                        ("discriminator", self.disc)):
            if not np.all(np.isfinite(w)):
                raise FloatingPointError(f"non-finite {name} weights")


def masked_softmax(logits: np.ndarray, visited_mask: np.ndarray) -> np.ndarray:
    if visited_mask.all():
        raise ValueError("all cells visited; no action available")
    z = np.where(visited_mask, -np.inf, logits)
    z = z - z[~visited_mask].max()
    e = np.where(visited_mask, 0.0, np.exp(z))
    return e / e.sum()


def policy_distribution(model: ImitationModel, b: BeliefState) -> np.ndarray:
    """Softmax over per-cell linear scores, zeroed on visited cells."""
    feats = feature_matrix(b)
    return masked_softmax(feats @ model.theta, b.visited_mask())


def _dist_from_feats(theta, feats, visited_mask):
    return masked_softmax(feats @ theta, visited_mask)


def state_features(feats: np.ndarray, visited_mask: np.ndarray) -> np.ndarray:
    """Critic input: mean action features over unvisited cells."""
    return feats[~visited_mask].mean(axis=0)


def state_value(model: ImitationModel, feats, visited_mask) -> float:
    return float(state_features(feats, visited_mask) @ model.critic)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def discriminator_prob(model: ImitationModel, phi: np.ndarray) -> np.ndarray:
    return np.clip(_sigmoid(np.asarray(phi) @ model.disc), 1e-6, 1 - 1e-6)


def gail_reward(model: ImitationModel, phi: np.ndarray) -> float:
    """-log(1 - D): grows as the discriminator mistakes the pair for human."""
    d = discriminator_prob(model, phi)
    return float(-np.log1p(-d))


def discriminator_update(
    model: ImitationModel,
    real_features: np.ndarray,
    fake_features: np.ndarray,
    lr: float,
) -> Tuple[ImitationModel, float]:
    """One gradient step on binary cross-entropy (real -> 1, fake -> 0)."""
    real = np.atleast_2d(real_features)
    fake = np.atleast_2d(fake_features)
    if real.size == 0 or fake.size == 0:
        raise ValueError("empty discriminator batch")
    d_real = discriminator_prob(model, real)
    d_fake = discriminator_prob(model, fake)
    loss = float(-(np.log(d_real).mean() + np.log(1 - d_fake).mean()) / 2)
    grad = ((d_real - 1.0) @ real / len(real) + d_fake @ fake / len(fake)) / 2
    out = model.copy()
    out.disc = model.disc - lr * grad
    out.check_finite()
    return out, loss


@dataclass
class Episode:
    feats: List[np.ndarray]  # per step, (640, 16)
    visited: List[np.ndarray]  # per step, (640,) bool
    actions: List[int]
    log_probs: List[float]
    rewards: List[float]


@dataclass
class TrajectoryBuffer:
    episodes: List[Episode] = field(default_factory=list)

    def __len__(self):
        return len(self.episodes)

    def action_features(self) -> np.ndarray:
        rows = [
            ep.feats[t][ep.actions[t]]
            for ep in self.episodes
            for t in range(len(ep.actions))
        ]
        return np.stack(rows)


def compute_gae(
    rewards: Sequence[float],
    values: Sequence[float],
    gamma: float,
    lam: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and returns; terminal value 0."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = len(rewards)
    adv = np.zeros(T)
    last = 0.0
    for t in range(T - 1, -1, -1):
        next_value = values[t + 1] if t + 1 < T else 0.0
        delta = rewards[t] + gamma * next_value - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv, adv + values


def ppo_update(
    model: ImitationModel,
    buffer: TrajectoryBuffer,
    clip_eps: float,
    epochs: int,
    lr: float,
    critic_lr: Optional[float] = None,
    gamma: float = 0.99,
    lam: float = 0.95,
) -> Tuple[ImitationModel, Dict[str, float]]:
    """Clipped-surrogate policy ascent plus squared-error critic descent."""
    if not buffer.episodes:
        raise ValueError("empty trajectory buffer")
    if critic_lr is None:
        critic_lr = lr
    out = model.copy()
    diag: Dict[str, float] = {}
    for _ in range(epochs):
        theta_grad = np.zeros(N_WEIGHTS)
        critic_grad = np.zeros(N_WEIGHTS)
        n_steps = 0
        clipped = 0
        per_ep = []
        for ep in buffer.episodes:
            svecs = [state_features(f, v) for f, v in zip(ep.feats, ep.visited)]
            values = [float(s @ out.critic) for s in svecs]
            adv, returns = compute_gae(ep.rewards, values, gamma, lam)
            per_ep.append((ep, svecs, values, adv, returns))
        # standardize advantages across the buffer so near-constant rewards
        # (discriminator at chance) don't push every taken action uniformly
        flat = np.concatenate([adv for _, _, _, adv, _ in per_ep])
        if flat.size > 1 and flat.std() > 0:
            adv_mu, adv_sd = float(flat.mean()), float(flat.std())
        else:
            adv_mu, adv_sd = 0.0, 1.0
        for ep, svecs, values, adv, returns in per_ep:
            adv = (adv - adv_mu) / adv_sd
            for t, action in enumerate(ep.actions):
                feats = ep.feats[t]
                dist = _dist_from_feats(out.theta, feats, ep.visited[t])
                logp = np.log(dist[action])
                ratio = np.exp(logp - ep.log_probs[t])
                a = adv[t]
                active = not (
                    (a >= 0 and ratio > 1 + clip_eps)
                    or (a < 0 and ratio < 1 - clip_eps)
                )
                if active:
                    grad_logp = feats[action] - dist @ feats
                    theta_grad += ratio * a * grad_logp
                else:
                    clipped += 1
                critic_grad += 2.0 * (values[t] - returns[t]) * svecs[t]
                n_steps += 1
        out.theta = out.theta + lr * theta_grad / n_steps
        out.critic = out.critic - critic_lr * critic_grad / n_steps
        if not np.all(np.isfinite(out.theta)) or not np.all(
            np.isfinite(out.critic)
        ):
            raise FloatingPointError(
                "NaN in PPO update; last gradient norms: "
                f"policy={np.linalg.norm(theta_grad):.3g} "
                f"critic={np.linalg.norm(critic_grad):.3g}"
            )
        diag = {"clip_fraction": clipped / n_steps, "steps": float(n_steps)}
    return out, diag


class LinearPolicy:
    """simulate.Policy adapter around an ImitationModel."""

    def __init__(self, model: ImitationModel):
        self.model = model

    def action_distribution(self, b: BeliefState) -> np.ndarray:
        return policy_distribution(self.model, b)


@dataclass(frozen=True)
class ImitationExample:
    """One document: initial belief state, high-res beliefs, and the human
    scanpaths recorded on it."""

    image_id: str
    b0: BeliefState
    high_res: np.ndarray
    scanpaths: Tuple[Scanpath, ...]
    image_size: Tuple[int, int]  # (width, height)


def scanpath_to_actions(
    path: Scanpath, width: float, height: float
) -> List[int]:
    """Map fixations to grid cells, collapsing consecutive repeats."""
    actions: List[int] = []
    for f in path.fixations:
        cell = point_to_cell(f.x, f.y, width, height)
        if actions and actions[-1] == cell:
            log.warning(
                "scanpath %s/%s: consecutive fixations share cell %d; collapsed",
                path.image_id, path.subject_id, cell,
            )
            continue
        actions.append(cell)
    return actions


def expert_features(
    example: ImitationExample, config: ImitationConfig
) -> np.ndarray:
    """State-action features along the human trajectories, replayed through
    the same foveated dynamics the generator uses."""
    rows = []
    w, h = example.image_size
    for path in example.scanpaths:
        actions = scanpath_to_actions(path, w, h)[: config.horizon]
        b = example.b0
        for action in actions:
            if action in b.visited:
                continue
            rows.append(feature_matrix(b)[action])
            b = foveate_update(b, action, config.fovea_radius, example.high_res)
    return np.stack(rows)


def collect_episode(
    model: ImitationModel,
    example: ImitationExample,
    config: ImitationConfig,
    rng_seed: int,
) -> Episode:
    policy = LinearPolicy(model)
    b = example.b0
    rng = np.random.default_rng(rng_seed)
    ep = Episode(feats=[], visited=[], actions=[], log_probs=[], rewards=[])
    for _ in range(config.horizon):
        feats = feature_matrix(b)
        visited = b.visited_mask()
        dist = _dist_from_feats(model.theta, feats, visited)
        action = int(rng.choice(N_ACTIONS, p=dist))
        ep.feats.append(feats)
        ep.visited.append(visited)
        ep.actions.append(action)
        ep.log_probs.append(float(np.log(dist[action])))
        ep.rewards.append(0.0)  # filled in after the discriminator step
        b = foveate_update(b, action, config.fovea_radius, example.high_res)
    return ep


def train(
    dataset: Sequence[ImitationExample],
    config: ImitationConfig,
    model: Optional[ImitationModel] = None,
) -> Tuple[ImitationModel, List[Dict[str, float]]]:
    """Alternate generator rollouts, discriminator steps, and PPO updates.

    Returns the trained model and a per-epoch log of discriminator loss
    and mean generator reward.
    """
    if not dataset:
        raise ValueError("empty dataset")
    if model is None:
        model = ImitationModel()
    else:
        model = model.copy()
    expert = {ex.image_id: expert_features(ex, config) for ex in dataset}
    rng = np.random.default_rng(config.seed)
    history: List[Dict[str, float]] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_disc_loss = []
        epoch_reward = []
        for start in range(0, len(dataset), config.batch_size):
            batch = [dataset[i] for i in order[start : start + config.batch_size]]
            buffer = TrajectoryBuffer()
            for ex in batch:
                for _ in range(config.episodes_per_image):
                    seed = int(rng.integers(2**63 - 1))
                    buffer.episodes.append(
                        collect_episode(model, ex, config, seed)
                    )
            fake = buffer.action_features()
            real = np.concatenate([expert[ex.image_id] for ex in batch])
            for _ in range(config.disc_steps):
                model, disc_loss = discriminator_update(
                    model, real, fake, config.disc_lr
                )
            epoch_disc_loss.append(disc_loss)
            for ep in buffer.episodes:
                ep.rewards = [
                    gail_reward(model, ep.feats[t][ep.actions[t]])
                    for t in range(len(ep.actions))
                ]
                epoch_reward.extend(ep.rewards)
            model, _ = ppo_update(
                model,
                buffer,
                clip_eps=config.clip_eps,
                epochs=config.ppo_epochs,
                lr=config.lr,
                critic_lr=config.critic_lr,
                gamma=config.gamma,
                lam=config.gae_lambda,
            )
        model.epoch = epoch + 1
        model.check_finite()
        history.append(
            {
                "epoch": float(epoch + 1),
                "disc_loss": float(np.mean(epoch_disc_loss)),
                "mean_reward": float(np.mean(epoch_reward)),
            }
        )
    return model, history
