"""
Replay buffer shared by the environment workers.
"""

import logging
import os
import threading
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass(frozen=True)
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self) -> int:
        return len(self.rewards)


class ReplayBuffer:
    """
    Fixed-capacity ring of transitions.

    Storage grows by doubling up to the capacity, so a large capacity costs
    nothing until it is used. Insertion is thread-safe; sampling is meant for
    the single trainer thread.
    """

    def __init__(self, capacity: int = 1_000_000, seed: int = 0):
        if capacity < 1:
            raise ValueError(f"Replay capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.rng = np.random.default_rng(seed)
        self._lock = threading.Lock()
        self._arrays: Optional[Dict[str, np.ndarray]] = None
        self._size = 0
        self._next = 0
        self.total_inserted = 0

    def __len__(self) -> int:
        return self._size

    def _allocate(self, transition: Transition, rows: int) -> Dict[str, np.ndarray]:
        state = np.asarray(transition.state, dtype=float)
        action = np.atleast_1d(np.asarray(transition.action, dtype=float))
        return {
            "states": np.zeros((rows,) + state.shape),
            "actions": np.zeros((rows,) + action.shape),
            "rewards": np.zeros(rows),
            "next_states": np.zeros((rows,) + state.shape),
            "terminals": np.zeros(rows, dtype=bool),
        }

    def _grow(self, transition: Transition) -> None:
        if self._arrays is None:
            self._arrays = self._allocate(transition, min(self.capacity, 1024))
            return
        rows = len(self._arrays["rewards"])
        if self._next < rows or rows == self.capacity:
            return
        bigger = self._allocate(transition, min(self.capacity, 2 * rows))
        for key, values in self._arrays.items():
            bigger[key][:rows] = values
        self._arrays = bigger

    def store(self, transition: Transition) -> None:
        """Append a transition, evicting the oldest at capacity."""
        with self._lock:
            self._grow(transition)
            i = self._next
            a = self._arrays
            a["states"][i] = transition.state
            a["actions"][i] = np.atleast_1d(transition.action)
            a["rewards"][i] = transition.reward
            a["next_states"][i] = transition.next_state
            a["terminals"][i] = transition.terminal
            self._next = (i + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)
            self.total_inserted += 1

    def get(self, index: int) -> Transition:
        """Transition at ``index`` counted from the oldest stored entry."""
        if not 0 <= index < self._size:
            raise IndexError(f"Replay index {index} out of range for size {self._size}")
        start = self._next - self._size if self._size == self.capacity else 0
        i = (start + index) % self.capacity
        a = self._arrays
        return Transition(
            state=a["states"][i].copy(),
            action=a["actions"][i].copy(),
            reward=float(a["rewards"][i]),
            next_state=a["next_states"][i].copy(),
            terminal=bool(a["terminals"][i]),
        )

    def sample(self, batch_size: int) -> Batch:
        """Uniform batch, drawn without replacement."""
        if batch_size > self._size:
            raise ValueError(f"Cannot sample {batch_size} transitions from a buffer of {self._size}")
        idx = self.rng.choice(self._size, size=batch_size, replace=False)
        a = self._arrays
        return Batch(
            states=a["states"][idx],
            actions=a["actions"][idx],
            rewards=a["rewards"][idx],
            next_states=a["next_states"][idx],
            terminals=a["terminals"][idx],
        )

    def statistics(self) -> Dict[str, Any]:
        stats = {"size": self._size, "capacity": self.capacity, "total_inserted": self.total_inserted}
        if self._size:
            rewards = self._arrays["rewards"][:self._size]
            stats.update(reward_mean=float(rewards.mean()), reward_std=float(rewards.std()))
        return stats

    def save(self, file_path: str) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        arrays = {k: v[:self._size] for k, v in (self._arrays or {}).items()}
        np.savez(
            file_path,
            capacity=self.capacity,
            next=self._next,
            size=self._size,
            total_inserted=self.total_inserted,
            **arrays,
        )

    @classmethod
    def load(cls, file_path: str, seed: int = 0) -> "ReplayBuffer":
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"Replay buffer file not found: {file_path}")
        with np.load(file_path) as data:
            buffer = cls(int(data["capacity"]), seed)
            buffer._size = int(data["size"])
            buffer._next = int(data["next"])
            buffer.total_inserted = int(data["total_inserted"])
            if buffer._size:
                rows = max(buffer._size, min(buffer.capacity, 1024))
                buffer._arrays = {}
                for key in ("states", "actions", "rewards", "next_states", "terminals"):
                    stored = data[key]
                    full = np.zeros((rows,) + stored.shape[1:], dtype=stored.dtype)
                    full[:buffer._size] = stored
                    buffer._arrays[key] = full
        return buffer


def store(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.store(transition)
