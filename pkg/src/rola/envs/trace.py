"""Line-delimited trajectory dumps used for golden-trace regression tests."""
from __future__ import annotations

import json
from typing import Callable, Iterable, TextIO

import numpy as np


def record_trace(env, choose: Callable[[int, int, np.random.Generator], list[int]],
                 episodes: int, seed: int) -> list[dict]:
    """Roll ``env`` forward with ``choose(episode, t, rng) -> joint action``."""
    rng = np.random.default_rng(seed)
    records = []
    for ep in range(episodes):
        res = env.reset(rng)
        t = 0
        while not res.terminal:
            action = [int(a) for a in choose(ep, t, rng)]
            nxt = env.step(action, rng)
            records.append({
                "episode": ep, "t": t,
                "state": res.state.tolist(),
                "obs": [o.tolist() for o in res.observations],
                "action": action,
                "reward": nxt.reward,
                "terminal": nxt.terminal,
            })
            res = nxt
            t += 1
    return records


def dump_trajectory(records: Iterable[dict], fh: TextIO) -> None:
    for rec in records:
        fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
