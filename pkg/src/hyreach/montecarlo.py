"""Monte Carlo soundness oracle for reachable tubes.

Sample ``i`` of a run with seed ``s`` draws everything from
``SeedSequence([s, i])``, so any violating trajectory can be replayed alone.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import setalg
from .reach import ReachTube


@dataclass
class ContainmentReport:
    n_samples: int
    n_steps: int
    violations: int
    worst_margin: float
    worst_sample: int | None
    worst_step: int | None
    violating_samples: list = field(default_factory=list)
    replay_seeds: list = field(default_factory=list)
    non_finite: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.non_finite == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def replay_sample(X0, U, n_segments: int, seed: int, index: int):
    """Initial state and per-segment controls of sample ``index``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    x0 = setalg.sample_points(X0, 1, rng)[0]
    controls = setalg.sample_points(U, n_segments, rng)
    return x0, controls


def simulate(model, x0s, controls, dt: float, substeps: int):
    """States at segment boundaries, shape (n, n_segments + 1, n_states)."""
    with np.errstate(all="ignore"):
        return np.asarray(model.rk4_batch(np.ascontiguousarray(x0s), np.ascontiguousarray(controls), dt, substeps))


def monte_carlo_validate(
    tube: ReachTube,
    model,
    U,
    n_samples: int = 1000,
    seed: int = 42,
    substeps: int = 100,
    slack: float = 1e-9,
) -> ContainmentReport:
    """Check sampled true trajectories against the stored set at every step boundary."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    X0 = tube.initial_set
    K = tube.n_steps
    draws = [replay_sample(X0, U, K, seed, i) for i in range(n_samples)]
    x0s = np.array([d[0] for d in draws])
    ctrl = np.array([d[1] for d in draws])
    X = simulate(model, x0s, ctrl, tube.time_step, substeps)

    violating = set()
    count = 0
    bad_numbers = 0
    worst = (-np.inf, None, None)
    for k in range(1, K + 1):
        sets = tube.sets_at(k)
        if not sets:
            continue
        for i in range(n_samples):
            x = X[i, k]
            if not np.all(np.isfinite(x)):
                bad_numbers += 1
                violating.add(i)
                continue
            if any(setalg.contains_point(z, x, slack) for z in sets):
                continue
            margin = min(setalg.membership_margin(z, x, slack) for z in sets)
            count += 1
            violating.add(i)
            if margin > worst[0]:
                worst = (margin, i, k)
    if worst[1] is None:
        # no violation: report the largest margin seen on a thinned grid
        for k in range(1, K + 1):
            sets = tube.sets_at(k)
            for i in range(0, n_samples, max(1, n_samples // 50)):
                if sets and np.all(np.isfinite(X[i, k])):
                    mg = min(setalg.membership_margin(z, X[i, k], slack) for z in sets)
                    if mg > worst[0]:
                        worst = (mg, i, k)
    bad = sorted(violating)
    return ContainmentReport(
        n_samples=n_samples,
        n_steps=K,
        violations=count,
        worst_margin=float(worst[0]),
        worst_sample=worst[1],
        worst_step=worst[2],
        violating_samples=bad,
        replay_seeds=[[seed, i] for i in bad],
        non_finite=bad_numbers,
    )
