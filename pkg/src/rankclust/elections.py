"""First-past-the-post and instant-runoff tabulation of ranked ballots.

Candidates are every object named on at least one ballot. Ties are broken
deterministically so that results never depend on ballot order:

* first-past-the-post: equal first-place counts are ordered by id, lower first;
* instant runoff: among candidates tied for fewest votes, the one with the
  fewest mentions anywhere on the ballots is eliminated, then the lowest id.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .data import Dataset


@dataclass
class ElectionResult:
    method: str
    ranks: dict[int, int]  # candidate id -> rank, 1 = winner
    rounds: list[dict] = field(default_factory=list)

    @property
    def winner(self) -> int:
        return min(self.ranks, key=self.ranks.get)

    def to_dict(self, d: Dataset | None = None) -> dict:
        name = d.label if d is not None else str
        return {
            "method": self.method,
            "ranking": [
                {"id": j, "label": name(j), "rank": r}
                for j, r in sorted(self.ranks.items(), key=lambda kv: (kv[1], kv[0]))
            ],
            "rounds": self.rounds,
        }


def candidates(d: Dataset) -> list[int]:
    return sorted({j for obs in d.observations for j in obs.ranked})


def fpp_ranking(d: Dataset) -> ElectionResult:
    firsts = Counter(obs.ranked[0] for obs in d.observations)
    order = sorted(candidates(d), key=lambda j: (-firsts[j], j))
    return ElectionResult("fpp", {j: r for r, j in enumerate(order, start=1)})


def irv_ranking(d: Dataset) -> ElectionResult:
    """Eliminate the weakest candidate each round until one is left.

    Ballots move to their next active choice and drop out once exhausted. The
    final ranking is the reverse elimination order. The round log records the
    vote counts and, from the first round in which someone holds a strict
    majority of continuing ballots, that majority winner.
    """
    ballots = [obs.ranked for obs in d.observations]
    mentions = Counter(j for b in ballots for j in b)
    active = set(candidates(d))
    eliminated: list[int] = []
    rounds = []
    majority_winner = None
    while len(active) > 1:
        tally = Counter({j: 0 for j in active})
        for b in ballots:
            top = next((j for j in b if j in active), None)
            if top is not None:
                tally[top] += 1
        continuing = sum(tally.values())
        leader, lead_votes = min(tally.items(), key=lambda kv: (-kv[1], kv[0]))
        if majority_winner is None and 2 * lead_votes > continuing:
            majority_winner = leader
        loser = min(active, key=lambda j: (tally[j], mentions[j], j))
        rounds.append({
            "round": len(rounds) + 1,
            "tally": {str(j): tally[j] for j in sorted(tally)},
            "continuing": continuing,
            "exhausted": len(ballots) - continuing,
            "eliminated": loser,
            "majority_winner": majority_winner,
        })
        active.remove(loser)
        eliminated.append(loser)
    order = sorted(active) + eliminated[::-1]
    return ElectionResult("irv", {j: r for r, j in enumerate(order, start=1)}, rounds)
