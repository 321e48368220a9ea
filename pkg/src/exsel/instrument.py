"""Counters that verify how many scoring operations each strategy performs.

The counts are the ground truth behind the cost accounting: building the
pairwise-similarity structure must register exactly n*(n-1)/2 record-record
evaluations, while the length table registers exactly n length reads and no
record-record similarity at all.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass


@dataclass
class ScoreCounters:
    """Tally of scoring work, split by kind.

    pairwise_sim: record-record embedding similarity evaluations.
    query_sim: query-record similarity evaluations.
    length_reads: per-record length fetches for the diff table.
    """

    pairwise_sim: int = 0
    query_sim: int = 0
    length_reads: int = 0

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def add_pairwise(self, amount: int) -> None:
        with self._lock:
            self.pairwise_sim += amount

    def add_query(self, amount: int) -> None:
        with self._lock:
            self.query_sim += amount

    def add_length_reads(self, amount: int) -> None:
        with self._lock:
            self.length_reads += amount

    def reset(self) -> None:
        with self._lock:
            self.pairwise_sim = 0
            self.query_sim = 0
            self.length_reads = 0


# Process-wide tally; reset() before a measured run to get per-run counts.
counters = ScoreCounters()
