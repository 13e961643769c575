"""Operation counters used by the benchmark harness."""

from dataclasses import dataclass


@dataclass
class DistanceCounter:
    """Counts vector-to-vector distance evaluations.

    Passed optionally into the matchers; the benchmark report compares the
    accumulated count against the closed-form expressions.
    """

    distance_evals: int = 0

    def add(self, n: int) -> None:
        self.distance_evals += int(n)

    def reset(self) -> None:
        self.distance_evals = 0
