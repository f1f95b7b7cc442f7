"""Mergeable moment accumulators.

Each block contributes numpy partial sums of shifted powers; the partials are
kept and reduced with ``math.fsum`` only when a statistic is requested.  fsum
is exactly rounded, so the merged result does not depend on the order or
grouping of blocks, which is what makes worker count irrelevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Moments:
    """Power sums of (value - shift) up to fourth order."""

    shift: float = 0.0
    n: int = 0
    _parts: dict[int, list[float]] = field(default_factory=lambda: {1: [], 2: [], 3: [], 4: []})

    def add(self, values) -> "Moments":
        d = np.asarray(values, dtype=float).ravel() - self.shift
        self.n += d.size
        p = d.copy()
        for k in (1, 2, 3, 4):
            self._parts[k].append(float(p.sum()))
            p *= d
        return self

    def merge(self, other: "Moments") -> "Moments":
        if other.shift != self.shift:
            raise ValueError("cannot merge accumulators with different shifts")
        out = Moments(self.shift, self.n + other.n)
        for k in out._parts:
            out._parts[k] = self._parts[k] + other._parts[k]
        return out

    def raw(self, k: int) -> float:
        """Mean of (value - shift)**k."""
        return math.fsum(self._parts[k]) / self.n

    @property
    def mean(self) -> float:
        return self.shift + self.raw(1)

    def central(self, k: int) -> float:
        r1, r2 = self.raw(1), self.raw(2)
        if k == 2:
            return r2 - r1 * r1
        r3 = self.raw(3)
        if k == 3:
            return r3 - 3 * r1 * r2 + 2 * r1 ** 3
        r4 = self.raw(4)
        return r4 - 4 * r1 * r3 + 6 * r1 * r1 * r2 - 3 * r1 ** 4

    @property
    def var(self) -> float:
        """Unbiased sample variance."""
        if self.n < 2:
            return 0.0
        return max(self.central(2), 0.0) * self.n / (self.n - 1)

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    @property
    def std_error(self) -> float:
        return self.sd / math.sqrt(self.n)

    @property
    def sd_std_error(self) -> float:
        """Large-sample standard error of the sample sd (uses the kurtosis)."""
        m2 = self.central(2)
        if self.n < 2 or m2 <= 0:
            return 0.0
        m4 = self.central(4)
        return math.sqrt(max(m4 - m2 * m2, 0.0) / self.n) / (2.0 * math.sqrt(m2))

    @property
    def skewness(self) -> float:
        m2 = self.central(2)
        return self.central(3) / m2 ** 1.5 if m2 > 0 else 0.0

    @property
    def excess_kurtosis(self) -> float:
        m2 = self.central(2)
        return self.central(4) / m2 ** 2 - 3.0 if m2 > 0 else 0.0


@dataclass
class CoMoments:
    """Mixed power sums of two shifted series, for covariance and its error."""

    shift_a: float = 0.0
    shift_b: float = 0.0
    n: int = 0
    _parts: dict[tuple[int, int], list[float]] = field(default_factory=lambda: {
        k: [] for k in ((1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1), (1, 2), (2, 2))})

    def add(self, a, b) -> "CoMoments":
        da = np.asarray(a, dtype=float).ravel() - self.shift_a
        db = np.asarray(b, dtype=float).ravel() - self.shift_b
        self.n += da.size
        for (i, j), parts in self._parts.items():
            parts.append(float(np.sum(da ** i * db ** j)))
        return self

    def merge(self, other: "CoMoments") -> "CoMoments":
        if (other.shift_a, other.shift_b) != (self.shift_a, self.shift_b):
            raise ValueError("cannot merge accumulators with different shifts")
        out = CoMoments(self.shift_a, self.shift_b, self.n + other.n)
        for k in out._parts:
            out._parts[k] = self._parts[k] + other._parts[k]
        return out

    def raw(self, i: int, j: int) -> float:
        return math.fsum(self._parts[(i, j)]) / self.n

    @property
    def cov(self) -> float:
        return self.raw(1, 1) - self.raw(1, 0) * self.raw(0, 1)

    @property
    def cov_std_error(self) -> float:
        """Standard error of the covariance: sqrt(var[(a-ma)(b-mb)] / n)."""
        a, b = self.raw(1, 0), self.raw(0, 1)
        # E[(A-a)^2 (B-b)^2] expanded in raw moments about the shifts
        m22 = (self.raw(2, 2) - 2 * b * self.raw(2, 1) - 2 * a * self.raw(1, 2)
               + b * b * self.raw(2, 0) + a * a * self.raw(0, 2)
               + 4 * a * b * self.raw(1, 1) - 3 * a * a * b * b)
        return math.sqrt(max(m22 - self.cov ** 2, 0.0) / self.n)
