"""Process-wide record of Herglotz sign checks.

Every evaluation of a Green function, H function or Stieltjes transform off
the real axis is logged here together with whether its imaginary part has
the sign required by the half plane of the argument.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np


@dataclass
class HerglotzMonitor:
    evaluations: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, kind: str, z: complex, value: complex, *, strict: bool = False) -> None:
        """Log one evaluation.

        ``value`` must lie in the same closed half plane as ``z`` (open half
        plane when ``strict``). A relative slack of 1e-14 absorbs rounding.
        """
        slack = 1e-14 * max(abs(value), 1e-300)
        im = value.imag if z.imag > 0 else -value.imag
        ok = im > 0 if strict else im >= -slack
        with self._lock:
            self.evaluations[kind] += 1
            if not ok:
                self.violations.append((kind, complex(z), complex(value)))

    def record_many(self, kind: str, z, values, *, strict: bool = False) -> None:
        z = np.ravel(np.asarray(z, dtype=complex))
        values = np.ravel(np.asarray(values, dtype=complex))
        z = np.broadcast_to(z, values.shape)
        slack = 1e-14 * np.maximum(np.abs(values), 1e-300)
        im = np.where(z.imag > 0, values.imag, -values.imag)
        ok = im > 0 if strict else im >= -slack
        with self._lock:
            self.evaluations[kind] += values.size
            for k in np.flatnonzero(~ok):
                self.violations.append((kind, complex(z[k]), complex(values[k])))

    def total(self) -> int:
        return sum(self.evaluations.values())

    def reset(self) -> None:
        with self._lock:
            self.evaluations.clear()
            self.violations.clear()


MONITOR = HerglotzMonitor()
