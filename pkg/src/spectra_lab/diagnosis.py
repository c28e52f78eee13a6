"""Offline diagnosis by comparing hit sets of two groups of spectra.

A function is a suspect when it was active in at least one failing (or
anomalous) spectrum and in none of the passing ones. No ranking is applied.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from statistics import fmean
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .instrument import Manifest
from .spectrum import Spectrum


class DiagnosisError(ValueError):
    pass


class ShapeMismatch(DiagnosisError):
    pass


class EmptySelection(DiagnosisError):
    pass


class UnknownId(DiagnosisError):
    pass


class EmptyWindow(DiagnosisError):
    pass


def hit_set(s: Spectrum) -> FrozenSet[int]:
    return frozenset(i for i, c in enumerate(s.counters) if c > 0)


@dataclass
class SpectraSet:
    spectra: List[Spectrum]
    selector: str = ""
    role: str = "pass"

    def __post_init__(self):
        if not self.spectra:
            raise EmptySelection(f"{self.role} set {self.selector!r} selects no spectra")
        widths = {s.n_funcs for s in self.spectra}
        if len(widths) != 1:
            raise ShapeMismatch(f"{self.role} set mixes spectra of widths {sorted(widths)}")

    @property
    def n_funcs(self) -> int:
        return self.spectra[0].n_funcs

    def union(self) -> Set[int]:
        out: Set[int] = set()
        for s in self.spectra:
            out |= hit_set(s)
        return out

    def activity(self) -> Dict[int, int]:
        """Number of spectra in which each id is active."""
        counts: Dict[int, int] = {}
        for s in self.spectra:
            for i in hit_set(s):
                counts[i] = counts.get(i, 0) + 1
        return counts


@dataclass
class DiagnosisReport:
    n_funcs: int
    suspects_fail_only: Dict[int, int]   # id -> number of fail spectra it is active in
    suspects_pass_only: Dict[int, int]   # id -> number of pass spectra it is active in
    n_pass: int
    n_fail: int
    pass_selector: str = ""
    fail_selector: str = ""
    names: Dict[int, str] = field(default_factory=dict)
    accuracy: Optional[float] = None

    def ranked_fail_only(self) -> List[Tuple[int, int]]:
        return sorted(self.suspects_fail_only.items(), key=lambda kv: (-kv[1], kv[0]))

    def ranked_pass_only(self) -> List[Tuple[int, int]]:
        return sorted(self.suspects_pass_only.items(), key=lambda kv: (-kv[1], kv[0]))

    def name(self, probe_id: int) -> str:
        return self.names.get(probe_id, f"#{probe_id}")

    def to_text(self, with_accuracy: bool = True) -> str:
        lines = [f"# pass={self.pass_selector} spectra={self.n_pass}",
                 f"# fail={self.fail_selector} spectra={self.n_fail}",
                 f"# n_funcs={self.n_funcs}"]
        for i, k in self.ranked_fail_only():
            lines.append(f"SUSPECT {i} {self.name(i)} evidence={k}/{self.n_fail}")
        for i, k in self.ranked_pass_only():
            lines.append(f"PASS-ONLY {i} {self.name(i)} evidence={k}/{self.n_pass}")
        if with_accuracy:
            acc = "n/a" if self.accuracy is None else f"{self.accuracy:.2f}"
            lines.append(f"accuracy={acc}")
        return "\n".join(lines) + "\n"


def suspects(passing: SpectraSet, failing: SpectraSet,
             manifest: Optional[Manifest] = None) -> DiagnosisReport:
    if passing.n_funcs != failing.n_funcs:
        raise ShapeMismatch(f"pass spectra have {passing.n_funcs} counters, "
                            f"fail spectra {failing.n_funcs}")
    if manifest is not None and manifest.n_funcs != passing.n_funcs:
        raise ShapeMismatch(f"manifest has {manifest.n_funcs} entries, "
                            f"spectra have {passing.n_funcs} counters")
    pass_hits, fail_hits = passing.union(), failing.union()
    fail_act, pass_act = failing.activity(), passing.activity()
    return DiagnosisReport(
        n_funcs=passing.n_funcs,
        suspects_fail_only={i: fail_act[i] for i in sorted(fail_hits - pass_hits)},
        suspects_pass_only={i: pass_act[i] for i in sorted(pass_hits - fail_hits)},
        n_pass=len(passing.spectra),
        n_fail=len(failing.spectra),
        pass_selector=passing.selector,
        fail_selector=failing.selector,
        names=dict(enumerate(manifest.names)) if manifest else {},
    )


def accuracy(report: DiagnosisReport, truth: Iterable[int]) -> Optional[float]:
    """Fraction of fail-only suspects that are real faults; None if no suspects."""
    truth = set(truth)
    bad = [i for i in truth if not 0 <= i < report.n_funcs]
    if bad:
        raise UnknownId(f"truth ids {sorted(bad)} not in [0, {report.n_funcs})")
    found = set(report.suspects_fail_only)
    if not found:
        return None
    return len(found & truth) / len(found)


def load_delta(samples: Sequence, window_a: Tuple[int, int],
               window_b: Tuple[int, int]) -> Tuple[float, float, float]:
    """Mean load of two inclusive second windows and their difference in points.

    ``samples`` holds LoadSample objects or ``(second, load)`` pairs.
    """
    loads = {}
    for s in samples:
        if isinstance(s, tuple):
            loads[s[0]] = s[1]
        else:
            loads[s.second_index] = s.load
    means = []
    for lo, hi in (window_a, window_b):
        values = [loads[k] for k in range(lo, hi + 1) if k in loads]
        if lo > hi or not values:
            raise EmptyWindow(f"window {lo}..{hi} holds no samples")
        means.append(fmean(values))
    return means[0], means[1], (means[1] - means[0]) * 100


# -- selectors ---------------------------------------------------------------

_SEL_PART = re.compile(r"^(\d+)(?:\.\.(\d+))?$")


def parse_selector(text: str) -> List[int]:
    """``"10..19"``, ``"3,5,7"`` or mixes like ``"1,4..6"``; ranges inclusive."""
    out: List[int] = []
    for part in text.split(","):
        m = _SEL_PART.match(part.strip())
        if m is None:
            raise ValueError(f"bad selector part {part!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) is not None else lo
        if hi < lo:
            raise ValueError(f"empty range {part!r}")
        out.extend(range(lo, hi + 1))
    return out
