"""Longitudinal encounter data model: cohort ingestion, validation, histories.

The canonical interchange format is a long-format CSV with one row per
encounter (columns ``id, j, W, delta, Z, A, Y, <covariate names>``) plus a
JSON schema sidecar declaring covariate names, supports, and baseline
membership.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Sequence, TextIO

import numpy as np
import pandas as pd


class EventType(IntEnum):
    CENSORED = 0
    VISIT = 1
    DEATH = 2


class CohortParseError(ValueError):
    """Malformed CSV input; carries the offending line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class CohortValidationError(ValueError):
    """Invariant violation; names the patient and the broken rule."""

    def __init__(self, patient_id: str, rule: str, message: str):
        self.patient_id = patient_id
        self.rule = rule
        super().__init__(f"patient {patient_id!r}, rule {rule!r}: {message}")


@dataclass(frozen=True)
class Covariate:
    name: str
    kind: str  # "continuous" | "binary"
    baseline: bool

    def __post_init__(self):
        if self.kind not in ("continuous", "binary"):
            raise ValueError(f"unknown covariate kind {self.kind!r}")


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered covariate declarations shared by every trajectory."""

    covariates: tuple[Covariate, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.covariates)

    @property
    def baseline_idx(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.covariates) if c.baseline], dtype=int)

    @property
    def timevarying_idx(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.covariates) if not c.baseline], dtype=int)

    @property
    def baseline_covariates(self) -> tuple[Covariate, ...]:
        return tuple(c for c in self.covariates if c.baseline)

    @property
    def timevarying_covariates(self) -> tuple[Covariate, ...]:
        return tuple(c for c in self.covariates if not c.baseline)

    def to_json(self) -> str:
        return json.dumps(
            {
                "covariates": [
                    {"name": c.name, "kind": c.kind, "baseline": c.baseline}
                    for c in self.covariates
                ]
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CovariateSchema":
        obj = json.loads(text)
        return cls(
            covariates=tuple(
                Covariate(c["name"], c["kind"], bool(c["baseline"]))
                for c in obj["covariates"]
            )
        )


@dataclass(frozen=True)
class Encounter:
    """One healthcare encounter: gap time, event type, and measurements."""

    j: int
    w: float  # gap time since previous encounter (years), > 0
    delta: EventType
    covariates: np.ndarray  # full length-P vector, schema order
    z: int  # treatment readiness
    a: int  # treatment action
    y: float  # encounter cost, >= 0


@dataclass(frozen=True)
class Trajectory:
    """One patient's ordered encounters plus baseline covariates."""

    patient_id: str
    l0: np.ndarray  # baseline covariates (schema baseline order)
    encounters: tuple[Encounter, ...]

    @property
    def calendar_times(self) -> np.ndarray:
        return np.cumsum([e.w for e in self.encounters])

    @property
    def terminal_time(self) -> float:
        return float(sum(e.w for e in self.encounters))

    @property
    def total_cost(self) -> float:
        return float(sum(e.y for e in self.encounters))


@dataclass(frozen=True)
class History:
    """One-lag state S_j and history H_j at encounter j.

    For j = 1 the lagged slots are zero-filled except baseline covariates,
    which are copied into their positions of the lagged covariate vector.
    """

    j: int
    y_prev: float
    a_prev: int
    z_prev: int
    l_prev: np.ndarray
    w_prev: float
    delta_prev: int
    z: int
    l: np.ndarray
    w: float
    delta: int

    @property
    def state(self) -> tuple:
        return (self.y_prev, self.a_prev, self.z_prev, self.l_prev, self.w_prev, self.delta_prev)


@dataclass(frozen=True)
class Cohort:
    trajectories: tuple[Trajectory, ...]
    schema: CovariateSchema

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def n_encounters(self) -> int:
        return sum(len(t.encounters) for t in self.trajectories)

    @property
    def max_gap(self) -> float:
        return max(e.w for t in self.trajectories for e in t.encounters)

    @property
    def max_encounters(self) -> int:
        return max(len(t.encounters) for t in self.trajectories)


CORE_COLUMNS = ("id", "j", "W", "delta", "Z", "A", "Y")


def _validate_trajectory(traj: Trajectory, schema: CovariateSchema) -> None:
    pid = traj.patient_id
    encs = traj.encounters
    if not encs:
        raise CohortValidationError(pid, "empty-trajectory", "trajectory has no encounters")
    base_idx = schema.baseline_idx
    prev_a = 0
    prev_z = 0
    for pos, e in enumerate(encs):
        last = pos == len(encs) - 1
        if e.j != pos + 1:
            raise CohortValidationError(pid, "encounter-index", f"expected j={pos + 1}, got {e.j}")
        if not (e.w > 0 and math.isfinite(e.w)):
            raise CohortValidationError(pid, "gap-positive", f"W={e.w} at j={e.j}")
        if e.delta not in (0, 1, 2):
            raise CohortValidationError(pid, "event-coding", f"delta={e.delta} at j={e.j}")
        if last and e.delta == EventType.VISIT:
            raise CohortValidationError(pid, "non-terminal-final-event", "final encounter has delta=1")
        if not last and e.delta != EventType.VISIT:
            raise CohortValidationError(
                pid, "terminal-before-final", f"delta={int(e.delta)} at non-final j={e.j}"
            )
        if e.z not in (0, 1):
            raise CohortValidationError(pid, "readiness-coding", f"Z={e.z} at j={e.j}")
        if e.z == 0 and e.a != 0:
            raise CohortValidationError(pid, "readiness-feasibility", f"Z=0 but A={e.a} at j={e.j}")
        if e.a < 0:
            raise CohortValidationError(pid, "action-coding", f"A={e.a} at j={e.j}")
        if prev_a != 0 and e.a != prev_a:
            raise CohortValidationError(
                pid, "monotone-treatment", f"A changed {prev_a}->{e.a} at j={e.j}"
            )
        if prev_z == 1 and e.z != 1:
            raise CohortValidationError(pid, "monotone-readiness", f"Z dropped to 0 at j={e.j}")
        if not (e.y >= 0 and math.isfinite(e.y)):
            raise CohortValidationError(pid, "cost-domain", f"Y={e.y} at j={e.j}")
        if e.y == 0 and e.delta != EventType.DEATH:
            raise CohortValidationError(
                pid, "zero-cost-nonterminal", f"Y=0 at non-death encounter j={e.j}"
            )
        if len(e.covariates) != len(schema.covariates):
            raise CohortValidationError(
                pid, "covariate-length", f"{len(e.covariates)} values, schema has {len(schema.covariates)}"
            )
        for i, c in enumerate(schema.covariates):
            if c.kind == "binary" and e.covariates[i] not in (0.0, 1.0):
                raise CohortValidationError(
                    pid, "binary-support", f"{c.name}={e.covariates[i]} at j={e.j}"
                )
        if base_idx.size and not np.array_equal(e.covariates[base_idx], encs[0].covariates[base_idx]):
            raise CohortValidationError(
                pid, "baseline-constant", f"baseline covariates changed at j={e.j}"
            )
        prev_a, prev_z = e.a, e.z
    if base_idx.size and not np.array_equal(traj.l0, encs[0].covariates[base_idx]):
        raise CohortValidationError(pid, "baseline-constant", "L0 differs from encounter covariates")


def make_trajectory(
    patient_id: str, rows: Sequence[dict], schema: CovariateSchema
) -> Trajectory:
    """Assemble and validate a trajectory from parsed row dicts."""
    names = schema.names
    encounters = tuple(
        Encounter(
            j=int(r["j"]),
            w=float(r["W"]),
            delta=EventType(int(r["delta"])),
            covariates=np.array([float(r[n]) for n in names]),
            z=int(r["Z"]),
            a=int(r["A"]),
            y=float(r["Y"]),
        )
        for r in rows
    )
    base_idx = schema.baseline_idx
    l0 = encounters[0].covariates[base_idx] if base_idx.size else np.empty(0)
    traj = Trajectory(patient_id=patient_id, l0=l0, encounters=encounters)
    _validate_trajectory(traj, schema)
    return traj


def parse_cohort(source: str | TextIO, schema: CovariateSchema) -> Cohort:
    """Parse a long-format encounter CSV into a validated Cohort.

    Rows must be grouped by patient id and sorted by encounter index j.
    Raises CohortParseError for malformed rows and CohortValidationError
    for invariant violations.
    """
    if isinstance(source, str):
        stream: TextIO = io.StringIO(source)
    else:
        stream = source
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise CohortParseError(1, "empty input") from None
    header = [h.strip() for h in header]
    expected = list(CORE_COLUMNS) + list(schema.names)
    if header != expected:
        raise CohortParseError(1, f"header {header} != expected {expected}")
    col = {name: i for i, name in enumerate(header)}

    groups: list[tuple[str, list[dict]]] = []
    seen: set[str] = set()
    current_id: str | None = None
    current_rows: list[dict] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise CohortParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        rec = {}
        for name in header:
            raw = row[col[name]].strip()
            if name == "id":
                rec[name] = raw
                continue
            try:
                rec[name] = float(raw) if name not in ("j", "delta", "Z", "A") else int(raw)
            except ValueError:
                raise CohortParseError(lineno, f"non-numeric value {raw!r} in column {name}") from None
        pid = rec["id"]
        if pid != current_id:
            if pid in seen:
                raise CohortParseError(lineno, f"rows for id {pid!r} are not contiguous")
            if current_id is not None:
                groups.append((current_id, current_rows))
            seen.add(pid)
            current_id, current_rows = pid, []
        current_rows.append(rec)
    if current_id is not None:
        groups.append((current_id, current_rows))
    if not groups:
        raise CohortParseError(2, "no encounter rows")

    trajectories = tuple(make_trajectory(pid, rows, schema) for pid, rows in groups)
    return Cohort(trajectories=trajectories, schema=schema)


def write_cohort(cohort: Cohort, stream: TextIO) -> None:
    """Write a cohort in the canonical long-format CSV (exact float round trip)."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(CORE_COLUMNS) + list(cohort.schema.names))
    for traj in cohort.trajectories:
        for e in traj.encounters:
            writer.writerow(
                [traj.patient_id, e.j, repr(e.w), int(e.delta), e.z, e.a, repr(e.y)]
                + [repr(float(v)) for v in e.covariates]
            )


def cohort_to_csv(cohort: Cohort) -> str:
    buf = io.StringIO()
    write_cohort(cohort, buf)
    return buf.getvalue()


def build_history(traj: Trajectory, j: int, schema: CovariateSchema) -> History:
    """First-order Markov state and history at encounter j (1-based)."""
    if not 1 <= j <= len(traj.encounters):
        raise IndexError(f"encounter index {j} out of range 1..{len(traj.encounters)}")
    cur = traj.encounters[j - 1]
    if j == 1:
        l_prev = np.zeros(len(schema.covariates))
        base_idx = schema.baseline_idx
        if base_idx.size:
            l_prev[base_idx] = traj.l0
        return History(
            j=1, y_prev=0.0, a_prev=0, z_prev=0, l_prev=l_prev, w_prev=0.0, delta_prev=0,
            z=cur.z, l=cur.covariates.copy(), w=cur.w, delta=int(cur.delta),
        )
    prev = traj.encounters[j - 2]
    return History(
        j=j, y_prev=prev.y, a_prev=prev.a, z_prev=prev.z, l_prev=prev.covariates.copy(),
        w_prev=prev.w, delta_prev=int(prev.delta),
        z=cur.z, l=cur.covariates.copy(), w=cur.w, delta=int(cur.delta),
    )


def person_period_expand(cohort: Cohort, n_bins: int, horizon: float) -> pd.DataFrame:
    """Expand a cohort into person-period format over [0, horizon].

    One row per patient per interval alive-and-uncensored at interval
    start, with the interval's accrued cost (0 if no encounter falls in
    it), per-cause event indicators, and covariates/treatment carried
    forward from the most recent encounter at or before the interval
    start.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    width = horizon / n_bins
    names = cohort.schema.names
    rows = []
    for traj in cohort.trajectories:
        times = traj.calendar_times
        terminal = traj.encounters[-1]
        d = traj.terminal_time
        died = terminal.delta == EventType.DEATH
        last_bin = int(math.ceil(min(d, horizon) / width - 1e-12))
        last_bin = max(1, min(last_bin, n_bins))
        # bin index of each encounter (1-based); > n_bins means beyond horizon
        enc_bins = np.ceil(times / width - 1e-12).astype(int)
        cost_by_bin = np.zeros(n_bins + 1)
        visit_by_bin = np.zeros(n_bins + 1, dtype=int)
        for e, b in zip(traj.encounters, enc_bins):
            if 1 <= b <= n_bins and (e.j < len(traj.encounters) or b <= last_bin):
                cost_by_bin[b] += e.y
                if e.delta == EventType.VISIT:
                    visit_by_bin[b] = 1
        death_bin = last_bin if (died and d <= horizon + 1e-12) else 0
        # carried-forward covariates/treatment at each bin start
        l_cur = np.zeros(len(names))
        base_idx = cohort.schema.baseline_idx
        if base_idx.size:
            l_cur[base_idx] = traj.l0
        a_cur, z_cur = 0, 0
        enc_pos = 0
        for b in range(1, last_bin + 1):
            start = (b - 1) * width
            while enc_pos < len(times) and times[enc_pos] <= start + 1e-12:
                e = traj.encounters[enc_pos]
                l_cur = e.covariates
                a_cur, z_cur = e.a, e.z
                enc_pos += 1
            row = {
                "id": traj.patient_id,
                "interval": b,
                "visit": int(visit_by_bin[b]),
                "death": int(b == death_bin),
                "cost": cost_by_bin[b],
                "A": a_cur,
                "Z": z_cur,
            }
            for name, v in zip(names, l_cur):
                row[name] = float(v)
            rows.append(row)
    return pd.DataFrame(rows)
