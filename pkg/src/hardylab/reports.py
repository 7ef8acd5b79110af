"""Report records and their JSON/CSV serialisation."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, is_dataclass

import numpy as np

ROUNDING = 64 * np.finfo(float).eps


def _plain(obj):
    if is_dataclass(obj):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def to_json(obj):
    return json.dumps(_plain(obj), sort_keys=True)


def write_jsonl(records, fh):
    for rec in records:
        fh.write(to_json(rec) + "\n")


def write_csv(rows, header, fh=None):
    out = fh or io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return out.getvalue() if fh is None else None


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


@dataclass
class InequalityReport:
    """Two sides of an inequality ``lhs <= rhs`` (or an identity) with its slack.

    ``eps_disc`` is the discretisation error bound attached to the slack;
    the inequality is considered verified when ``slack >= -eps_disc``.  For
    identities ``defect`` carries the absolute mismatch.
    """

    name: str
    lhs: float
    rhs: float
    eps_disc: float = 0.0
    params: dict = field(default_factory=dict)
    defect: float | None = None
    extras: dict = field(default_factory=dict)

    @property
    def slack(self):
        return float(self.rhs - self.lhs)

    @property
    def holds(self):
        if self.defect is not None:
            return self.defect <= self.eps_disc
        return self.slack >= -self.eps_disc

    def as_dict(self):
        d = _plain(self)
        d["slack"] = self.slack
        d["holds"] = self.holds
        return d


@dataclass
class EstimateReport:
    """``lhs <= C rhs`` with the empirical constant lhs/rhs."""

    name: str
    lhs: float
    rhs: float
    params: dict = field(default_factory=dict)
    family: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def empirical_constant(self):
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else float("inf")
        return float(self.lhs / self.rhs)

    def as_dict(self):
        d = _plain(self)
        d["empirical_constant"] = self.empirical_constant
        return d


@dataclass
class HardyReport:
    """One Hardy-type inequality: lhs_main + lhs_radialterm <= rhs."""

    variant: str
    n: int
    alpha: float
    y: tuple
    lhs_main: float
    lhs_radialterm: float
    rhs: float
    eps_disc: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def lhs(self):
        return self.lhs_main + self.lhs_radialterm

    @property
    def slack(self):
        return float(self.rhs - self.lhs)

    @property
    def holds(self):
        return self.slack >= -self.eps_disc

    def as_dict(self):
        d = _plain(self)
        d.update(lhs=self.lhs, slack=self.slack, holds=self.holds)
        return d


def report_json(report):
    return json.dumps(report.as_dict(), sort_keys=True)
