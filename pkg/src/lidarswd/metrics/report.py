"""Per-pair evaluation rows (CD / HD / EMD / SWD) and their CSV/JSON forms."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

from ..core import DirectionSet, InvalidParameterError, as_cloud, sample_directions
from .emd import AUCTION_CAP, EXACT_CAP, emd_auction, emd_exact
from .nearest import chamfer, hausdorff
from .sliced import swd

CSV_HEADER = ("pair_id", "cd", "hd", "emd", "emd_kind", "swd")


@dataclass(frozen=True)
class MetricConfig:
    emd_reduction: str = "mean"
    swd_directions: int = 128
    swd_seed: int = 0
    sinkhorn_regularization: float = 0.01
    sinkhorn_max_iters: int = 1000
    auction_epsilon: float = 1e-3
    exact_cap: int = EXACT_CAP
    auction_cap: int = AUCTION_CAP
    order: int = 1
    threads: int | None = None

    def __post_init__(self):
        if self.emd_reduction not in ("sum", "mean"):
            raise InvalidParameterError(f"emd_reduction must be 'sum' or 'mean', got {self.emd_reduction!r}")
        if self.swd_directions < 1:
            raise InvalidParameterError("swd_directions must be >= 1")
        if not self.sinkhorn_regularization > 0:
            raise InvalidParameterError("sinkhorn_regularization must be > 0")
        if self.sinkhorn_max_iters < 1:
            raise InvalidParameterError("sinkhorn_max_iters must be >= 1")
        if not self.auction_epsilon > 0:
            raise InvalidParameterError("auction_epsilon must be > 0")
        if self.order != 1:
            raise InvalidParameterError("only order p = 1 is supported")

    def directions(self) -> DirectionSet:
        return _cached_directions(self.swd_directions, self.swd_seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


@lru_cache(maxsize=32)
def _cached_directions(count: int, seed: int) -> DirectionSet:
    return sample_directions(count, seed)


@dataclass(frozen=True)
class MetricReport:
    pair_id: str
    cd: float
    hd: float
    emd: float
    emd_kind: str  # "exact" | "auction" | "mixed"
    swd: float

    def __post_init__(self):
        for name in ("cd", "hd", "emd", "swd"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def as_row(self) -> list[str]:
        return [self.pair_id, repr(self.cd), repr(self.hd), repr(self.emd), self.emd_kind, repr(self.swd)]

    def table_row(self, digits: int = 4) -> str:
        """``name & cd & hd & emd & swd`` as in a LaTeX results table."""
        vals = " & ".join(f"{getattr(self, k):.{digits}f}" for k in ("cd", "hd", "emd", "swd"))
        return f"{self.pair_id} & {vals}"


def evaluate_pair(pred, gt, cfg: MetricConfig | None = None, pair_id: str = "0",
                  dirs: DirectionSet | None = None) -> MetricReport:
    """CD, HD, EMD and SWD for one (prediction, ground truth) pair.

    EMD uses the exact solver when ``N <= cfg.exact_cap`` and the auction otherwise.
    """
    cfg = cfg or MetricConfig()
    pred = as_cloud(pred, "pred")
    gt = as_cloud(gt, "gt")
    dirs = dirs or cfg.directions()
    n = pred.shape[0]
    if n == gt.shape[0] and n <= cfg.exact_cap:
        emd_value, _ = emd_exact(pred, gt, cfg.emd_reduction, cap=cfg.exact_cap)
        kind = "exact"
    else:
        emd_value = emd_auction(pred, gt, cfg.auction_epsilon, cfg.emd_reduction, cap=cfg.auction_cap)
        kind = "auction"
    return MetricReport(
        pair_id=str(pair_id),
        cd=chamfer(pred, gt, cfg.threads),
        hd=hausdorff(pred, gt, cfg.threads),
        emd=emd_value,
        emd_kind=kind,
        swd=swd(pred, gt, dirs, cfg.threads),
    )


def aggregate(reports: list[MetricReport], pair_id: str = "mean") -> MetricReport:
    if not reports:
        raise ValueError("no reports to aggregate")
    kinds = {r.emd_kind for r in reports}
    n = len(reports)
    return MetricReport(
        pair_id=pair_id,
        cd=sum(r.cd for r in reports) / n,
        hd=sum(r.hd for r in reports) / n,
        emd=sum(r.emd for r in reports) / n,
        emd_kind=kinds.pop() if len(kinds) == 1 else "mixed",
        swd=sum(r.swd for r in reports) / n,
    )


def reports_to_csv(reports: list[MetricReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow(r.as_row())
    return buf.getvalue()


def reports_from_csv(text: str) -> list[MetricReport]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [MetricReport(r["pair_id"], float(r["cd"]), float(r["hd"]), float(r["emd"]),
                         r["emd_kind"], float(r["swd"])) for r in rows]


def reports_to_json(reports: list[MetricReport]) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2)
