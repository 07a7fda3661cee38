"""Exact three-set Venn partitions of per-source SDG subsets.

For each SDG, the three sources' subsets decompose into 7 disjoint regions
(each nonempty combination of sources). Percentages are taken with respect
to the union, i.e. everything classified by at least one source.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import SdgdivError
from .sdg_classify import SdgSubset

#: Region key: the sources whose subsets contain the region, in source order.
Region = tuple[str, ...]


@dataclass(frozen=True)
class VennPartition:
    sdg: int
    sources: tuple[str, str, str]
    region_counts: Mapping[Region, int]
    union_size: int
    percentages: Mapping[Region, float]

    def regions(self) -> list[Region]:
        """All 7 regions in canonical order: singles, pairs, triple."""
        s = self.sources
        return [
            (s[0],), (s[1],), (s[2],),
            (s[0], s[1]), (s[0], s[2]), (s[1], s[2]),
            (s[0], s[1], s[2]),
        ]

    def triple_overlap_pct(self) -> float:
        return self.percentages[tuple(self.sources)]

    def single_source_only_pct(self) -> float:
        return sum(self.percentages[(s,)] for s in self.sources)


def venn_partition(subsets: Sequence[SdgSubset]) -> VennPartition:
    """Decompose three subsets of one joint index into exact Venn regions."""
    if len(subsets) != 3:
        raise SdgdivError(f"venn_partition requires exactly 3 subsets, got {len(subsets)}")
    sdgs = {s.sdg for s in subsets}
    if len(sdgs) != 1:
        raise SdgdivError(f"subsets must share one SDG, got {sorted(sdgs)}")
    sources = tuple(s.source_id for s in subsets)
    if len(set(sources)) != 3:
        raise SdgdivError(f"subsets must come from distinct sources, got {sources}")

    membership: dict[str, int] = {}
    for bit, subset in enumerate(subsets):
        for doi in subset.dois:
            membership[doi] = membership.get(doi, 0) | (1 << bit)

    counts: dict[Region, int] = {}
    for mask in range(1, 8):
        region = tuple(sources[b] for b in range(3) if mask & (1 << b))
        counts[region] = 0
    for mask in membership.values():
        region = tuple(sources[b] for b in range(3) if mask & (1 << b))
        counts[region] += 1

    union = len(membership)
    percentages = {
        region: (100.0 * n / union) if union else 0.0 for region, n in counts.items()
    }
    return VennPartition(
        sdg=subsets[0].sdg,
        sources=sources,
        region_counts=counts,
        union_size=union,
        percentages=percentages,
    )


def region_label(region: Region) -> str:
    return "+".join(region)


def overlap_report_rows(partitions: Sequence[VennPartition]) -> list[dict]:
    """Flat (sdg, region, count, pct) rows across all partitions."""
    rows = []
    for part in sorted(partitions, key=lambda p: p.sdg):
        for region in part.regions():
            rows.append(
                {
                    "sdg": part.sdg,
                    "region": region_label(region),
                    "count": part.region_counts[region],
                    "pct": part.percentages[region],
                }
            )
    return rows


def overlap_report_csv(partitions: Sequence[VennPartition]) -> str:
    """CSV text for reports/overlap.csv; deterministic for given inputs."""
    if not partitions:
        raise SdgdivError("overlap report needs at least one partition")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["sdg", "region", "count", "pct"])
    for row in overlap_report_rows(partitions):
        writer.writerow([row["sdg"], row["region"], row["count"], f"{row['pct']:.6f}"])
    return buf.getvalue()
