"""Consistency checks between an EMBF file and the manifest it came from."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embf import EmbfError, read_embf
from .extract import read_manifest_texts


@dataclass
class VerifyReport:
    model_id: str = ""
    count: int = 0
    dim: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "OK" if self.ok else "FAIL"
        head = f"{status}: model={self.model_id} count={self.count} dim={self.dim}"
        return "\n".join([head] + self.failures)


def verify(embf_path, manifest_path) -> VerifyReport:
    """Check count, id alignment, dim, finiteness, and tanh range."""
    report = VerifyReport()
    try:
        model_id, sample_ids, rows = read_embf(embf_path)
    except EmbfError as exc:
        report.failures.append(str(exc))
        return report
    report.model_id = model_id
    report.count = rows.shape[0]
    report.dim = rows.shape[1]

    ids, _ = read_manifest_texts(manifest_path)
    if len(sample_ids) != len(ids):
        report.failures.append(
            f"count mismatch: {len(sample_ids)} rows for {len(ids)} manifest entries"
        )
    for got, want in zip(sample_ids, ids):
        if got != want:
            report.failures.append(f"id mismatch: {got!r} where manifest has {want!r}")
            break
    if rows.shape[1] != 768:
        report.failures.append(f"dim {rows.shape[1]}, expected 768")
    if rows.size:
        finite = np.isfinite(rows).all(axis=1)
        if not finite.all():
            bad = int(np.flatnonzero(~finite)[0])
            report.failures.append(f"non-finite values in sample {sample_ids[bad]!r}")
        inside = (np.abs(rows) < 1.0).all(axis=1)
        if not inside.all():
            bad = int(np.flatnonzero(~inside)[0])
            report.failures.append(
                f"values outside (-1, 1) in sample {sample_ids[bad]!r}"
            )
    return report
