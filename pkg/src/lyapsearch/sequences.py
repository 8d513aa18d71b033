"""Enumeration of admissible operation sequences and grouping of the results.

A sequence is staged: A1 first, then one choice from each of the B, C, first-D,
mixed E/F/D, and second-D stage sets.  The stage sets below are the complete
reduced families; their product has 1 * 10 * 2 * 13 * 7 * 13 = 23660 members.
Applying them all to a system's initial pair and grouping structurally equal
results is the search space the analysis ranks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .pq import PQPair, apply_operation, apply_sequence, initial_pair
from .systems import OdeSystemSpec

B_STAGES: tuple[tuple[str, ...], ...] = (
    (),
    ("B1",),
    ("B2",),
    ("B1", "B2"),
    ("B3",),
    ("B1", "B3"),
    ("B2", "B3"),
    ("B1", "B2", "B3"),
    ("B3", "B2"),
    ("B1", "B3", "B2"),
)

C_STAGES: tuple[tuple[str, ...], ...] = ((), ("C1",))

D_STAGES: tuple[tuple[str, ...], ...] = (
    (),
    ("D1",),
    ("D2",),
    ("D3",),
    ("D4",),
    ("D1", "D3"),
    ("D1", "D4"),
    ("D2", "D3"),
    ("D2", "D4"),
    ("D3", "D1"),
    ("D3", "D2"),
    ("D1", "D3", "D2"),
    ("D2", "D3", "D1"),
)

M_STAGES: tuple[tuple[str, ...], ...] = (
    (),
    ("E1",),
    ("F1",),
    ("E1", "F1"),
    ("E1", "D3", "D2", "F1"),
    ("F1", "D2", "D3", "E1"),
    ("F1", "D2", "D3", "D1", "E1", "D3", "D2", "F1"),
)

TOTAL_SEQUENCES = len(B_STAGES) * len(C_STAGES) * len(D_STAGES) * len(M_STAGES) * len(D_STAGES)


@dataclass(frozen=True)
class OperationSequence:
    b: tuple[str, ...]
    c: tuple[str, ...]
    d1: tuple[str, ...]
    m: tuple[str, ...]
    d2: tuple[str, ...]

    def ops(self) -> tuple[str, ...]:
        return ("A1",) + self.b + self.c + self.d1 + self.m + self.d2

    def label(self) -> str:
        return ">".join(self.ops())


def generate_sequences() -> list[OperationSequence]:
    """All admissible sequences, in the fixed stage-product order."""
    out = []
    for b in B_STAGES:
        for c in C_STAGES:
            for d1 in D_STAGES:
                for m in M_STAGES:
                    for d2 in D_STAGES:
                        out.append(OperationSequence(b, c, d1, m, d2))
    return out


def sequence_index(seq: OperationSequence) -> int:
    """Position of a sequence in generate_sequences() order."""
    ix = [B_STAGES.index(seq.b), C_STAGES.index(seq.c), D_STAGES.index(seq.d1),
          M_STAGES.index(seq.m), D_STAGES.index(seq.d2)]
    sizes = [len(C_STAGES), len(D_STAGES), len(M_STAGES), len(D_STAGES)]
    value = ix[0]
    for size, i in zip(sizes, ix[1:]):
        value = value * size + i
    return value


@dataclass
class PairGroup:
    group_id: int
    representative: PQPair
    sequences: list[OperationSequence]

    @property
    def member_count(self) -> int:
        return len(self.sequences)


def enumerate_pairs(system: OdeSystemSpec) -> list[PairGroup]:
    """Apply every sequence to the system's initial pair and group equal results.

    Grouping compares the full matrices entry-wise in canonical form, with
    gamma abstract and the system's free parameters symbolic.  Groups are
    numbered by first occurrence in the fixed sequence order, which makes two
    runs produce identical partitions.
    """
    base = apply_operation(initial_pair(system), "A1")
    groups: dict[tuple, PairGroup] = {}

    # Stage results are shared down the product tree; each prefix is applied once.
    for b in B_STAGES:
        pair_b = apply_sequence(base, b)
        for c in C_STAGES:
            pair_c = apply_sequence(pair_b, c)
            for d1 in D_STAGES:
                pair_d1 = apply_sequence(pair_c, d1)
                for m in M_STAGES:
                    pair_m = apply_sequence(pair_d1, m)
                    for d2 in D_STAGES:
                        final = apply_sequence(pair_m, d2)
                        seq = OperationSequence(b, c, d1, m, d2)
                        key = final.matrix_key()
                        group = groups.get(key)
                        if group is None:
                            groups[key] = PairGroup(len(groups), final, [seq])
                        else:
                            group.sequences.append(seq)
    return sorted(groups.values(), key=lambda g: g.group_id)


def max_observed_gamma_order(groups: list[PairGroup]) -> int:
    """Highest gamma-derivative order across all group representatives."""
    return max(g.representative.max_gamma_order() for g in groups)


def _nonzero_sketch(pair: PQPair) -> str:
    p = [f"P{i}{j}" for i in range(1, 4) for j in range(i, 4) if pair.p_entry(i, j)]
    q = [f"Q{i}{j}" for i in range(1, 6) for j in range(i, 6) if pair.q_entry(i, j)]
    return " ".join(p) + "|" + " ".join(q)


def dump_groups_csv(groups: list[PairGroup], path: str | Path, system_name: str = "") -> None:
    """One row per group: id, member count, a representative sequence, sketch."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# pair groups for system={system_name}; gamma abstract; "
                 f"max gamma-derivative order {max_observed_gamma_order(groups)}\n")
        writer = csv.writer(fh)
        writer.writerow(["group_id", "member_count", "representative", "nonzero_entries"])
        for group in groups:
            writer.writerow([
                group.group_id,
                group.member_count,
                group.sequences[0].label(),
                _nonzero_sketch(group.representative),
            ])
