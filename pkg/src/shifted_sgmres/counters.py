"""Operation counters attached to a single solve context."""

from dataclasses import asdict, dataclass, fields


@dataclass
class CostCounters:
    """Tallies of the expensive operations performed during a solve.

    ``outer_mv`` only counts products with the seed operator made while
    growing the outer basis; products made by an inner preconditioner or
    by residual verification are tracked separately so that the outer
    count stays comparable with published per-cycle costs.
    """

    outer_mv: int = 0
    inner_mv: int = 0
    check_mv: int = 0
    prec_applications: int = 0
    dot_products: int = 0
    vector_updates: int = 0
    gevp_solves: int = 0

    def snapshot(self):
        return CostCounters(**asdict(self))

    def __sub__(self, other):
        return CostCounters(**{f.name: getattr(self, f.name) - getattr(other, f.name)
                               for f in fields(self)})

    def as_dict(self):
        return asdict(self)
