"""Synthetic campaign records for report and clustering checks."""
import random

from dbgdiff.campaign import CampaignRecord, CaseOutcome, CaseStatus
from dbgdiff.invariants import INVARIANT_ORDER

LEVELS = ("-O1", "-O2", "-O3", "-Og")


def random_record(rng: random.Random, n_cases: int | None = None, n_fingerprints: int = 12) -> CampaignRecord:
    n_cases = rng.randint(0, 120) if n_cases is None else n_cases
    pool = [[f"Pass{rng.randint(1, 40)}", rng.choice(["<no-violation>", f"Pass{i}"])] for i in range(n_fingerprints)]
    outcomes = []
    for i in range(n_cases):
        level = rng.choice(LEVELS)
        status = rng.choices(list(CaseStatus), weights=[5, 5, 1, 1])[0]
        o = CaseOutcome(f"{level.strip('-')}-{i:05d}", level, status, seed=i)
        if status is CaseStatus.VIOLATING:
            for inv in rng.sample(INVARIANT_ORDER, rng.randint(1, 4)):
                o.violations[inv.value] = rng.randint(1, 6)
                o.occurrences[inv.value] = o.violations[inv.value] + rng.randint(0, 9)
            o.fingerprint = list(rng.choice(pool))
        outcomes.append(o)
    return CampaignRecord("synthetic", {}, rng.randint(0, 99), list(LEVELS), outcomes)


def li_record(raw: int, unique: int, level: str = "-O1") -> CampaignRecord:
    """``raw`` LI violations spread over cases carrying ``unique`` distinct fingerprints."""
    outcomes = []
    for i in range(raw):
        o = CaseOutcome(f"c{i:05d}", level, CaseStatus.VIOLATING, {"LI": 1}, {"LI": 1},
                        [f"Pass{i % unique}"])
        outcomes.append(o)
    return CampaignRecord("li", {}, 0, [level], outcomes)
