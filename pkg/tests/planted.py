"""Simulated pass-limit toolchains with a planted violation predicate."""

PASSES = [f"Pass{i}" for i in range(1, 61)]


class PlantedTarget:
    """Simulated toolchain: builds with ``limit`` passes violate iff ``violating(limit)``."""

    def __init__(self, violating, names=PASSES, unlimited=None, base=frozenset()):
        self.violating = violating
        self.names = list(names)
        self.unlimited = unlimited
        self.base = base
        self.calls = []

    def pass_names(self):
        return self.names

    def violations(self, limit):
        self.calls.append(limit)
        if limit is None:
            hit = self.unlimited if self.unlimited is not None else self.violating(len(self.names))
        else:
            hit = self.violating(limit)
        return (self.base | {"planted"}) if hit else set(self.base)


def threshold(n_star):
    return PlantedTarget(lambda k: k >= n_star)


def linear_scan(target):
    for k in range(1, len(target.names) + 1):
        if target.violating(k):
            return k
    return None
