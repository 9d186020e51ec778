"""Exception hierarchy; the CLI maps these onto exit codes 1 and 2."""


class ConfigurationError(ValueError):
    """Invalid configuration, detected before or during setup (exit code 1)."""


class InvariantViolation(RuntimeError):
    """A runtime invariant failed while a run was in progress (exit code 2)."""


class DeadlockError(InvariantViolation):
    def __init__(self, unmatched: list[tuple[int, int, int, str]]):
        self.unmatched = unmatched
        listing = ", ".join(f"(node={n}, peer={p}, tag={t}, {what})" for n, p, t, what in unmatched)
        super().__init__(f"simulation quiesced with unmatched operations: {listing}")
