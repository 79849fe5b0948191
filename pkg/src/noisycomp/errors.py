class NoisyCompError(ValueError):
    """Raised for invalid inputs and infeasible constructions.

    ``code`` is a short upper-case identifier (``BAD_SUM``, ``TOO_LARGE``,
    ``TOO_FEW_CODEWORDS`` ...) that callers and the CLI can switch on.
    """

    def __init__(self, code, message=""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


# codes the CLI maps to exit status 3 rather than 2
INFEASIBLE = frozenset({
    "RATE_TOO_HIGH", "EXHAUSTED", "TOO_FEW_CODEWORDS", "GROUP_OVERFLOW",
    "RATE_ABOVE_ENCODER_LIMIT", "NO_PAIR", "DEGENERATE_GAMMA",
    "OUTER_INJECTIVE", "NO_ACCEPTED_TRIALS", "TOO_LARGE",
})
