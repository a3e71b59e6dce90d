"""Exception hierarchy. Every error carries the witness that triggered it."""

from __future__ import annotations


class LabError(Exception):
    """Base class for all domain errors raised by this package."""


class ValidationError(LabError):
    """Raised when a candidate space record violates a metric-measure invariant."""


class TriangleViolation(ValidationError):
    def __init__(self, i: int, j: int, k: int, excess: float):
        self.i, self.j, self.k, self.excess = i, j, k, excess
        super().__init__(
            f"triangle inequality fails: d({i},{j}) exceeds d({i},{k}) + d({k},{j}) by {excess:.3e}"
        )


class AsymmetricDistance(ValidationError):
    def __init__(self, i: int, j: int):
        self.i, self.j = i, j
        super().__init__(f"distance matrix is not symmetric at ({i},{j})")


class CoincidentPoints(ValidationError):
    def __init__(self, i: int, j: int):
        self.i, self.j = i, j
        super().__init__(f"distinct points {i} and {j} are at distance zero")


class NonzeroDiagonal(ValidationError):
    def __init__(self, i: int):
        self.i = i
        super().__init__(f"d({i},{i}) is not zero")


class NonpositiveWeight(ValidationError):
    def __init__(self, i: int):
        self.i = i
        super().__init__(f"weight of point {i} is not a finite positive number")


class TooFewPoints(ValidationError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"a metric measure space needs at least two points, got {count}")


class MalformedSpace(ValidationError):
    """Shape or type problems that come before any metric invariant."""


class BadParams(LabError):
    """Generator or operation parameters outside the documented range."""


class BadRadii(BadParams):
    def __init__(self, r: float, R: float):
        self.r, self.R = r, R
        super().__init__(f"need 0 <= r < R, got r={r}, R={R}")


class LambdaOutOfRange(BadParams):
    def __init__(self, lam: float):
        self.lam = lam
        super().__init__(f"lambda must lie in (0, 1/5), got {lam}")


class BadExponents(BadParams):
    def __init__(self, p: float, q: float):
        self.p, self.q = p, q
        super().__init__(f"need 0 < p < q, got p={p}, q={q}")


class BadBeta(BadParams):
    def __init__(self, beta: float):
        self.beta = beta
        super().__init__(f"beta must exceed 1, got {beta}")


class MissingConstant(BadParams):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"constant '{name}' is required and must be positive")


class ConstructionImpossible(LabError):
    """A construction that the continuum argument guarantees is unavailable on this discrete ball."""


class PreconditionRadius(ConstructionImpossible):
    def __init__(self, x: int, r: float, phi: float, lam: float):
        self.x, self.r, self.phi, self.lam = x, r, phi, lam
        super().__init__(
            f"radius condition r <= 3*phi/lambda^2 has the wrong sign at x={x}, r={r}, phi={phi}, lambda={lam}"
        )


class ZeroPhi(ConstructionImpossible):
    def __init__(self, x: int, r: float):
        self.x, self.r = x, r
        super().__init__(f"phi_x(r) = 0 at x={x}, r={r}: the centre atom carries half the ball")


class EmptyAnnulus(ConstructionImpossible):
    def __init__(self, x: int, inner: float, outer: float):
        self.x, self.inner, self.outer = x, inner, outer
        super().__init__(f"no point of the space at distance in [{inner}, {outer}) from {x}")


class InclusionFailure(LabError):
    def __init__(self, what: str):
        self.what = what
        super().__init__(f"ball inclusion failed: {what}")


class DegenerateDomain(LabError):
    def __init__(self, size: int):
        self.size = size
        super().__init__(f"domain needs at least two points, got {size}")


class EmptySet(LabError):
    def __init__(self):
        super().__init__("set has zero measure")


class NotAGradient(LabError):
    def __init__(self, pair: tuple[int, int], slack: float):
        self.pair, self.slack = pair, slack
        super().__init__(f"g is not a generalized gradient of u: pair {pair} has slack {slack:.3e}")


class ZeroGradientNorm(LabError):
    def __init__(self):
        super().__init__("gradient has zero norm on the relevant domain")


class EmptyCorpus(LabError):
    def __init__(self):
        super().__init__("corpus of test pairs is empty")


class VConditionFails(LabError):
    def __init__(self, x: int, r: float, ratio: float, b: float):
        self.x, self.r, self.ratio, self.b = x, r, ratio, b
        super().__init__(f"volume condition fails at x={x}, r={r}: mu(B)/r^s = {ratio} < b = {b}")


class ChainStuck(LabError):
    def __init__(self, level: int, point: int, radius: float):
        self.level, self.point, self.radius = level, point, radius
        super().__init__(f"no point of E_{level} within {radius} of {point}")


class VerificationFailed(LabError):
    """An exact mass-bound check failed on valid input. Always an implementation bug."""

    def __init__(self, message: str, witness: dict):
        self.witness = witness
        super().__init__(message)
