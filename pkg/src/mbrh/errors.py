"""Exception hierarchy shared by all solver modules."""


class MBRHError(Exception):
    """Base class for all package errors."""


# --- broadening ---------------------------------------------------------
class ZeroMass(MBRHError):
    """Tabulated weight has (numerically) zero integral."""


class NonDecaying(MBRHError):
    """Tabulated weight does not decay at the grid ends."""


class TooCloseToAxis(MBRHError):
    """Quadrature evaluation point too close to the real axis."""


class PrincipalValueFailure(MBRHError):
    """Principal-value quadrature did not converge."""


# --- lax / averaging ----------------------------------------------------
class GridCoverage(MBRHError):
    """Detuning grid does not cover enough of the weight's mass."""


class StencilTooCoarse(MBRHError):
    """Finite-difference stencil has fewer than 3 points per direction."""


# --- spectral -----------------------------------------------------------
class ODEStepRejected(MBRHError):
    """Adaptive step-size underflow in a Lax-equation integration."""


class DecayViolation(MBRHError):
    """Boundary pulse has not decayed at the end of the time window."""


class MediumNotAsymptotic(MBRHError):
    """Initial medium polarization does not vanish at x = L."""


class SpectralSingularity(MBRHError):
    """a(lambda) vanishes on the real axis (outside the regular theory)."""


class CountMismatch(MBRHError):
    """Refined zero count disagrees with the winding number."""


# --- jump ---------------------------------------------------------------
class SingularK(MBRHError):
    """det K drifted too far from 1."""


class RegularityViolation(MBRHError):
    """a or b vanishes on the oval contour."""


# --- rhsolver -----------------------------------------------------------
class EmptyContour(MBRHError):
    """Contour construction produced no panels."""


class IllConditioned(MBRHError):
    """Collocation system condition estimate exceeds the safe threshold."""


class PosdefViolated(MBRHError):
    """Real-axis jump failed the positive-definiteness precondition."""


class TooCloseToContour(MBRHError):
    """Off-contour evaluation point within the node-spacing floor."""


class SingularResidueSystem(MBRHError):
    """Degenerate pole configuration in the reflectionless solve."""


class WeightVanishes(MBRHError):
    """n(lambda) too small for the medium-reconstruction jump formula."""


# --- direct -------------------------------------------------------------
class CFLViolation(MBRHError):
    """Grid steps are not characteristics-aligned (dt != dx)."""


class ConstraintDrift(MBRHError):
    """Bloch-sphere constraint drifted beyond the cumulative tolerance."""


# --- cli ----------------------------------------------------------------
class SchemaError(MBRHError):
    """Malformed scenario/config file."""


class InvariantError(MBRHError):
    """Scenario data violates a declared invariant."""
