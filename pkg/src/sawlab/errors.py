"""Exception types shared across the toolkit."""


class SawlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SawlabError):
    """Invalid device configuration. Carries the offending key path."""

    def __init__(self, key, message):
        self.key = key
        self.message = message
        super().__init__(f"{key}: {message}")


class NoResonanceFound(SawlabError):
    """Reflection trace contains no dip above the noise floor."""


class GridTooCoarse(SawlabError):
    """Frequency grid does not resolve the resonance linewidth."""


class PhasePole(SawlabError):
    """Junction phase too close to the inductance pole at cos(delta) = 0."""


class CouplingPole(SawlabError):
    """Inductance ledger too close to the coupling divergence."""


class Unreachable(SawlabError):
    """Requested coupling target is outside the achievable range."""


class TruncationTooSmall(SawlabError):
    """Hilbert-space truncation insufficient for the requested simulation."""


class IntegratorDiverged(SawlabError):
    """Time integrator failed to produce a solution."""


class DegenerateJacobian(SawlabError):
    """Least-squares normal equations are singular beyond repair."""


class NoOscillation(SawlabError):
    """Trace has no oscillatory component above the spectral floor."""


class ZeroDetuning(SawlabError):
    """Operation undefined at zero qubit-cavity detuning."""
