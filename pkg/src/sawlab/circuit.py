"""Circuit parameters to quantum-model quantities.

Maps the inductance ledger (transmon, coupler, acoustic branch) and flux
biases onto the qubit frequency and the signed, tunable coupling rate.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .constants import E_CHARGE, H_PLANCK, PHI0, TWO_PI
from .errors import CouplingPole, PhasePole, Unreachable

COS_GUARD = 1e-6          # minimum |cos(delta)| before the inductance pole
DENOM_GUARD_REL = 1e-3    # minimum |L_g+L_f+L_c| relative to L_g+L_f


def ec_from_capacitance(c_p: float) -> float:
    """Charging energy e^2 / (2 C h), returned in Hz."""
    if c_p <= 0:
        raise ValueError("shunt capacitance must be positive")
    return E_CHARGE * E_CHARGE / (2.0 * c_p * H_PLANCK)


@dataclass(frozen=True)
class TransmonParams:
    """Flux-tunable transmon. Energies in Hz (divided by h)."""

    c_p: float
    e_c: float
    e_j0: float
    phi_ratio: float  # external flux over the flux quantum

    def __post_init__(self):
        if self.e_c <= 0 or self.e_j0 <= 0:
            raise ValueError("energies must be positive")
        if self.c_p <= 0:
            raise ValueError("shunt capacitance must be positive")
        if self.e_j0 / self.e_c <= 20:
            warnings.warn("E_J/E_C <= 20: outside the weakly anharmonic regime")

    @property
    def anharmonicity(self) -> float:
        """Anharmonicity in Hz, -E_c for the weakly anharmonic oscillator."""
        return -self.e_c

    @classmethod
    def from_capacitance(cls, c_p, e_j0, phi_ratio=0.0):
        return cls(c_p=c_p, e_c=ec_from_capacitance(c_p), e_j0=e_j0, phi_ratio=phi_ratio)


def josephson_energy(p: TransmonParams) -> float:
    """Flux-modulated Josephson energy (Hz)."""
    return p.e_j0 * abs(np.cos(np.pi * p.phi_ratio))


def transmon_frequency(p: TransmonParams) -> float:
    """Ground-to-first-excited transition frequency (Hz).

    f_q = sqrt(8 E_c E_J(flux)) - E_c, even and 1-periodic in the flux ratio.
    """
    cosine = abs(np.cos(np.pi * p.phi_ratio))
    if cosine < 0.01:
        warnings.warn("flux within 1% of the frequency minimum; formula degenerates")
    return float(np.sqrt(8.0 * p.e_c * p.e_j0 * cosine) - p.e_c)


def transmon_inductance(e_j_hz: float) -> float:
    """Josephson inductance (H) of a junction with energy e_j_hz (Hz)."""
    if e_j_hz <= 0:
        raise ValueError("Josephson energy must be positive")
    return (PHI0 / TWO_PI) ** 2 / (H_PLANCK * e_j_hz)


@dataclass(frozen=True)
class GmonParams:
    """RF-SQUID coupler inductances (H) and junction phase (rad)."""

    l_g: float   # qubit-side arm
    l_f: float   # acoustic-side arm
    l_c0: float  # junction inductance at zero phase
    delta: float

    def __post_init__(self):
        if min(self.l_g, self.l_f, self.l_c0) <= 0:
            raise ValueError("all coupler inductances must be positive")


def gmon_lc(g: GmonParams) -> float:
    """Tunable junction inductance L_c0 / cos(delta), sign included."""
    c = np.cos(g.delta)
    if abs(c) <= COS_GUARD:
        raise PhasePole(f"|cos(delta)| = {abs(c):.2e} at the inductance pole")
    return g.l_c0 / c


def loop_beta(g: GmonParams) -> float:
    """Screening parameter (L_g + L_f) / L_c0 of the coupler loop."""
    return (g.l_g + g.l_f) / g.l_c0


@dataclass(frozen=True)
class CouplingLedger:
    """Everything the coupling formula needs. SI units, omega0p in rad/s."""

    l_j: float
    l_s: float
    omega0p: float
    gmon: GmonParams

    def __post_init__(self):
        if self.l_j <= 0 or self.l_s <= 0 or self.omega0p <= 0:
            raise ValueError("ledger entries must be positive")


def coupling_strength(ledger: CouplingLedger) -> float:
    """Signed qubit-cavity coupling rate (rad/s).

    g = 0.5 * [(L_J+L_g)(L_s+L_f)]^(-1/2) * L_g L_f / (L_g+L_f+L_c) * omega0'.
    The sign is carried by the arm-plus-junction denominator.
    """
    gm = ledger.gmon
    l_c = gmon_lc(gm)
    denom = gm.l_g + gm.l_f + l_c
    if abs(denom) < DENOM_GUARD_REL * (gm.l_g + gm.l_f):
        raise CouplingPole("inductance sum within the divergence guard band")
    prefactor = 0.5 / np.sqrt((ledger.l_j + gm.l_g) * (ledger.l_s + gm.l_f))
    return float(prefactor * gm.l_g * gm.l_f / denom * ledger.omega0p)


def _coupling_at_delta(ledger: CouplingLedger, delta: float) -> float:
    return coupling_strength(replace(ledger, gmon=replace(ledger.gmon, delta=delta)))


def _branch_intervals(ledger: CouplingLedger):
    """Monotone, pole-free intervals of delta in [0, pi]."""
    gm = ledger.gmon
    eps_cos = 2.0 * COS_GUARD
    breaks = [0.0]
    # junction-inductance pole at pi/2
    breaks += [0.5 * np.pi - eps_cos, 0.5 * np.pi + eps_cos]
    # denominator zero, present when L_c0 <= L_g + L_f
    arms = gm.l_g + gm.l_f
    if gm.l_c0 <= arms:
        delta_pole = float(np.arccos(-gm.l_c0 / arms))
        slope = gm.l_c0 * np.sin(delta_pole) / np.cos(delta_pole) ** 2
        eps_d = 1.5 * DENOM_GUARD_REL * arms / abs(slope)
        breaks += [delta_pole - eps_d, delta_pole + eps_d]
    breaks.append(np.pi)
    breaks = sorted(b for b in breaks if 0.0 <= b <= np.pi)
    intervals = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a < 1e-9:
            continue
        try:
            ga = _coupling_at_delta(ledger, a)
            gb = _coupling_at_delta(ledger, b)
        except (PhasePole, CouplingPole):
            continue
        intervals.append((a, b, ga, gb))
    return intervals


def solve_delta_for_g(target_g: float, ledger: CouplingLedger) -> float:
    """Junction phase in [0, pi] achieving the requested coupling.

    Bracketed root finding on each monotone branch of the coupling curve;
    the returned phase satisfies the target to relative 1e-6.
    """
    for a, b, ga, gb in _branch_intervals(ledger):
        lo, hi = (ga, gb) if ga <= gb else (gb, ga)
        if not (lo <= target_g <= hi):
            continue
        if ga == target_g:
            return float(a)
        if gb == target_g:
            return float(b)
        delta = brentq(lambda d: _coupling_at_delta(ledger, d) - target_g, a, b,
                       xtol=1e-14, rtol=8.9e-16)
        achieved = _coupling_at_delta(ledger, delta)
        scale = max(abs(target_g), 1e-6 * ledger.omega0p)
        if abs(achieved - target_g) > 1e-6 * scale:
            raise Unreachable("root refinement missed the requested coupling")
        return float(delta)
    raise Unreachable(
        f"coupling {target_g:.6g} rad/s outside every reachable branch "
        "(zero coupling is only approached asymptotically at |delta| -> pi/2)")


def gmon_delta_from_bias(phi_bias: float, loop_beta: float) -> float:
    """Junction phase from the reduced loop bias.

    Solves delta + beta * sin(delta) = phi_bias with safeguarded Newton
    iteration. Unique for beta < 1; for beta >= 1 the branch continuously
    connected to delta = 0 is followed, jumping fold-to-fold the way an
    adiabatic bias sweep does.
    """
    if loop_beta < 0:
        raise ValueError("loop beta cannot be negative")
    if phi_bias == 0.0:
        return 0.0
    sign = 1.0 if phi_bias > 0 else -1.0
    target = abs(phi_bias)
    if loop_beta < 1.0:
        lo, hi = 0.0, target + loop_beta
    else:
        fold = float(np.arccos(-1.0 / loop_beta))
        f_fold = fold + loop_beta * np.sin(fold)
        k = 0
        while target > f_fold + TWO_PI * k:
            k += 1
        lo, hi = TWO_PI * k - fold if k else 0.0, TWO_PI * k + fold

    def func(d):
        return d + loop_beta * np.sin(d) - target

    def deriv(d):
        return 1.0 + loop_beta * np.cos(d)

    f_lo, f_hi = func(lo), func(hi)
    if f_lo > 0 or f_hi < 0:
        raise RuntimeError("bias bracket failed; unreachable for valid beta")
    d = lo + (hi - lo) * f_lo / (f_lo - f_hi) if f_hi != f_lo else 0.5 * (lo + hi)
    for _ in range(100):
        fd = func(d)
        if fd > 0:
            hi = d
        else:
            lo = d
        if abs(fd) < 1e-13 * max(1.0, target):
            break
        dp = deriv(d)
        step_ok = False
        if dp > 0:
            d_new = d - fd / dp
            if lo < d_new < hi:
                d = d_new
                step_ok = True
        if not step_ok:
            d = 0.5 * (lo + hi)
    return float(sign * d)


@dataclass(frozen=True)
class BiasPoint:
    bias: float
    delta: float
    g_c: float  # rad/s, nan when flagged
    ok: bool
    note: str = ""


def coupling_bias_curve(bias_grid, ledger: CouplingLedger, beta=None) -> list:
    """Coupling vs loop bias: bias -> delta -> L_c -> g, point by point.

    Pole-adjacent points come back flagged, not raised.
    """
    bias_grid = np.atleast_1d(np.asarray(bias_grid, float))
    if bias_grid.size == 0:
        raise ValueError("bias grid is empty")
    if beta is None:
        beta = loop_beta(ledger.gmon)
    points = []
    for bias in bias_grid:
        delta = gmon_delta_from_bias(float(bias), beta)
        try:
            g = _coupling_at_delta(ledger, delta)
            points.append(BiasPoint(bias=float(bias), delta=delta, g_c=g, ok=True))
        except (PhasePole, CouplingPole) as exc:
            points.append(BiasPoint(bias=float(bias), delta=delta, g_c=float("nan"),
                                    ok=False, note=str(exc)))
    return points
