"""Classical electrical response of the surface-acoustic-wave cavity.

Covers the coupled-mode description of the transducer and Bragg mirrors,
the lumped RLC-plus-static-capacitance equivalent circuit, and extraction
of the equivalent-circuit parameters back from reflection traces.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .constants import TWO_PI
from .errors import GridTooCoarse, NoResonanceFound
from .fitkit import ModelSpec, nlls_fit

# half-power abscissa of sinc^2: sin(x)/x = 1/sqrt(2)
SINC_HALF_POWER = 1.3915573417688367


@dataclass(frozen=True)
class SawGeometry:
    """Physical layout of the transducer and mirrors. SI units.

    d: electrode width (m). p: transducer pitch (m), one acoustic
    wavelength. n_t / n_m: transducer and per-side mirror cell counts.
    l0_wavelengths: mirror separation in wavelengths. v_a: acoustic speed
    (m/s). r_s1: per-electrode reflection (complex). k2: piezoelectric
    coupling. c_t: transducer electrostatic capacitance (F).
    """

    d: float
    p: float
    n_t: int
    n_m: int
    l0_wavelengths: float
    v_a: float
    r_s1: complex
    k2: float
    c_t: float
    conductance_scale: float | None = None  # optional override of the peak conductance

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("electrode width must be positive")
        if self.p <= 0:
            raise ValueError("pitch must be positive")
        if self.n_t < 1:
            raise ValueError("transducer needs at least one cell")
        if self.n_m < 0:
            raise ValueError("mirror cell count cannot be negative")
        if self.v_a <= 0:
            raise ValueError("acoustic speed must be positive")
        if abs(self.r_s1) >= 1:
            raise ValueError("per-electrode reflection must have magnitude below 1")
        if not 0 < self.k2 < 1:
            raise ValueError("piezoelectric coupling must lie in (0, 1)")
        if self.c_t <= 0:
            raise ValueError("transducer capacitance must be positive")

    @classmethod
    def from_electrode_width(cls, d, n_t, n_m, l0_wavelengths, v_a, r_s1, k2, c_t,
                             conductance_scale=None):
        """Construct with the standard single-finger pitch p = 4 d."""
        return cls(d=d, p=4.0 * d, n_t=n_t, n_m=n_m, l0_wavelengths=l0_wavelengths,
                   v_a=v_a, r_s1=complex(r_s1), k2=k2, c_t=c_t,
                   conductance_scale=conductance_scale)


def geometry_to_f0(geom: SawGeometry) -> float:
    """Center frequency set by the pitch: f0 = v_a / p."""
    return geom.v_a / geom.p


def conductance_scale(geom: SawGeometry) -> float:
    """Peak acoustic conductance of the transducer (S).

    Quasi-static value 8 * K2 * f0 * C_t * N_t unless overridden.
    """
    if geom.conductance_scale is not None:
        return geom.conductance_scale
    return 8.0 * geom.k2 * geometry_to_f0(geom) * geom.c_t * geom.n_t


def idt_conductance(f, geom: SawGeometry):
    """Acoustic conductance G_a(f) of the transducer (S), sinc^2 shaped."""
    f = np.asarray(f, float)
    f0 = geometry_to_f0(geom)
    x = geom.n_t * np.pi * (f - f0) / f0
    s = np.sinc(x / np.pi)  # sin(x)/x with the limit handled
    out = conductance_scale(geom) * s * s
    return out if out.ndim else float(out)


def idt_susceptance(f, geom: SawGeometry):
    """Acoustic susceptance B_a(f) of the transducer (S).

    Hilbert-transform partner of the sinc^2 conductance:
    B_a = G_a0 * (sin(2X) - 2X) / (2 X^2), odd about f0.
    """
    f = np.asarray(f, float)
    f0 = geometry_to_f0(geom)
    x = geom.n_t * np.pi * (f - f0) / f0
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)  # placeholder to avoid 0/0; overwritten below
    bulk = (np.sin(2.0 * xs) - 2.0 * xs) / (2.0 * xs * xs)
    series = -(2.0 / 3.0) * x + (2.0 / 15.0) * x ** 3
    out = conductance_scale(geom) * np.where(small, series, bulk)
    return out if out.ndim else float(out)


def conductance_fwhm(geom: SawGeometry, n_points=20001) -> float:
    """Full width at half maximum of G_a, measured on a dense grid (Hz)."""
    f0 = geometry_to_f0(geom)
    half_span = 2.0 * f0 / geom.n_t
    f = np.linspace(f0 - half_span, f0 + half_span, n_points)
    g = idt_conductance(f, geom)
    return _half_level_width(f, g, level=0.5 * float(np.max(g)))


def _half_level_width(x, y, level):
    """Width of the contiguous region around the maximum where y > level."""
    i0 = int(np.argmax(y))
    left = right = None
    for i in range(i0, 0, -1):
        if y[i - 1] <= level:
            frac = (y[i] - level) / (y[i] - y[i - 1])
            left = x[i] - frac * (x[i] - x[i - 1])
            break
    for i in range(i0, y.size - 1):
        if y[i + 1] <= level:
            frac = (y[i] - level) / (y[i] - y[i + 1])
            right = x[i] + frac * (x[i + 1] - x[i])
            break
    if left is None or right is None:
        raise ValueError("level crossings not inside the grid")
    return float(right - left)


# ---------------------------------------------------------------------------
# Bragg mirror


def mirror_cell_matrix(f, geom: SawGeometry):
    """Transfer matrices of one mirror period, stacked over frequency.

    One reflecting stripe per half acoustic wavelength: the cell combines
    propagation over p/2 (split symmetrically) with a lossless localized
    reflection of amplitude |r_s1|. The phase of r_s1 is absorbed as the
    scatterer's transmission phase so the cell stays lossless for any
    configured phase. det = 1 per cell.
    """
    f = np.atleast_1d(np.asarray(f, float))
    rho = abs(geom.r_s1)
    # r = i * rho * e^{i alpha}; default purely imaginary r gives alpha = 0
    alpha = np.angle(geom.r_s1) - 0.5 * np.pi if rho > 0 else 0.0
    tau = np.sqrt(1.0 - rho * rho)
    theta = TWO_PI * f * (0.5 * geom.p) / geom.v_a
    half = np.exp(-0.5j * theta)
    cells = np.empty(f.shape + (2, 2), complex)
    cells[..., 0, 0] = half * half * np.exp(-1j * alpha) / tau
    cells[..., 0, 1] = -1j * rho / tau
    cells[..., 1, 0] = 1j * rho / tau
    cells[..., 1, 1] = np.conj(half) * np.conj(half) * np.exp(1j * alpha) / tau
    return cells


def mirror_reflection(f, geom: SawGeometry):
    """Input reflection coefficient of the mirror cascade at frequency f."""
    scalar = np.isscalar(f) or np.ndim(f) == 0
    if geom.n_m == 0:
        out = np.zeros(np.shape(np.atleast_1d(f)), complex)
        return complex(out[0]) if scalar else out
    cells = mirror_cell_matrix(f, geom)
    total = np.linalg.matrix_power(cells, geom.n_m)
    gamma = total[..., 1, 0] / total[..., 0, 0]
    return complex(gamma[0]) if scalar else gamma


def mirror_stopband(geom: SawGeometry, threshold=0.9, n_points=4001) -> float:
    """Width (Hz) of the band around f0 where |reflection| > threshold * max."""
    f0 = geometry_to_f0(geom)
    predicted = 2.0 * abs(geom.r_s1) * f0 / np.pi
    half_span = max(1.5 * predicted, 0.02 * f0)
    f = np.linspace(f0 - half_span, f0 + half_span, n_points)
    mag = np.abs(mirror_reflection(f, geom))
    return _half_level_width(f, mag, level=threshold * float(np.max(mag)))


# ---------------------------------------------------------------------------
# equivalent circuit


@dataclass(frozen=True)
class BvdParams:
    """Lumped equivalent circuit of one acoustic resonance. SI units.

    Motional branch l_s, c_s, r_s in series, shunted by the static
    capacitance c_t. f_0 and q are stored alongside and must be consistent
    with the branch values.
    """

    l_s: float
    c_s: float
    r_s: float
    c_t: float
    f_0: float
    q: float

    def __post_init__(self):
        for name in ("l_s", "c_s", "r_s", "c_t", "f_0", "q"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        f_series = 1.0 / (TWO_PI * np.sqrt(self.l_s * self.c_s))
        if abs(self.f_0 - f_series) / self.f_0 >= 1e-6:
            raise ValueError("f_0 inconsistent with 1/(2 pi sqrt(L C))")
        z_s = np.sqrt(self.l_s / self.c_s)
        if abs(self.r_s - z_s / self.q) / self.r_s >= 1e-6:
            raise ValueError("r_s inconsistent with Z_s / Q")

    @property
    def z_s(self) -> float:
        """Characteristic impedance sqrt(L/C) of the motional branch."""
        return float(np.sqrt(self.l_s / self.c_s))

    @classmethod
    def from_motional(cls, l_s, r_s, c_t, f_0):
        omega0 = TWO_PI * f_0
        c_s = 1.0 / (omega0 * omega0 * l_s)
        q = omega0 * l_s / r_s
        return cls(l_s=l_s, c_s=c_s, r_s=r_s, c_t=c_t, f_0=f_0, q=q)

    @classmethod
    def from_quality(cls, l_s, q, c_t, f_0):
        omega0 = TWO_PI * f_0
        c_s = 1.0 / (omega0 * omega0 * l_s)
        r_s = omega0 * l_s / q
        return cls(l_s=l_s, c_s=c_s, r_s=r_s, c_t=c_t, f_0=f_0, q=q)

    def as_dict(self):
        return {
            "l_s_h": self.l_s, "c_s_f": self.c_s, "r_s_ohm": self.r_s,
            "c_t_f": self.c_t, "f_0_hz": self.f_0, "q": self.q,
        }


def bvd_impedance(omega, params: BvdParams):
    """One-port impedance: static capacitance parallel to the motional branch."""
    omega = np.asarray(omega, float)
    z_motional = params.r_s + 1j * omega * params.l_s + 1.0 / (1j * omega * params.c_s)
    y = 1j * omega * params.c_t + 1.0 / z_motional
    out = 1.0 / y
    return out if out.ndim else complex(out)


def s11_from_impedance(z, z0: float):
    """Reflection coefficient of impedance z against reference z0."""
    if z0 <= 0:
        raise ValueError("reference impedance must be positive")
    z = np.asarray(z, complex)
    out = (z - z0) / (z + z0)
    return out if out.ndim else complex(out)


def impedance_from_s11(s11, z0: float):
    s11 = np.asarray(s11, complex)
    out = z0 * (1.0 + s11) / (1.0 - s11)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class FrequencyTrace:
    """Complex one-port response sampled on an increasing frequency grid."""

    frequencies: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, float)
        v = np.asarray(self.values, complex)
        if f.size != v.size:
            raise ValueError("frequency and value arrays differ in length")
        if f.size and np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.frequencies.size


def synthesize_bvd_s11(params: BvdParams, frequencies, z0=50.0,
                       noise_sigma=0.0, rng=None) -> FrequencyTrace:
    """Reflection trace of the equivalent circuit, optionally with additive
    complex Gaussian noise of standard deviation noise_sigma per quadrature."""
    f = np.asarray(frequencies, float)
    s11 = s11_from_impedance(bvd_impedance(TWO_PI * f, params), z0)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(rng)
        s11 = s11 + noise_sigma * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    return FrequencyTrace(frequencies=f, values=s11)


def bvd_extract(trace: FrequencyTrace, z0: float) -> BvdParams:
    """Extract equivalent-circuit parameters from a reflection trace.

    The static capacitance contributes a purely imaginary admittance, so
    the real part of the measured admittance is the exact motional
    Lorentzian: its refined peak gives f_0 and Q = f_0 / FWHM, immune to
    the shunt. C_t follows from Im(Y) at resonance, and the motional
    inductance from the reactance slope of the de-embedded branch,
    L_s = 0.5 * dX/domega, evaluated with a 5-point central stencil.
    """
    f = trace.frequencies
    s11 = trace.values
    if f.size < 25:
        raise GridTooCoarse(f"{f.size} points cannot resolve a resonance")

    mag = np.abs(s11)
    k = max(1, f.size // 10)
    baseline = float(np.median(np.concatenate([mag[:k], mag[-k:]])))
    depth = baseline - float(np.min(mag))
    d = np.diff(mag)
    noise = 1.4826 * float(np.median(np.abs(d - np.median(d)))) / np.sqrt(2.0)
    if depth < max(3.0 * noise, 1e-9):
        raise NoResonanceFound("no reflection dip above 3x the trace noise floor")

    omega = TWO_PI * f
    y = 1.0 / impedance_from_s11(s11, z0)
    g = y.real

    # coarse window around the motional peak (the raw reflection dip sits
    # between the series and parallel resonances, so it only gates detection)
    i_pk = int(np.argmax(g))
    peak_g = float(g[i_pk])
    try:
        coarse_w = _half_level_width(f, g, level=0.5 * float(np.max(g)))
    except ValueError:
        raise GridTooCoarse("conductance peak not resolved inside the grid")
    in_linewidth = np.count_nonzero(np.abs(f - f[i_pk]) <= 0.5 * coarse_w)
    if in_linewidth < 50:
        raise GridTooCoarse(f"only {in_linewidth} points inside the linewidth, need 50")

    window = np.abs(f - f[i_pk]) <= 8.0 * coarse_w
    fit = nlls_fit(f[window], g[window], ModelSpec("lorentzian"))
    f0 = fit.value("center")
    if not (f[2] < f0 < f[-3]) or abs(fit.value("fwhm")) <= 0:
        raise NoResonanceFound("resonance refinement left the trace interior")
    # second pass in v = (f^2 - f0^2)/f, where the motional conductance is
    # exactly Lorentzian; removes the residual lineshape asymmetry in f
    v = f[window] - f0 * f0 / f[window]
    fit2 = nlls_fit(v, g[window], ModelSpec("lorentzian"))
    v_c = fit2.value("center")
    f0 = 0.5 * (v_c + np.sqrt(v_c * v_c + 4.0 * f0 * f0))
    fwhm = 0.5 * abs(fit2.value("fwhm"))
    q = f0 / fwhm
    omega0 = TWO_PI * f0

    c_t = float(np.interp(f0, f, y.imag)) / omega0
    y_m = y - 1j * omega * c_t
    with np.errstate(divide="ignore", invalid="ignore"):
        x_m = np.where(np.abs(y_m) > 0, (1.0 / y_m).imag, 0.0)

    i0 = int(np.argmin(np.abs(f - f0)))
    i0 = min(max(i0, 2), f.size - 3)
    h = omega[i0 + 1] - omega[i0]
    local = np.diff(omega[i0 - 2:i0 + 3])
    if np.max(np.abs(local - h)) <= 1e-6 * h:
        slope = (-x_m[i0 + 2] + 8.0 * x_m[i0 + 1] - 8.0 * x_m[i0 - 1] + x_m[i0 - 2]) / (12.0 * h)
    else:
        # non-uniform grid near resonance: differentiate a local cubic
        sel = slice(max(i0 - 3, 0), min(i0 + 4, f.size))
        coef = np.polyfit(omega[sel] - omega[i0], x_m[sel], 3)
        slope = float(coef[2])

    l_s = 0.5 * float(slope)
    if l_s <= 0:
        raise NoResonanceFound("reactance slope at resonance is not inductive")
    if peak_g * z0 < 1e-12:
        warnings.warn("resonance barely visible against the reference impedance")
    return BvdParams.from_quality(l_s=l_s, q=q, c_t=c_t, f_0=f0)
