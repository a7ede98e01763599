"""Nonlinear least-squares fitting and the trace-analysis recipes built on it.

All fits run through one damped Gauss-Newton engine with Levenberg-style
adaptive damping. Four trace models cover the toolkit's needs: Lorentzian
resonance dips/peaks, exponential decay, damped cosine, and straight line.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateJacobian, NoOscillation

MAX_ITERATIONS = 200
STEP_TOL = 1e-10
RESIDUAL_TOL = 1e-12
DAMPING_GROW = 3.0
DAMPING_SHRINK = 3.0


# ---------------------------------------------------------------------------
# model functions and analytic Jacobians


def lorentzian(x, center, fwhm, depth, baseline):
    """Lorentzian dip; negative depth turns it into a peak."""
    u = 2.0 * (x - center) / fwhm
    return baseline - depth / (1.0 + u * u)


def _lorentzian_jac(x, p):
    center, fwhm, depth, _ = p
    u = 2.0 * (x - center) / fwhm
    f = 1.0 / (1.0 + u * u)
    f2 = f * f
    j = np.empty((x.size, 4))
    j[:, 0] = -4.0 * depth * u * f2 / fwhm
    j[:, 1] = -2.0 * depth * u * u * f2 / fwhm
    j[:, 2] = -f
    j[:, 3] = 1.0
    return j


def exp_decay(x, amplitude, rate, offset):
    return amplitude * np.exp(-rate * x) + offset


def _exp_decay_jac(x, p):
    amplitude, rate, _ = p
    e = np.exp(-rate * x)
    j = np.empty((x.size, 3))
    j[:, 0] = e
    j[:, 1] = -amplitude * x * e
    j[:, 2] = 1.0
    return j


def damped_cosine(x, amplitude, frequency, phase, decay, offset):
    arg = 2.0 * np.pi * frequency * x + phase
    return amplitude * np.exp(-decay * x) * np.cos(arg) + offset


def _damped_cosine_jac(x, p):
    amplitude, frequency, phase, decay, _ = p
    arg = 2.0 * np.pi * frequency * x + phase
    e = np.exp(-decay * x)
    c = np.cos(arg)
    s = np.sin(arg)
    j = np.empty((x.size, 5))
    j[:, 0] = e * c
    j[:, 1] = -amplitude * e * s * 2.0 * np.pi * x
    j[:, 2] = -amplitude * e * s
    j[:, 3] = -amplitude * x * e * c
    j[:, 4] = 1.0
    return j


def line(x, slope, intercept):
    return slope * x + intercept


def _line_jac(x, p):
    j = np.empty((x.size, 2))
    j[:, 0] = x
    j[:, 1] = 1.0
    return j


# ---------------------------------------------------------------------------
# automatic initial guesses


def _edge_level(y, frac=0.1):
    k = max(1, int(round(frac * y.size)))
    return float(np.median(np.concatenate([y[:k], y[-k:]])))


def _init_lorentzian(x, y):
    baseline = _edge_level(y)
    lo, hi = float(np.min(y)), float(np.max(y))
    # dip when the minimum deviates further from the edges than the maximum
    if baseline - lo >= hi - baseline:
        depth = baseline - lo
        idx = int(np.argmin(y))
    else:
        depth = baseline - hi  # negative: peak
        idx = int(np.argmax(y))
    center = float(x[idx])
    level = baseline - 0.5 * depth
    fwhm = None
    if depth != 0.0:
        sgn = 1.0 if depth > 0 else -1.0
        inside = sgn * (level - y) > 0  # between the half-depth crossings
        left = right = None
        for i in range(idx, 0, -1):
            if not inside[i - 1]:
                dy = y[i - 1] - y[i]
                t = (level - y[i]) / dy if dy != 0 else 0.5
                left = x[i] + np.clip(t, 0.0, 1.0) * (x[i - 1] - x[i])
                break
        for i in range(idx, y.size - 1):
            if not inside[i + 1]:
                dy = y[i + 1] - y[i]
                t = (level - y[i]) / dy if dy != 0 else 0.5
                right = x[i] + np.clip(t, 0.0, 1.0) * (x[i + 1] - x[i])
                break
        if left is not None and right is not None and right > left:
            fwhm = right - left
    if fwhm is None:
        fwhm = (x[-1] - x[0]) / 6.0
    return np.array([center, fwhm, depth, baseline])


def _init_exp_decay(x, y):
    offset = float(y[-1])
    ys = y - offset
    sign = 1.0
    if np.median(ys[: max(2, ys.size // 4)]) < 0:
        sign = -1.0
        ys = -ys
    peak = float(np.max(ys))
    mask = ys > max(peak, 1e-300) * 1e-3
    if np.count_nonzero(mask) >= 2 and peak > 0:
        coef = np.polyfit(x[mask], np.log(ys[mask]), 1)
        rate = max(-coef[0], 1e-300)
        amplitude = sign * float(np.exp(coef[1]))
    else:
        rate = 3.0 / max(x[-1] - x[0], 1e-300)
        amplitude = sign * peak
    return np.array([amplitude, rate, offset])


def _spectral_peak(x, y, pad=8):
    """Return (frequency, magnitude spectrum, freq grid) of the strongest
    local maximum of the zero-padded magnitude spectrum, or None."""
    from scipy.signal import find_peaks

    y0 = y - np.mean(y)
    n = y0.size
    dt = (x[-1] - x[0]) / (n - 1)
    spec = np.abs(np.fft.rfft(y0, n=pad * n))
    freqs = np.fft.rfftfreq(pad * n, d=dt)
    peaks, _ = find_peaks(spec[1:])
    if peaks.size == 0:
        return None, spec, freqs
    best = peaks[np.argmax(spec[1:][peaks])] + 1
    return float(freqs[best]), spec, freqs


def _init_damped_cosine(x, y):
    offset = float(np.mean(y))
    f0, _, _ = _spectral_peak(x, y)
    if f0 is None or f0 <= 0:
        f0 = 2.0 / max(x[-1] - x[0], 1e-300)
    # linear LS for a*cos + b*sin at fixed frequency gives amplitude and phase
    arg = 2.0 * np.pi * f0 * x
    basis = np.column_stack([np.cos(arg), np.sin(arg)])
    a, b = np.linalg.lstsq(basis, y - offset, rcond=None)[0]
    amplitude = float(np.hypot(a, b))
    phase = float(np.arctan2(-b, a))
    # crude decay from the amplitude ratio of the two trace halves
    half = x.size // 2
    a1 = np.std(y[:half])
    a2 = np.std(y[half:])
    span = x[-1] - x[0]
    if a1 > 0 and a2 > 0 and span > 0:
        decay = max(2.0 * np.log(a1 / a2) / span, 0.0)
    else:
        decay = 0.0
    return np.array([amplitude, f0, phase, decay, offset])


def _init_line(x, y):
    return np.asarray(np.polyfit(x, y, 1), float)


MODELS = {
    "lorentzian": (("center", "fwhm", "depth", "baseline"), lorentzian, _lorentzian_jac, _init_lorentzian),
    "exp_decay": (("amplitude", "rate", "offset"), exp_decay, _exp_decay_jac, _init_exp_decay),
    "damped_cosine": (("amplitude", "frequency", "phase", "decay", "offset"), damped_cosine, _damped_cosine_jac, _init_damped_cosine),
    "line": (("slope", "intercept"), line, _line_jac, _init_line),
}


@dataclass
class ModelSpec:
    """Which trace model to fit and how to seed it."""

    kind: str
    initial: object = "auto"  # "auto" or an explicit parameter sequence

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.initial != "auto":
            expected = len(MODELS[self.kind][0])
            if len(self.initial) != expected:
                raise ValueError(f"{self.kind} expects {expected} parameters, got {len(self.initial)}")


@dataclass
class FitResult:
    kind: str
    names: tuple
    values: np.ndarray
    uncertainties: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    provenance: dict = field(default_factory=dict)

    def value(self, name):
        return float(self.values[self.names.index(name)])

    def sigma(self, name):
        return float(self.uncertainties[self.names.index(name)])

    def as_dict(self):
        return {
            "kind": self.kind,
            "parameters": {n: float(v) for n, v in zip(self.names, self.values)},
            "uncertainties": {n: float(s) for n, s in zip(self.names, self.uncertainties)},
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "provenance": self.provenance,
        }


def _column_scales(j):
    norms = np.sqrt((j * j).sum(axis=0))
    return np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)


def _levenberg(residual, jacobian, p0):
    """Damped Gauss-Newton minimization of ||residual(p)||^2.

    The Jacobian is column-normalized so one damping parameter treats all
    parameters evenly. Damping multiplies by 3 on a rejected step and
    divides by 3 on an accepted one, starting from
    1e-3 * trace(JtJ) / n_params of the scaled system.
    Returns (p, converged, iterations, accepted_cost_history).
    """
    p = np.asarray(p0, float).copy()
    n = p.size
    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise DegenerateJacobian("residual not finite at the initial guess")
    cost = float(r @ r)
    history = [cost]
    j = jacobian(p)
    if not np.all(np.isfinite(j)):
        raise DegenerateJacobian("Jacobian not finite at the initial guess")
    lam = lam0 = None
    converged = False
    iterations = 0
    eye = np.eye(n)
    while iterations < MAX_ITERATIONS:
        iterations += 1
        d = _column_scales(j)
        js = j * d[None, :]
        jtj = js.T @ js
        if lam is None:
            lam = lam0 = 1e-3 * max(np.trace(jtj), 1e-300) / n
        g = js.T @ r
        try:
            step = d * np.linalg.solve(jtj + lam * eye, -g)
        except np.linalg.LinAlgError:
            lam *= DAMPING_GROW
            if lam > 1e18 * lam0:
                raise DegenerateJacobian("normal equations singular under maximal damping")
            continue
        p_new = p + step
        r_new = residual(p_new)
        cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
        if cost_new < cost:
            rel_step = np.linalg.norm(step / np.maximum(np.abs(p_new), 1e-300))
            rel_drop = (cost - cost_new) / max(cost, 1e-300)
            p, r, cost = p_new, r_new, cost_new
            history.append(cost)
            j = jacobian(p)
            if not np.all(np.isfinite(j)):
                raise DegenerateJacobian("Jacobian became non-finite")
            lam /= DAMPING_SHRINK
            if rel_step < STEP_TOL or rel_drop < RESIDUAL_TOL:
                converged = True
                break
        else:
            lam *= DAMPING_GROW
            if lam > 1e18 * lam0:
                break
    return p, r, j, converged, iterations, history


def _uncertainties(r, j, n_params):
    m = r.size
    dof = max(m - n_params, 1)
    s2 = float(r @ r) / dof
    jtj = j.T @ j
    try:
        cov = s2 * np.linalg.inv(jtj)
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        sig = np.full(n_params, np.inf)
    return sig


def nlls_fit(x, y, spec: ModelSpec) -> FitResult:
    """Fit one of the registered trace models to (x, y) data."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    names, func, jac, auto_init = MODELS[spec.kind]
    if x.size != y.size:
        raise ValueError("x and y lengths differ")
    if x.size < 2 * len(names):
        raise ValueError(f"need at least {2 * len(names)} points to fit {spec.kind}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite data")

    p0 = auto_init(x, y) if spec.initial == "auto" else np.asarray(spec.initial, float)

    def residual(p):
        return func(x, *p) - y

    def jacobian(p):
        return jac(x, p)

    p, r, j, converged, iterations, history = _levenberg(residual, jacobian, p0)
    sig = _uncertainties(r, j, len(names))
    return FitResult(
        kind=spec.kind,
        names=names,
        values=p,
        uncertainties=sig,
        residual_norm=float(np.linalg.norm(r)),
        iterations=iterations,
        converged=converged,
        provenance={"initial": [float(v) for v in p0], "cost_history": history},
    )


def fit_custom(residual, p0, jacobian=None, fd_step=1e-7):
    """Run the engine on an arbitrary residual (finite-difference Jacobian
    by default). Returns (params, converged)."""
    p0 = np.asarray(p0, float)

    if jacobian is None:

        def jacobian(p):
            r0 = residual(p)
            j = np.empty((r0.size, p.size))
            for k in range(p.size):
                h = fd_step * max(abs(p[k]), 1.0)
                pp = p.copy()
                pp[k] += h
                pm = p.copy()
                pm[k] -= h
                j[:, k] = (residual(pp) - residual(pm)) / (2.0 * h)
            return j

    p, _, _, converged, _, _ = _levenberg(residual, jacobian, p0)
    return p, converged


# ---------------------------------------------------------------------------
# recipes


def extract_oscillation_frequency(traj, values=None) -> float:
    """Dominant oscillation frequency (Hz) of a population trace.

    Accepts a Trajectory-like object (``.times``/``.p_e``) or two arrays.
    Coarse spectral-peak estimate refined by a damped-cosine fit.
    """
    if values is None:
        times = np.asarray(traj.times, float)
        y = np.asarray(traj.p_e, float)
    else:
        times = np.asarray(traj, float)
        y = np.asarray(values, float)

    f0, spec, _ = _spectral_peak(times, y)
    floor = float(np.median(spec[1:]))
    if f0 is None or (f0 is not None and np.max(spec[1:]) < 3.0 * floor):
        raise NoOscillation("no spectral peak above 3x the spectral median")
    fit = nlls_fit(times, y, ModelSpec("damped_cosine"))
    return abs(fit.value("frequency"))


def fit_crosstalk_alpha(gmon_bias, qubit_bias, frequencies, transmon):
    """Fit the linear Z-crosstalk coefficient from spectroscopy samples.

    Minimizes the residual between measured qubit frequencies and the
    flux-tuning model evaluated at the corrected bias.
    """
    from dataclasses import replace

    from .circuit import transmon_frequency

    gb = np.asarray(gmon_bias, float)
    qb = np.asarray(qubit_bias, float)
    fm = np.asarray(frequencies, float)

    def residual(p):
        alpha = p[0]
        corrected = qb - alpha * gb
        model = np.array([transmon_frequency(replace(transmon, phi_ratio=c)) for c in corrected])
        return model - fm

    p, _ = fit_custom(residual, [0.0])
    return float(p[0])


def crosstalk_correct(bias_pairs, alpha=None, frequencies=None, transmon=None):
    """Remove coupler-to-qubit bias crosstalk with a linear model.

    ``bias_pairs`` is a sequence of (gmon_bias, qubit_bias). When ``alpha``
    is None it is fitted from ``frequencies`` against the transmon tuning
    model. Returns (corrected_pairs, alpha).
    """
    pairs = np.asarray(bias_pairs, float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("bias_pairs must be an (N, 2) sequence")
    if alpha is None:
        if frequencies is None or transmon is None:
            raise ValueError("fitting alpha requires frequencies and a transmon model")
        alpha = fit_crosstalk_alpha(pairs[:, 0], pairs[:, 1], frequencies, transmon)
    corrected = pairs.copy()
    corrected[:, 1] = pairs[:, 1] - alpha * pairs[:, 0]
    return corrected, float(alpha)


@dataclass
class StarkSlopeAnalysis:
    per_scan: list  # (coupling rad/s, slope, slope_err) per scan
    quad_coeff: float  # c in slope = c * g^2
    deviations: list  # per-scan relative deviation from the quadratic law

    def as_dict(self):
        return {
            "per_scan": [
                {"coupling_rad_s": g, "slope": s, "slope_err": e} for g, s, e in self.per_scan
            ],
            "quad_coeff": self.quad_coeff,
            "deviations": self.deviations,
        }


def stark_slope_analysis(scans) -> StarkSlopeAnalysis:
    """Per-scan slope of frequency shift vs mean occupation, plus the
    quadratic-in-coupling coefficient across scans.

    ``scans``: sequence of (coupling, [(n_mean, shift), ...]).
    """
    per_scan = []
    for g, points in scans:
        pts = np.asarray(points, float)
        if pts.shape[0] < 3:
            raise ValueError("each scan needs at least 3 points")
        fit = nlls_fit(pts[:, 0], pts[:, 1], ModelSpec("line"))
        per_scan.append((float(g), fit.value("slope"), fit.sigma("slope")))
    g2 = np.array([g * g for g, _, _ in per_scan])
    slopes = np.array([s for _, s, _ in per_scan])
    quad = float(g2 @ slopes / (g2 @ g2))
    deviations = []
    for gsq, s in zip(g2, slopes):
        expected = quad * gsq
        deviations.append(float((s - expected) / expected) if expected != 0 else float("nan"))
    return StarkSlopeAnalysis(per_scan=per_scan, quad_coeff=quad, deviations=deviations)
