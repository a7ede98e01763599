"""Open-system dynamics of the coupled transmon-phonon mode.

Everything runs in the frame rotating at the acoustic mode frequency, so
the phonon sits at zero and the qubit at its detuning. The transmon is a
two- or three-level anharmonic ladder; dissipation enters through Lindblad
collapse channels with segment-dependent qubit rates.
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .constants import TWO_PI
from .errors import IntegratorDiverged, TruncationTooSmall, ZeroDetuning

DENSE_LIOUVILLIAN_MAX_DIM = 48  # above this, fall back to matmul right-hand sides


@dataclass(frozen=True)
class SystemParams:
    """Quantum model of the coupled system. Angular frequencies in rad/s,
    rates in 1/s.

    n_max is the number of phonon Fock states kept (occupations
    0 .. n_max-1); q_levels is 2 or 3 transmon levels.
    """

    omega0p: float
    omega_q: float
    g_c: float
    eta: float
    gamma_q_idle: float
    gamma_q_swap: float
    gamma_phi_q: float
    gamma_s: float
    gamma_phi_s: float
    n_max: int
    q_levels: int = 3

    def __post_init__(self):
        if self.n_max < 2:
            raise TruncationTooSmall("need at least two phonon Fock states")
        if self.q_levels not in (2, 3):
            raise ValueError("transmon truncation must be 2 or 3 levels")
        for name in ("gamma_q_idle", "gamma_q_swap", "gamma_phi_q", "gamma_s", "gamma_phi_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} cannot be negative")
        if self.eta > 0:
            raise ValueError("anharmonicity must be non-positive")

    @property
    def detuning(self) -> float:
        """Qubit frequency minus the acoustic mode frequency (rad/s)."""
        return self.omega_q - self.omega0p

    @property
    def dim(self) -> int:
        return self.q_levels * self.n_max


def pure_dephasing_rate(t1: float, t2: float) -> float:
    """Pure dephasing rate 1/T2 - 1/(2 T1), clamped at zero."""
    rate = 1.0 / t2 - 0.5 / t1
    if rate < 0:
        warnings.warn("T2 exceeds 2 T1; clamping pure dephasing at zero")
        return 0.0
    return rate


# ---------------------------------------------------------------------------
# operators


def _lowering(n):
    return np.diag(np.sqrt(np.arange(1, n)), k=1).astype(complex)


def qubit_lowering(p: SystemParams):
    return np.kron(_lowering(p.q_levels), np.eye(p.n_max))


def phonon_lowering(p: SystemParams):
    return np.kron(np.eye(p.q_levels), _lowering(p.n_max))


def excited_projector(p: SystemParams):
    """Projector onto the first excited transmon level."""
    proj = np.zeros((p.q_levels, p.q_levels))
    proj[1, 1] = 1.0
    return np.kron(proj, np.eye(p.n_max))


def basis_density(p: SystemParams, q: int, n: int):
    """Density matrix of the product Fock state |q, n>."""
    if not (0 <= q < p.q_levels and 0 <= n < p.n_max):
        raise ValueError("basis index outside the truncation")
    rho = np.zeros((p.dim, p.dim), complex)
    rho[q * p.n_max + n, q * p.n_max + n] = 1.0
    return rho


def build_hamiltonian(p: SystemParams, frame_detuning: float):
    """Rotating-frame Hamiltonian (rad/s).

    H = Delta b'b + (eta/2) b'b'bb + g (a'b + a b'), with Delta the qubit
    detuning from the frame. For two transmon levels the anharmonic term
    vanishes and the textbook exchange model is recovered.
    """
    if p.n_max < 2:
        raise TruncationTooSmall("need at least two phonon Fock states")
    b = qubit_lowering(p)
    a = phonon_lowering(p)
    bd = b.conj().T
    ad = a.conj().T
    nq = bd @ b
    h = frame_detuning * nq
    h = h + 0.5 * p.eta * (bd @ bd @ b @ b)
    h = h + p.g_c * (ad @ b + a @ bd)
    return 0.5 * (h + h.conj().T)


def collapse_operators(p: SystemParams, rate_context: str = "idle"):
    """Collapse channels for the requested qubit rate context.

    Pure-dephasing channels use sqrt(2 gamma_phi) * number so that a
    coherence between adjacent levels decays at exactly gamma_phi and
    1/T2 = 1/(2 T1) + gamma_phi holds.
    """
    if rate_context not in ("idle", "swap"):
        raise ValueError("rate context must be 'idle' or 'swap'")
    gamma_q = p.gamma_q_idle if rate_context == "idle" else p.gamma_q_swap
    b = qubit_lowering(p)
    a = phonon_lowering(p)
    ops = []
    if gamma_q > 0:
        ops.append(np.sqrt(gamma_q) * b)
    if p.gamma_phi_q > 0:
        ops.append(np.sqrt(2.0 * p.gamma_phi_q) * (b.conj().T @ b))
    if p.gamma_s > 0:
        ops.append(np.sqrt(p.gamma_s) * a)
    if p.gamma_phi_s > 0:
        ops.append(np.sqrt(2.0 * p.gamma_phi_s) * (a.conj().T @ a))
    return ops


def _liouvillian_dense(h, c_ops):
    """Dense superoperator for row-major vectorized density matrices."""
    dim = h.shape[0]
    eye = np.eye(dim)
    liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in c_ops:
        cdc = c.conj().T @ c
        liou += np.kron(c, c.conj())
        liou -= 0.5 * (np.kron(cdc, eye) + np.kron(eye, cdc.T))
    return liou


def _commutator_superop(op):
    dim = op.shape[0]
    eye = np.eye(dim)
    return -1j * (np.kron(op, eye) - np.kron(eye, op.T))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Populations along one evolution; optional full-state snapshots."""

    times: np.ndarray
    p_e: np.ndarray
    n_mean: np.ndarray
    rhos: np.ndarray | None = None
    readout: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        pe = np.asarray(self.p_e, float)
        nm = np.asarray(self.n_mean, float)
        if np.any(pe < -1e-9) or np.any(pe > 1.0 + 1e-9):
            raise ValueError("excited-state population outside [0, 1]")
        if np.any(nm < -1e-9):
            raise ValueError("negative phonon occupation")


def _validate_rho(rho, dim):
    rho = np.asarray(rho, complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix must be {dim}x{dim}")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-9:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-9:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def _integrate(h, c_ops, rho0, t_grid, rtol=1e-8, atol=1e-10,
               method="adaptive", fixed_dt=2e-11):
    """Evolve rho0 over t_grid (starting at t_grid[0]) and return the stack
    of density matrices at the grid times."""
    dim = h.shape[0]
    t_grid = np.asarray(t_grid, float)
    y0 = rho0.reshape(-1)

    use_dense = dim <= DENSE_LIOUVILLIAN_MAX_DIM
    if use_dense:
        liou = _liouvillian_dense(h, c_ops)

        def rhs(_, y):
            return liou @ y
    else:
        cdcs = [c.conj().T @ c for c in c_ops]

        def rhs(_, y):
            rho = y.reshape(dim, dim)
            out = -1j * (h @ rho - rho @ h)
            for c, cdc in zip(c_ops, cdcs):
                out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
            return out.reshape(-1)

    if method == "fixed":
        return _rk4_fixed(rhs, y0, t_grid, fixed_dt).reshape(-1, dim, dim)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), y0, t_eval=t_grid,
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorDiverged(sol.message)
    return sol.y.T.reshape(-1, dim, dim)


def _integrate_driven(h, c_ops, a_op, amp, drive_det, rho0, t_grid,
                      rtol=1e-8, atol=1e-10, method="adaptive", fixed_dt=2e-11,
                      t_offset=0.0):
    """Evolution with the cavity drive amp*(a e^{+i d t} + a' e^{-i d t})."""
    dim = h.shape[0]
    t_grid = np.asarray(t_grid, float)
    y0 = rho0.reshape(-1)
    use_dense = dim <= DENSE_LIOUVILLIAN_MAX_DIM
    ad_op = a_op.conj().T
    if use_dense:
        liou = _liouvillian_dense(h, c_ops)
        sup_a = _commutator_superop(a_op)
        sup_ad = _commutator_superop(ad_op)

        def rhs(t, y):
            phase = np.exp(1j * drive_det * (t + t_offset))
            return liou @ y + amp * (phase * (sup_a @ y) + np.conj(phase) * (sup_ad @ y))
    else:
        cdcs = [c.conj().T @ c for c in c_ops]

        def rhs(t, y):
            rho = y.reshape(dim, dim)
            phase = np.exp(1j * drive_det * (t + t_offset))
            hd = h + amp * (phase * a_op + np.conj(phase) * ad_op)
            out = -1j * (hd @ rho - rho @ hd)
            for c, cdc in zip(c_ops, cdcs):
                out += c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)
            return out.reshape(-1)

    if method == "fixed":
        return _rk4_fixed(rhs, y0, t_grid, fixed_dt).reshape(-1, dim, dim)
    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), y0, t_eval=t_grid,
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegratorDiverged(sol.message)
    return sol.y.T.reshape(-1, dim, dim)


def _rk4_fixed(rhs, y0, t_grid, dt):
    """Classic fixed-step fourth-order integrator for reproducibility runs."""
    out = np.empty((t_grid.size, y0.size), complex)
    y = y0.astype(complex).copy()
    out[0] = y
    t = t_grid[0]
    for i in range(1, t_grid.size):
        span = t_grid[i] - t
        steps = max(1, int(np.ceil(span / dt)))
        h = span / steps
        for _ in range(steps):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out[i] = y
        t = t_grid[i]
    return out


def _populations(p: SystemParams, rhos):
    diag = np.real(np.diagonal(rhos, axis1=-2, axis2=-1))
    diag = diag.reshape(rhos.shape[0], p.q_levels, p.n_max)
    p_e = diag[:, 1, :].sum(axis=1)
    n_mean = (diag.sum(axis=1) * np.arange(p.n_max)).sum(axis=1)
    return np.clip(p_e, -1e-9, 1.0 + 1e-9), np.clip(n_mean, -1e-9, None)


def lindblad_evolve(rho0, p: SystemParams, t_grid, detuning=None,
                    rate_context="idle", drive=None, rtol=1e-8, atol=1e-10,
                    method="adaptive", fixed_dt=2e-11, keep_states=False) -> Trajectory:
    """Integrate the master equation and report populations on t_grid.

    ``drive`` is an optional (amplitude, drive_detuning) pair adding the
    cavity drive term. ``rate_context`` selects idle or swap qubit decay.
    ``method`` is "adaptive" (embedded 4/5 pair) or "fixed" (classic RK4 at
    ``fixed_dt``) for bitwise-reproducible runs.
    """
    rho0 = _validate_rho(rho0, p.dim)
    if detuning is None:
        detuning = p.detuning
    h = build_hamiltonian(p, detuning)
    c_ops = collapse_operators(p, rate_context)
    t_grid = np.asarray(t_grid, float)
    if t_grid.size < 2:
        raise ValueError("time grid needs at least two points")
    if drive is None:
        rhos = _integrate(h, c_ops, rho0, t_grid, rtol=rtol, atol=atol,
                          method=method, fixed_dt=fixed_dt)
    else:
        amp, drive_det = drive
        rhos = _integrate_driven(h, c_ops, phonon_lowering(p), amp, drive_det,
                                 rho0, t_grid, rtol=rtol, atol=atol,
                                 method=method, fixed_dt=fixed_dt)
    p_e, n_mean = _populations(p, rhos)
    return Trajectory(times=t_grid, p_e=p_e, n_mean=n_mean,
                      rhos=rhos if keep_states else None)


# ---------------------------------------------------------------------------
# pulse sequences


@dataclass(frozen=True)
class XGate:
    pass


@dataclass(frozen=True)
class HalfXGate:
    axis_phase: float = 0.0  # rotation axis angle in the equatorial plane


@dataclass(frozen=True)
class SwapInteraction:
    duration: float
    detuning: float = 0.0


@dataclass(frozen=True)
class Idle:
    duration: float
    detuning: float


@dataclass(frozen=True)
class CavityDrive:
    amplitude: float
    duration: float
    drive_detuning: float = 0.0
    detuning: float | None = None  # qubit detuning during the drive


@dataclass(frozen=True)
class Readout:
    pass


TIMED_SEGMENTS = (SwapInteraction, Idle, CavityDrive)


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or not isinstance(segs[-1], Readout):
            raise ValueError("sequence must end with exactly one readout")
        if sum(isinstance(s, Readout) for s in segs) != 1:
            raise ValueError("sequence must contain exactly one readout")
        for s in segs:
            if isinstance(s, TIMED_SEGMENTS) and s.duration < 0:
                raise ValueError("segment durations cannot be negative")

    @property
    def duration(self) -> float:
        return sum(s.duration for s in self.segments if isinstance(s, TIMED_SEGMENTS))


def _embed_qubit_unitary(p: SystemParams, u01):
    u = np.eye(p.q_levels, dtype=complex)
    u[:2, :2] = u01
    return np.kron(u, np.eye(p.n_max))


def x_gate_unitary(p: SystemParams):
    return _embed_qubit_unitary(p, np.array([[0.0, -1j], [-1j, 0.0]]))


def half_x_gate_unitary(p: SystemParams, axis_phase=0.0):
    """Quarter-turn about the equatorial axis at angle axis_phase from X."""
    c = 1.0 / np.sqrt(2.0)
    u01 = np.array([[c, -1j * np.exp(-1j * axis_phase) * c],
                    [-1j * np.exp(1j * axis_phase) * c, c]])
    return _embed_qubit_unitary(p, u01)


def swap_duration(g_c: float) -> float:
    """Full excitation-transfer time pi / (2 |g|) on resonance."""
    if g_c == 0:
        raise ValueError("no swap at zero coupling")
    return 0.5 * np.pi / abs(g_c)


def run_sequence(seq: PulseSequence, p: SystemParams, sample_dt=1e-9,
                 rtol=1e-8, atol=1e-10, method="adaptive", fixed_dt=2e-11,
                 keep_states=False) -> Trajectory:
    """Execute a pulse sequence from the joint ground state.

    X rotations act instantaneously on the transmon 0-1 subspace; timed
    segments evolve under the master equation with their own detuning and
    rate context. The trailing readout stores the final excited-state
    population on the returned trajectory.
    """
    rho = basis_density(p, 0, 0)
    times = [0.0]
    rhos = [rho]
    t_now = 0.0
    for seg in seq.segments:
        if isinstance(seg, XGate):
            u = x_gate_unitary(p)
            rho = u @ rho @ u.conj().T
            rhos[-1] = rho
        elif isinstance(seg, HalfXGate):
            u = half_x_gate_unitary(p, seg.axis_phase)
            rho = u @ rho @ u.conj().T
            rhos[-1] = rho
        elif isinstance(seg, Readout):
            break
        elif isinstance(seg, TIMED_SEGMENTS):
            if seg.duration == 0:
                continue
            n_samples = max(2, int(np.ceil(seg.duration / sample_dt)) + 1)
            local = np.linspace(0.0, seg.duration, n_samples)
            if isinstance(seg, SwapInteraction):
                context, detuning, drive = "swap", seg.detuning, None
            elif isinstance(seg, Idle):
                context, detuning, drive = "idle", seg.detuning, None
            else:
                context = "idle"
                detuning = p.detuning if seg.detuning is None else seg.detuning
                drive = (seg.amplitude, seg.drive_detuning)
            h = build_hamiltonian(p, detuning)
            c_ops = collapse_operators(p, context)
            if drive is None:
                segment_rhos = _integrate(h, c_ops, rho, local, rtol=rtol, atol=atol,
                                          method=method, fixed_dt=fixed_dt)
            else:
                segment_rhos = _integrate_driven(h, c_ops, phonon_lowering(p),
                                                 drive[0], drive[1], rho, local,
                                                 rtol=rtol, atol=atol, method=method,
                                                 fixed_dt=fixed_dt)
            rho = segment_rhos[-1]
            times.extend((t_now + local[1:]).tolist())
            rhos.extend(list(segment_rhos[1:]))
            t_now += seg.duration
        else:
            raise TypeError(f"unknown segment {seg!r}")
    stack = np.array(rhos)
    p_e, n_mean = _populations(p, stack)
    return Trajectory(times=np.array(times), p_e=p_e, n_mean=n_mean,
                      rhos=stack if keep_states else None,
                      readout=float(p_e[-1]))


def t1s_sequence(delay, t_swap, idle_detuning) -> PulseSequence:
    """Excite, swap in, wait, swap out, read: phonon energy-decay probe."""
    return PulseSequence((
        XGate(),
        SwapInteraction(t_swap, 0.0),
        Idle(delay, idle_detuning),
        SwapInteraction(t_swap, 0.0),
        Readout(),
    ))


def t2s_sequence(delay, t_swap, idle_detuning, fringe_phase=0.0) -> PulseSequence:
    """Half rotation, swap in, wait, swap out, half rotation, read:
    phonon coherence probe. The second half rotation's axis phase advances
    with the delay to draw fringes."""
    return PulseSequence((
        HalfXGate(),
        SwapInteraction(t_swap, 0.0),
        Idle(delay, idle_detuning),
        SwapInteraction(t_swap, 0.0),
        HalfXGate(fringe_phase),
        Readout(),
    ))


# ---------------------------------------------------------------------------
# sweeps and derived quantities


@dataclass
class ChevronMap:
    detunings: np.ndarray
    times: np.ndarray
    p_e: np.ndarray  # shape (n_detunings, n_times)


def vacuum_rabi_chevron(p: SystemParams, detuning_grid, t_grid,
                        rate_context="swap", rtol=1e-8, atol=1e-10) -> ChevronMap:
    """Excited-qubit population map over (detuning, time) starting from
    |e, 0>. On resonance the exchange oscillates at twice the coupling."""
    detuning_grid = np.atleast_1d(np.asarray(detuning_grid, float))
    t_grid = np.asarray(t_grid, float)
    if detuning_grid.size == 0 or t_grid.size < 2:
        raise ValueError("grids must be non-empty")
    rho0 = basis_density(p, 1, 0)
    rows = []
    for det in detuning_grid:
        traj = lindblad_evolve(rho0, p, t_grid, detuning=float(det),
                               rate_context=rate_context, rtol=rtol, atol=atol)
        rows.append(traj.p_e)
    return ChevronMap(detunings=detuning_grid, times=t_grid, p_e=np.array(rows))


def dispersive_chi(g_c: float, detuning: float, eta: float) -> float:
    """Dispersive shift per phonon: chi = g^2 eta / (Delta (Delta + eta)).

    Homogeneous in its arguments, so consistent units in give the same
    units out (rad/s or Hz).
    """
    if detuning == 0 or detuning + eta == 0:
        raise ZeroDetuning("dispersive formula undefined at zero detuning")
    return g_c * g_c * eta / (detuning * (detuning + eta))


def _assign_bare_labels(evals, evecs, dim):
    """Greedy eigenstate labeling by maximum overlap with bare states."""
    order = np.argsort(-np.abs(evecs), axis=0)
    labels = np.full(dim, -1)
    taken = np.zeros(dim, bool)
    weight = np.abs(evecs) ** 2
    # assign strongest overlaps first
    pairs = sorted(((weight[i, k], i, k) for i in range(dim) for k in range(dim)),
                   reverse=True)
    for _, bare, eig in pairs:
        if labels[bare] < 0 and not taken[eig]:
            labels[bare] = eig
            taken[eig] = True
    return labels


def dressed_qubit_shifts(p: SystemParams, frame_detuning=None):
    """Qubit transition shift per phonon Fock sector, by diagonalization.

    Returns an array s[n] = [E(e, n) - E(g, n)] - [E(e, 0) - E(g, 0)]
    in rad/s for n = 0 .. n_max-1.
    """
    if frame_detuning is None:
        frame_detuning = p.detuning
    h = build_hamiltonian(p, frame_detuning)
    evals, evecs = np.linalg.eigh(h)
    labels = _assign_bare_labels(evals, evecs, p.dim)
    energy = lambda q, n: evals[labels[q * p.n_max + n]]
    base = energy(1, 0) - energy(0, 0)
    return np.array([energy(1, n) - energy(0, n) - base for n in range(p.n_max)])


def stark_scan(p: SystemParams, drive_amplitudes, drive_detuning=0.0):
    """Steady phonon occupation and qubit shift for each drive amplitude.

    The driven, damped mode settles at n = eps^2 / ((gamma_s/2)^2 + d^2);
    the qubit shift is the dressed-transition change averaged over the
    coherent state's Poisson number distribution. Returns a list of
    (n_mean, shift rad/s) pairs.
    """
    delta = p.detuning
    if delta == 0:
        raise ZeroDetuning("stark calibration needs a detuned qubit")
    if abs(p.g_c / delta) > 0.15:
        warnings.warn("coupling over detuning above 0.15: dispersive theory marginal")
    if p.gamma_s <= 0 and drive_detuning == 0:
        raise ValueError("undamped resonant drive has no steady state")
    shifts = dressed_qubit_shifts(p)
    n_axis = np.arange(p.n_max)
    out = []
    for eps in np.atleast_1d(np.asarray(drive_amplitudes, float)):
        n_ss = eps * eps / ((0.5 * p.gamma_s) ** 2 + drive_detuning ** 2)
        if n_ss == 0.0:
            out.append((0.0, 0.0))
            continue
        log_w = n_axis * np.log(n_ss) - n_ss - np.cumsum(
            np.concatenate([[0.0], np.log(np.arange(1, p.n_max))]))
        weights = np.exp(log_w)
        tail = 1.0 - weights.sum()
        if tail > 1e-6:
            warnings.warn(f"Poisson tail mass {tail:.2e} beyond the Fock truncation")
        weights = weights / weights.sum()
        out.append((float(n_ss), float(weights @ shifts)))
    return out


def purcell_rate(p: SystemParams) -> float:
    """Extra phonon decay through the detuned qubit, (g/Delta)^2 gamma_q."""
    delta = p.detuning
    if delta == 0:
        raise ZeroDetuning("Purcell rate diverges on resonance")
    return (p.g_c / delta) ** 2 * p.gamma_q_idle


def quality_factor(omega0p: float, t1s: float) -> float:
    """Quality factor omega * T1 of the acoustic mode."""
    return omega0p * t1s
