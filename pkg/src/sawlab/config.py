"""Device configuration: one YAML tree with explicit SI units in key names.

Every key carries its unit as a suffix (``_m``, ``_h``, ``_f``, ``_hz``,
``_s``, ``_rad``, ``_ohm``) so unit mistakes are visible at the call site.
Validation reports the full key path of the first offending entry.
"""

from dataclasses import dataclass

import numpy as np
import yaml

from .circuit import CouplingLedger, GmonParams, TransmonParams, ec_from_capacitance
from .constants import TWO_PI
from .dynamics import SystemParams, pure_dephasing_rate
from .errors import ConfigError
from .saw import BvdParams, SawGeometry


def _num(lo, hi, hint):
    def check(v):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            return "must be a number"
        if not np.isfinite(v):
            return "must be finite"
        if not (lo <= v <= hi):
            return f"{v!r} outside the plausible range [{lo:g}, {hi:g}] ({hint})"
        return None
    return check


def _integer(lo, hi):
    def check(v):
        if not isinstance(v, int) or isinstance(v, bool):
            return "must be an integer"
        if not (lo <= v <= hi):
            return f"{v!r} outside [{lo}, {hi}]"
        return None
    return check


# (required, validator); None default means the key may be absent or null
_SCHEMA = {
    "saw": {
        "electrode_width_m": (True, _num(1e-9, 1e-5, "electrode widths are tens to hundreds of nm")),
        "idt_cells": (True, _integer(1, 10000)),
        "mirror_cells": (True, _integer(0, 100000)),
        "mirror_separation_wavelengths": (True, _num(0.0, 1e4, "dimensionless")),
        "speed_m_per_s": (True, _num(500.0, 2e4, "surface-wave speeds are a few km/s")),
        "reflection_magnitude": (True, _num(0.0, 0.999, "per-electrode reflection is small")),
        "reflection_phase_rad": (False, _num(-3.15, 3.15, "radians")),
        "piezo_coupling": (True, _num(1e-4, 0.5, "dimensionless coupling coefficient")),
        "idt_capacitance_f": (True, _num(1e-16, 1e-10, "transducer capacitance in farads, typically fF")),
        "conductance_scale_s": (False, _num(1e-9, 1e3, "siemens")),
    },
    "bvd": {
        "motional_inductance_h": (True, _num(1e-10, 1e-4, "henries, typically tens to hundreds of nH")),
        "quality_factor": (True, _num(1.0, 1e8, "dimensionless")),
        "static_capacitance_f": (True, _num(1e-16, 1e-10, "farads")),
        "resonance_hz": (True, _num(1e8, 1e11, "hertz")),
    },
    "transmon": {
        "shunt_capacitance_f": (True, _num(1e-16, 1e-12, "farads, typically around 100 fF")),
        "charging_energy_hz": (False, _num(1e6, 1e10, "hertz")),
        "max_josephson_energy_hz": (True, _num(1e8, 1e12, "hertz")),
        "flux_ratio": (False, _num(-10.0, 10.0, "external flux over the flux quantum")),
    },
    "gmon": {
        "qubit_side_inductance_h": (True, _num(1e-13, 1e-6, "henries, typically hundreds of pH")),
        "saw_side_inductance_h": (True, _num(1e-13, 1e-6, "henries, typically hundreds of pH")),
        "junction_inductance_h": (True, _num(1e-13, 1e-6, "henries, typically hundreds of pH")),
        "junction_phase_rad": (False, _num(-np.pi, np.pi, "radians")),
        "loop_beta": (False, _num(0.0, 100.0, "dimensionless screening parameter")),
    },
    "coupling": {
        "transmon_inductance_h": (True, _num(1e-10, 1e-6, "henries, typically around 10 nH")),
        "saw_frequency_hz": (True, _num(1e8, 1e11, "hertz")),
    },
    "system": {
        "idle_detuning_hz": (True, _num(-1e10, 1e10, "hertz, signed")),
        "anharmonicity_hz": (False, _num(-1e10, 0.0, "hertz, non-positive")),
        "qubit_t1_idle_s": (True, _num(1e-9, 1.0, "seconds")),
        "qubit_t1_swap_s": (True, _num(1e-9, 1.0, "seconds")),
        "qubit_t2_idle_s": (False, _num(1e-9, 1.0, "seconds")),
        "phonon_t1_s": (True, _num(1e-9, 1.0, "seconds")),
        "phonon_t2_s": (False, _num(1e-9, 1.0, "seconds")),
        "fock_levels": (False, _integer(2, 200)),
        "transmon_levels": (False, _integer(2, 3)),
    },
}

@dataclass
class DeviceConfig:
    """Validated parameter tree plus the assembled model objects."""

    geometry: SawGeometry
    bvd: BvdParams
    transmon: TransmonParams
    gmon: GmonParams
    ledger: CouplingLedger
    system: SystemParams
    loop_beta: float
    z0: float
    raw: dict

    @classmethod
    def from_dict(cls, tree: dict) -> "DeviceConfig":
        if not isinstance(tree, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        for section in tree:
            if section not in _SCHEMA:
                raise ConfigError(section, "unknown section")
        for section, keys in _SCHEMA.items():
            block = tree.get(section)
            if block is None:
                raise ConfigError(section, "required section missing")
            if not isinstance(block, dict):
                raise ConfigError(section, "section must be a mapping")
            for key in block:
                if key not in keys:
                    raise ConfigError(f"{section}.{key}", "unknown key")
            for key, (required, check) in keys.items():
                value = block.get(key)
                if value is None:
                    if required:
                        raise ConfigError(f"{section}.{key}", "required key missing")
                    continue
                problem = check(value)
                if problem:
                    raise ConfigError(f"{section}.{key}", problem)

        s = tree["saw"]
        phase = s.get("reflection_phase_rad")
        phase = 0.5 * np.pi if phase is None else float(phase)
        r_s1 = s["reflection_magnitude"] * np.exp(1j * phase)
        try:
            geometry = SawGeometry.from_electrode_width(
                d=float(s["electrode_width_m"]), n_t=s["idt_cells"], n_m=s["mirror_cells"],
                l0_wavelengths=float(s["mirror_separation_wavelengths"]),
                v_a=float(s["speed_m_per_s"]), r_s1=r_s1, k2=float(s["piezo_coupling"]),
                c_t=float(s["idt_capacitance_f"]),
                conductance_scale=s.get("conductance_scale_s"))
        except ValueError as exc:
            raise ConfigError("saw", str(exc))

        c = tree["coupling"]
        saw_freq = float(c["saw_frequency_hz"])

        b = tree["bvd"]
        try:
            bvd = BvdParams.from_quality(
                l_s=float(b["motional_inductance_h"]), q=float(b["quality_factor"]),
                c_t=float(b["static_capacitance_f"]), f_0=float(b["resonance_hz"]))
        except ValueError as exc:
            raise ConfigError("bvd", str(exc))
        if abs(bvd.f_0 - saw_freq) / saw_freq > 0.01:
            raise ConfigError(
                "bvd.resonance_hz",
                f"differs from coupling.saw_frequency_hz by more than 1% "
                f"({bvd.f_0:g} vs {saw_freq:g})")

        t = tree["transmon"]
        c_p = float(t["shunt_capacitance_f"])
        e_c = t.get("charging_energy_hz")
        e_c = ec_from_capacitance(c_p) if e_c is None else float(e_c)
        try:
            transmon = TransmonParams(c_p=c_p, e_c=e_c,
                                      e_j0=float(t["max_josephson_energy_hz"]),
                                      phi_ratio=float(t.get("flux_ratio") or 0.0))
        except ValueError as exc:
            raise ConfigError("transmon", str(exc))

        g = tree["gmon"]
        try:
            gmon = GmonParams(l_g=float(g["qubit_side_inductance_h"]),
                              l_f=float(g["saw_side_inductance_h"]),
                              l_c0=float(g["junction_inductance_h"]),
                              delta=float(g.get("junction_phase_rad") or 0.0))
        except ValueError as exc:
            raise ConfigError("gmon", str(exc))
        beta = g.get("loop_beta")
        beta = (gmon.l_g + gmon.l_f) / gmon.l_c0 if beta is None else float(beta)

        try:
            ledger = CouplingLedger(l_j=float(c["transmon_inductance_h"]),
                                    l_s=bvd.l_s, omega0p=TWO_PI * saw_freq, gmon=gmon)
        except ValueError as exc:
            raise ConfigError("coupling", str(exc))

        sys_block = tree["system"]
        idle_detuning = float(sys_block["idle_detuning_hz"])
        if idle_detuning == 0.0:
            raise ConfigError("system.idle_detuning_hz", "idle point cannot sit on resonance")
        eta = sys_block.get("anharmonicity_hz")
        eta = -e_c if eta is None else float(eta)
        t1_idle = float(sys_block["qubit_t1_idle_s"])
        t2_idle = sys_block.get("qubit_t2_idle_s")
        t1_phonon = float(sys_block["phonon_t1_s"])
        t2_phonon = sys_block.get("phonon_t2_s")
        from .circuit import coupling_strength
        try:
            g_c = coupling_strength(ledger)
        except Exception as exc:
            raise ConfigError("gmon.junction_phase_rad", f"coupling undefined here: {exc}")
        try:
            system = SystemParams(
                omega0p=TWO_PI * saw_freq,
                omega_q=TWO_PI * (saw_freq + idle_detuning),
                g_c=g_c,
                eta=TWO_PI * eta,
                gamma_q_idle=1.0 / t1_idle,
                gamma_q_swap=1.0 / float(sys_block["qubit_t1_swap_s"]),
                gamma_phi_q=pure_dephasing_rate(t1_idle, float(t2_idle)) if t2_idle else 0.0,
                gamma_s=1.0 / t1_phonon,
                gamma_phi_s=pure_dephasing_rate(t1_phonon, float(t2_phonon)) if t2_phonon else 0.0,
                n_max=sys_block.get("fock_levels") or 6,
                q_levels=sys_block.get("transmon_levels") or 3,
            )
        except Exception as exc:
            raise ConfigError("system", str(exc))

        return cls(geometry=geometry, bvd=bvd, transmon=transmon, gmon=gmon,
                   ledger=ledger, system=system, loop_beta=beta, z0=50.0, raw=tree)


def load_config(path) -> DeviceConfig:
    try:
        with open(path) as fh:
            tree = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"no such config file: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}")
    return DeviceConfig.from_dict(tree)
