"""Built-in device configurations.

``paper`` is the resonant pair used in the experiment: both transmons at
7.8 GHz with anharmonicities -225 and -232 MHz and a side-pin asymmetry
gamma_loc2 / gamma_loc1 = 1.78. The coupling g, the waveguide linewidth and
the side-pin rate are not quoted numerically and are chosen so that the
allowed lines of the resonant pair span roughly 7.05 to 7.95 GHz, with the
waveguide bath dominating the side pin.

``lowfreq`` is the same pair moved to 2 GHz with a 1 kHz side-pin rate.
"""

from __future__ import annotations

from .operators import DeviceConfig, TransmonParams

#: Residual bath temperature (K) held by the bath that is not being swept.
T_RES = 0.095

#: Dilution-refrigerator base temperature (K), an optional residual floor.
T_BASE = 0.014

PAPER = dict(omega=7.8, beta1=-0.225, beta2=-0.232, g=0.05, gamma_glob=2.0, gamma_loc1=0.05, k_ratio=1.78)


def paper_device(levels: int = 4, **overrides) -> DeviceConfig:
    p = {**PAPER, **overrides}
    return DeviceConfig(
        TransmonParams(p["omega"], p["beta1"], levels),
        TransmonParams(p["omega"], p["beta2"], levels),
        g=p["g"],
        gamma_glob=p["gamma_glob"],
        gamma_loc1=p["gamma_loc1"],
        k_ratio=p["k_ratio"],
    )


def lowfreq_device(omega: float = 2.0, levels: int = 4, **overrides) -> DeviceConfig:
    """The paper pair retuned to ``omega`` GHz with a 1 kHz side-pin rate."""
    return paper_device(levels, omega=omega, gamma_loc1=1e-3, **overrides)


PRESETS = {"paper": paper_device, "lowfreq": lowfreq_device}


def preset(name: str, **overrides) -> DeviceConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**overrides)
