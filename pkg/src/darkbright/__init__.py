"""Simulation and inference toolkit for two-transmon waveguide thermometry."""

from .liouvillian import SolverError, Superoperator, build_liouvillian, steady_state
from .operators import DeviceConfig, DriveSpec, TransmonParams, eigen_spectrum, jump_table, system_hamiltonian
from .presets import T_RES, lowfreq_device, paper_device, preset
from .rates import BathSpec, SecularPolicy, device_baths, gamma_updown, rate_matrix
from .response import SteadyStateModel, TransmissionTrace, probe_sweep, transmission_amplitude
from .thermometry import (
    BrightDarkDiagram,
    CalibrationModel,
    FitReport,
    Thermometer,
    bright_dark_diagram,
    fit_calibration,
    fit_local,
    infer_temperatures,
    temperature_curve,
)

__version__ = "0.1.0"
