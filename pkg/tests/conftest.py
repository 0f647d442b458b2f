import numpy as np
import pytest

from dsslab.core.certificate import CertificateParams, derive_constants
from dsslab.core.system import ControllerParams, HyperbolicSystem, InitialProfile
from tests.helpers import load_preset


# SECTION EXAMPLE (printed data)
@pytest.fixture
def printed_system() -> HyperbolicSystem:
    return HyperbolicSystem.from_speeds([1.0, 2.0], [[0.25, -1.0], [0.0, 1.25]], np.eye(2))


@pytest.fixture
def printed_controller() -> ControllerParams:
    return ControllerParams(K=[[0.0, 0.5], [-0.25, -0.5]], alpha=1.0, eta0=[0.0, 0.0])


@pytest.fixture
def cosine_profile() -> InitialProfile:
    """X₁⁰ = cos(4πz) − 1, X₂⁰ = cos(2πz) − 1."""
    return InitialProfile.cosine([2.0, 1.0])


# DAMPED COMPANION SYSTEM
@pytest.fixture
def damped_system() -> HyperbolicSystem:
    return HyperbolicSystem.from_speeds([1.0, 2.0], np.diag([0.25, 0.5]), np.eye(2))


@pytest.fixture
def damped_controller() -> ControllerParams:
    return ControllerParams(K=np.diag([0.1, -0.2]), alpha=2.0, eta0=[0.0, 0.0])


@pytest.fixture
def damped_certificate() -> CertificateParams:
    return CertificateParams(mu=0.1, nu=0.5, D=[1.0, 1.0], alpha=2.0, zeta=0.25)


@pytest.fixture
def damped_constants(damped_system, damped_controller, damped_certificate):
    return derive_constants(damped_system, damped_controller, damped_certificate,
                            chi_beta="beta2", cross_block="printed")


# CONFIGS
@pytest.fixture
def damped_config_dict() -> dict:
    """Короткий прогон демпфированной системы без возмущения."""
    cfg = load_preset("damped-dss")
    cfg["name"] = "damped-short"
    cfg["disturbance"] = {"kind": "zero"}
    cfg["grid"] = {"M": 64, "dt": "auto", "mode": "exact", "snapshot_stride": 0.25,
                   "monitor_stride": 2}
    cfg["T"] = 2.0
    return cfg
