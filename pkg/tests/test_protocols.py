import numpy as np
import pytest

from spinmech.errors import InvalidInputError
from spinmech.libration import SpinTorqueModel, TrapParams, moment_of_inertia
from spinmech.protocols import _child_seed, fit_exponential_decay, t1_protocol, t1_protocol_trace
from spinmech.pulse_engine import RelaxationParams
from spinmech.readout import DetectionParams

TRAP = TrapParams(moment_of_inertia(5e-6, shape="cube_average"), 3141.6, 6280.0)
TORQUE = SpinTorqueModel(1e8, 0.02715, np.pi / 4, t1=0.6e-3)
RELAX = RelaxationParams(t1=0.6e-3, t2=1.22e-6, t2_star=1e-7)
DET = DetectionParams(base_rate=1e11, slope=-6.8e11, attenuation=1e4, bin_width=1e-4)
DELAYS = np.linspace(0, 1.5e-3, 7)


def test_fit_exponential_exact():
    x = np.linspace(0, 2e-3, 9)
    a, t = fit_exponential_decay(x, 3.5 * np.exp(-x / 0.6e-3))
    assert a == pytest.approx(3.5, rel=1e-8)
    assert t == pytest.approx(0.6e-3, rel=1e-8)
    with pytest.raises(InvalidInputError):
        fit_exponential_decay([0, 1], [1, 0.5])


def test_noise_free_protocol_recovers_t1():
    res = t1_protocol(DELAYS, TRAP, TORQUE, RELAX, DET, seed=0, n_shots=0)
    # the signal is a dip, so F < 0 and |F| decays with the delay
    assert np.all(res.integrals < 0)
    assert np.all(np.diff(np.abs(res.integrals)) < 0)
    assert res.fitted_t1 == pytest.approx(0.6e-3, rel=0.15)


def test_trace_seeded():
    a = t1_protocol_trace(0.3e-3, TRAP, TORQUE, RELAX, DET, seed=4)
    b = t1_protocol_trace(0.3e-3, TRAP, TORQUE, RELAX, DET, seed=4)
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.bin_edges[0] == pytest.approx(-1e-3)
    assert a.bin_edges[-1] == pytest.approx(10e-3)
    expect = t1_protocol_trace(0.3e-3, TRAP, TORQUE, RELAX, DET, seed=4, n_shots=0)
    # pre-pump bins sit at the base rate
    pre = expect.bin_edges[1:] <= 0
    np.testing.assert_allclose(expect.counts[pre], 1e11 / 1e4 * 1e-4, rtol=1e-12)


def test_child_seeds():
    seeds = {_child_seed(0, k) for k in range(100)}
    assert len(seeds) == 100
    assert _child_seed(3, 2) == _child_seed(3, 2)
    assert all(0 <= s < 2**63 for s in seeds)


def test_validation():
    with pytest.raises(InvalidInputError):
        t1_protocol([0, 1e-3, 6e-3], TRAP, TORQUE, RELAX, DET, seed=0)
    with pytest.raises(InvalidInputError):
        t1_protocol_trace(20e-3, TRAP, TORQUE, RELAX, DET, seed=0)
    with pytest.raises(InvalidInputError):
        t1_protocol_trace(0.0, TRAP, TORQUE, RELAX, DET, seed=0, n_shots=-1)
