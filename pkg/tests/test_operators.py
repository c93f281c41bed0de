import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkbright.operators import (
    DeviceConfig,
    DriveSpec,
    InvalidDimensionError,
    TransmonParams,
    eigen_spectrum,
    embed,
    is_hermitian,
    jump_table,
    ladder,
    system_hamiltonian,
    transmon_hamiltonian,
)

from oracles import duffing_levels, resonant_pair_levels


def pair(omega=7.8, beta1=-0.23, beta2=-0.23, g=0.01, d=4, **kw):
    return DeviceConfig(TransmonParams(omega, beta1, d), TransmonParams(omega, beta2, d), g, 1.0, **kw)


def test_ladder_two_level():
    assert np.array_equal(ladder(2), np.array([[0, 1], [0, 0]], dtype=complex))


def test_ladder_three_level_entries():
    a = ladder(3)
    assert a[0, 1] == 1.0
    assert a[1, 2] == pytest.approx(np.sqrt(2))
    assert np.count_nonzero(a) == 2


def test_truncated_commutator():
    a = ladder(4)
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(np.diag(comm), [1, 1, 1, -3])
    assert np.allclose(comm - np.diag(np.diag(comm)), 0)


@pytest.mark.parametrize("d", [0, 1, 2.5])
def test_ladder_rejects_bad_dimension(d):
    with pytest.raises(InvalidDimensionError):
        ladder(d)


@pytest.mark.parametrize(
    "kw",
    [dict(omega=7.8, beta=-0.2, levels=1), dict(omega=-1.0, beta=-0.2), dict(omega=7.8, beta=0.1)],
)
def test_transmon_params_validation(kw):
    with pytest.raises(ValueError):
        TransmonParams(**kw)


def test_device_validation():
    q = TransmonParams(7.8, -0.2)
    with pytest.raises(ValueError, match="k_ratio > 0"):
        DeviceConfig(q, q, 0.01, 1.0, 0.1, -1.0)
    with pytest.raises(ValueError, match="gamma_glob"):
        DeviceConfig(q, q, 0.01, 0.0)
    with pytest.raises(ValueError, match="gamma_loc1"):
        DeviceConfig(q, q, 0.01, 1.0, -0.1)


def test_transmon_diagonal_matches_duffing_levels():
    p = TransmonParams(7.8, -0.230, 4)
    h = transmon_hamiltonian(p)
    assert np.allclose(np.diag(h).real, duffing_levels(7.8, -0.230, 4), atol=1e-15)
    # f_ef - f_ge equals beta
    e = p.level_energies()
    assert (e[2] - e[1]) - (e[1] - e[0]) == pytest.approx(-0.230, abs=1e-12)


def test_harmonic_limit_has_equal_spacing():
    p = TransmonParams(5.0, -1e-300, 4)
    assert np.allclose(p.jump_frequencies(), 5.0)


def test_jump_frequencies_frozen():
    # hand evaluation of e_{j+1} - e_j = omega + beta j
    assert np.allclose(TransmonParams(7.8, -0.230).jump_frequencies(), [7.8, 7.57, 7.34], atol=1e-12)
    assert np.allclose(TransmonParams(7.8, -0.225).jump_frequencies(), [7.8, 7.575, 7.35], atol=1e-12)


def test_jump_frequency_mismatch_between_qubits():
    j = jump_table(pair(beta1=-0.225, beta2=-0.232))
    f = j.frequencies.reshape(2, 3)
    assert np.allclose(f[0] - f[1], [0.0, 0.007, 0.014], atol=1e-12)


def test_jump_table_two_level():
    dev = DeviceConfig(TransmonParams(7.8, -0.2, 2), TransmonParams(7.7, -0.2, 2), 0.01, 1.0)
    jt = jump_table(dev)
    assert len(jt) == 2
    assert np.allclose(jt.frequencies, [7.8, 7.7])


def test_jump_operators_sum_to_ladder():
    dev = pair(d=4)
    jt = jump_table(dev)
    for q in range(2):
        total = sum(r.op for r in jt if r.qubit == q)
        assert np.array_equal(total, embed(ladder(4), q, dev.dims))


def test_undriven_hamiltonian_decoupled_spectrum():
    dev = DeviceConfig(TransmonParams(7.8, -0.2, 3), TransmonParams(7.1, -0.25, 4), 0.0, 1.0)
    w = np.linalg.eigvalsh(system_hamiltonian(dev))
    e1 = duffing_levels(7.8, -0.2, 3)
    e2 = duffing_levels(7.1, -0.25, 4)
    expected = sorted(a + b for a in e1 for b in e2)
    assert np.allclose(w, expected, atol=1e-12)


def test_rotating_frame_single_excitation_block():
    dev = pair(g=0.02)
    drive = DriveSpec(7.8, (0j, 0j))
    h = system_hamiltonian(dev, drive)
    one = [1, 4]  # |01>, |10>
    block = h[np.ix_(one, one)]
    assert np.allclose(np.linalg.eigvalsh(block), [-0.02, 0.02], atol=1e-12)


def test_resonant_pair_analytic_levels():
    dev = pair(g=0.01)
    ls = eigen_spectrum(dev)
    ref = resonant_pair_levels(7.8, -0.23, 0.01)
    s = ls.named_states()
    assert ls.energies[s["B"]] == pytest.approx(ref["B"], abs=1e-10)
    assert ls.energies[s["D"]] == pytest.approx(ref["D"], abs=1e-10)
    assert ls.energies[s["D'"]] == pytest.approx(ref["Dp"], abs=1e-10)
    assert ls.energies[s["D'"]] == pytest.approx(15.37, abs=1e-10)
    # D' eigenvector is (|20> - |02>)/sqrt2 up to a global phase
    v = ls.vectors[:, s["D'"]]
    target = np.zeros(16, dtype=complex)
    target[2 * 4 + 0], target[0 * 4 + 2] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert abs(abs(np.vdot(target, v)) - 1.0) < 1e-10


def test_dark_transition_prohibited_only_at_symmetry():
    ls = eigen_spectrum(pair())
    s = ls.named_states()
    assert ls.transition(s["00"], s["D"]).dipole < 1e-12
    assert not ls.transition(s["00"], s["D"]).allowed
    # detuned pair: the single-excitation states mix asymmetrically
    dev = DeviceConfig(TransmonParams(7.8, -0.225), TransmonParams(7.81, -0.232), 0.01, 1.0)
    ls2 = eigen_spectrum(dev)
    s2 = ls2.named_states()
    assert ls2.transition(s2["00"], s2["D"]).dipole > 1e-3


def test_anharmonicity_mismatch_opens_dark_line_higher_up():
    # equal frequencies keep |00>-|D> dark, but beta1 != beta2 mixes the two-excitation manifold
    ls = eigen_spectrum(pair(beta1=-0.225, beta2=-0.232, g=0.05))
    s = ls.named_states()
    assert ls.transition(s["00"], s["D"]).dipole < 1e-12
    assert ls.allowed_count() > 10


def test_dd_prime_minus_bright_equals_beta():
    ls = eigen_spectrum(pair(g=0.01))
    assert ls.named_frequency("DD'") - ls.named_frequency("00B") == pytest.approx(-0.23, abs=1e-10)


def test_twenty_lines_ten_allowed():
    ls = eigen_spectrum(pair(g=0.01), max_excitation=3)
    assert len(ls.transitions) == 20
    assert ls.allowed_count() == 10


def test_eigenvectors_orthonormal_and_sorted():
    ls = eigen_spectrum(pair(beta1=-0.225, beta2=-0.232, g=0.05))
    assert np.all(np.diff(ls.energies) >= 0)
    assert np.allclose(ls.vectors.conj().T @ ls.vectors, np.eye(16), atol=1e-10)


def test_single_qubit_names_and_errors():
    dev = DeviceConfig(TransmonParams(7.8, -0.23), None, 0.0, 1.0)
    ls = eigen_spectrum(dev, max_excitation=2)
    assert ls.named_frequency("ge") == pytest.approx(7.8)
    assert ls.named_frequency("ef") == pytest.approx(7.57)
    with pytest.raises(KeyError):
        ls.named_frequency("DD'")
    with pytest.raises(KeyError):
        ls.named_frequency("xy")


def test_max_excitation_bound():
    with pytest.raises(ValueError):
        eigen_spectrum(pair(d=2), max_excitation=3)


def test_single_keeps_local_rate():
    dev = pair(gamma_loc1=0.05, k_ratio=1.78)
    assert dev.single(1).gamma_loc1 == 0.05
    assert dev.single(2).gamma_loc1 == pytest.approx(0.05 * 1.78)
    assert dev.single(2).q1.beta == dev.q2.beta
    with pytest.raises(ValueError):
        dev.single(1).single(2)


def test_side_pin_drive_ratio():
    dev = pair(gamma_loc1=0.05, k_ratio=1.78)
    d = DriveSpec.side_pin(dev, 7.8, 1.0)
    assert d.amplitudes[1] / d.amplitudes[0] == pytest.approx(np.sqrt(1.78))


def test_drive_validation():
    with pytest.raises(ValueError):
        DriveSpec(0.0, (0j,))
    with pytest.raises(ValueError):
        DriveSpec(7.8, (complex("nan"),))
    with pytest.raises(ValueError):
        system_hamiltonian(pair(), DriveSpec(7.8, (1j,)))


@settings(max_examples=40, deadline=None)
@given(
    w1=st.floats(1.0, 10.0),
    w2=st.floats(1.0, 10.0),
    b1=st.floats(-0.4, -0.05),
    b2=st.floats(-0.4, -0.05),
    g=st.floats(0.0, 0.1),
    wd=st.floats(1.0, 10.0),
    e1=st.complex_numbers(max_magnitude=10.0),
    e2=st.complex_numbers(max_magnitude=10.0),
    d=st.integers(2, 5),
)
def test_hamiltonian_always_hermitian(w1, w2, b1, b2, g, wd, e1, e2, d):
    dev = DeviceConfig(TransmonParams(w1, b1, d), TransmonParams(w2, b2, d), g, 1.0)
    for drive in (None, DriveSpec(wd, (e1, e2))):
        h = system_hamiltonian(dev, drive)
        assert is_hermitian(h)
        assert np.linalg.norm(h - h.conj().T) <= 1e-12 * np.linalg.norm(h)


@settings(max_examples=30, deadline=None)
@given(d1=st.integers(2, 5), d2=st.integers(2, 5), which=st.integers(0, 1))
def test_embed_acts_on_one_factor(d1, d2, which):
    dims = (d1, d2)
    a = ladder(dims[which])
    big = embed(a, which, dims)
    rng = np.random.default_rng(d1 * 10 + d2)
    x = rng.standard_normal(d1) + 0j
    y = rng.standard_normal(d2) + 0j
    psi = np.kron(x, y)
    expected = np.kron(a @ x, y) if which == 0 else np.kron(x, a @ y)
    assert np.allclose(big @ psi, expected)
