import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kickedrotor.core import (
    DEFAULT_OMEGAS,
    EnsembleSpec,
    IncompatibleDimensions,
    OutOfRange,
    QuantumState,
    SimParams,
    ValidationError,
    basis_size,
    derive_member_seed,
    ladder_indices,
    load_config,
    rational_relation,
    save_config,
    validate,
)


def test_figure_three_parameters_are_valid():
    vp = validate(SimParams(K=7.2, kbar=2.89, basis_half_width=1024))
    assert vp.K == 7.2
    assert vp.params.kbar == 2.89


@pytest.mark.parametrize("field, changes", [
    ("K", {"K": -1.0}),
    ("kbar", {"kbar": 0.0}),
    ("epsilon", {"epsilon": 1.0}),
    ("beta_qm", {"beta_qm": 1.0}),
    ("basis_half_width", {"basis_half_width": 0}),
    ("n_kicks", {"n_kicks": -3}),
])
def test_out_of_range_names_the_field(field, changes):
    p = SimParams(K=1.0, kbar=1.0).replace(**changes)
    with pytest.raises(OutOfRange) as info:
        validate(p)
    assert info.value.field == field


def test_length_mismatch_is_incompatible():
    with pytest.raises(IncompatibleDimensions):
        validate(SimParams(K=1.0, kbar=1.0, omegas=(math.sqrt(5) * 2 * math.pi,), phis=()))


def test_large_kappa_is_flagged_not_rejected():
    assert validate(SimParams(K=9.0, kbar=2.89, epsilon=0.8)).fgp_applicable is False
    assert validate(SimParams(K=4.0, kbar=2.89)).fgp_applicable is True


def test_member_seeds_distinct_and_deterministic():
    assert derive_member_seed(7, 0) != derive_member_seed(7, 1)
    assert derive_member_seed(7, 5) == derive_member_seed(7, 5)


def test_no_seed_collisions_in_a_million_members():
    seeds = {derive_member_seed(12345, i) for i in range(1_000_000)}
    assert len(seeds) == 1_000_000


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40))
def test_member_seed_is_64_bit(seed, index):
    s = derive_member_seed(seed, index)
    assert 0 <= s < 2**64


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=60)
@given(K=st.floats(0, 50), kbar=st.floats(1e-3, 20), eps=st.floats(0, 0.999),
       beta=st.floats(0, 0.999), n=st.integers(0, 10**5), M=st.integers(1, 4096),
       seed=st.integers(0, 2**63), omegas=st.lists(finite, max_size=3))
def test_config_round_trip_is_bit_exact(tmp_path_factory, K, kbar, eps, beta, n, M, seed, omegas):
    phis = tuple((0.37 * (i + 1)) % (2 * math.pi) for i in range(len(omegas)))
    p = SimParams(K=K, kbar=kbar, epsilon=eps, omegas=tuple(omegas), phis=phis, beta_qm=beta,
                  n_kicks=n, basis_half_width=M, seed=seed)
    spec = EnsembleSpec(17, seed=seed, sample_phases=False)
    path = tmp_path_factory.mktemp("cfg") / "c.json"
    save_config(path, p, spec, note="x")
    q, spec2, extra = load_config(path)
    assert q == p
    assert spec2 == spec
    assert extra == {"note": "x"}


def test_config_rejects_unknown_field(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"params": {"K": 1, "kbar": 1, "hbar": 2}}))
    with pytest.raises(ValidationError):
        load_config(path)


def test_ensemble_member_draws_are_reproducible_and_in_range():
    p = SimParams(K=6.3, kbar=2.89, epsilon=0.55, omegas=DEFAULT_OMEGAS, phis=(0.0, 0.0))
    spec = EnsembleSpec(8, seed=3)
    members = [spec.member(p, i) for i in range(8)]
    assert members == [spec.member(p, i) for i in range(8)]
    assert len({m.beta_qm for m in members}) == 8
    for m in members:
        assert 0 <= m.beta_qm < 1
        assert all(0 <= ph < 2 * math.pi for ph in m.phis)
        validate(m)


def test_basis_is_fft_friendly_and_covers_ladder():
    assert basis_size(1024) == 2058
    assert basis_size(512) == 1029
    idx = ladder_indices(basis_size(8))
    assert idx[0] <= -8 and idx[-1] >= 8
    assert np.all(np.diff(idx) == 1)


def test_quantum_state_norm():
    amps = np.zeros(basis_size(4), complex)
    amps[0] = 1.0
    st_ = QuantumState(amps, 0.25, 0, 4)
    assert st_.norm() == pytest.approx(1.0)
    assert np.array_equal(st_.m, ladder_indices(len(amps)))


def test_rational_relations_are_detected():
    base = SimParams(K=6.0, kbar=2.89, epsilon=0.5, omegas=DEFAULT_OMEGAS, phis=(0.0, 0.0))
    assert validate(base).rational_relation is None
    # omega_2 = pi: the driving has period two
    assert rational_relation(base.replace(omegas=(math.pi,), phis=(0.0,))) == (2, 0)
    # omega_3 / omega_2 = 3 / 2
    w = 2 * math.pi * math.sqrt(5)
    rel = rational_relation(base.replace(omegas=(w, 1.5 * w)))
    assert rel is not None and rel[0] * 1 + rel[1] * 1.5 == 0 and rel[2] == 0
    # kbar = 4 pi: quantum resonance of the free evolution
    assert rational_relation(SimParams(K=3.0, kbar=4 * math.pi)) == (1,)
    # frequencies are irrelevant without modulation
    assert rational_relation(base.replace(epsilon=0.0, omegas=(math.pi,), phis=(0.0,))) is None
