import itertools

import numpy as np
import pytest

from rscqt.design import (FiducialDesign, SequenceSet, build_scic, is_informationally_complete, is_scic,
                          is_tomographically_complete, measured_effect_vectors, prepared_state_vectors,
                          standard_fiducials)
from rscqt.gauge import GaugeTransform, apply_gauge
from rscqt.models import ideal_qubit_set, random_gauge_matrix
from rscqt.qops import born_probability, vectorize

import oracles

# gate indices in the 4-gate reference set: 1=I, 2=X/2, 3=Y/2, 4=X
IDEAL = ideal_qubit_set(("I", "X", "Y", "Xpi"))


def test_sequence_set_rejects_duplicates_and_bad_indices():
    with pytest.raises(ValueError):
        SequenceSet([(), ()])
    with pytest.raises(ValueError):
        SequenceSet([(0,)])
    with pytest.raises(ValueError):
        SequenceSet([])
    s = SequenceSet.deduplicated([(1,), (), (1,)])
    assert list(s) == [(1,), ()]


def test_sequence_set_json_round_trip():
    s = SequenceSet([(), (1, 2), (3,)])
    assert SequenceSet.from_json(s.to_json()) == s
    assert s.to_json() == {"sequences": [[], [1, 2], [3]]}
    with pytest.raises(ValueError):
        s.check_range(2)


def test_fiducial_design_json_round_trip():
    fd = standard_fiducials()
    assert FiducialDesign.from_json(fd.to_json()).to_json() == fd.to_json()


def test_prepared_state_vectors_examples():
    v = prepared_state_vectors(IDEAL, SequenceSet([()]))
    assert np.allclose(v, [IDEAL.state])
    v = prepared_state_vectors(IDEAL, SequenceSet([(), (2,), (3,), (2, 2)]))
    assert v.shape == (4, 4)
    assert np.linalg.matrix_rank(v, tol=1e-8) == 4


def test_measured_effect_vectors_examples():
    v = measured_effect_vectors(IDEAL, SequenceSet([()]))
    assert np.allclose(v, [vectorize(np.diag([1.0, 0])), vectorize(np.diag([0, 1.0]))])
    v = measured_effect_vectors(IDEAL, SequenceSet([(), (2,), (3,)]))
    assert v.shape == (6, 4)
    assert np.linalg.matrix_rank(v, tol=1e-8) == 4


def test_effect_state_pairing_reproduces_born_rule(true_set, fiducials):
    states = prepared_state_vectors(true_set, fiducials.prep)
    effects = measured_effect_vectors(true_set, fiducials.meas)
    n_out = len(true_set.outcomes)
    for a, ps in enumerate(fiducials.prep):
        for b, ms in enumerate(fiducials.meas):
            p = born_probability(true_set, ps + ms)
            for w, label in enumerate(true_set.outcomes):
                assert abs(effects[b * n_out + w] @ states[a] - p[label]) <= 1e-12


@pytest.mark.parametrize("fids, rank, complete", [
    ([(), (2,), (3,), (2, 2)], 4, True),
    ([()], 1, False),
    ([(), (4,)], 2, False),
])
def test_tomographic_completeness(fids, rank, complete):
    rep = is_tomographically_complete(IDEAL, SequenceSet(fids))
    assert rep.complete is complete
    assert rep.rank == rank


@pytest.mark.parametrize("fids, complete", [
    ([(), (2,), (3,)], True),
    ([()], False),
    ([(), (4,)], False),
])
def test_informational_completeness(fids, complete):
    assert is_informationally_complete(IDEAL, SequenceSet(fids)).complete is complete


def test_build_scic_smallest_case_and_order():
    fd = FiducialDesign(SequenceSet([()]), SequenceSet([()]), 1)
    assert list(build_scic(fd)) == [(), (1,)]
    fd = FiducialDesign(SequenceSet([(1,)]), SequenceSet([(3,)]), 3)
    assert (1, 2, 3) in build_scic(fd)


def _random_fiducials(rng, n_gates, count):
    words = [w for k in range(3) for w in itertools.product(range(1, n_gates + 1), repeat=k)]
    pick = rng.choice(len(words), size=min(count, len(words)), replace=False)
    return SequenceSet([words[k] for k in pick])


def test_build_scic_against_enumeration(rng):
    for _ in range(40):
        n_gates = int(rng.integers(1, 5))
        prep = _random_fiducials(rng, n_gates, int(rng.integers(1, 7)))
        meas = _random_fiducials(rng, n_gates, int(rng.integers(1, 7)))
        ids = build_scic(FiducialDesign(prep, meas, n_gates))
        assert set(ids) == oracles.scic_by_enumeration(prep, meas, n_gates)
        assert len(ids) <= len(prep) * len(meas) * (1 + n_gates)


def test_build_scic_4_by_3():
    prep = SequenceSet([(), (2,), (3,), (2, 2)])
    meas = SequenceSet([(), (2,), (3,)])
    ids = build_scic(FiducialDesign(prep, meas, 3))
    assert len(ids) <= 48
    assert set(ids) == oracles.scic_by_enumeration(prep, meas, 3)


def test_is_scic(target, fiducials, scic):
    assert is_scic(scic, fiducials, target).is_scic
    dropped = (2, 1, 3)
    assert dropped in scic
    partial = SequenceSet([q for q in scic if q != dropped])
    rep = is_scic(partial, fiducials, target)
    assert not rep.is_scic and rep.missing == (dropped,)
    # complete inclusion, rank-deficient preparation fiducials
    bad = FiducialDesign(SequenceSet([(), (1,)]), fiducials.meas, 3)
    rep = is_scic(build_scic(bad), bad, target)
    assert not rep.is_scic and not rep.prep.complete


def test_completeness_is_gauge_robust(rng, target, fiducials):
    for _ in range(10):
        a = GaugeTransform(random_gauge_matrix(2, rng, 1e3))
        image = apply_gauge(target, a)
        assert is_tomographically_complete(image, fiducials.prep).complete
        assert is_informationally_complete(image, fiducials.meas).complete
        assert not is_tomographically_complete(image, SequenceSet([(), (1,)])).complete
