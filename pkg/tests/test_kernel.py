import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hiermor import ParameterBox, ParameterPoint, QoiVector, qoi_norm
from hiermor.kernel import (
    KernelConfig,
    TrainingSet,
    fit,
    kernel,
    load_model,
    power_function,
    predict,
    save_model,
    _normalize,
)

import synthetic

BOX = ParameterBox()
CONFIG = KernelConfig(box=BOX)
N_TIME = 12
DT = 1.0 / N_TIME


def make_qoi(values):
    return QoiVector(np.asarray(values, dtype=float), DT)


def training_set(points_and_values):
    train = TrainingSet()
    for mu, values in points_and_values:
        train.add(mu, make_qoi(values), "RB")
    return train


def synthetic_targets(mus, seed):
    rng = np.random.default_rng(seed)
    return [(mu, rng.standard_normal(N_TIME)) for mu in mus]


def grid_points(n, box=BOX):
    das = np.linspace(box.da_min, box.da_max, n)
    pes = np.geomspace(box.pe_min, box.pe_max, n)
    return [ParameterPoint(da, pe) for da, pe in zip(das, pes)]


# -- kernel function ---------------------------------------------------------


def test_kernel_is_one_on_diagonal():
    for mu in grid_points(5):
        assert kernel(mu, mu, CONFIG) == 1.0


@given(
    st.floats(0.1, 10.0),
    st.floats(1.0, 100.0),
    st.floats(0.1, 10.0),
    st.floats(1.0, 100.0),
)
def test_kernel_symmetry_exact(da1, pe1, da2, pe2):
    a, b = ParameterPoint(da1, pe1), ParameterPoint(da2, pe2)
    assert kernel(a, b, CONFIG) == kernel(b, a, CONFIG)


def test_kernel_value_at_two_gamma_distance():
    # points two kernel widths apart in normalized coordinates: k = exp(-2)
    gamma = CONFIG.shape
    da = BOX.da_min + 2 * gamma * (BOX.da_max - BOX.da_min)
    a = ParameterPoint(BOX.da_min, BOX.pe_min)
    b = ParameterPoint(da, BOX.pe_min)
    assert kernel(a, b, CONFIG) == pytest.approx(0.1353352832366127, rel=1e-12)


def test_normalization_log_scale_for_pe():
    z = _normalize(BOX, np.array([[0.1, 10.0]]))
    assert z[0, 0] == pytest.approx(0.0)
    assert z[0, 1] == pytest.approx(0.5)  # 10 is the log midpoint of [1, 100]


# -- training set -------------------------------------------------------------


def test_training_set_dedup_prefers_fom():
    train = TrainingSet()
    mu = ParameterPoint(1.0, 10.0)
    train.add(mu, make_qoi(np.ones(N_TIME)), "RB")
    train.add(mu, make_qoi(2 * np.ones(N_TIME)), "FOM")
    assert len(train) == 1
    assert train.entries[0].source == "FOM"
    assert train.entries[0].qoi.values[0] == 2.0
    # an RB pair never downgrades a FOM pair
    train.add(mu, make_qoi(3 * np.ones(N_TIME)), "RB")
    assert train.entries[0].source == "FOM"
    assert train.entries[0].qoi.values[0] == 2.0


def test_training_set_keeps_insertion_order():
    train = TrainingSet()
    mus = grid_points(4)
    for i, mu in enumerate(mus):
        train.add(mu, make_qoi(np.full(N_TIME, float(i))), "RB")
    train.add(mus[1], make_qoi(np.full(N_TIME, 9.0)), "RB")
    assert [e.mu for e in train] == mus
    assert train.entries[1].qoi.values[0] == 9.0


def test_training_set_rejects_unknown_source():
    with pytest.raises(ValueError):
        TrainingSet().add(ParameterPoint(1, 10), make_qoi(np.ones(N_TIME)), "EXACT")


@given(
    st.lists(
        st.tuples(st.integers(0, 4), st.sampled_from(["FOM", "RB"])),
        min_size=1,
        max_size=25,
    )
)
def test_training_set_dedup_properties(inserts):
    pool = grid_points(5)
    train = TrainingSet()
    for tag, (idx, source) in enumerate(inserts):
        train.add(pool[idx], make_qoi(np.full(N_TIME, float(tag))), source)
    # unique parameter points, in first-insertion order
    mus = [e.mu for e in train]
    assert len(set(mus)) == len(mus)
    assert len(train) == len({idx for idx, _ in inserts})
    seen = []
    for idx, _ in inserts:
        if pool[idx] not in seen:
            seen.append(pool[idx])
    assert mus == seen
    # an entry is RB only if no FOM insert happened at that point
    for entry in train:
        idx = pool.index(entry.mu)
        sources = [s for i, s in inserts if i == idx]
        if "FOM" in sources:
            assert entry.source == "FOM"
        else:
            assert entry.source == "RB"


# -- fit / predict ---------------------------------------------------------------


def test_empty_training_set_raises():
    with pytest.raises(ValueError, match="empty"):
        fit(TrainingSet(), CONFIG)


def test_single_pair_interpolates():
    mu = ParameterPoint(2.0, 20.0)
    values = np.linspace(0.0, 1.0, N_TIME)
    model = fit(training_set([(mu, values)]), CONFIG)
    assert model.n_centers == 1
    assert np.allclose(predict(model, mu).values, values, rtol=1e-12)


def test_recovers_known_kernel_expansion():
    # targets generated from an expansion on 3 known centers; fitting on
    # exactly these centers must reproduce the generator everywhere
    rng = np.random.default_rng(99)
    centers = [ParameterPoint(0.5, 2.0), ParameterPoint(5.0, 10.0), ParameterPoint(9.0, 80.0)]
    coeffs = rng.standard_normal((3, N_TIME))

    def generator(mu):
        weights = np.array([kernel(mu, c, CONFIG) for c in centers])
        return weights @ coeffs

    config = dataclasses.replace(CONFIG, greedy_tol=1e-10)
    model = fit(training_set([(c, generator(c)) for c in centers]), config)
    assert model.n_centers == 3
    for mu in grid_points(20):
        assert np.allclose(predict(model, mu).values, generator(mu), atol=1e-8)


def test_fgreedy_first_pick_matches_brute_force():
    data = synthetic_targets(grid_points(5), seed=3)
    model = fit(training_set(data), dataclasses.replace(CONFIG, max_centers=1))
    # brute force: residual of the zero model is the target itself
    norms = [qoi_norm(make_qoi(values)) for _, values in data]
    expected = data[int(np.argmax(norms))][0]
    assert model.centers[0] == expected


def test_interpolation_at_centers():
    data = synthetic_targets(grid_points(8), seed=4)
    model = fit(training_set(data), CONFIG)
    lookup = dict((mu, values) for mu, values in data)
    for center in model.centers:
        target = lookup[center]
        rel = np.linalg.norm(predict(model, center).values - target) / np.linalg.norm(target)
        assert rel < 1e-6


def test_power_function_properties():
    data = synthetic_targets(grid_points(8), seed=5)
    model = fit(training_set(data), CONFIG)
    for center in model.centers:
        assert power_function(model, center) < 1e-8
    empty = dataclasses.replace(model, centers=[], newton_cholesky=np.zeros((0, 0)),
                                coeff_block=np.zeros((0, N_TIME)))
    assert empty.n_centers == 0
    assert power_function(empty, ParameterPoint(1.0, 10.0)) == 1.0


def test_power_function_nonincreasing_in_centers():
    data = synthetic_targets(grid_points(10), seed=6)
    train = training_set(data)
    probe = [ParameterPoint(da, pe) for da in np.linspace(0.1, 10, 10)
             for pe in np.geomspace(1, 100, 5)]
    config = dataclasses.replace(CONFIG, greedy_tol=0.0)
    previous = None
    for m in range(1, 8):
        model = fit(train, dataclasses.replace(config, max_centers=m))
        current = np.array([power_function(model, mu) for mu in probe])
        if previous is not None:
            assert np.all(current <= previous + 1e-10)
        previous = current


def test_greedy_residual_monotone():
    # monotone max residual holds on the frozen well-behaved set (it is not
    # a theorem for f-greedy; adversarial sets can violate it)
    train, data, config = synthetic.monotone_training_set()
    maxima = []
    for m in range(1, len(data) + 1):
        model = fit(train, dataclasses.replace(config, max_centers=m))
        residuals = [
            qoi_norm(QoiVector(values - predict(model, mu).values, synthetic.DT))
            for mu, values in data
        ]
        maxima.append(max(residuals))
        if model.n_centers < m:
            break
    assert all(b <= a + 1e-10 for a, b in zip(maxima, maxima[1:]))


def test_zero_prediction_with_zero_centers():
    model = fit(training_set([(ParameterPoint(1, 10), np.zeros(N_TIME))]),
                dataclasses.replace(CONFIG, greedy_tol=0.0))
    # all-zero target: nothing to select
    assert model.n_centers == 0
    assert not predict(model, ParameterPoint(3, 30)).values.any()


def test_prediction_decays_far_from_centers():
    # wide box, centers clustered at one corner, probe at the far corner
    box = ParameterBox(da_min=0.0, da_max=1000.0, pe_min=1.0, pe_max=1e6)
    config = KernelConfig(box=box, shape=0.05)
    mus = [ParameterPoint(da, 1.5) for da in np.linspace(0.0, 5.0, 4)]
    data = synthetic_targets(mus, seed=8)
    model = fit(training_set(data), config)
    far = ParameterPoint(1000.0, 1e6)
    max_norm = max(qoi_norm(make_qoi(v)) for _, v in data)
    assert qoi_norm(predict(model, far)) <= 1e-3 * max_norm


def test_refit_is_bitwise_stable():
    data = synthetic_targets(grid_points(7), seed=9)
    a = fit(training_set(data), CONFIG)
    b = fit(training_set(data), CONFIG)
    assert a.centers == b.centers
    assert np.array_equal(a.newton_cholesky, b.newton_cholesky)
    assert np.array_equal(a.coeff_block, b.coeff_block)


def test_pgreedy_criterion_runs():
    data = synthetic_targets(grid_points(6), seed=10)
    config = dataclasses.replace(CONFIG, criterion="p", max_centers=4)
    model = fit(training_set(data), config)
    assert 1 <= model.n_centers <= 4
    for center in model.centers:
        assert power_function(model, center) < 1e-8


def test_nugget_regularizes():
    data = synthetic_targets(grid_points(6), seed=11)
    config = dataclasses.replace(CONFIG, nugget=1e-3)
    model = fit(training_set(data), config)
    assert model.n_centers >= 1
    mu = model.centers[0]
    pred = predict(model, mu)
    assert np.isfinite(pred.values).all()


def test_norm_of_difference_matches_direct_formula():
    rng = np.random.default_rng(12)
    a, b = rng.standard_normal(N_TIME), rng.standard_normal(N_TIME)
    gap = qoi_norm(QoiVector(a - b, DT))
    assert gap == pytest.approx(math.sqrt(DT * ((a - b) ** 2).sum()), rel=1e-14)


# -- serialization ----------------------------------------------------------------


def test_save_load_roundtrip_bit_exact(tmp_path):
    data = synthetic_targets(grid_points(8), seed=13)
    model = fit(training_set(data), CONFIG)
    path = tmp_path / "model.bin"
    save_model(model, path)
    clone = load_model(path)
    assert clone.centers == model.centers
    assert np.array_equal(clone.newton_cholesky, model.newton_cholesky)
    assert np.array_equal(clone.coeff_block, model.coeff_block)
    assert clone.config == model.config
    assert clone.dt == model.dt
    for mu in grid_points(5):
        assert np.array_equal(predict(clone, mu).values, predict(model, mu).values)


def test_load_rejects_unknown_version(tmp_path):
    data = synthetic_targets(grid_points(3), seed=14)
    model = fit(training_set(data), CONFIG)
    path = tmp_path / "model.bin"
    save_model(model, path)
    with np.load(path) as archive:
        payload = dict(archive)
    payload["format_version"] = np.int64(99)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    with pytest.raises(ValueError, match="version"):
        load_model(path)
