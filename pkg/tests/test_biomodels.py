import mpmath
import numpy as np
import pytest

from crnas.biomodels import (
    Dataset,
    HillParams,
    ModelSpec,
    as_conic_program,
    hill,
    hill_original,
    hill_transformed,
    lbd_moments,
    lbd_nll,
    logistic_objective,
    logistic_predict,
    negative_log_likelihood,
    optimization_bounds,
    params_from_theta,
    phenopop_objective,
    phenopop_predict,
)
from crnas.datagen import generate_dataset, range_table, sample_true_params, simulate_deterministic, default_grids
from crnas.derivcheck import check_model
from crnas.problem import feasible_interior_point, residuals


# --------------------------------------------------------------------------- Hill


def test_hill_examples():
    p = HillParams.from_E(0.8, 0.3, 2.5)
    assert hill(0.0, p) == 1.0
    assert hill(0.3, p) == pytest.approx(0.9)
    assert hill(1e9, p) == pytest.approx(0.8, abs=1e-6)
    assert p.E == pytest.approx(0.3)
    with pytest.raises(ValueError):
        hill(-1.0, p)
    with pytest.raises(ValueError):
        HillParams(1.2, 1.0, 1.0)


def test_hill_transform_equivalence(rng):
    d = rng.uniform(0, 10, 10000)
    b = rng.uniform(0.01, 0.99, 10000)
    E = np.exp(rng.uniform(np.log(0.005), np.log(10), 10000))
    n = rng.uniform(0.5, 5, 10000)
    np.testing.assert_allclose(hill_transformed(d, b, E**n, n), hill_original(d, b, E, n), rtol=1e-12, atol=0)


def test_hill_monotone():
    d = np.linspace(0, 20, 500)
    h = hill(d, HillParams.from_E(0.3, 1.0, 2.0))
    assert np.all(np.diff(h) < 0) and np.all((h >= 0.3) & (h <= 1))


# --------------------------------------------------------------------------- predictions


def _pp(S):
    return {
        "p": [1.0] if S == 1 else [0.4, 0.6],
        "alpha": [0.05, 0.08][:S],
        "b": [0.85, 0.9][:S],
        "E": [0.07, 1.3][:S],
        "n": [2.0, 3.5][:S],
    }


def test_phenopop_predict_examples():
    t = np.array([0.0, 6.0, 12.0])
    d = np.array([0.0, 0.5, 2.5])
    f = phenopop_predict(t, d, _pp(2))
    np.testing.assert_allclose(f[0], 1000.0)
    np.testing.assert_allclose(f[:, 0], 1000 * (0.4 * np.exp(0.05 * t) + 0.6 * np.exp(0.08 * t)))
    one = phenopop_predict(t, d, _pp(1))
    np.testing.assert_allclose(one[:, 0], 1000 * np.exp(0.05 * t))
    # additivity over subpopulations
    parts = []
    for i, w in enumerate([0.4, 0.6]):
        p = {k: [v[i]] for k, v in _pp(2).items()}
        p["p"] = [1.0]
        parts.append(w * phenopop_predict(t, d, p))
    np.testing.assert_allclose(f, parts[0] + parts[1], rtol=1e-13)


def test_logistic_predict_examples():
    params = {"p": [0.3, 0.7], "alpha": [0.5, 2.0], "beta": [1.0, 2.5]}
    assert logistic_predict(1e4, params)[0] == pytest.approx(1000.0)
    half = logistic_predict(np.array([0.0, 3.0]), {"p": [0.3, 0.7], "alpha": [0.0, 0.0], "beta": [0.0, 0.0]})
    np.testing.assert_allclose(half, 500.0)
    t = np.linspace(0, 10, 10)
    f = logistic_predict(t, params)
    assert np.all(np.diff(f) > 0) and np.all((f > 0) & (f < 1000))
    sub = sum(
        w * 1000 / (1 + np.exp(-a * t + b)) for w, a, b in zip(params["p"], params["alpha"], params["beta"])
    )
    np.testing.assert_allclose(f, sub, rtol=1e-13)


# --------------------------------------------------------------------------- objectives


@pytest.mark.parametrize("kind,obj", [("phenopop", phenopop_objective), ("logistic", logistic_objective)])
def test_least_squares_zero_at_truth(kind, obj, rng):
    data = generate_dataset(kind, 2, rng)
    v, g, H = obj(data, data.true_params)
    assert v == pytest.approx(0.0, abs=1e-18)
    assert np.linalg.norm(g) < 1e-8


@pytest.mark.parametrize("kind,obj", [("phenopop", phenopop_objective), ("logistic", logistic_objective)])
def test_least_squares_single_perturbation(kind, obj, rng):
    data = generate_dataset(kind, 2, rng)
    obs = data.observations.copy()
    obs.flat[7] += 0.25
    pert = Dataset(kind, 2, data.times, data.doses, obs, data.X0)
    assert obj(pert, data.true_params)[0] == pytest.approx(0.0625, rel=1e-8)


def test_objective_dimension_mismatch(rng):
    data = generate_dataset("phenopop", 1, rng)
    with pytest.raises(ValueError):
        ModelSpec("phenopop", 1).objective(np.ones(7), data)


def test_lbd_moments_examples():
    mu, var = lbd_moments(0.0, 0.0, 0.6, 0.3)
    assert (mu, var) == (1.0, 0.0)
    mu, var = lbd_moments(5.0, 0.0, 0.4, 0.4)
    assert mu == 1.0 and var == pytest.approx(0.8 * 5.0)


def _mp_var(beta, nu, t):
    mpmath.mp.dps = 50
    beta, nu, t = mpmath.mpf(beta), mpmath.mpf(nu), mpmath.mpf(t)
    lam = beta - nu
    return float((beta + nu) / lam * (mpmath.exp(2 * t * lam) - mpmath.exp(t * lam)))


def test_lbd_series_matches_high_precision():
    for lt in [1e-6, -1e-6, 3e-7, 9e-6]:
        t = 10.0
        nu = 0.5
        beta = nu + lt / t
        _, var = lbd_moments(t, 0.0, beta, nu)
        assert var == pytest.approx(_mp_var(beta, nu, t), rel=1e-9)


def test_lbd_moments_direct_matches_high_precision(rng):
    for _ in range(50):
        beta, nu, t = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.1, 36)
        _, var = lbd_moments(t, 0.0, beta, nu)
        assert var == pytest.approx(_mp_var(beta, nu, t), rel=1e-12)


def test_lbd_switch_continuity():
    t = 1.0
    x = np.linspace(-3e-5, 3e-5, 60001)
    _, var = lbd_moments(t, 0.0, 0.5 + x, 0.5)
    rel = np.abs(np.diff(var)) / var[1:]
    # expected change per grid step is about 1.5 * dx; anything beyond that is a jump
    assert np.max(rel - 1.5 * np.diff(x) / (1.0 + x[1:])) < 1e-8


def test_lbd_variance_nonnegative(rng):
    b = rng.uniform(0, 2, 10000)
    nu = rng.uniform(0, 2, 10000)
    t = rng.uniform(0, 36, 10000)
    d = rng.uniform(0, 10, 10000)
    hp = HillParams.from_E(0.8, 0.5, 2.0)
    mu, var = lbd_moments(t, d, b, nu, hp)
    assert np.all(var >= 0) and np.all(mu > 0)


def test_lbd_nll_normalizer_sign(rng):
    # large c: the log-normalizer term dominates with a positive sign
    data = generate_dataset("lbd", 1, rng)
    p = dict(data.true_params)
    cells = data.times.size * data.doses.size * data.replicates
    for c in [1e6, 1e8]:
        p["c"] = c
        v = negative_log_likelihood(data, p)
        assert v == pytest.approx(cells * np.log(np.sqrt(2 * np.pi) * c), rel=1e-6)


def test_lbd_truth_has_relative_likelihood_near_one(rng):
    data = generate_dataset("lbd", 1, rng)
    v_true = negative_log_likelihood(data, data.true_params)
    p = dict(data.true_params)
    p["E"] = [p["E"][0] * 3.0]
    assert negative_log_likelihood(data, p) > v_true
    assert lbd_nll(data, data.true_params)[0] == pytest.approx(v_true)


@pytest.mark.parametrize("kind", ["phenopop", "lbd", "logistic"])
def test_finite_differences_short(kind):
    rep = check_model(kind, S=2, points=5, seed=3)
    assert rep.ok, rep.line()


@pytest.mark.parametrize("kind", ["phenopop", "lbd", "logistic"])
def test_finite_differences_single_population(kind):
    rep = check_model(kind, S=1, points=5, seed=4)
    assert rep.ok, rep.line()


# --------------------------------------------------------------------------- programs


def test_conic_program_structure(rng):
    spec = ModelSpec("phenopop", 2)
    data = generate_dataset("phenopop", 2, rng)
    table = range_table("phenopop", 2)
    prog = as_conic_program(spec, data, table.opt)
    # 10 variables; p, alpha, b bounded on both sides give 6 slacks
    assert prog.n == 16 and prog.A.shape == (7, 16)
    p_cols = [spec.index("p", 0), spec.index("p", 1)]
    np.testing.assert_array_equal(prog.A[0, p_cols], [1.0, 1.0])
    th = feasible_interior_point(prog)
    res, mn = residuals(prog, th)
    assert mn > 0 and res <= prog.tolerance()
    x = prog.provenance.to_original(th)
    lo, hi = optimization_bounds(spec, table.opt)
    assert np.all((x > lo) & (x < hi))
    truth = spec.pack(data.true_params)
    back = params_from_theta(spec, prog, prog.provenance.to_cone(truth))
    for k, v in data.true_params.items():
        np.testing.assert_allclose(back[k], v, rtol=1e-12)


def test_ecal_bounds_must_be_open():
    spec = ModelSpec("phenopop", 1)
    with pytest.raises(ValueError):
        optimization_bounds(spec, {"alpha": (0, 1), "b": (0, 1), "E": (0.01, 10.0), "n": (0, np.inf)})


def test_deterministic_generator_roundtrip(rng):
    table = range_table("phenopop", 1)
    params = sample_true_params("phenopop", 1, table, rng)
    data = simulate_deterministic("phenopop", params, default_grids())
    assert phenopop_objective(data, params)[0] == 0.0


@pytest.mark.parametrize("kind", ["phenopop", "logistic"])
def test_derivatives_finite_far_out(kind, rng):
    # steep Hill curves and large logistic exponents must not overflow the Hessian
    import warnings

    data = generate_dataset(kind, 2, rng)
    spec = ModelSpec(kind, 2)
    p = dict(data.true_params)
    if kind == "phenopop":
        # d**n / E**n reaches 1e200 at the top dose
        p["n"] = [100.0, 60.0]
        p["E"] = [0.05, 0.5]
    else:
        p["alpha"] = [0.01, 0.02]
        p["beta"] = [900.0, 800.0]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v, g, H = spec.objective(spec.pack(p), data)
    assert np.isfinite(v) and np.all(np.isfinite(g)) and np.all(np.isfinite(H))


def test_hill_extreme_coefficient():
    d = np.array([0.0, 0.01, 0.05, 0.0999, 0.1001, 5.0])
    h = hill_transformed(d, 0.8, 0.1**250.0, 250.0)
    with np.errstate(over="ignore"):
        ref = hill_original(d, 0.8, 0.1, 250.0)
    np.testing.assert_allclose(h, ref, rtol=1e-12)
    assert h[0] == 1.0 and h[-1] == 0.8
