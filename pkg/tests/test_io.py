import numpy as np
import pytest
from scipy import sparse

from mcr import (
    Dataset,
    EmConfig,
    FullParams,
    MixtureParams,
    ModelFile,
    ResponseProbs,
    SchemaMismatch,
    default_design,
    fit_mcr,
    generate,
    read_counts,
    read_dataset,
    read_metrics_csv,
    read_model,
    read_params,
    write_counts,
    write_dataset,
    write_metrics_csv,
    write_model,
    write_params,
)


def test_dataset_roundtrip_bitwise(tmp_path):
    data, _ = generate(default_design(n=40, p=15, seed=3))
    path = tmp_path / "d.json"
    write_dataset(path, data)
    back = read_dataset(path)
    np.testing.assert_array_equal(back.y, data.y)
    np.testing.assert_array_equal(back.x, data.x)
    np.testing.assert_array_equal(
        np.asarray(back.z.todense()), np.asarray(data.z.todense())
    )
    np.testing.assert_array_equal(back.true_labels, data.true_labels)


def test_dataset_roundtrip_without_labels(tmp_path):
    rng = np.random.default_rng(0)
    data = Dataset(
        y=rng.standard_normal(5),
        x=rng.standard_normal((5, 2)),
        z=sparse.csc_array((rng.random((5, 3)) < 0.5).astype(np.int8)),
    )
    path = tmp_path / "d.json"
    write_dataset(path, data)
    back = read_dataset(path)
    assert back.true_labels is None
    np.testing.assert_array_equal(back.y, data.y)


def test_dataset_roundtrip_degenerate_shapes(tmp_path):
    data = Dataset(
        y=np.array([1.5, -0.25]),
        x=np.zeros((2, 0)),
        z=sparse.csc_array((2, 0), dtype=np.int8),
    )
    path = tmp_path / "d.json"
    write_dataset(path, data)
    back = read_dataset(path)
    assert back.q == 0 and back.p == 0
    np.testing.assert_array_equal(back.y, data.y)


def test_params_roundtrip_bitwise(tmp_path):
    rng = np.random.default_rng(1)
    params = FullParams(
        MixtureParams([0.3, 0.7], [-1.234567891234, 2.5], [0.1, -0.2, 0.3], 1.75),
        ResponseProbs(rng.uniform(0.05, 0.95, (2, 6)), eps=0.01),
    )
    path = tmp_path / "p.json"
    write_params(path, params)
    back = read_params(path)
    np.testing.assert_array_equal(back.mixture.priors, params.mixture.priors)
    np.testing.assert_array_equal(back.mixture.intercepts, params.mixture.intercepts)
    np.testing.assert_array_equal(back.mixture.slopes, params.mixture.slopes)
    assert back.mixture.noise_var == params.mixture.noise_var
    np.testing.assert_array_equal(back.response.probs, params.response.probs)
    assert back.response.eps == 0.01


def test_model_roundtrip(tmp_path):
    data, _ = generate(default_design(n=120, p=12, seed=5))
    fit = fit_mcr(data, k=2, config=EmConfig(n_starts=2, max_iters=100))
    model = ModelFile(
        params=fit.params,
        final=fit.final,
        trace=fit.trace,
        bic_values=np.array([10.0, 8.5, 9.25]),
        k_hat=2,
    )
    path = tmp_path / "m.json"
    write_model(path, model)
    back = read_model(path)
    np.testing.assert_array_equal(back.params.response.probs, fit.params.response.probs)
    np.testing.assert_array_equal(back.final.phi, fit.final.phi)
    np.testing.assert_array_equal(back.final.se, fit.final.se)
    np.testing.assert_array_equal(back.final.xtx_inverse, fit.final.xtx_inverse)
    assert back.final.noise_var == fit.final.noise_var
    assert back.trace.loglik_per_iter == fit.trace.loglik_per_iter
    assert back.trace.converged == fit.trace.converged
    assert back.trace.start_index == fit.trace.start_index
    np.testing.assert_array_equal(back.bic_values, model.bic_values)
    assert back.k_hat == 2


def test_model_roundtrip_optional_fields(tmp_path):
    data, _ = generate(default_design(n=80, p=6, seed=6))
    fit = fit_mcr(data, k=1)
    model = ModelFile(params=fit.params, final=fit.final, trace=fit.trace)
    path = tmp_path / "m.json"
    write_model(path, model)
    back = read_model(path)
    assert back.bic_values is None and back.k_hat is None


def test_counts_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    counts = sparse.csc_array(rng.poisson(0.5, size=(10, 8)))
    path = tmp_path / "c.json"
    write_counts(path, counts)
    back = read_counts(path)
    np.testing.assert_array_equal(
        np.asarray(back.todense()), np.asarray(counts.todense())
    )


def test_wrong_format_is_rejected(tmp_path):
    data, _ = generate(default_design(n=10, p=2, seed=7))
    path = tmp_path / "d.json"
    write_dataset(path, data)
    with pytest.raises(SchemaMismatch):
        read_params(path)
    with pytest.raises(SchemaMismatch):
        read_model(path)


def test_metrics_csv_roundtrip_and_sorting(tmp_path):
    rows = [
        (1000, 50, 2, "err_theta", 0.1),
        (500, 50, 1, "err_gamma", 0.2857142857142857),
        (500, 50, 1, "err_theta", 3.0e-15),
        (1000, 50, -1, "khat_recovery_pct", 95.0),
    ]
    path = tmp_path / "m.csv"
    write_metrics_csv(path, rows)
    back = read_metrics_csv(path)
    assert back == sorted(rows, key=lambda r: (r[0], r[1], r[2], r[3]))
    # writing in another order produces identical bytes
    path2 = tmp_path / "m2.csv"
    write_metrics_csv(path2, list(reversed(rows)))
    assert path.read_bytes() == path2.read_bytes()


def test_metrics_csv_header_is_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(SchemaMismatch):
        read_metrics_csv(path)
