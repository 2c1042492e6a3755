import numpy as np
import pytest
from scipy import sparse

from mcr import (
    Dataset,
    DimensionMismatch,
    FinalFit,
    FullParams,
    KMismatch,
    MixtureParams,
    PosteriorMatrix,
    ResponseProbs,
    ZeroVariance,
    diff_real_oracle,
    err_norm,
    max_err_posterior,
    max_err_response,
    out_of_sample_r2,
    posterior_features_only,
    predict,
    predict_dataset,
)


def make_fit(phi, priors, k, q, noise_var=1.0, n=10):
    m = len(phi)
    return FinalFit(
        phi=np.asarray(phi, float),
        noise_var=noise_var,
        priors=np.asarray(priors, float),
        se=np.ones(m),
        p_values=np.full(m, 0.5),
        xtx_inverse=np.eye(m),
        k=k,
        q=q,
        n=n,
    )


# Hand-checked prediction instance: K=2, q=2, p=3.
FIT_E = make_fit([1.0, -2.0, 0.5, 1.5], [0.35, 0.65], k=2, q=2)
MODEL_E = FullParams(
    MixtureParams([0.35, 0.65], [1.0, -2.0], [0.5, 1.5], 1.0),
    ResponseProbs([[0.8, 0.2, 0.6], [0.3, 0.9, 0.5]]),
)


def test_err_norm_zero_for_identical_blocks():
    assert err_norm([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_err_norm_is_euclidean():
    assert err_norm([3.0, 0.0], [0.0, -4.0]) == pytest.approx(5.0, rel=1e-15)
    assert err_norm(np.arange(6).reshape(2, 3), np.zeros((2, 3))) == pytest.approx(
        np.sqrt(55.0), rel=1e-15
    )


def test_err_norm_rejects_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        err_norm([1.0, 2.0], [1.0])


def test_max_err_response_is_worst_column():
    truth = ResponseProbs(np.full((2, 3), 0.5))
    probs = np.full((2, 3), 0.5)
    probs[0, 1] += 0.3
    probs[1, 1] += 0.4
    est = ResponseProbs(probs)
    assert max_err_response(est, truth) == pytest.approx(0.5, rel=1e-15)


def test_max_err_response_edge_cases():
    empty = ResponseProbs(np.zeros((2, 0)))
    assert max_err_response(empty, empty) == 0.0
    with pytest.raises(KMismatch):
        max_err_response(ResponseProbs(np.full((3, 2), 0.5)), ResponseProbs(np.full((2, 2), 0.5)))
    with pytest.raises(DimensionMismatch):
        max_err_response(ResponseProbs(np.full((2, 3), 0.5)), ResponseProbs(np.full((2, 2), 0.5)))


def test_max_err_posterior():
    exact = PosteriorMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert max_err_posterior(exact, [0, 1]) == 0.0
    soft = PosteriorMatrix(np.array([[0.6, 0.4]]))
    assert max_err_posterior(soft, [0]) == pytest.approx(0.4, rel=1e-15)


def test_diff_real_oracle():
    a = make_fit([1.0, 2.0, 0.5], [0.4, 0.6], k=2, q=1, noise_var=1.0)
    assert diff_real_oracle(a, a) == 0.0
    b = make_fit([1.0, 2.0, 0.5], [0.5, 0.5], k=2, q=1, noise_var=1.2)
    # priors differ by (0.1, -0.1), variance by 0.2
    expected = np.sqrt(0.01 + 0.01 + 0.04)
    assert diff_real_oracle(b, a) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DimensionMismatch):
        diff_real_oracle(a, make_fit([1.0, 0.5], [1.0], k=1, q=1))


def test_out_of_sample_r2():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert out_of_sample_r2(y, y) == pytest.approx(100.0)
    assert out_of_sample_r2(y, np.full(4, y.mean())) == pytest.approx(0.0)
    assert out_of_sample_r2(y, np.array([4.0, 3.0, 2.0, 1.0])) < 0.0
    with pytest.raises(ZeroVariance):
        out_of_sample_r2(np.ones(4), np.zeros(4))
    with pytest.raises(DimensionMismatch):
        out_of_sample_r2(y, y[:2])


def test_out_of_sample_r2_is_affine_invariant():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(50)
    pred = y + 0.3 * rng.standard_normal(50)
    base = out_of_sample_r2(y, pred)
    assert out_of_sample_r2(3.0 * y - 2.0, 3.0 * pred - 2.0) == pytest.approx(
        base, rel=1e-10
    )


def test_feature_membership_three_column_oracle():
    w = posterior_features_only(np.array([1, 0, 1]), MODEL_E)
    np.testing.assert_allclose(
        w, [0.9323621227887616, 0.06763787721123826], rtol=0, atol=1e-12
    )


def test_predict_three_column_oracle():
    got = predict([2.0, -1.0], np.array([1, 0, 1]), FIT_E, MODEL_E)
    assert got == pytest.approx(0.2970863683662851, abs=1e-12)


def test_predict_validates_shapes():
    with pytest.raises(DimensionMismatch):
        predict([2.0], np.array([1, 0, 1]), FIT_E, MODEL_E)
    one_class = FullParams(
        MixtureParams([1.0], [0.0], [0.5, 1.5], 1.0),
        ResponseProbs(np.full((1, 3), 0.5)),
    )
    with pytest.raises(KMismatch):
        predict([2.0, -1.0], np.array([1, 0, 1]), FIT_E, one_class)


def test_predict_dataset_matches_per_row():
    rng = np.random.default_rng(1)
    n = 25
    zmat = (rng.random((n, 3)) < 0.5).astype(np.int8)
    data = Dataset(
        y=rng.standard_normal(n),
        x=rng.standard_normal((n, 2)),
        z=sparse.csc_array(zmat),
    )
    batch = predict_dataset(data, FIT_E, MODEL_E)
    singles = [predict(data.x[i], zmat[i], FIT_E, MODEL_E) for i in range(n)]
    np.testing.assert_allclose(batch, singles, rtol=1e-12)
