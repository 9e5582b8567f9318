import numpy as np
import pytest

from doeopt import surrogate
from doeopt.core import NormalizationRecord, ColumnCodec
from doeopt.errors import ContractViolation, ExtrapolationError, InvalidMeritError, ValidationError

from conftest import make_dataset


def linear_fixture(rng, n=60, d=3):
    X = rng.random((n, d))
    y = 4.0 * X[:, 0] - 2.0 * X[:, 1] + 0.5
    return make_dataset(X, y, bounds={f"x{j+1}": (0, 1) for j in range(d)})


def smooth_fixture(rng, n=200):
    X = rng.random((n, 3))
    y = np.sin(3 * X[:, 0]) + 0.5 * np.cos(2 * X[:, 1]) + 0.2 * X[:, 2]
    return make_dataset(X, y, bounds={"x1": (0, 1), "x2": (0, 1), "x3": (0, 1)})


class TestTrainFamilies:
    def test_linear_exact_recovery(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="linear-ridge", seed=0)
        scale = float(np.std([r.outputs[0] for r in ds.rows]))
        assert model.metrics[0].rmse_test < 1e-6 * scale

    def test_linear_coefficient_recovery_small_lambda(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(
            ds, ["x1", "x2", "x3"], family="linear-ridge",
            hyperparameters={"ridge_lambda": 1e-12}, seed=0,
        )
        # submodel acts on [0,1] coords and z-scored outputs; undo both maps
        sm = model.submodels[0]
        rec = model.record
        std = rec.output_stds[0]
        native_coef = np.array([sm.coef[j] * std / (c.hi - c.lo) for j, c in enumerate(rec.codecs)])
        assert native_coef == pytest.approx([4.0, -2.0, 0.0], abs=1e-6)

    def test_rbf_interpolates_smooth_function(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="rbf-kernel", seed=0)
        assert model.metrics[0].r2_test > 0.95

    def test_mlp_fits_smooth_function(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="mlp", seed=0)
        assert model.metrics[0].r2_test > 0.9

    def test_determinism_bit_identical(self, rng):
        ds = smooth_fixture(rng, n=60)
        m1 = surrogate.train(ds, ["x1", "x2"], family="mlp", hyperparameters={"epochs": 50}, seed=5)
        m2 = surrogate.train(ds, ["x1", "x2"], family="mlp", hyperparameters={"epochs": 50}, seed=5)
        for a, b in zip(m1.submodels[0].mlp.weights, m2.submodels[0].mlp.weights):
            assert np.array_equal(a, b)

    def test_output_independence(self, rng):
        n = 60
        X = rng.random((n, 2))
        Y = np.column_stack([X[:, 0] + X[:, 1], np.sin(5 * X[:, 0])])
        ds1 = make_dataset(X, Y, bounds={"x1": (0, 1), "x2": (0, 1)})
        Y2 = Y.copy()
        Y2[:, 1] = rng.permutation(Y2[:, 1])  # scramble output 2 only
        ds2 = make_dataset(X, Y2, bounds={"x1": (0, 1), "x2": (0, 1)})
        m1 = surrogate.train(ds1, ["x1", "x2"], family="mlp", hyperparameters={"epochs": 80}, seed=9)
        m2 = surrogate.train(ds2, ["x1", "x2"], family="mlp", hyperparameters={"epochs": 80}, seed=9)
        for a, b in zip(m1.submodels[0].mlp.weights, m2.submodels[0].mlp.weights):
            assert np.array_equal(a, b)

    def test_unknown_family(self, rng):
        with pytest.raises(ValidationError):
            surrogate.train(linear_fixture(rng), ["x1"], family="transformer")

    def test_needs_complete_rows(self, rng):
        ds = linear_fixture(rng, n=9)
        with pytest.raises(ContractViolation):
            surrogate.train(ds, ["x1"], seed=0)


class TestPredict:
    def test_training_point_on_exact_fit(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="linear-ridge", seed=0)
        row = ds.rows[0]
        y, band = model.predict(list(row.inputs))
        assert y[0] == pytest.approx(row.outputs[0], abs=1e-6)
        assert band[0] < 1e-6

    def test_constant_model_returns_constant(self):
        # hand-built zero-coefficient model: f(x) = intercept in z-space
        rec = NormalizationRecord(
            codecs=(ColumnCodec(name="x1", kind="continuous", lo=0.0, hi=1.0),),
            output_names=("y",),
            output_means=(7.0,),
            output_stds=(2.0,),
        )
        sm = surrogate.SubModel(family="linear-ridge", coef=np.zeros(1), intercept=0.0)
        model = surrogate.SurrogateModel(
            family="linear-ridge", features=["x1"], output_names=["y"], record=rec,
            submodels=[sm], metrics=[], residual_spread=[0.0], seed=0,
        )
        y, _ = model.predict([0.5])
        assert y[0] == 7.0

    def test_extrapolation_guard(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="linear-ridge", seed=0)
        with pytest.raises(ExtrapolationError):
            model.predict([1.15, 0.5, 0.5])

    def test_extrapolation_downgrade_inflates_band(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="rbf-kernel", seed=0)
        _, band_in = model.predict([0.5, 0.5, 0.5])
        _, band_out = model.predict([1.15, 0.5, 0.5], allow_extrapolation=True)
        assert band_out == pytest.approx(band_in * 2.0)

    def test_band_is_z_times_residual_spread(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="rbf-kernel", seed=0)
        _, band = model.predict([0.5, 0.5, 0.5])
        assert band[0] == pytest.approx(1.96 * model.residual_spread[0])


class TestPredictSlice:
    def test_two_step_slice_hits_endpoints(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="linear-ridge", seed=0)
        pts = model.predict_slice([0.5, 0.5, 0.5], "x1", 2)
        assert pts[0][0] == 0.0
        assert pts[1][0] == 1.0

    def test_linear_slice_has_model_slope(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="linear-ridge", seed=0)
        pts = model.predict_slice([0.5, 0.5, 0.5], "x1", 11)
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1][0] for p in pts])
        slopes = np.diff(ys) / np.diff(xs)
        assert np.max(np.abs(slopes - 4.0)) < 1e-6

    def test_pointwise_equal_to_predict(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="rbf-kernel", seed=0)
        base = [0.3, 0.7, 0.5]
        for v, y, band in model.predict_slice(base, "x2", 7):
            y2, band2 = model.predict([base[0], v, base[2]])
            assert np.array_equal(y, y2)
            assert np.array_equal(band, band2)

    def test_unknown_axis(self, rng):
        ds = linear_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2"], family="linear-ridge", seed=0)
        with pytest.raises(ContractViolation):
            model.predict_slice([0.5, 0.5], "x9", 5)


class TestMerit:
    def fixture_model(self, rng):
        n = 60
        X = rng.random((n, 2))
        Y = np.column_stack([2.0 * X[:, 0], 3.0 * X[:, 1]])
        ds = make_dataset(X, Y, bounds={"x1": (0, 1), "x2": (0, 1)})
        return surrogate.train(ds, ["x1", "x2"], family="linear-ridge", seed=0)

    def test_projection_weight(self, rng):
        model = self.fixture_model(rng)
        scalar = surrogate.merit_scalarize(model, surrogate.MeritFunction(weights=(1.0, 0.0)))
        X = rng.random((10, 2))
        assert scalar(X) == pytest.approx(model.predict_normalized(X)[:, 0], abs=1e-12)

    def test_sum_weights(self, rng):
        model = self.fixture_model(rng)
        scalar = surrogate.merit_scalarize(model, surrogate.MeritFunction(weights=(1.0, 1.0)))
        X = np.array([[0.5, 0.5]])
        y = model.predict_normalized(X)[0]
        assert scalar(X)[0] == pytest.approx(y.sum(), abs=1e-12)

    def test_argmax_matches_single_objective(self, rng):
        model = self.fixture_model(rng)
        scalar = surrogate.merit_scalarize(model, surrogate.MeritFunction(weights=(1.0, 0.0)))
        grid = np.stack(np.meshgrid(np.linspace(0, 1, 21), np.linspace(0, 1, 21)), axis=-1).reshape(-1, 2)
        assert np.argmax(scalar(grid)) == np.argmax(model.predict_normalized(grid)[:, 0])

    def test_all_zero_weights_invalid(self):
        with pytest.raises(InvalidMeritError):
            surrogate.MeritFunction(weights=(0.0, 0.0))


class TestGradientCheck:
    def test_random_small_mlp(self, rng):
        ds = smooth_fixture(rng, n=40)
        model = surrogate.train(
            ds, ["x1", "x2", "x3"], family="mlp",
            hyperparameters={"hidden_layers": [8, 8], "epochs": 20}, seed=3,
        )
        x = rng.random(3)
        err = surrogate.gradient_check(model, model.record.encode_inputs(list(x)))
        assert err < 1e-4

    def test_zero_network_zero_target_stationary(self, rng):
        ds = smooth_fixture(rng, n=40)
        model = surrogate.train(
            ds, ["x1", "x2"], family="mlp",
            hyperparameters={"hidden_layers": [4], "epochs": 1}, seed=0,
        )
        mlp = model.submodels[0].mlp
        for w in mlp.weights:
            w[...] = 0.0
        for b in mlp.biases:
            b[...] = 0.0
        err = surrogate.gradient_check(model, np.array([0.5, 0.5]))
        assert err == 0.0

    def test_degenerate_linear_mlp_matches_closed_form(self, rng):
        # no hidden layers: the "network" is exactly a linear model, so
        # backprop must equal the analytic least-squares gradient
        ds = smooth_fixture(rng, n=40)
        model = surrogate.train(
            ds, ["x1", "x2"], family="mlp",
            hyperparameters={"hidden_layers": [], "epochs": 5}, seed=1,
        )
        sm = model.submodels[0].mlp
        X = rng.random((6, 2))
        y = rng.normal(size=6)
        loss, gw, gb = surrogate._mlp_backprop(sm, X, y)
        pred = X @ sm.weights[0] + sm.biases[0]
        analytic_w = (2.0 / len(y)) * X.T @ (pred.ravel() - y)
        analytic_b = (2.0 / len(y)) * np.sum(pred.ravel() - y)
        assert gw[0].ravel() == pytest.approx(analytic_w, abs=1e-12)
        assert gb[0][0] == pytest.approx(analytic_b, abs=1e-12)


class TestScreenAndSerialization:
    def test_screen_accepts_good_model(self, rng):
        ds = smooth_fixture(rng)
        model = surrogate.train(ds, ["x1", "x2", "x3"], family="rbf-kernel", seed=0)
        ok, reasons = surrogate.screen(model)
        assert ok, reasons

    def test_screen_flags_underfit(self, rng):
        X = rng.random((50, 1))
        y = rng.normal(size=50)  # pure noise
        ds = make_dataset(X, y)
        model = surrogate.train(ds, ["x1"], family="linear-ridge", seed=0)
        ok, reasons = surrogate.screen(model)
        assert not ok
        assert any("underfit" in r for r in reasons)

    def test_json_roundtrip_bit_exact_predictions(self, rng):
        ds = smooth_fixture(rng, n=80)
        for family in ("linear-ridge", "rbf-kernel", "mlp"):
            hp = {"epochs": 30} if family == "mlp" else {}
            model = surrogate.train(ds, ["x1", "x2", "x3"], family=family, hyperparameters=hp, seed=2)
            clone = surrogate.SurrogateModel.from_json(model.to_json())
            X = rng.random((20, 3))
            assert np.array_equal(model.predict_normalized(X), clone.predict_normalized(X))
