"""
Unit tests for the probability path, CFM loss, ODE solvers and EMA
"""
import numpy as np
import pytest

from funlora.autograd import Tensor, backward, recording, reduce
from funlora.exceptions import DataError, ShapeError, SolverError
from funlora.flow import EmaState, cfm_loss, ema_swap, ema_update, integrate, nfe_budget_to_steps, ot_path
from funlora.schemas.experiment_schemas import SolverConfig, SolverMethod


def decay_field(t, x):
    """dx/dt = -x, integrated from t=1 to t=0 gives x(0) = e * x(1)"""
    return -x


class TestOtPath:
    """Straight-line path between data and noise"""

    def test_endpoints(self, rng):
        """t=0 is the data, t=1 is the noise"""
        x0, z = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        np.testing.assert_array_equal(ot_path(x0, z, 0.0).x_t, x0)
        np.testing.assert_array_equal(ot_path(x0, z, 1.0).x_t, z)

    def test_per_row_times_and_target(self):
        """Each row uses its own t; the target is z - x0"""
        x0 = np.zeros((2, 2))
        z = np.ones((2, 2))
        sample = ot_path(x0, z, np.array([0.25, 0.75]))
        np.testing.assert_allclose(sample.x_t, [[0.25, 0.25], [0.75, 0.75]])
        np.testing.assert_array_equal(sample.u_target, z)

    def test_shape_mismatch(self):
        """Data and noise must have the same shape"""
        with pytest.raises(ShapeError):
            ot_path(np.zeros((2, 2)), np.zeros((3, 2)), 0.5)

    def test_time_out_of_range(self):
        """t outside [0, 1] is a solver error"""
        with pytest.raises(SolverError):
            ot_path(np.zeros(2), np.zeros(2), 1.5)


class TestCfmLoss:
    """Mean squared error against the target field"""

    def test_exact_field_has_zero_loss(self, rng):
        """A model returning z - x0 has zero loss"""
        x0 = rng.standard_normal((5, 2))
        z = rng.standard_normal((5, 2))

        def model(t, x_t, y):
            return Tensor(z - x0)

        assert cfm_loss(model, x0, np.zeros(5), t=np.full(5, 0.3), z=z).item() == pytest.approx(0.0)

    def test_zero_model_loss(self, rng):
        """A zero field costs the mean squared target"""
        x0 = rng.standard_normal((6, 2))
        z = rng.standard_normal((6, 2))
        loss = cfm_loss(lambda t, x, y: Tensor(np.zeros((6, 2))), x0, np.zeros(6), t=0.5, z=z)
        assert loss.item() == pytest.approx(np.mean((z - x0) ** 2))

    def test_gradient_flows_to_model_parameters(self, rng):
        """Backward reaches tensors used by the model"""
        w = Tensor(np.ones(1), requires_grad=True)
        x0 = rng.standard_normal((3, 2))

        def model(t, x_t, y):
            return x_t * w

        with recording():
            grads = backward(cfm_loss(model, x0, np.zeros(3), rng=rng))
        assert w in grads

    def test_empty_batch(self):
        """Empty batches are rejected"""
        with pytest.raises(DataError):
            cfm_loss(lambda t, x, y: x, np.zeros((0, 2)), np.zeros(0))

    def test_label_count_mismatch(self):
        """One label per point"""
        with pytest.raises(ShapeError):
            cfm_loss(lambda t, x, y: x, np.zeros((3, 2)), np.zeros(2), rng=np.random.default_rng(0))


class TestSolvers:
    """Euler, RK4 and Dopri5 from t=1 to t=0"""

    def test_euler_counts(self):
        """Euler spends one evaluation per step"""
        result = integrate(decay_field, np.ones((3, 2)), SolverConfig(method="euler", steps=10))
        assert result.nfe == 10
        assert result.steps == 10
        np.testing.assert_allclose(result.x, np.full((3, 2), 1.1 ** 10))

    def test_rk4_order(self):
        """Error slope of RK4 on dx/dt = -x lies in [3.7, 4.3]"""
        steps = np.array([4, 8, 16, 32])
        errors = [abs(integrate(decay_field, np.ones(1), SolverConfig(method="rk4", steps=int(n))).x[0] - np.e)
                  for n in steps]
        slope = -np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert 3.7 <= slope <= 4.3

    def test_dopri5_matches_reference(self):
        """Adaptive solve within 1e-3 of a fine RK4 reference"""
        z = np.array([[1.0, -2.0], [0.5, 3.0]])
        reference = integrate(decay_field, z, SolverConfig(method="rk4", steps=200)).x
        result = integrate(decay_field, z, SolverConfig(method="dopri5", abs_tol=1e-4, rel_tol=1e-4))
        assert np.max(np.abs(result.x - reference)) < 1e-3
        assert result.nfe == 1 + 6 * (result.steps + result.rejected)

    def test_dopri5_underflow(self):
        """A stiff blow-up forces steps below min_step"""

        def wild(t, x):
            return np.sign(np.sin(1e6 * t)) * 1e8 * np.ones_like(x)

        with pytest.raises(SolverError):
            integrate(wild, np.ones(1), SolverConfig(method="dopri5", abs_tol=1e-12, rel_tol=1e-12, min_step=1e-3))

    def test_non_finite_state(self):
        """NaN states are reported"""
        with pytest.raises(SolverError):
            integrate(lambda t, x: x * np.nan, np.ones(2), SolverConfig(method="euler", steps=2))

    def test_nfe_budget(self):
        """Fixed-step solvers read the budget as steps; dopri5 ignores it"""
        assert nfe_budget_to_steps(SolverMethod.RK4, 20) == 20
        assert nfe_budget_to_steps("euler", 5) == 5
        assert nfe_budget_to_steps(SolverMethod.DOPRI5, 20) is None
        with pytest.raises(ValueError):
            nfe_budget_to_steps("rk4", 0)


class TestEma:
    """Shadow averaging, activation and swapping"""

    def test_inactive_before_activation_epoch(self):
        """Before activation the shadow follows the live values"""
        p = Tensor(np.zeros(2), requires_grad=True)
        ema = EmaState([p], decay=0.5, activation_epoch=2)
        p.data = np.ones(2)
        ema.step(0)
        assert not ema.active
        np.testing.assert_array_equal(ema.shadow[0], np.ones(2))

    def test_update_rule(self):
        """shadow = beta * shadow + (1 - beta) * p"""
        p = Tensor(np.zeros(2), requires_grad=True)
        ema = EmaState([p], decay=0.75)
        p.data = np.full(2, 4.0)
        ema.step(0)
        np.testing.assert_allclose(ema.shadow[0], np.full(2, 1.0))

    def test_swapped_restores_live_values(self):
        """The shadow is visible only inside the block"""
        p = Tensor(np.zeros(2), requires_grad=True)
        ema = EmaState([p], decay=0.5)
        p.data = np.full(2, 2.0)
        ema.step(0)
        with ema.swapped():
            np.testing.assert_array_equal(p.data, np.full(2, 1.0))
        np.testing.assert_array_equal(p.data, np.full(2, 2.0))
        ema.commit()
        np.testing.assert_array_equal(p.data, np.full(2, 1.0))

    def test_shape_mismatch(self):
        """Shadows and parameters must line up"""
        ema = EmaState([Tensor(np.zeros(2))], decay=0.5)
        with pytest.raises(ShapeError):
            ema_update(ema, [Tensor(np.zeros(3))])
        with pytest.raises(ShapeError):
            ema_swap(ema, [])

    @pytest.mark.parametrize("decay", [0.0, 1.0])
    def test_decay_range(self, decay):
        """Decay must lie strictly inside (0, 1)"""
        with pytest.raises(ValueError):
            EmaState([], decay=decay)


if __name__ == "__main__":
    pytest.main([__file__])
