"""
Conditional flow matching: probability path, loss, ODE samplers and EMA
"""
from funlora.flow.ema import EmaState, ema_swap, ema_update
from funlora.flow.paths import PathSample, cfm_loss, ot_path
from funlora.flow.solvers import IntegrationResult, integrate, nfe_budget_to_steps

__all__ = [
    "EmaState", "IntegrationResult", "PathSample", "cfm_loss", "ema_swap", "ema_update", "integrate",
    "nfe_budget_to_steps", "ot_path",
]
