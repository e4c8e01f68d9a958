"""
Passive Bayes predictor Lambda_rho and cumulative loss accounting.

The predictor picks argmin_y sum_x l[x][y] rho(x | x_{<t}); with a mixture
plug-in the same code path, fed with posterior updates, is Lambda_xi.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd

from core.environment import EnvironmentModel, check_action_independence
from core.errors import DegenerateLossError, NotApplicableError, ShapeError
from core.history import ActionSymbol, PerceptSymbol
from core.loss import MatrixLoss
from core.mixture import MixtureModel
from core.numeric import Probability, accumulate, argmin_first

logger = logging.getLogger(__name__)

# Placeholder action fed to action-free plug-ins
PLACEHOLDER_ACTION = ActionSymbol(0)


class PredictorPolicy:
    """Bayes decision rule for a plug-in distribution rho and a loss matrix."""

    def __init__(self, model: EnvironmentModel, loss: MatrixLoss, invariance_depth: int = 2, check: bool = True):
        """
        Initialize a predictor.

        Args:
            model: Plug-in distribution (true environment or mixture)
            loss: Loss matrix indexed [observation][action]
            invariance_depth: History depth of the action-invariance check
            check: Whether to run the construction checks

        Raises:
            NotApplicableError: If rho's conditionals depend on actions
        """
        if check and not check_action_independence(model, depth=invariance_depth):
            raise NotApplicableError(f"Plug-in {model.name} depends on actions; the passive predictor needs an action-free rho")
        loss.check_alphabets(model.observation_alphabet.size, loss.shape[1])
        if model.embeds_loss:
            raise NotApplicableError("The passive predictor expects percepts without loss levels")
        self.model = model
        self.loss = loss

    @property
    def n_actions(self) -> int:
        return self.loss.shape[1]

    def _row(self, percepts: Sequence[PerceptSymbol], conditioned: bool = False) -> Tuple[Probability, ...]:
        percepts = tuple(percepts)
        actions = (PLACEHOLDER_ACTION,) * (len(percepts) + 1)
        model = self.model if conditioned else self.model.condition_on(percepts, actions[:-1])
        return model.step_distribution(percepts, actions)

    def expected_losses(self, percepts: Sequence[PerceptSymbol], conditioned: bool = False) -> List[Probability]:
        """rho-expected loss of every action given x_{<t}."""
        row = self._row(percepts, conditioned)
        return [
            accumulate(self.loss.value(o, y) * p for o, p in enumerate(row))
            for y in range(self.n_actions)
        ]

    def bayes_action(
        self,
        percepts: Sequence[PerceptSymbol],
        past_actions: Sequence[ActionSymbol] = (),
        conditioned: bool = False
    ) -> ActionSymbol:
        """
        Lambda_rho's action for the current cycle.

        Args:
            percepts: x_{<t}
            past_actions: y_{<t}; ignored by the action-free plug-in
            conditioned: The plug-in was advanced through ``percepts`` already;
                skips re-conditioning and the reachability check

        Returns:
            The expected-loss minimiser, smallest index on ties

        Raises:
            UnreachableHistoryError: If x_{<t} has rho probability zero
        """
        return ActionSymbol(argmin_first(self.expected_losses(percepts, conditioned)))

    def advance(self, y: ActionSymbol, x: PerceptSymbol) -> "PredictorPolicy":
        """Predictor whose plug-in is conditioned on one more cycle."""
        return PredictorPolicy(self.model.advance(PLACEHOLDER_ACTION, x), self.loss, check=False)


def threshold_gamma(loss: MatrixLoss) -> Probability:
    """
    Decision threshold gamma for a 2x2 loss matrix.

    gamma = (l01 - l00) / (l01 - l00 + l10 - l11); the Bayes action is 0
    when rho(1|.) <= gamma and 1 above it.

    Raises:
        DegenerateLossError: Unless l01 > l00 and l10 > l11
    """
    if loss.shape != (2, 2):
        raise ShapeError(f"threshold_gamma needs a 2x2 matrix, got {loss.shape}")
    (l00, l01), (l10, l11) = loss.matrix
    if not (l01 > l00 and l10 > l11):
        raise DegenerateLossError(f"Loss matrix {loss.matrix} has no decision threshold")
    numerator = l01 - l00
    denominator = numerator + l10 - l11
    if isinstance(numerator, Fraction) and isinstance(denominator, Fraction):
        return numerator / denominator
    return float(numerator) / float(denominator)


def threshold_action(rho_one: Probability, gamma: Probability) -> ActionSymbol:
    return ActionSymbol(1 if rho_one > gamma else 0)


@dataclass
class LossLedger:
    """Per-cycle losses of one prediction run."""

    losses: List[Probability] = field(default_factory=list)
    actions: List[int] = field(default_factory=list)
    percepts: List[int] = field(default_factory=list)
    weights: List[List[float]] = field(default_factory=list)

    def record(self, action: int, percept: int, loss: Probability, weights: Optional[Sequence[float]] = None) -> None:
        self.actions.append(action)
        self.percepts.append(percept)
        self.losses.append(loss)
        if weights is not None:
            self.weights.append([float(w) for w in weights])

    @property
    def cycles(self) -> int:
        return len(self.losses)

    @property
    def total(self) -> float:
        return math.fsum(float(l) for l in self.losses)

    def total_at(self, n: int) -> float:
        return math.fsum(float(l) for l in self.losses[:n])

    def last_loss_cycle(self) -> int:
        """1-based cycle of the last non-zero loss (0 if none)."""
        for i in range(len(self.losses) - 1, -1, -1):
            if self.losses[i] != 0:
                return i + 1
        return 0

    def to_frame(self, member_names: Optional[Sequence[str]] = None) -> pd.DataFrame:
        """Ledger table with one row per cycle and posterior weight columns when present."""
        frame = pd.DataFrame({
            "cycle": np.arange(1, self.cycles + 1),
            "action": self.actions,
            "percept": self.percepts,
            "incurred_loss": [float(l) for l in self.losses],
        })
        frame["cumulative_loss"] = np.cumsum(frame["incurred_loss"].to_numpy())
        if self.weights:
            names = list(member_names) if member_names else [str(i) for i in range(len(self.weights[0]))]
            matrix = np.array(self.weights)
            for j, name in enumerate(names):
                frame[f"w_{name}"] = matrix[:, j]
        return frame


def run_prediction(truth: EnvironmentModel, policy: PredictorPolicy, n: int, seed: int) -> LossLedger:
    """
    Simulate n cycles of Lambda_rho against an action-free truth.

    One RNG stream drives the truth; the policy is deterministic, so runs of
    different policies with the same seed see identical percepts.

    Args:
        truth: Action-free environment generating the percepts
        policy: Predictor (Lambda_mu or Lambda_xi)
        n: Number of cycles, at least 1
        seed: Seed of the truth's RNG

    Returns:
        Ledger of the run
    """
    if n < 1:
        raise ValueError(f"run_prediction needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    ledger = LossLedger()
    percepts: Tuple[PerceptSymbol, ...] = ()
    actions: Tuple[ActionSymbol, ...] = ()
    track_weights = isinstance(policy.model, MixtureModel)
    for _ in range(n):
        y = policy.bayes_action(percepts, actions, conditioned=True)
        actions = actions + (y,)
        x = truth.sample_next(percepts, actions, rng)
        policy = policy.advance(y, x)
        percepts = percepts + (x,)
        ledger.record(y.index, x.observation, policy.loss.value(x.observation, y.index),
                      policy.model.posterior_weights if track_weights else None)
    logger.debug(f"Prediction run seed={seed}: L={ledger.total:.6g} over {n} cycles")
    return ledger


@dataclass(frozen=True)
class RegretReport:
    difference: float
    ratio: Optional[float]


def regret_report(ledger_xi: LossLedger, ledger_mu: LossLedger, n: Optional[int] = None) -> RegretReport:
    """
    (L_xi - L_mu, L_xi / L_mu); the ratio is None when L_mu = 0.

    Raises:
        ShapeError: If the ledgers have different cycle counts
    """
    if ledger_xi.cycles != ledger_mu.cycles:
        raise ShapeError(f"Ledgers cover {ledger_xi.cycles} and {ledger_mu.cycles} cycles")
    n = ledger_xi.cycles if n is None else n
    l_xi, l_mu = ledger_xi.total_at(n), ledger_mu.total_at(n)
    return RegretReport(l_xi - l_mu, l_xi / l_mu if l_mu > 0 else None)
