"""Maximum-likelihood estimation of logit coefficients.

The log likelihood is sum_n ln P(chosen_n); its gradient in beta_k is
sum_n (x_{chosen,k} - sum_j P_j x_{j,k}).  Optimization is quasi-Newton
(BFGS with line search via scipy) on the negative log likelihood with the
analytic gradient; standard errors come from the analytic Hessian at the
optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .choice import ChoiceSet, design_matrix
from .types import UtilitySpec


@dataclass
class Observation:
    chooser: Mapping[str, float]
    choice_set: ChoiceSet
    chosen_id: int


@dataclass
class FitResult:
    spec: UtilitySpec
    beta: np.ndarray
    loglik: float
    gradient_norm: float
    iterations: int
    converged: bool
    std_errors: Optional[np.ndarray]
    covariance: Optional[np.ndarray]


class _Design:
    """Observations stacked into dense tensors (padded by availability)."""

    def __init__(self, variables: Sequence[str], observations: Sequence[Observation]):
        if not observations:
            raise ValueError("at least one observation required")
        self.n_obs = len(observations)
        self.n_vars = len(variables)
        j_max = max(len(o.choice_set.alt_ids) for o in observations)
        self.x = np.zeros((self.n_obs, j_max, self.n_vars))
        self.avail = np.zeros((self.n_obs, j_max), dtype=bool)
        self.chosen = np.zeros(self.n_obs, dtype=np.int64)
        for n, obs in enumerate(observations):
            cs = obs.choice_set
            j = len(cs.alt_ids)
            self.x[n, :j, :] = design_matrix(variables, obs.chooser, cs)
            self.avail[n, :j] = cs.availability
            pos = cs.position(obs.chosen_id)
            if not cs.availability[pos]:
                raise ValueError(
                    f"observation {n}: chosen alternative {obs.chosen_id} is unavailable"
                )
            self.chosen[n] = pos

    def probabilities(self, beta: np.ndarray) -> np.ndarray:
        v = self.x @ beta
        v = np.where(self.avail, v, -np.inf)
        v -= v.max(axis=1, keepdims=True)
        e = np.exp(v)
        return e / e.sum(axis=1, keepdims=True)

    def loglik_grad(self, beta: np.ndarray) -> Tuple[float, np.ndarray]:
        p = self.probabilities(beta)
        rows = np.arange(self.n_obs)
        ll = float(np.log(p[rows, self.chosen]).sum())
        x_chosen = self.x[rows, self.chosen, :]
        x_bar = np.einsum("nj,njk->nk", p, self.x)
        grad = (x_chosen - x_bar).sum(axis=0)
        return ll, grad

    def hessian(self, beta: np.ndarray) -> np.ndarray:
        p = self.probabilities(beta)
        x_bar = np.einsum("nj,njk->nk", p, self.x)
        centered = self.x - x_bar[:, None, :]
        return -np.einsum("nj,njk,njl->kl", p, centered, centered)


def mnl_loglik_and_gradient(
    spec: UtilitySpec, observations: Sequence[Observation]
) -> Tuple[float, np.ndarray]:
    """Log likelihood and analytic gradient at the spec's coefficients."""
    design = _Design(spec.variables, observations)
    return design.loglik_grad(spec.coefficients)


def mnl_fit(
    variables: Sequence[str] | UtilitySpec,
    observations: Sequence[Observation],
    initial: Optional[np.ndarray] = None,
    max_iters: int = 200,
    tol: float = 1e-6,
    name: str = "fitted",
) -> FitResult:
    """Fit beta by maximum likelihood; never raises on non-convergence.

    A non-converged fit (max_iters hit, or a degenerate step from
    collinear/separable data) reports the last iterate and its gradient
    norm with ``converged=False``.
    """
    if isinstance(variables, UtilitySpec):
        name = variables.name
        var_list: List[str] = variables.variables
        if initial is None:
            initial = variables.coefficients
    else:
        var_list = list(variables)
    design = _Design(var_list, observations)
    beta0 = np.zeros(design.n_vars) if initial is None else np.asarray(initial, dtype=float)

    def objective(beta):
        ll, grad = design.loglik_grad(beta)
        return -ll, -grad

    res = optimize.minimize(
        objective,
        beta0,
        jac=True,
        method="BFGS",
        options={"maxiter": max_iters, "gtol": tol},
    )
    beta = np.asarray(res.x, dtype=float)
    ll, grad = design.loglik_grad(beta)
    grad_norm = float(np.max(np.abs(grad)))
    converged = bool(res.success) and grad_norm <= tol * max(1.0, abs(ll))

    std_errors = covariance = None
    if converged:
        hess = design.hessian(beta)
        try:
            covariance = np.linalg.inv(-hess)
            diag = np.diag(covariance)
            if np.all(diag > 0):
                std_errors = np.sqrt(diag)
            else:
                covariance = std_errors = None
        except np.linalg.LinAlgError:
            covariance = None

    spec = UtilitySpec(name, tuple((v, float(b)) for v, b in zip(var_list, beta)))
    return FitResult(
        spec=spec,
        beta=beta,
        loglik=ll,
        gradient_norm=grad_norm,
        iterations=int(res.nit),
        converged=converged,
        std_errors=std_errors,
        covariance=covariance,
    )
