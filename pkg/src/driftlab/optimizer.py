"""Heavy-ball SGD runner with per-step label resampling.

The update is pi <- beta pi - grad, w <- w + eta pi, so the effective
gradient-descent rate near a fixed point is eta / (1 - beta).  The
momentum scaling rule ties beta to the step size via
beta = 1 - scaling_constant * eta**gamma.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, InvalidHyperparameter, ProjectionError
from .kernels import SGDMDriver
from .numerics import as_vector

__all__ = [
    "HyperParams",
    "beta_from_scaling",
    "sgdm_step",
    "TrajectoryRecord",
    "run_trajectory",
    "project_to_manifold",
]


@dataclass(frozen=True)
class HyperParams:
    eta: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0.0):
            raise InvalidHyperparameter(f"eta must be positive, got {self.eta}")
        if not (0.0 <= self.beta < 1.0):
            raise InvalidHyperparameter(f"beta must lie in [0, 1), got {self.beta}")


def beta_from_scaling(eta, scaling_constant, gamma):
    """Momentum beta = 1 - scaling_constant * eta**gamma."""
    if eta <= 0.0 or scaling_constant <= 0.0:
        raise InvalidHyperparameter("eta and scaling_constant must be positive")
    beta = 1.0 - scaling_constant * float(eta) ** gamma
    if not (0.0 <= beta < 1.0):
        raise InvalidHyperparameter(
            f"scaling gives beta={beta:.6g} outside [0, 1); "
            f"eta={eta}, scaling_constant={scaling_constant}, gamma={gamma}"
        )
    return float(beta)


def sgdm_step(model, w, pi, hyper, labels=None):
    """Reference single step; the kernels implement the same update."""
    pi_new = hyper.beta * as_vector(pi, "pi") - model.gradient(w, labels=labels)
    return as_vector(w) + hyper.eta * pi_new, pi_new


@dataclass
class TrajectoryRecord:
    steps: np.ndarray
    loss: np.ndarray
    weight_norm_sq: np.ndarray
    momentum_norm_sq: np.ndarray
    trace_hessian: np.ndarray
    test_error: Optional[np.ndarray]
    final_w: np.ndarray
    final_pi: np.ndarray
    n_steps: int
    outcome: str  # "max-steps" | "stopped" | "diverged"

    def columns(self):
        out = {
            "step": self.steps,
            "loss": self.loss,
            "weight_norm_sq": self.weight_norm_sq,
            "momentum_norm_sq": self.momentum_norm_sq,
            "trace_hessian": self.trace_hessian,
        }
        if self.test_error is not None:
            out["test_error"] = self.test_error
        return out


_STOP_OBSERVABLES = ("loss", "weight_norm_sq", "trace_hessian", "test_error")


def run_trajectory(
    model,
    w0,
    hyper,
    noise=None,
    stream=None,
    max_steps=10_000,
    record_every=10,
    stop_observable=None,
    stop_threshold=None,
    pi0=None,
    divergence_limit=1e12,
    backend=None,
):
    """Run SGDM from w0, recording observables every record_every steps.

    Stops early when the chosen observable drops below stop_threshold
    (checked at record points) or when the state diverges; in the
    latter case records are truncated to the finite prefix and final_w
    holds the last finite snapshot.
    """
    if (stop_observable is None) != (stop_threshold is None):
        raise ContractError("stop_observable and stop_threshold go together")
    if stop_observable is not None and stop_observable not in _STOP_OBSERVABLES:
        raise ContractError(f"cannot stop on {stop_observable!r}")
    if stop_observable == "test_error" and model.test_error(as_vector(w0)) is None:
        raise ContractError("model does not define a test error")
    if max_steps < 0 or record_every < 1:
        raise ContractError("need max_steps >= 0 and record_every >= 1")

    w = as_vector(w0).copy()
    pi = np.zeros_like(w) if pi0 is None else as_vector(pi0, "pi0").copy()
    if pi.size != w.size:
        raise ContractError("pi0 must match w0")
    driver = SGDMDriver(model, hyper.eta, hyper.beta, noise=noise, stream=stream, backend=backend)

    steps, loss, wns, mns, trh, terr = [], [], [], [], [], []
    has_test = model.test_error(w) is not None

    def observe(k):
        steps.append(k)
        loss.append(model.loss(w))
        wns.append(float(w @ w))
        mns.append(float(pi @ pi))
        trh.append(model.trace_hessian(w))
        if has_test:
            terr.append(model.test_error(w))

    def stop_value():
        series = {
            "loss": loss,
            "weight_norm_sq": wns,
            "trace_hessian": trh,
            "test_error": terr,
        }[stop_observable]
        return series[-1]

    observe(0)
    outcome = "max-steps"
    done = 0
    snapshot = w.copy()
    snapshot_pi = pi.copy()
    if stop_observable is not None and stop_value() < stop_threshold:
        outcome = "stopped"
    else:
        while done < max_steps:
            k = min(record_every, max_steps - done)
            driver.advance(w, pi, k)
            done += k
            observe(done)
            if not (np.isfinite(loss[-1]) and np.isfinite(wns[-1])) or wns[-1] > divergence_limit:
                for series in (steps, loss, wns, mns, trh) + ((terr,) if has_test else ()):
                    series.pop()
                outcome = "diverged"
                break
            snapshot[:] = w
            snapshot_pi[:] = pi
            if stop_observable is not None and stop_value() < stop_threshold:
                outcome = "stopped"
                break

    return TrajectoryRecord(
        steps=np.asarray(steps, dtype=np.int64),
        loss=np.asarray(loss),
        weight_norm_sq=np.asarray(wns),
        momentum_norm_sq=np.asarray(mns),
        trace_hessian=np.asarray(trh),
        test_error=np.asarray(terr) if has_test else None,
        final_w=snapshot,
        final_pi=snapshot_pi,
        n_steps=done,
        outcome=outcome,
    )


def project_to_manifold(model, w, beta=0.9, loss_tol=1e-18, max_steps=500_000, backend=None):
    """Ride noiseless momentum descent from w down to the zero-loss set.

    The step size is 0.2 of the stability bound 2(1+beta)/lambda_max,
    with the Hessian trace standing in for lambda_max.
    """
    w = as_vector(w)
    trace = model.trace_hessian(w)
    if not np.isfinite(trace) or trace <= 0.0:
        raise ProjectionError(f"Hessian trace {trace} gives no usable step size")
    eta = 0.2 * 2.0 * (1.0 + beta) / trace
    run = run_trajectory(
        model,
        w,
        HyperParams(eta=eta, beta=beta),
        max_steps=max_steps,
        record_every=100,
        stop_observable="loss",
        stop_threshold=loss_tol,
        backend=backend,
    )
    if run.outcome != "stopped":
        raise ProjectionError(
            f"descent did not reach loss < {loss_tol:g} in {max_steps} steps "
            f"(outcome {run.outcome}, loss {run.loss[-1]:.3e})"
        )
    return run.final_w
