"""PDFP iteration with controlled transform-domain sparsity (CWDS-PDFP).

Solves ``min_{f >= 0} 1/2 ||A f - y||^2 + alpha ||B f||_1`` where ``A`` is a
(normalized) projector and ``B`` a sparsifying transform with spectral norm
at most one.  ``alpha`` is not fixed: a feedback controller adjusts it each
iteration until the fraction of transform coefficients of the iterate whose
magnitude exceeds ``kappa`` matches an a-priori target ``c_pr``.

Two drivers are provided: :func:`run_cwds_pdfp` for a single coupled
problem (the dynamic 3-D shearlet model, or any single frame), and
:func:`run_static_cwds_pdfp`, which runs independent per-frame PDFP updates
steered by one controller fed with the mean per-frame sparsity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import LinearMap, ShapeError

logger = logging.getLogger(__name__)

STOP_CONVERGED = "sparsity+change converged"
STOP_CAP = "iteration cap"


@dataclass(frozen=True)
class PdfpConfig:
    gamma: float = 1.0
    lam: float = 0.99
    max_iters: int = 300

    def __post_init__(self):
        if not 0 < self.gamma < 2:
            raise ValueError("gamma must lie in (0, 2) for a normalized projector")
        if not 0 < self.lam < 1:
            raise ValueError("lambda must lie in (0, 1) for a transform with frame bound 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class CwdsConfig:
    c_pr: float
    omega: float
    kappa: float
    zeta: float
    delta1: float = 0.01
    delta2: float = 0.003
    #: Threshold the dual update with the previous alpha instead of the fresh one.
    stale_threshold: bool = False

    def __post_init__(self):
        if not 0.0 <= self.c_pr <= 1.0:
            raise ValueError("c_pr must lie in [0, 1]")
        for name in ("omega", "kappa", "zeta", "delta1", "delta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


# Published per-dataset presets for digital phantom, gel and plant: (c_pr, omega, kappa, zeta)
PRESETS = {
    "digital": {"haar": (0.30, 10.0, 1e-6, 1.0), "sh2d": (0.77, 50.0, 1e-5, 1.0),
                "sh3d": (0.73, 10.0, 1e-6, 1.0)},
    "gel": {"haar": (0.54, 0.5, 1e-6, 1.0), "sh2d": (0.82, 100.0, 1e-6, 1.0),
            "sh3d": (0.76, 10.0, 1e-6, 10.0)},
    "plant": {"haar": (0.45, 0.05, 1e-6, 2.0), "sh2d": (0.94, 5.0, 1e-5, 10.0),
              "sh3d": (0.95, 10.0, 1e-5, 100.0)},
}


def preset(dataset: str, method: str, **overrides) -> CwdsConfig:
    c_pr, omega, kappa, zeta = PRESETS[dataset][method]
    values = {"c_pr": c_pr, "omega": omega, "kappa": kappa, "zeta": zeta}
    values.update(overrides)
    return CwdsConfig(**values)


@dataclass
class CwdsState:
    """Evolving quantities of one CWDS-PDFP run.

    ``e_curr`` is ``e^(i)`` and ``e_prev`` is ``e^(i-1)``; ``c_level`` is the
    sparsity ``C^(i)`` of ``f``.  ``sht_v`` caches ``B^T v`` so each step
    needs only one adjoint transform.
    """

    f: np.ndarray
    v: np.ndarray
    alpha: float = 0.0
    beta: float = 0.0
    e_prev: float = 1.0
    e_curr: float = 1.0
    c_level: float = 1.0
    iter: int = 0
    rel_change: float = math.inf
    sht_v: np.ndarray | None = field(default=None, repr=False)


@dataclass
class SolveReport:
    iterations: int
    final_sparsity: float
    final_alpha: float
    objective_trace: list[float]
    stop_reason: str
    final_sparsity_error: float = math.nan
    final_rel_change: float = math.nan
    alpha_trace: list[float] = field(default_factory=list)
    beta_trace: list[float] = field(default_factory=list)
    sparsity_trace: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.stop_reason == STOP_CONVERGED


def soft_threshold(x, alpha: float) -> np.ndarray:
    """Componentwise ``sign(x) * max(|x| - alpha, 0)``."""
    if alpha < 0:
        raise ValueError("threshold must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - alpha, 0.0)


def clip_threshold(x, alpha: float) -> np.ndarray:
    """``(Id - S_alpha)(x)``: projection onto the box ``[-alpha, alpha]``."""
    if alpha < 0:
        raise ValueError("threshold must be non-negative")
    return np.clip(x, -alpha, alpha)


def nonneg_project(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def _sq(x: np.ndarray) -> float:
    return float(np.vdot(x, x))


def objective_value(f, y, A: LinearMap, SH: LinearMap, alpha: float) -> float:
    """``1/2 ||A f - y||^2 + alpha ||SH f||_1``."""
    f = np.asarray(f, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if f.shape != A.input_shape or y.shape != A.output_shape or f.shape != SH.input_shape:
        raise ShapeError("objective_value: f, y and the operators do not conform")
    return 0.5 * _sq(A.apply(f) - y) + alpha * float(np.abs(SH.apply(f)).sum())


def sparsity_level(coeffs: np.ndarray, kappa: float) -> float:
    """Fraction of coefficients with magnitude above ``kappa``."""
    return np.count_nonzero(np.abs(coeffs) > kappa) / coeffs.size


def a_priori_sparsity(reference, SH: LinearMap, kappa: float) -> float:
    """Target sparsity ``C_pr`` from a reference image or volume."""
    return sparsity_level(SH.apply(reference), kappa)


def mean_of_largest(values: np.ndarray, h: int) -> float:
    """Mean of the ``h`` largest magnitudes of ``values``."""
    flat = np.abs(np.ravel(values))
    if h <= 0:
        raise ValueError("c_pr = 1 leaves no coefficients to average")
    h = min(h, flat.size)
    top = np.partition(flat, flat.size - h)[flat.size - h:]
    return float(top.mean())


def init_threshold(y, A: LinearMap, SH: LinearMap, c_pr: float, zeta: float) -> float:
    """Initial threshold ``zeta * mean of the h largest |SH(A^T y)|``.

    ``h = ceil((1 - c_pr) * n)`` where ``n`` is the total coefficient count.
    """
    if not 0.0 <= c_pr <= 1.0:
        raise ValueError("c_pr must lie in [0, 1]")
    coeffs = SH.apply(A.apply_adjoint(y))
    h = math.ceil((1.0 - c_pr) * coeffs.size)
    return zeta * mean_of_largest(coeffs, h)


def cwds_controller_update(state: CwdsState, c_pr: float) -> tuple[float, float, float]:
    """One controller step; returns ``(alpha, beta, e)`` for iteration ``i + 1``.

    ``e = C^(i) - c_pr``.  When the sign of ``e`` flips relative to
    ``e^(i)`` (from the second iteration on), ``beta`` shrinks by the factor
    ``1 - |e^(i) - e^(i-1)|``, floored at zero.  Then
    ``alpha = max(0, alpha + beta * e)``.
    """
    e_new = state.c_level - c_pr
    beta = state.beta
    if state.iter >= 1 and np.sign(e_new) != np.sign(state.e_curr):
        beta = beta * max(0.0, 1.0 - abs(state.e_curr - state.e_prev))
    alpha = max(0.0, state.alpha + beta * e_new)
    return alpha, beta, e_new


def _pdfp_core(f, v, grad, sht_v, SH: LinearMap, cfg: PdfpConfig, threshold: float):
    base = f - cfg.gamma * grad
    d = np.maximum(base - cfg.lam * sht_v, 0.0)
    w = SH.apply(d)
    w += v
    v_new = np.clip(w, -threshold, threshold, out=w)
    sht_v_new = SH.apply_adjoint(v_new)
    f_new = np.maximum(base - cfg.lam * sht_v_new, 0.0)
    if not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(v_new))):
        raise FloatingPointError("divergence: check normalization and gamma, lambda")
    return f_new, v_new, sht_v_new


def pdfp_step(state: CwdsState, A: LinearMap, SH: LinearMap, y, cfg: PdfpConfig,
              alpha: float) -> CwdsState:
    """One primal-dual fixed-point step at fixed threshold ``alpha``.

    ``d = P+(f - gamma grad - lam B^T v)``,
    ``v+ = (Id - S_{alpha gamma / lam})(B d + v)``,
    ``f+ = P+(f - gamma grad - lam B^T v+)`` with ``grad = A^T(A f - y)``
    computed once.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    y = np.asarray(y, dtype=np.float64)
    grad = A.apply_adjoint(A.apply(state.f) - y)
    sht_v = state.sht_v if state.sht_v is not None else SH.apply_adjoint(state.v)
    f_new, v_new, sht_v_new = _pdfp_core(state.f, state.v, grad, sht_v, SH, cfg,
                                         alpha * cfg.gamma / cfg.lam)
    return replace(state, f=f_new, v=v_new, sht_v=sht_v_new)


def relative_change(sq_diff: float, sq_new: float) -> float:
    """``||f+ - f|| / ||f+||`` from squared norms; 0/0 counts as 0, x/0 as inf."""
    if sq_new == 0.0:
        return 0.0 if sq_diff == 0.0 else math.inf
    return math.sqrt(sq_diff) / math.sqrt(sq_new)


class _Problem:
    """One frame (or one coupled volume) of a CWDS-PDFP run."""

    def __init__(self, y, A: LinearMap, SH: LinearMap):
        self.y = np.asarray(y, dtype=np.float64)
        if self.y.shape != A.output_shape:
            raise ShapeError(f"data shape {self.y.shape} does not match operator {A.output_shape}")
        if A.input_shape != SH.input_shape:
            raise ShapeError("projector and transform domains differ")
        self.A, self.SH = A, SH
        self.f = np.zeros(A.input_shape)
        self.v = np.zeros(SH.output_shape)
        self.sht_v = np.zeros(A.input_shape)
        self.residual = -self.y
        self.coeffs = np.zeros(SH.output_shape)

    def data_term(self) -> float:
        return 0.5 * _sq(self.residual)

    def l1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def step(self, cfg: PdfpConfig, threshold: float, kappa: float) -> tuple[float, float, int]:
        grad = self.A.apply_adjoint(self.residual)
        f_new, self.v, self.sht_v = _pdfp_core(self.f, self.v, grad, self.sht_v, self.SH, cfg, threshold)
        diff = _sq(f_new - self.f)
        self.f = f_new
        self.residual = self.A.apply(f_new) - self.y
        self.coeffs = self.SH.apply(f_new)
        count = np.count_nonzero(np.abs(self.coeffs) > kappa)
        return diff, _sq(f_new), count


def _run(problems: list[_Problem], pdfp: PdfpConfig, cwds: CwdsConfig, alpha0: float,
         record_objective: bool) -> SolveReport:
    state = CwdsState(f=problems[0].f, v=problems[0].v, alpha=alpha0, beta=cwds.omega * alpha0)
    ratio = pdfp.gamma / pdfp.lam

    def objective(alpha):
        return sum(p.data_term() for p in problems) + alpha * sum(p.l1() for p in problems)

    trace = [objective(state.alpha)] if record_objective else []
    alphas, betas, levels = [state.alpha], [state.beta], [state.c_level]
    while state.iter < pdfp.max_iters and (abs(state.e_curr) >= cwds.delta1
                                           or state.rel_change >= cwds.delta2):
        alpha_new, beta, e_new = cwds_controller_update(state, cwds.c_pr)
        threshold = (state.alpha if cwds.stale_threshold else alpha_new) * ratio
        diff = norm = 0.0
        level = 0.0
        for p in problems:
            d, n, count = p.step(pdfp, threshold, cwds.kappa)
            diff += d
            norm += n
            level += count / p.coeffs.size
        level /= len(problems)
        state.e_prev, state.e_curr = state.e_curr, e_new
        state.alpha, state.beta = alpha_new, beta
        state.c_level = level
        state.rel_change = relative_change(diff, norm)
        state.iter += 1
        if record_objective:
            trace.append(objective(state.alpha))
        alphas.append(state.alpha)
        betas.append(state.beta)
        levels.append(level)
        logger.debug("iter %d alpha %.4g beta %.4g C %.4f eps %.4g", state.iter, state.alpha,
                     state.beta, level, state.rel_change)

    reason = STOP_CAP
    if abs(state.e_curr) < cwds.delta1 and state.rel_change < cwds.delta2:
        reason = STOP_CONVERGED
    return SolveReport(iterations=state.iter, final_sparsity=state.c_level, final_alpha=state.alpha,
                       objective_trace=trace, stop_reason=reason,
                       final_sparsity_error=state.e_curr, final_rel_change=state.rel_change,
                       alpha_trace=alphas, beta_trace=betas, sparsity_trace=levels)


def run_cwds_pdfp(y, A: LinearMap, SH: LinearMap, pdfp: PdfpConfig, cwds: CwdsConfig,
                  record_objective: bool = True) -> tuple[np.ndarray, SolveReport]:
    """CWDS-PDFP on one coupled problem; ``A`` and ``SH`` must be normalized.

    Starts from ``f = 0, v = 0, e = 1, C = 1`` with ``alpha`` from
    :func:`init_threshold` and ``beta = omega * alpha``, then iterates until
    both ``|e| < delta1`` and the relative change drops below ``delta2``, or
    ``max_iters`` is reached.  With ``y = 0`` the sparsity target cannot be
    met and the run ends at the cap.
    """
    problem = _Problem(y, A, SH)
    alpha0 = init_threshold(problem.y, A, SH, cwds.c_pr, cwds.zeta)
    report = _run([problem], pdfp, cwds, alpha0, record_objective)
    return problem.f, report


def run_static_cwds_pdfp(y, A_frames: Sequence[LinearMap], T2D: LinearMap, pdfp: PdfpConfig,
                         cwds: CwdsConfig, record_objective: bool = True) -> tuple[np.ndarray, SolveReport]:
    """Per-frame PDFP updates sharing one threshold controller.

    ``y`` has shape ``(T, angles, detectors)``.  The controller sees the mean
    of the per-frame sparsity levels; the initial threshold is computed from
    the whole stack of back-projections.
    """
    y = np.asarray(y, dtype=np.float64)
    if len(A_frames) != y.shape[0]:
        raise ShapeError(f"{len(A_frames)} frame operators for {y.shape[0]} sinograms")
    problems = [_Problem(y[t], A_frames[t], T2D) for t in range(y.shape[0])]
    coeffs = [T2D.apply(A.apply_adjoint(p.y)) for A, p in zip(A_frames, problems)]
    stacked = coeffs[0] if len(coeffs) == 1 else np.stack(coeffs)
    h = math.ceil((1.0 - cwds.c_pr) * stacked.size)
    alpha0 = cwds.zeta * mean_of_largest(stacked, h)
    report = _run(problems, pdfp, cwds, alpha0, record_objective)
    return np.stack([p.f for p in problems]), report


def inflate_frames(stack, target_frames: int) -> np.ndarray:
    """Repeat each frame ``ceil(target / T)`` times and truncate to ``target``."""
    stack = np.asarray(stack)
    frames = stack.shape[0]
    if target_frames < frames:
        raise ValueError(f"target_frames={target_frames} is smaller than T={frames}")
    return stack[inflation_index(frames, target_frames)]


def inflation_index(frames: int, target_frames: int) -> np.ndarray:
    """Original frame index of each inflated frame."""
    reps = math.ceil(target_frames / frames)
    return np.repeat(np.arange(frames), reps)[:target_frames]


def combine_frames(stack, original_frames: int, mode: str = "average") -> np.ndarray:
    """Undo :func:`inflate_frames`: average the replicates or keep the middle one."""
    stack = np.asarray(stack)
    owner = inflation_index(original_frames, stack.shape[0])
    out = []
    for t in range(original_frames):
        reps = np.flatnonzero(owner == t)
        if mode == "average":
            out.append(stack[reps].mean(axis=0))
        elif mode == "middle":
            out.append(stack[reps[(len(reps) - 1) // 2]])
        else:
            raise ValueError(f"unknown combine mode {mode!r}")
    return np.stack(out)


def frames_for_3d(frames: int, minimum: int = 33) -> int:
    """Inflated frame count: the smallest multiple of ``frames`` that is >= ``minimum``."""
    return frames * math.ceil(minimum / frames)
