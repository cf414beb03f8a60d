"""Iteration driver: single level-set update steps, stagnation
detection, and the 3-stage split strategy (absorption first, then
diffusion, then interleaved updates).

Each step evaluates the residuals at the current iterate, solves one
adjoint problem per experiment, assembles the update right-hand sides,
and moves only the flagged level sets.  The misfit recorded at entry k
of the history always belongs to the k-th iterate, so a run of n steps
produces exactly n + 1 records.
"""

from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import fem, forward, gradient
from .forward import ParameterBox
from .levelset import classify, project_smooth


class Stage(Enum):
    C_ONLY = "c-only"
    A_ONLY = "a-only"
    JOINT = "joint"


@dataclass
class StageSchedule:
    """Transition plan for the 3-stage strategy.

    k1 and k2 are the iteration budgets ending stages 1 (absorption
    only) and 2 (diffusion only); stage 3 interleaves updates with
    `ratio` = (a-steps, c-steps) per cycle.  With use_stagnation=True
    the stage transitions may fire early once the tracked coefficient
    stagnates (k1/k2 then act as caps).
    """

    k1: int = 250
    k2: int = 750
    ratio: tuple = (2, 1)
    max_iter: int = 2500
    stag_window: int = 50
    stag_tol: float = 1e-4
    use_stagnation: bool = False

    def __post_init__(self):
        if not (0 <= self.k1 < self.k2 or (self.k1 == 0 and self.k2 == 0)):
            raise ValueError("schedule must satisfy k1 < k2 (or k1 = k2 = 0)")
        if self.k2 > self.max_iter:
            raise ValueError("k2 must not exceed max_iter")
        na, nc = self.ratio
        if na < 0 or nc < 0 or (na == 0 and nc == 0):
            raise ValueError("stage-3 ratio components must be >= 0, not both 0")
        if self.stag_window < 2:
            raise ValueError("stagnation window must be >= 2")


@dataclass
class IterationConfig:
    """Numerical knobs of a single run (regularization, solver, bounds).

    alpha None means auto-scaling: chosen at run start so the first
    update moves each level set by step_target * max(1, max|phi_0|)
    in the max norm.
    """

    alpha_a: float | None = None
    alpha_c: float | None = None
    beta_a: float = 0.0
    beta_c: float = 0.0
    eta: float = 1e-8
    settings: fem.SolverSettings = field(
        default_factory=lambda: fem.SolverSettings(method="direct"))
    box: ParameterBox = field(default_factory=ParameterBox)
    step_target: float = 0.1


@dataclass
class IterationRecord:
    """One history row; errors compare the half-level classified
    reconstruction to the ground truth, synthetic mode only."""

    iter: int
    stage: str
    misfit: float
    err_a: float | None = None
    err_c: float | None = None
    err_a_abs: float | None = None
    err_c_abs: float | None = None
    step_a: float = 0.0
    step_c: float = 0.0


@dataclass
class _Evaluation:
    a: np.ndarray
    c: np.ndarray
    system: fem.SpdSystem
    u_list: list
    r_list: list
    misfit: float


@dataclass
class IterationState:
    mesh: object
    ls: object
    iter: int = 0
    stage: Stage = Stage.JOINT
    history: list = field(default_factory=list)
    truth: tuple | None = None
    converged: bool = False
    stop_reason: str = ""
    evaluation: _Evaluation | None = None
    alphas: tuple = (None, None)


def evaluate(mesh, ls, experiments, config):
    """Residuals, forward solutions and misfit of the current iterate."""
    a, c = project_smooth(ls)
    system = fem.assemble_system(mesh, a, c, box=config.box.as_tuple())
    r_list, u_list = forward.residuals(mesh, a, c, experiments,
                                       config.settings, system=system)
    mis = forward.misfit(mesh, r_list)
    if not np.isfinite(mis):
        raise RuntimeError(f"misfit became non-finite ({mis}); aborting run")
    return _Evaluation(a=a, c=c, system=system, u_list=u_list,
                       r_list=r_list, misfit=mis)


def _errors(mesh, ls, truth):
    # two-valued reconstruction errors, thresholding the ramp at its
    # half level (the data constrain the ramp midpoint, not phi = 0)
    if truth is None:
        return (None,) * 4
    a_true, c_true = truth
    a_rec, c_rec = classify(ls)
    ea = fem.l2_norm(mesh, a_rec - a_true)
    ec = fem.l2_norm(mesh, c_rec - c_true)
    return (ea / fem.l2_norm(mesh, a_true), ec / fem.l2_norm(mesh, c_true),
            ea, ec)


def _make_record(mesh, ls, it, stage, misfit_value, truth,
                 step_a=0.0, step_c=0.0):
    ea, ec, ea_abs, ec_abs = _errors(mesh, ls, truth)
    return IterationRecord(iter=it, stage=stage.value, misfit=misfit_value,
                           err_a=ea, err_c=ec, err_a_abs=ea_abs,
                           err_c_abs=ec_abs, step_a=step_a, step_c=step_c)


def _gradient_sums(mesh, ev, config, need_a, need_c):
    sum_da = np.zeros(mesh.n_nodes)
    sum_dc = np.zeros(mesh.n_nodes)
    for u, r in zip(ev.u_list, ev.r_list):
        w = gradient.adjoint_solve(mesh, ev.a, ev.c, r, config.settings,
                                   system=ev.system)
        da, dc = gradient.shape_derivative_fields(mesh, u, w)
        if need_a:
            sum_da += da
        if need_c:
            sum_dc += dc
    return sum_da, sum_dc


def iterate_step(state, experiments, config, update_a, update_c, stage=None):
    """One Table-style iteration: residuals, adjoints, update solves,
    level-set moves for the flagged coefficients only."""
    if not (update_a or update_c):
        raise ValueError("at least one of update_a/update_c must be set")
    if (update_a and config.alpha_a is None) or \
            (update_c and config.alpha_c is None):
        raise ValueError("alphas must be resolved before stepping (use run_*)")
    stage = stage if stage is not None else state.stage
    mesh = state.mesh
    ev = state.evaluation
    if ev is None:
        ev = evaluate(mesh, state.ls, experiments, config)

    sum_da, sum_dc = _gradient_sums(mesh, ev, config, update_a, update_c)
    terms_a = gradient.assemble_L(mesh, state.ls, sum_da, sum_dc,
                                  config.alpha_a or 1.0, config.beta_a, 0.0,
                                  config.eta)
    terms_c = gradient.assemble_L(mesh, state.ls, sum_da, sum_dc,
                                  config.alpha_c or 1.0, 0.0, config.beta_c,
                                  config.eta)

    new_ls = state.ls.copy()
    step_a = step_c = 0.0
    if update_a:
        dphi_a = gradient.update_solve(mesh, terms_a.L_a, config.settings)
        new_phi_a = gradient.apply_update(state.ls.phi_a, dphi_a, config.alpha_a)
        step_a = fem.l2_norm(mesh, new_phi_a - state.ls.phi_a)
        new_ls.phi_a = new_phi_a
    else:
        new_ls.phi_a = state.ls.phi_a
    if update_c:
        dphi_c = gradient.update_solve(mesh, terms_c.L_c, config.settings)
        new_phi_c = gradient.apply_update(state.ls.phi_c, dphi_c, config.alpha_c)
        step_c = fem.l2_norm(mesh, new_phi_c - state.ls.phi_c)
        new_ls.phi_c = new_phi_c
    else:
        new_ls.phi_c = state.ls.phi_c

    new_eval = evaluate(mesh, new_ls, experiments, config)
    record = _make_record(mesh, new_ls, state.iter + 1, stage, new_eval.misfit,
                          state.truth, step_a, step_c)
    return IterationState(mesh=mesh, ls=new_ls, iter=state.iter + 1,
                          stage=stage, history=state.history + [record],
                          truth=state.truth, evaluation=new_eval)


def stagnation_check(history, window, tol, mesh):
    """True when the tracked coefficient field barely moved over the
    last `window` records.

    `history` is the chronological sequence of coefficient snapshots
    (newest last); returns False while shorter than window + 1.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(history) < window + 1:
        return False
    x_now = history[-1]
    x_then = history[-1 - window]
    num = fem.l2_norm(mesh, x_now - x_then)
    den = max(fem.l2_norm(mesh, x_now), 1e-12)
    return num / den < tol


def resolve_alphas(mesh, ls, experiments, config, initial_eval=None,
                   which="both"):
    """Concrete step scalings (auto-scaled unless given).

    The auto rule solves one update per level set at the passed state
    and picks alpha so the first applied step has max norm
    step_target * max(1, max|phi|).  The drivers resolve each
    coefficient's alpha at the state where its first update actually
    happens (a stale startup scaling would make later stages inert once
    the residual has shrunk).
    """
    need_a = which in ("a", "both") and config.alpha_a is None
    need_c = which in ("c", "both") and config.alpha_c is None
    if not (need_a or need_c):
        return config, initial_eval
    ev = initial_eval
    if ev is None:
        ev = evaluate(mesh, ls, experiments, config)
    sum_da, sum_dc = _gradient_sums(mesh, ev, config, need_a, need_c)
    terms = gradient.assemble_L(mesh, ls, sum_da, sum_dc, 1.0, 0.0, 0.0,
                                config.eta)

    def auto(data_part, phi0):
        dphi = gradient.update_solve(mesh, data_part, config.settings)
        target = config.step_target * max(1.0, float(np.max(np.abs(phi0))))
        peak = float(np.max(np.abs(dphi)))
        return peak / target if peak > 0 else 1.0

    alpha_a = config.alpha_a
    alpha_c = config.alpha_c
    if need_a:
        alpha_a = auto(terms.data_part_a, ls.phi_a)
    if need_c:
        alpha_c = auto(terms.data_part_c, ls.phi_c)
    return replace(config, alpha_a=alpha_a, alpha_c=alpha_c), ev


class _Tracker:
    """Rolling coefficient snapshots feeding stagnation_check."""

    def __init__(self, mesh, window):
        self.mesh = mesh
        self.window = window
        self.snaps_a = deque(maxlen=window + 1)
        self.snaps_c = deque(maxlen=window + 1)

    def push(self, ls):
        a, c = project_smooth(ls)
        self.snaps_a.append(a)
        self.snaps_c.append(c)

    def reset(self, which):
        # drop snapshots taken while the coefficient was frozen, else the
        # next stage would detect stagnation instantly
        if which in ("a", "joint"):
            self.snaps_a.clear()
        if which in ("c", "joint"):
            self.snaps_c.clear()

    def stagnant(self, which, tol):
        if which == "a":
            return stagnation_check(self.snaps_a, self.window, tol, self.mesh)
        if which == "c":
            return stagnation_check(self.snaps_c, self.window, tol, self.mesh)
        return (stagnation_check(self.snaps_a, self.window, tol, self.mesh)
                and stagnation_check(self.snaps_c, self.window, tol, self.mesh))


def _stage3_flags(pos, ratio):
    # Overlapped cycle: position t updates a while t < n_a and c while
    # t < n_c, so ratio (1, 1) is exactly one joint step per cycle.
    na, nc = ratio
    cycle = max(na, nc)
    t = pos % cycle
    return t < na, t < nc


def run_three_stage(mesh, initial, experiments, schedule, config, truth=None,
                    on_iterate=None):
    """Full split-strategy run; returns (final state, history).

    Stage 1 updates the absorption level set only (budget k1, or earlier
    stagnation when use_stagnation is set), stage 2 the diffusion one
    (budget k2), stage 3 interleaves per schedule.ratio until max_iter
    or joint stagnation.  Hitting max_iter is a normal completion with
    converged=False.
    """
    ev = evaluate(mesh, initial, experiments, config)
    tracker = _Tracker(mesh, schedule.stag_window)
    tracker.push(initial)

    if schedule.k1 > 0:
        first_stage = Stage.C_ONLY
    elif schedule.k2 > 0:
        first_stage = Stage.A_ONLY
    else:
        first_stage = Stage.JOINT
    state = IterationState(
        mesh=mesh, ls=initial, iter=0, stage=first_stage,
        history=[_make_record(mesh, initial, 0, first_stage, ev.misfit, truth)],
        truth=truth, evaluation=ev)
    if on_iterate is not None:
        on_iterate(state)

    # stage 1: absorption only
    if state.iter < min(schedule.k1, schedule.max_iter):
        config, _ = resolve_alphas(mesh, state.ls, experiments, config,
                                   state.evaluation, which="c")
    while state.iter < min(schedule.k1, schedule.max_iter):
        if schedule.use_stagnation and tracker.stagnant("c", schedule.stag_tol):
            break
        state = iterate_step(state, experiments, config, False, True,
                             stage=Stage.C_ONLY)
        tracker.push(state.ls)
        if on_iterate is not None:
            on_iterate(state)

    # stage 2: diffusion only
    if state.iter > 0:
        tracker.reset("a")
    if state.iter < min(schedule.k2, schedule.max_iter):
        config, _ = resolve_alphas(mesh, state.ls, experiments, config,
                                   state.evaluation, which="a")
    while state.iter < min(schedule.k2, schedule.max_iter):
        if schedule.use_stagnation and tracker.stagnant("a", schedule.stag_tol):
            break
        state = iterate_step(state, experiments, config, True, False,
                             stage=Stage.A_ONLY)
        tracker.push(state.ls)
        if on_iterate is not None:
            on_iterate(state)

    # stage 3: interleaved updates
    if state.iter > 0:
        tracker.reset("joint")
    if state.iter < schedule.max_iter:
        config, _ = resolve_alphas(mesh, state.ls, experiments, config,
                                   state.evaluation, which="both")
    pos = 0
    while state.iter < schedule.max_iter:
        if tracker.stagnant("joint", schedule.stag_tol):
            state.stop_reason = "stagnation"
            break
        ua, uc = _stage3_flags(pos, schedule.ratio)
        state = iterate_step(state, experiments, config, ua, uc,
                             stage=Stage.JOINT)
        tracker.push(state.ls)
        pos += 1
        if on_iterate is not None:
            on_iterate(state)
    else:
        state.stop_reason = "max_iter"
    state.alphas = (config.alpha_a, config.alpha_c)
    return state, state.history


def run_fixed(mesh, initial, experiments, config, which, max_iter,
              truth=None, target_err=1e-2, stag_window=50, stag_tol=1e-4,
              on_iterate=None):
    """Plain iteration restricted to one coefficient (or both).

    Stops at max_iter, at the error target vs truth (relative or
    absolute, synthetic mode only), or on stagnation of the tracked
    coefficient(s); returns (final state, history).
    """
    flags = {"a-only": (True, False), "c-only": (False, True),
             "joint": (True, True)}
    stage_of = {"a-only": Stage.A_ONLY, "c-only": Stage.C_ONLY,
                "joint": Stage.JOINT}
    if which not in flags:
        raise ValueError(f"unknown mode {which!r}")
    ua, uc = flags[which]
    stage = stage_of[which]

    ev = evaluate(mesh, initial, experiments, config)
    need = {"a-only": "a", "c-only": "c", "joint": "both"}[which]
    config, _ = resolve_alphas(mesh, initial, experiments, config, ev,
                               which=need)
    tracker = _Tracker(mesh, stag_window)
    tracker.push(initial)
    state = IterationState(
        mesh=mesh, ls=initial, iter=0, stage=stage,
        history=[_make_record(mesh, initial, 0, stage, ev.misfit, truth)],
        truth=truth, evaluation=ev)
    if on_iterate is not None:
        on_iterate(state)

    def target_met(rec):
        if truth is None:
            return False
        pairs = {"a-only": ((rec.err_a, rec.err_a_abs),),
                 "c-only": ((rec.err_c, rec.err_c_abs),),
                 "joint": ((rec.err_a, rec.err_a_abs),
                           (rec.err_c, rec.err_c_abs))}[which]
        return all(min(rel, abs_) <= target_err for rel, abs_ in pairs)

    if target_met(state.history[0]):
        state.converged = True
        state.stop_reason = "target"
        state.alphas = (config.alpha_a, config.alpha_c)
        return state, state.history

    track = {"a-only": "a", "c-only": "c", "joint": "joint"}[which]
    while state.iter < max_iter:
        state = iterate_step(state, experiments, config, ua, uc, stage=stage)
        tracker.push(state.ls)
        if on_iterate is not None:
            on_iterate(state)
        if target_met(state.history[-1]):
            state.converged = True
            state.stop_reason = "target"
            break
        if tracker.stagnant(track, stag_tol):
            state.stop_reason = "stagnation"
            break
    else:
        state.stop_reason = "max_iter"
    state.alphas = (config.alpha_a, config.alpha_c)
    return state, state.history
