"""Monte-Carlo trial ensembles, scaling fits, and sensitivity curves.

A trial is one full protocol execution: draw a thermal initial state,
evolve it through the schedule's segments with recoil diffusion, add
the kick, generate the readout record, and retrodict the state at the
protocol reference time.  The harness runs ensembles of such trials
with deterministic seeding and reduces them to the quantities of
interest: displacement means, total position noise, minimum resolvable
impulse, and their standard errors.

Determinism contract: trial i of a run draws all of its randomness
from ``numpy.random.default_rng([master_seed, i])`` in a fixed order
set by the schedule alone.  Trials are batched into fixed-size chunks
for the kernels and the reduction is an ordered write by trial index,
so results are bit-identical for any worker count.

The per-trial noise sources and their budget: the thermal preparation
contributes variance 2 n + 1 to the amplified position, the finite
detection efficiency bounds the retrodiction variance by 1/sqrt(eta),
and recoil heating during the soft phases adds 2 pi gamma_qb r / Omega.
The minimum resolvable impulse is the quadrature sum divided by r.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import DynamicsModel, propagate, soft_model, transition
from .estimation import readout_model, retrodiction_schedule
from .params import OscillatorParams, db_ratio
from .protocol import ProtocolSchedule, Segment, validate
from .records import MeasurementRecord
from .state import GaussianState, apply_impulse

CHUNK = 256
DEFAULT_DT_PER_PERIOD = 200
MIN_STATS_TRIALS = 10


def model_for_segment(params: OscillatorParams, segment: Segment) -> DynamicsModel:
    """Dynamics model realizing one schedule segment.

    Recoil diffusion scales with optical power, i.e. with the square
    of the local frequency ratio; detection contributes only where the
    segment gates it on.
    """
    if segment.kind == "soft":
        return soft_model(params, 1.0 / segment.freq_ratio)
    return DynamicsModel(
        omega=params.omega,
        freq_ratio=segment.freq_ratio,
        gamma_fb=params.gamma_fb if segment.feedback_on else 0.0,
        diffusion_p=4.0 * params.gamma_qb * segment.freq_ratio**2,
        meas_rate=4.0 * params.eta * params.gamma_qb if segment.measurement_on else 0.0,
    )


@dataclass(frozen=True)
class TrialResult:
    """Outcome of a single simulated trial."""

    outcome: np.ndarray
    true_state: np.ndarray
    trial_index: int
    seed: tuple[int, int]


@dataclass(frozen=True)
class Ensemble:
    """All trials of one (schedule, params, seed) configuration.

    ``outcomes`` holds the retrodicted (Q, P) at t_zero per trial,
    ``truths`` the simulator's hidden true state at the same instant.
    ``est_cov`` is the shared retrodiction covariance (it is
    record-independent for a linear Gaussian model).
    """

    params: OscillatorParams
    r: float
    tau_s: float
    mode: str
    master_seed: int
    dt_per_period: int
    outcomes: np.ndarray = field(repr=False)
    truths: np.ndarray = field(repr=False)
    est_cov: np.ndarray = field(repr=False)

    @property
    def n_trials(self) -> int:
        return self.outcomes.shape[0]

    @property
    def signal_axis(self) -> int:
        """0 (Q) for amplified runs, 1 (P) for conventional ones.

        Amplification rotates the kick into position; without it the
        kick stays on the momentum axis.
        """
        return 0 if self.mode == "amplified" else 1

    @property
    def trials(self) -> list[TrialResult]:
        return [
            TrialResult(
                outcome=self.outcomes[i].copy(),
                true_state=self.truths[i].copy(),
                trial_index=i,
                seed=(self.master_seed, i),
            )
            for i in range(self.n_trials)
        ]


@dataclass(frozen=True)
class _SegmentPlan:
    kind: str
    model: DynamicsModel | None
    n_steps: int
    dt: float
    t_begin: float
    kick_dp: float
    is_readout: bool


def _plan_segments(
    schedule: ProtocolSchedule,
    params: OscillatorParams,
    dt_per_period: int,
    include_hold: bool,
) -> list[_SegmentPlan]:
    violations = validate(schedule)
    if violations:
        raise ValueError("invalid schedule: " + "; ".join(violations))
    plans: list[_SegmentPlan] = []
    for t_begin, _, seg in schedule.boundaries():
        if seg.kind == "feedback_hold" and not include_hold:
            continue
        if seg.kind == "kick":
            plans.append(_SegmentPlan("kick", None, 0, 0.0, t_begin, seg.kick_dp, False))
            continue
        if seg.duration_s == 0.0:
            continue
        model = model_for_segment(params, seg)
        target = model.local_period / dt_per_period
        n_steps = max(1, math.ceil(seg.duration_s / target - 1e-9))
        dt = seg.duration_s / n_steps
        plans.append(
            _SegmentPlan(
                seg.kind, model, n_steps, dt, t_begin, 0.0, seg.kind == "readout"
            )
        )
    return plans


def _trial_init_std(params: OscillatorParams) -> float:
    return math.sqrt(2.0 * params.n_init + 1.0)


def _draw_trial_noise(rng, plans):
    """Draw every random number of one trial in the fixed order.

    Order: 2 normals for the initial state, then per segment (in
    timeline order) first the process normals, then the record
    normals.  The order depends only on the schedule, never on data.
    """
    init = rng.standard_normal(2)
    per_segment = []
    for plan in plans:
        if plan.kind == "kick":
            per_segment.append((None, None))
            continue
        w = rng.standard_normal((plan.n_steps, 2)) if plan.model.diffusion_p > 0.0 else None
        v = rng.standard_normal(plan.n_steps) if plan.model.meas_rate > 0.0 else None
        per_segment.append((w, v))
    return init, per_segment


def _simulate_chunk(start, stop, plans, master_seed, init_std, ops):
    """Simulate trials [start, stop): truths at t_zero plus readout records."""
    m = stop - start
    inits = np.empty((m, 2))
    seg_w = []
    seg_v = []
    for plan in plans:
        if plan.kind == "kick" or plan.model.diffusion_p <= 0.0:
            seg_w.append(None)
        else:
            seg_w.append(np.empty((m, plan.n_steps, 2)))
        if plan.kind == "kick" or plan.model.meas_rate <= 0.0:
            seg_v.append(None)
        else:
            seg_v.append(np.empty((m, plan.n_steps)))
    for i in range(m):
        rng = np.random.default_rng([master_seed, start + i])
        init, noise = _draw_trial_noise(rng, plans)
        inits[i] = init
        for j, (w, v) in enumerate(noise):
            if w is not None:
                seg_w[j][i] = w
            if v is not None:
                seg_v[j][i] = v

    x = init_std * inits
    truths = None
    readout = None
    zeros2 = None
    for j, plan in enumerate(plans):
        if plan.kind == "kick":
            x = x.copy()
            x[:, 1] += plan.kick_dp
            continue
        if plan.is_readout:
            truths = x.copy()
        f, l, sqrt_k, noise_scale = ops[j]
        w = seg_w[j]
        if w is None:
            if zeros2 is None or zeros2.shape[1] != plan.n_steps:
                zeros2 = np.zeros((m, plan.n_steps, 2))
            w = zeros2
        if seg_v[j] is not None:
            x, y = _kernels.roll_record(x, f, l, w, seg_v[j], sqrt_k, noise_scale)
            if plan.is_readout:
                readout = y
        else:
            x = _kernels.roll(x, f, l, w)
    if truths is None:
        truths = x.copy()
    return truths, readout


def run_ensemble(
    schedule: ProtocolSchedule,
    params: OscillatorParams,
    n_trials: int,
    master_seed: int,
    *,
    dt_per_period: int = DEFAULT_DT_PER_PERIOD,
    workers: int | None = None,
    init_mode: str = "direct",
) -> Ensemble:
    """Run n_trials of the schedule and retrodict every outcome.

    init_mode "direct" samples the initial state from the thermal
    preparation (the default; what the acceptance checks use).
    "servo" instead simulates the feedback_hold segment explicitly
    with cold damping approximated as deterministic velocity drag on
    the true trajectory.

    The result is bit-identical for any ``workers`` value.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if init_mode not in ("direct", "servo"):
        raise ValueError("init_mode must be 'direct' or 'servo'")
    plans = _plan_segments(schedule, params, dt_per_period, include_hold=init_mode == "servo")
    readout_plan = [p for p in plans if p.is_readout]
    if not readout_plan:
        raise ValueError("schedule has no readout segment")
    ro = readout_plan[0]

    ops = []
    for plan in plans:
        if plan.kind == "kick":
            ops.append(None)
            continue
        f, qd = transition(plan.model, plan.dt)
        ops.append(
            (
                f,
                _kernels.chol2x2(qd),
                math.sqrt(plan.model.meas_rate),
                1.0 / math.sqrt(plan.dt),
            )
        )

    est_model = readout_model(params)
    finv, gains, sqrt_k, est_cov = retrodiction_schedule(est_model, ro.dt, ro.n_steps)
    init_std = _trial_init_std(params)

    outcomes = np.empty((n_trials, 2))
    truths = np.empty((n_trials, 2))

    def work(start: int, stop: int) -> None:
        chunk_truths, readout = _simulate_chunk(
            start, stop, plans, master_seed, init_std, ops
        )
        est = _kernels.filter_backward(readout, finv, gains, sqrt_k)
        outcomes[start:stop] = est
        truths[start:stop] = chunk_truths

    spans = [(s, min(s + CHUNK, n_trials)) for s in range(0, n_trials, CHUNK)]
    if workers is None:
        workers = 1
    if workers <= 1 or len(spans) == 1:
        for start, stop in spans:
            work(start, stop)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(work, start, stop) for start, stop in spans]
            for future in futures:
                future.result()

    bad = np.flatnonzero(~np.all(np.isfinite(outcomes), axis=1) | ~np.all(np.isfinite(truths), axis=1))
    if bad.size:
        raise RuntimeError(f"trial {int(bad[0])} produced a non-finite result; ensemble aborted")

    return Ensemble(
        params=params,
        r=schedule.squeeze_ratio,
        tau_s=schedule.tau_s,
        mode=schedule.mode,
        master_seed=int(master_seed),
        dt_per_period=int(dt_per_period),
        outcomes=outcomes,
        truths=truths,
        est_cov=est_cov,
    )


def simulate_trial(
    schedule: ProtocolSchedule,
    params: OscillatorParams,
    master_seed: int,
    trial_index: int,
    *,
    dt_per_period: int = DEFAULT_DT_PER_PERIOD,
    init_mode: str = "direct",
) -> tuple[np.ndarray, list[MeasurementRecord]]:
    """Re-run one trial, returning its true state at t_zero and records.

    Uses the same noise stream and kernels as :func:`run_ensemble`, so
    the records fed through :func:`levamp.estimation.estimate_trial_outcome`
    reproduce that trial's ensemble outcome (up to arithmetic
    reordering in the filters).
    """
    plans = _plan_segments(schedule, params, dt_per_period, include_hold=init_mode == "servo")
    rng = np.random.default_rng([master_seed, trial_index])
    init, noise = _draw_trial_noise(rng, plans)
    x = _trial_init_std(params) * init

    records: list[MeasurementRecord] = []
    truth = None
    for plan, (w, v) in zip(plans, noise):
        if plan.kind == "kick":
            x = x.copy()
            x[1] += plan.kick_dp
            continue
        if plan.is_readout:
            truth = x.copy()
        f, qd = transition(plan.model, plan.dt)
        l = _kernels.chol2x2(qd)
        if w is None:
            w = np.zeros((plan.n_steps, 2))
        xb = x[None, :]
        if v is not None:
            xb, y = _kernels.roll_record(
                xb, f, l, w[None], v[None], math.sqrt(plan.model.meas_rate),
                1.0 / math.sqrt(plan.dt),
            )
            records.append(
                MeasurementRecord(
                    t0=plan.t_begin,
                    dt=plan.dt,
                    samples=y[0],
                    gate=np.ones(plan.n_steps, dtype=bool),
                )
            )
        else:
            xb = _kernels.roll(xb, f, l, w[None])
        x = xb[0]
    if truth is None:
        truth = x.copy()
    return truth, records


def run_schedule_noiseless(
    schedule: ProtocolSchedule,
    params: OscillatorParams,
    state: GaussianState,
    *,
    dt_per_period: int = DEFAULT_DT_PER_PERIOD,
    stop_at_zero: bool = True,
) -> GaussianState:
    """Deterministic protocol map with diffusion and detection off.

    Skips the feedback_hold segment (the map describes what the
    protocol does to a prepared state) and by default stops at t_zero,
    before the readout rotation.  The amplified map sends mean
    (Q0, P0) with kick dP to (-Q0 + r dP, -P0) and returns the
    covariance to its initial value.
    """
    plans = _plan_segments(schedule, params, dt_per_period, include_hold=False)
    for plan in plans:
        if plan.is_readout and stop_at_zero:
            break
        if plan.kind == "kick":
            state = apply_impulse(state, plan.kick_dp)
            continue
        state, _ = propagate(state, plan.model.noiseless(), plan.n_steps * plan.dt, plan.dt)
    return state


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class EnsembleStats:
    """Signal-axis summary of an ensemble with jackknife errors.

    ``cov`` is the 2x2 sample covariance of the outcomes, the matrix
    behind the phase-space scatter ellipse; its eigenvalue square roots
    are the ellipse semi-axes.
    """

    n: int
    axis: str
    signal_mean: float
    signal_mean_se: float
    sigma: float
    sigma_se: float
    means: np.ndarray
    stds: np.ndarray
    cov: np.ndarray


def _jackknife_std_se(x: np.ndarray) -> float:
    """Standard error of the sample std via leave-one-out jackknife.

    Uses the closed-form O(n) update of the leave-one-out sum of
    squares instead of n full recomputations.
    """
    n = x.size
    mean = x.mean()
    dev = x - mean
    ss = float(dev @ dev)
    loo_ss = ss - dev**2 * (n / (n - 1.0))
    loo_std = np.sqrt(np.maximum(loo_ss, 0.0) / (n - 2.0))
    return float(np.sqrt((n - 1.0) / n * np.sum((loo_std - loo_std.mean()) ** 2)))


def ensemble_stats(ensemble: Ensemble) -> EnsembleStats:
    """Means and spreads along the signal axis, with standard errors.

    The signal axis is Q for amplified ensembles (the kick emerges as
    a position displacement) and P for conventional ones.
    """
    n = ensemble.n_trials
    if n < MIN_STATS_TRIALS:
        raise ValueError(f"need at least {MIN_STATS_TRIALS} trials for ensemble statistics")
    axis = ensemble.signal_axis
    signal = ensemble.outcomes[:, axis]
    sigma = float(signal.std(ddof=1))
    centered = ensemble.outcomes - ensemble.outcomes.mean(axis=0)
    return EnsembleStats(
        n=n,
        axis="Q" if axis == 0 else "P",
        signal_mean=float(signal.mean()),
        signal_mean_se=sigma / math.sqrt(n),
        sigma=sigma,
        sigma_se=_jackknife_std_se(signal),
        means=ensemble.outcomes.mean(axis=0),
        stds=ensemble.outcomes.std(axis=0, ddof=1),
        cov=centered.T @ centered / (n - 1.0),
    )


@dataclass(frozen=True)
class DisplacementFit:
    """Weighted straight-line-through-origin fit of displacement vs tau."""

    r: float
    k: float
    k_se: float
    taus: np.ndarray
    dq_means: np.ndarray
    dq_ses: np.ndarray


def fit_displacement_vs_tau(ensembles) -> DisplacementFit:
    """Fit signal displacement = k * tau across pulse lengths.

    Expects ensembles sharing one squeeze ratio and differing in tau;
    at least three distinct pulse lengths are required for a
    meaningful slope and residual check.
    """
    ensembles = list(ensembles)
    taus = np.array([e.tau_s for e in ensembles])
    if np.unique(taus).size < 3:
        raise ValueError("need at least three distinct pulse lengths to fit the scaling")
    rs = {round(e.r, 12) for e in ensembles}
    if len(rs) != 1:
        raise ValueError("all ensembles in a scaling fit must share one squeeze ratio")
    stats = [ensemble_stats(e) for e in ensembles]
    y = np.array([s.signal_mean for s in stats])
    se = np.array([s.signal_mean_se for s in stats])
    w = 1.0 / se**2
    denom = float(np.sum(w * taus**2))
    k = float(np.sum(w * taus * y) / denom)
    return DisplacementFit(
        r=ensembles[0].r,
        k=k,
        k_se=1.0 / math.sqrt(denom),
        taus=taus,
        dq_means=y,
        dq_ses=se,
    )


def fit_k1(fits) -> tuple[float, float]:
    """Reduce per-ratio slopes k(r) to the bare impulse rate k1.

    The amplified displacement is r times the transferred momentum, so
    k(r) = k1 * r with k1 = kappa_imp * U_p.  Weighted fit through the
    origin over at least two distinct ratios.
    """
    fits = list(fits)
    rs = np.array([f.r for f in fits])
    if np.unique(rs).size < 2:
        raise ValueError("need at least two distinct squeeze ratios to fit k1")
    ks = np.array([f.k for f in fits])
    ses = np.array([f.k_se for f in fits])
    w = 1.0 / ses**2
    denom = float(np.sum(w * rs**2))
    k1 = float(np.sum(w * rs * ks) / denom)
    return k1, 1.0 / math.sqrt(denom)


# ---------------------------------------------------------------------------
# noise budget and sensitivity


@dataclass(frozen=True)
class NoiseBudget:
    """Closed-form variance budget of the amplified position signal."""

    sigma_qi_sq: float
    sigma_qf_sq: float
    recoil_term: float
    sigma_tot: float


def noise_budget(params: OscillatorParams, r: float) -> NoiseBudget:
    """Predicted total position noise after amplification by r.

    Thermal preparation contributes 2 n + 1, retrodiction with
    efficiency eta contributes 1/sqrt(eta), and recoil heating over
    the soft span adds 2 pi gamma_qb r / Omega.  A conventional run
    (r = 1) has no soft span and hence no recoil term.
    """
    if r < 1.0:
        raise ValueError("squeeze ratio r must be >= 1")
    sigma_qi_sq = 2.0 * params.n_init + 1.0
    sigma_qf_sq = 1.0 / math.sqrt(params.eta)
    recoil = 2.0 * math.pi * params.gamma_qb * r / params.omega if r > 1.0 else 0.0
    return NoiseBudget(
        sigma_qi_sq=sigma_qi_sq,
        sigma_qf_sq=sigma_qf_sq,
        recoil_term=recoil,
        sigma_tot=math.sqrt(sigma_qi_sq + sigma_qf_sq + recoil),
    )


@dataclass(frozen=True)
class SensitivityPoint:
    r: float
    sigma_tot: float
    sigma_tot_se: float
    dp_min_zp: float
    dp_min_zp_se: float
    dp_min_kev_c: float
    dp_min_kev_c_se: float
    db_vs_sqrt2pzp: float
    db_vs_sqrt2pzp_se: float
    db_vs_pzp: float
    db_vs_pzp_se: float


@dataclass(frozen=True)
class SensitivityCurve:
    params: OscillatorParams
    n_trials: int
    master_seed: int
    points: tuple[SensitivityPoint, ...]


def derive_seed(master_seed: int, index: int) -> int:
    """Stable per-ensemble seed derived from the master seed.

    Uses the splitting guarantees of numpy's SeedSequence, so derived
    streams never collide with each other or with the per-trial
    streams of any run, on any platform.
    """
    seq = np.random.SeedSequence([int(master_seed), int(index)])
    return int(seq.generate_state(1, np.uint64)[0])


def sensitivity_curve(
    params: OscillatorParams,
    r_grid,
    n_trials: int,
    master_seed: int,
    *,
    readout_periods: float = 5.0,
    dt_per_period: int = DEFAULT_DT_PER_PERIOD,
    workers: int | None = None,
) -> SensitivityCurve:
    """Monte-Carlo minimum resolvable impulse across squeeze ratios.

    Runs a null (dP = 0) ensemble per ratio; the spread of the
    retrodicted signal divided by r is the single-trial impulse
    resolution.  r = 1 entries use the conventional schedule, which
    has no soft span.  Reported in zp units, in keV/c through the
    configured zero-point momentum, and in dB relative to both the
    ideal-system resolution sqrt(2) p_zp and to p_zp itself.
    """
    from .protocol import build_amplified, build_conventional

    readout = readout_periods * params.period_s
    p_zp_kev = params.p_zp_report_kev_c()
    points = []
    for index, r in enumerate(r_grid):
        if r < 1.0:
            raise ValueError("squeeze ratios must be >= 1")
        if abs(r - 1.0) < 1e-9:
            schedule = build_conventional(params, tau=0.0, readout_duration=readout)
        else:
            schedule = build_amplified(params, r=r, tau=0.0, readout_duration=readout)
        ensemble = run_ensemble(
            schedule,
            params,
            n_trials,
            derive_seed(master_seed, index),
            dt_per_period=dt_per_period,
            workers=workers,
        )
        stats = ensemble_stats(ensemble)
        r_eff = max(r, 1.0)
        dp_zp = stats.sigma / r_eff
        dp_zp_se = stats.sigma_se / r_eff
        dp_kev = dp_zp * p_zp_kev
        db_factor = 10.0 / math.log(10.0)
        points.append(
            SensitivityPoint(
                r=float(r),
                sigma_tot=stats.sigma,
                sigma_tot_se=stats.sigma_se,
                dp_min_zp=dp_zp,
                dp_min_zp_se=dp_zp_se,
                dp_min_kev_c=dp_kev,
                dp_min_kev_c_se=dp_zp_se * p_zp_kev,
                db_vs_sqrt2pzp=db_ratio(dp_kev, math.sqrt(2.0) * p_zp_kev),
                db_vs_sqrt2pzp_se=db_factor * dp_zp_se / dp_zp,
                db_vs_pzp=db_ratio(dp_kev, p_zp_kev),
                db_vs_pzp_se=db_factor * dp_zp_se / dp_zp,
            )
        )
    return SensitivityCurve(
        params=params,
        n_trials=int(n_trials),
        master_seed=int(master_seed),
        points=tuple(points),
    )


# ---------------------------------------------------------------------------
# CSV emission (9 significant digits throughout)


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_ensemble_csv(ensemble: Ensemble, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("trial_index,q_est,p_est,q_true,p_true\n")
        for i in range(ensemble.n_trials):
            q_est, p_est = ensemble.outcomes[i]
            q_true, p_true = ensemble.truths[i]
            fh.write(
                f"{i},{_fmt(q_est)},{_fmt(p_est)},{_fmt(q_true)},{_fmt(p_true)}\n"
            )


def scaling_rows(fit: DisplacementFit) -> list[tuple[float, float, float, float]]:
    """Flatten a displacement fit into (r, tau_s, dq_mean, dq_se) rows."""
    order = np.argsort(fit.taus)
    return [
        (fit.r, float(fit.taus[j]), float(fit.dq_means[j]), float(fit.dq_ses[j]))
        for j in order
    ]


def write_scaling_csv(rows, path) -> None:
    """One row per (r, tau) ensemble: mean displacement and its SE."""
    with open(path, "w", newline="") as fh:
        fh.write("r,tau_s,dq_mean,dq_se\n")
        for r, tau_s, dq_mean, dq_se in rows:
            fh.write(f"{_fmt(r)},{_fmt(tau_s)},{_fmt(dq_mean)},{_fmt(dq_se)}\n")


def write_sensitivity_csv(curve: SensitivityCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("r,sigma_tot,dp_min_zp,dp_min_kev_c,db_vs_ideal,db_vs_pzp\n")
        for pt in curve.points:
            fh.write(
                f"{_fmt(pt.r)},{_fmt(pt.sigma_tot)},{_fmt(pt.dp_min_zp)},"
                f"{_fmt(pt.dp_min_kev_c)},{_fmt(pt.db_vs_sqrt2pzp)},{_fmt(pt.db_vs_pzp)}\n"
            )
