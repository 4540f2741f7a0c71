"""Synthetic interaction logs with planted structure.

Three generators cover the pipeline's oracle needs:

* ``generate`` — an organic simulator: users carry an activeness level that
  sets their impression volume, clicks follow a logistic affinity model
  over latent user/item vectors, and dwell time given a click is log-normal
  with its mean shifted by the same affinity (so dwell carries real signal)
  and optionally depressed by a per-item "bait" factor that inflates clicks
  while shortening reads.
* ``generate_rule_mix`` — a corpus whose valid reads split across the three
  labeling rules in exact, pre-computed proportions (the corpus ships the
  dwell statistics it was planted against).
* ``generate_migration_pair`` — a baseline log plus a treatment copy where
  low-activeness users' short reads are lengthened by a smooth monotone
  map, leaving per-cell migration deltas that are exactly recoverable.

Everything is deterministic given the config seed; closed-form or
quadrature oracles (mean click rate, light-user fraction) are provided for
property tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dwell_stats import DwellStats
from .events import InteractionEvent
from .evaluation import activeness_level, equal_frequency_boundaries, weekly_click_counts
from .profiles import WEEK_SECONDS

DAY_SECONDS = 86400


@dataclass(frozen=True, slots=True)
class ItemClass:
    """One item length class and its dwell-time law (parameters of ln T)."""

    name: str
    prob: float
    ln_dt_mean: float
    ln_dt_std: float

    def __post_init__(self):
        if self.ln_dt_std < 0:
            raise ValueError(f"class {self.name}: ln_dt_std must be >= 0")


DEFAULT_CLASSES = (
    ItemClass("short", 0.3, 3.0, 1.0),
    ItemClass("medium", 0.5, 4.0, 1.2),
    ItemClass("long", 0.2, 5.0, 1.0),
)

DEFAULT_ACTIVENESS_MIX = (0.30, 0.20, 0.15, 0.12, 0.10, 0.08, 0.05)
DEFAULT_IMPRESSIONS_PER_LEVEL = (4, 8, 14, 24, 40, 70, 120)


@dataclass(frozen=True, slots=True)
class SimConfig:
    n_users: int = 1000
    n_items: int = 300
    activeness_mix: tuple[float, ...] = DEFAULT_ACTIVENESS_MIX
    impressions_per_level: tuple[int, ...] = DEFAULT_IMPRESSIONS_PER_LEVEL
    latent_dim: int = 4
    user_scale: float = 1.0
    item_scale: float = 0.5
    click_bias: float = -1.5
    affinity_dt_coef: float = 0.0
    bait_click_coef: float = 0.0
    bait_dt_coef: float = 0.0
    item_classes: tuple[ItemClass, ...] = DEFAULT_CLASSES
    start_ts: int = 1_700_000_000
    span_days: int = 14
    valid_read_ref_s: float = 15.0
    seed: int = 0

    def __post_init__(self):
        if self.n_users < 1 or self.n_items < 1:
            raise ValueError("need at least one user and one item")
        if len(self.activeness_mix) != len(self.impressions_per_level):
            raise ValueError("activeness mix and impression counts must align")
        if abs(sum(self.activeness_mix) - 1.0) > 1e-9:
            raise ValueError("activeness mix must sum to 1")
        if abs(sum(c.prob for c in self.item_classes) - 1.0) > 1e-9:
            raise ValueError("item class probabilities must sum to 1")
        if self.span_days < 1 or self.latent_dim < 1:
            raise ValueError("span_days and latent_dim must be >= 1")


@dataclass(slots=True)
class SidecarRow:
    user_id: str
    item_id: str
    timestamp: int
    clicked: bool
    affinity: float
    user_level: int
    item_class: str
    vr_propensity: float


SIDECAR_HEADER = "user_id,item_id,timestamp,clicked,affinity,user_level,item_class,vr_propensity"


def sidecar_csv(rows: Sequence[SidecarRow]) -> str:
    lines = [SIDECAR_HEADER]
    for r in rows:
        lines.append(
            f"{r.user_id},{r.item_id},{r.timestamp},{1 if r.clicked else 0},"
            f"{r.affinity!r},{r.user_level},{r.item_class},{r.vr_propensity!r}"
        )
    return "\n".join(lines) + "\n"


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(x / math.sqrt(2.0)))


def generate(cfg: SimConfig) -> tuple[list[InteractionEvent], list[SidecarRow]]:
    """Draw one log; byte-identical for equal configs.

    Draw order is fixed: user levels, user latents, item latents, item bait,
    item classes, then per-impression item choices, timestamps, click coins,
    and dwell noise.
    """
    rng = np.random.default_rng(cfg.seed)
    n_levels = len(cfg.activeness_mix)
    levels = rng.choice(n_levels, size=cfg.n_users, p=np.asarray(cfg.activeness_mix))
    user_vecs = rng.standard_normal((cfg.n_users, cfg.latent_dim)) * cfg.user_scale
    item_vecs = rng.standard_normal((cfg.n_items, cfg.latent_dim)) * cfg.item_scale
    bait = rng.standard_normal(cfg.n_items)
    class_probs = np.asarray([c.prob for c in cfg.item_classes])
    item_class = rng.choice(len(cfg.item_classes), size=cfg.n_items, p=class_probs)

    imp_counts = np.asarray(cfg.impressions_per_level)[levels]
    total = int(imp_counts.sum())
    user_idx = np.repeat(np.arange(cfg.n_users), imp_counts)
    item_idx = rng.integers(0, cfg.n_items, size=total)
    span_s = cfg.span_days * DAY_SECONDS
    timestamps = cfg.start_ts + rng.integers(0, span_s, size=total)
    affinity = np.einsum("ij,ij->i", user_vecs[user_idx], item_vecs[item_idx])
    logit = cfg.click_bias + affinity + cfg.bait_click_coef * bait[item_idx]
    clicked = rng.random(total) < _stable_sigmoid(logit)

    class_mean = np.asarray([c.ln_dt_mean for c in cfg.item_classes])[item_class[item_idx]]
    class_std = np.asarray([c.ln_dt_std for c in cfg.item_classes])[item_class[item_idx]]
    ln_mean = class_mean + cfg.affinity_dt_coef * affinity - cfg.bait_dt_coef * bait[item_idx]
    ln_dt = ln_mean + class_std * rng.standard_normal(total)
    dwell = np.where(clicked, np.exp(ln_dt), 0.0)

    z = (math.log(cfg.valid_read_ref_s) - ln_mean) / np.where(class_std > 0, class_std, 1.0)
    propensity = np.where(
        class_std > 0,
        1.0 - _norm_cdf(z),
        (ln_mean > math.log(cfg.valid_read_ref_s)).astype(np.float64),
    )

    events: list[InteractionEvent] = []
    sidecar: list[SidecarRow] = []
    class_names = [c.name for c in cfg.item_classes]
    for row in range(total):
        u = int(user_idx[row])
        i = int(item_idx[row])
        event = InteractionEvent(
            user_id=f"u{u:06d}",
            item_id=f"i{i:06d}",
            timestamp=int(timestamps[row]),
            clicked=bool(clicked[row]),
            dwell_time_s=float(dwell[row]),
        )
        events.append(event)
        sidecar.append(
            SidecarRow(
                user_id=event.user_id,
                item_id=event.item_id,
                timestamp=event.timestamp,
                clicked=event.clicked,
                affinity=float(affinity[row]),
                user_level=int(levels[u]) + 1,
                item_class=class_names[int(item_class[i])],
                vr_propensity=float(propensity[row]),
            )
        )
    return events, sidecar


# -- analytic oracles ------------------------------------------------------


def _gauss_hermite_mean(f, sd: float, n_nodes: int = 120) -> float:
    """E[f(sd * Z)] for Z ~ N(0,1) by Gauss-Hermite quadrature."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    density_norm = math.sqrt(2.0 * math.pi)
    return float(np.sum(weights * f(sd * nodes)) / density_norm)


def _chi2_mean(h, k: int, n_nodes: int = 96) -> float:
    """E[h(Q)] for Q ~ chi-square with k degrees of freedom, via
    Gauss-Laguerre after substituting q = 2t."""
    nodes, weights = np.polynomial.laguerre.laggauss(n_nodes)
    vals = np.asarray([h(2.0 * t) for t in nodes])
    return float(np.sum(weights * vals * nodes ** (k / 2.0 - 1.0)) / math.gamma(k / 2.0))


def _mean_click_prob_given_radius2(cfg: SimConfig, q: float) -> float:
    """Mean click probability of a user whose latent squared norm is
    user_scale^2 * q; the item side integrates out to one Gaussian."""
    var = cfg.item_scale**2 * cfg.user_scale**2 * q + cfg.bait_click_coef**2
    sd = math.sqrt(var)
    return _gauss_hermite_mean(lambda x: 1.0 / (1.0 + np.exp(-(cfg.click_bias + x))), sd)


def analytic_click_rate(cfg: SimConfig) -> float:
    """Population mean click probability by nested quadrature over the
    latent distribution (user radius x 1-D Gaussian projection)."""
    return _chi2_mean(lambda q: _mean_click_prob_given_radius2(cfg, q), cfg.latent_dim)


def _binom_cdf(k_max: int, n: int, p: float) -> float:
    p = min(max(p, 0.0), 1.0)
    total = 0.0
    for j in range(0, min(k_max, n) + 1):
        total += math.comb(n, j) * p**j * (1.0 - p) ** (n - j)
    return min(total, 1.0)


def analytic_light_user_fraction(cfg: SimConfig, max_clicks: int = 7) -> float:
    """Probability a user has fewer than ``max_clicks`` clicks in the
    trailing week, implied by the activeness mix and the click model.

    Conditional on the user's latent radius the weekly click count is
    Binomial(impressions, p * week_fraction); the radius integrates out by
    quadrature and the mix weights the per-level counts.
    """
    week_frac = min(1.0, WEEK_SECONDS / (cfg.span_days * DAY_SECONDS))
    total = 0.0
    for mix, n_imp in zip(cfg.activeness_mix, cfg.impressions_per_level):
        if mix == 0.0:
            continue
        prob = _chi2_mean(
            lambda q: _binom_cdf(
                max_clicks - 1, n_imp, _mean_click_prob_given_radius2(cfg, q) * week_frac
            ),
            cfg.latent_dim,
        )
        total += mix * prob
    return total


def analytic_class_mix(cfg: SimConfig) -> dict[str, float]:
    return {c.name: c.prob for c in cfg.item_classes}


# -- planted rule-mix corpus -------------------------------------------------


@dataclass(frozen=True, slots=True)
class RuleMixConfig:
    n_valid_reads: int = 20000
    mix: tuple[float, float, float] = (0.8, 0.1, 0.1)
    noise_frac: float = 0.05
    unclicked_frac: float = 1.0
    t3_records_per_item: int = 20
    x_l: float = 15.0
    sigma: float = 1.295
    light_clicks_per_user: int = 6
    heavy_clicks_per_user: int = 40
    start_ts: int = 1_700_000_000
    span_days: int = 3
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.mix) - 1.0) > 1e-9:
            raise ValueError("rule mix must sum to 1")
        if self.span_days * DAY_SECONDS >= WEEK_SECONDS:
            raise ValueError("rule-mix corpus must fit inside one week window")
        if self.t3_records_per_item < 2:
            raise ValueError("t3_records_per_item must be >= 2")
        if not 0 < self.light_clicks_per_user < 7:
            raise ValueError("light users must keep fewer than 7 weekly clicks")


@dataclass(slots=True)
class RuleMixCorpus:
    events: list[InteractionEvent]
    stats: DwellStats
    analytic_mix: dict[str, float]
    analytic_counts: dict[str, int]
    intended: list[str]


def generate_rule_mix(cfg: RuleMixConfig) -> RuleMixCorpus:
    """Corpus whose valid reads split across T1/T2/T3 in known proportions.

    All events sit inside one 7-day window, so a user's in-window click
    count is just their total clicks: "heavy" users carry enough clicks to
    never be light, "light" users carry at most six.  Each T3 item holds
    exactly its own planted events, so with nearest-rank P10 and a strict
    comparison, exactly ceil(0.1 * k) of its k events fail the rule and
    become invalid clicks; the analytic mix accounts for that exactly.
    The returned stats are the ones the corpus was planted against (fitting
    stats from this corpus would not reproduce them; threshold recovery is
    the organic generator's job).
    """
    rng = np.random.default_rng(cfg.seed)
    mu = math.log(cfg.x_l) + cfg.sigma
    stats = DwellStats.from_moments(mu=mu, sigma=cfg.sigma, n=cfg.n_valid_reads)

    k = cfg.t3_records_per_item
    fails_per_item = math.ceil(0.1 * k)
    eff_per_item = k - fails_per_item
    n1 = round(cfg.mix[0] * cfg.n_valid_reads)
    n2 = round(cfg.mix[1] * cfg.n_valid_reads)
    m_items = round((cfg.n_valid_reads - n1 - n2) / eff_per_item)
    n3_planted = m_items * k
    n3_eff = m_items * eff_per_item
    n_vr = n1 + n2 + n3_eff
    n_noise = round(cfg.noise_frac * cfg.n_valid_reads)
    n_unclicked = round(cfg.unclicked_frac * cfg.n_valid_reads)

    # The light-user window looks backward from each event, so a heavy user
    # must already hold 7 clicks when their first rule-bearing event lands.
    # Seven warm-up clicks per heavy user sit at the span start; they carry
    # T1-band dwell times and count toward the planted T1 total.
    n_heavy_clicks = n1 + n3_planted + n_noise
    n_heavy = max(1, min(n_heavy_clicks // max(cfg.heavy_clicks_per_user, 7), n1 // 7))
    if n1 < 7:
        raise ValueError("rule mix needs at least 7 T1 events to warm the heavy pool")
    n_light = max(1, math.ceil(n2 / cfg.light_clicks_per_user)) if n2 else 0
    n_generic_items = max(1, (n1 + n2 + n_noise) // 50)

    span_s = cfg.span_days * DAY_SECONDS
    # (user, item, dwell, intent, pinned_ts)
    rows: list[tuple[str, str, float, str, int | None]] = []

    heavy_user = lambda j: f"h{j % n_heavy:06d}"  # noqa: E731
    generic_item = lambda j: f"g{j % n_generic_items:06d}"  # noqa: E731

    n_warmup = 7 * n_heavy
    for j in range(n1):
        dwell = float(rng.uniform(cfg.x_l + 1.0, 300.0))
        pinned = cfg.start_ts if j < n_warmup else None
        rows.append((heavy_user(j), generic_item(j), dwell, "T1", pinned))
    for j in range(n2):
        dwell = float(rng.uniform(5.5, cfg.x_l - 1.0))
        rows.append(
            (f"l{j // cfg.light_clicks_per_user:06d}", generic_item(n1 + j), dwell, "T2", None)
        )
    for item in range(m_items):
        for j in range(k):
            dwell = float(rng.uniform(5.5, cfg.x_l - 1.0))
            rows.append(
                (heavy_user(n1 + item * k + j), f"t{item:06d}", dwell, "T3_planted", None)
            )
    for j in range(n_noise):
        dwell = float(rng.uniform(0.5, 4.5))
        rows.append(
            (heavy_user(n1 + n3_planted + j), generic_item(n1 + n2 + j), dwell, "noise", None)
        )
    for j in range(n_unclicked):
        rows.append((heavy_user(j), generic_item(j), 0.0, "unclicked", None))

    drawn_ts = cfg.start_ts + rng.integers(0, span_s, size=len(rows))
    order = rng.permutation(len(rows))
    events: list[InteractionEvent] = []
    intended: list[str] = []
    for row in order:
        user, item, dwell, intent, pinned = rows[row]
        events.append(
            InteractionEvent(
                user_id=user,
                item_id=item,
                timestamp=int(drawn_ts[row]) if pinned is None else pinned,
                clicked=intent != "unclicked",
                dwell_time_s=dwell,
            )
        )
        intended.append(intent)

    analytic_counts = {
        "T1": n1,
        "T2": n2,
        "T3": n3_eff,
        "InvalidClick": m_items * fails_per_item,
        "NoiseClick": n_noise,
        "NotClicked": n_unclicked,
    }
    analytic_mix = {
        "T1": n1 / n_vr,
        "T2": n2 / n_vr,
        "T3": n3_eff / n_vr,
    }
    return RuleMixCorpus(
        events=events,
        stats=stats,
        analytic_mix=analytic_mix,
        analytic_counts=analytic_counts,
        intended=intended,
    )


# -- planted migration pair --------------------------------------------------


@dataclass(slots=True)
class MigrationPair:
    baseline: list[InteractionEvent]
    treatment: list[InteractionEvent]
    boundaries: tuple[int, ...]
    lifted_users: set[str]
    shift_s: float
    shift_scale_s: float


def short_read_lift(dwell_s: float, shift_s: float, scale_s: float) -> float:
    """Monotone lengthening of short reads: T + shift * exp(-T / scale).

    Strictly increasing whenever shift < scale, so sorted order (and hence
    decile membership by rank) is preserved.
    """
    return dwell_s + shift_s * math.exp(-dwell_s / scale_s)


def generate_migration_pair(
    cfg: SimConfig,
    shift_s: float = 8.0,
    shift_scale_s: float = 40.0,
    max_level: int = 3,
) -> MigrationPair:
    """Baseline log plus a treatment where users at activeness levels
    1..max_level read short items longer."""
    if shift_s >= shift_scale_s:
        raise ValueError("shift must stay below the scale to keep the lift monotone")
    baseline, _ = generate(cfg)
    counts = weekly_click_counts(baseline)
    boundaries = equal_frequency_boundaries(counts.values())
    lifted = {
        user
        for user, c in counts.items()
        if activeness_level(c, boundaries) <= max_level
    }
    treatment = []
    for event in baseline:
        if event.clicked and event.user_id in lifted:
            treatment.append(
                InteractionEvent(
                    user_id=event.user_id,
                    item_id=event.item_id,
                    timestamp=event.timestamp,
                    clicked=True,
                    dwell_time_s=short_read_lift(event.dwell_time_s, shift_s, shift_scale_s),
                )
            )
        else:
            treatment.append(event)
    return MigrationPair(
        baseline=baseline,
        treatment=treatment,
        boundaries=boundaries,
        lifted_users=lifted,
        shift_s=shift_s,
        shift_scale_s=shift_scale_s,
    )
