"""Turn tallies into observed rates and compare them with the analytic model."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from ..channel import ChannelParams, ObservedRates, analytic_rates
from ..params import ProtocolParams
from .tally import TallySet


@dataclass(frozen=True)
class Comparison:
    """One row of the analytic-versus-empirical table.

    ``stderr`` is the binomial standard error under the analytic value, so a
    zero empirical count against a tiny analytic rate still gets a finite z.
    """

    quantity: str
    analytic: float
    empirical: float
    successes: int
    trials: int
    stderr: float
    z_score: float

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(k: int, n: int) -> float:
    return k / n if n > 0 else 0.0


def _row(name: str, analytic: float, k: int, n: int) -> Comparison:
    emp = _ratio(k, n)
    se = math.sqrt(analytic * (1.0 - analytic) / n) if n > 0 else math.inf
    if se > 0 and math.isfinite(se):
        z = (emp - analytic) / se
    else:
        z = 0.0 if emp == analytic else math.inf
    return Comparison(name, analytic, emp, k, n, se, z)


def observed_rates(tallies: TallySet, protocol: ProtocolParams) -> ObservedRates:
    """Empirical counterpart of ``analytic_rates``.

    ``s1_true`` is the tagged single-photon yield of Z1 windows and
    ``e1_true`` the tagged error rate of single-photon X bits (all
    intensities pooled).
    """
    t = tallies
    s_mu = tuple(_ratio(e, a) for e, a in zip(t.x_effective, t.x_accepted))
    e_mu = tuple(_ratio(w, e) for w, e in zip(t.x_errors, t.x_effective))
    s0 = s_mu[t.index_of(0.0)] if 0.0 in t.intensities else 0.0
    return ObservedRates(
        intensities=t.intensities,
        s0=s0,
        s_mu=s_mu,
        e_mu_x=e_mu,
        s_z=_ratio(t.z_effective, t.z_windows),
        e_z=_ratio(t.z_errors, t.z_effective),
        n_t_per_window=_ratio(t.z_effective, t.n_windows),
        s1_true=_ratio(t.z1_effective, t.z1_windows),
        e1_true=_ratio(sum(t.x1_errors), sum(t.x1_effective)),
    )


def compare_with_analytic(tallies: TallySet, protocol: ProtocolParams, channel: ChannelParams) -> list[Comparison]:
    """Side-by-side table of every observable with binomial z-scores."""
    t = tallies
    ref = analytic_rates(protocol, channel)
    rows = []
    if 0.0 in t.intensities:
        i0 = t.index_of(0.0)
        rows.append(_row("s0", ref.s0, t.x_effective[i0], t.x_accepted[i0]))
    for i, mu in enumerate(t.intensities):
        if mu == 0.0:
            continue
        rows.append(_row(f"S_mu[{mu!r}]", ref.s_mu[i], t.x_effective[i], t.x_accepted[i]))
        rows.append(_row(f"E_mu_X[{mu!r}]", ref.e_mu_x[i], t.x_errors[i], t.x_effective[i]))
    rows.append(_row("S_Z", ref.s_z, t.z_effective, t.z_windows))
    rows.append(_row("E_Z", ref.e_z, t.z_errors, t.z_effective))
    rows.append(_row("n_t_per_window", ref.n_t_per_window, t.z_effective, t.n_windows))
    rows.append(_row("s1_true (Z1 tags)", ref.s1_true, t.z1_effective, t.z1_windows))
    rows.append(_row("s1_true (X1 tags)", ref.s1_true, sum(t.x1_effective), sum(t.x1_windows)))
    rows.append(_row("e1_true (X1 tags)", ref.e1_true, sum(t.x1_errors), sum(t.x1_effective)))
    mu = protocol.mu_signal
    eps = protocol.epsilon
    rows.append(_row("Z1 window fraction", 2.0 * eps * (1.0 - eps) * mu * math.exp(-mu), t.z1_windows, t.z_windows))
    return rows


def format_table(rows: list[Comparison]) -> str:
    head = f"{'quantity':<22} {'analytic':>14} {'empirical':>14} {'stderr':>12} {'z':>8}"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r.quantity:<22} {r.analytic:>14.6e} {r.empirical:>14.6e} {r.stderr:>12.4e} {r.z_score:>8.3f}")
    return "\n".join(lines)
