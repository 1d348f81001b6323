"""Cohort flow matrices for alluvial (Sankey-style) diagrams.

Mass is counted fractionally: each cohort scholar carries a mass of 1 per
year, split evenly over that year's countries. Between consecutive years
the scholar's mass is split evenly over every (from country, to country)
pair. All arithmetic is exact (``Fraction``); conversion to float happens
only on output.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal

from .indicators import fractional_counts
from .timeline import AffiliationTimeline

__all__ = ["OTHER", "FlowMatrix", "flow_matrix", "render_alluvial"]

log = logging.getLogger(__name__)

OTHER = "OTHER"

Direction = Literal["outgoing", "incoming"]


@dataclass
class FlowMatrix:
    first_year: int
    direction: str
    focal: str
    horizon: int
    top_n: int
    n_scholars: int = 0
    kept: list[str] = field(default_factory=list)
    per_year_mass: dict[int, dict[str, Fraction]] = field(default_factory=dict)
    transitions: dict[tuple[int, str, int, str], Fraction] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "cohort": {
                "first_year": self.first_year,
                "direction": self.direction,
                "focal": self.focal,
                "horizon": self.horizon,
                "top_n": self.top_n,
                "n_scholars": self.n_scholars,
            },
            "countries": self.kept,
            "per_year_mass": {
                str(y): {c: float(m) for c, m in sorted(masses.items())}
                for y, masses in sorted(self.per_year_mass.items())
            },
            "transitions": [
                {"year": y0, "from": a, "to_year": y1, "to": b, "mass": float(m)}
                for (y0, a, y1, b), m in sorted(self.transitions.items())
            ],
        }


def _cohort(timelines: Iterable[AffiliationTimeline], first_year: int, direction: str,
            focal: str, horizon: int, mobile_only: bool) -> list[AffiliationTimeline]:
    cohort = []
    for t in timelines:
        if t.first_year != first_year:
            continue
        if mobile_only and len(t.countries_ever()) < 2:
            continue
        if direction == "outgoing":
            member = focal in t.origin
        elif direction == "incoming":
            member = focal in t.imputed.get(horizon, ())
        else:
            raise ValueError(f"direction must be 'outgoing' or 'incoming', got {direction!r}")
        if member:
            cohort.append(t)
    return cohort


def flow_matrix(timelines: Iterable[AffiliationTimeline], first_year: int, direction: Direction,
                focal: str, horizon: int, top_n: int = 10, mobile_only: bool = False) -> FlowMatrix:
    """Year-by-year country masses and transitions for one cohort.

    Outgoing cohort: first publication in *first_year* with *focal* among
    the origin countries. Incoming cohort: first publication in
    *first_year* and *focal* in the horizon year's set. Countries outside
    the *top_n* by total mass (the focal country is always kept) are pooled
    into ``OTHER``.
    """
    if top_n < 0:
        raise ValueError("top_n must be non-negative")
    cohort = _cohort(timelines, first_year, direction, focal, horizon, mobile_only)
    fm = FlowMatrix(first_year, direction, focal, horizon, top_n, n_scholars=len(cohort))
    if not cohort:
        log.warning("empty %s cohort for %s first_year=%d", direction, focal, first_year)
        return fm

    years = range(first_year, horizon + 1)
    raw_mass = {y: fractional_counts(cohort, y, exact=True) for y in years}
    totals: dict[str, Fraction] = defaultdict(Fraction)
    for masses in raw_mass.values():
        for country, m in masses.items():
            totals[country] += m
    ranked = sorted((c for c in totals if c != focal), key=lambda c: (-totals[c], c))
    kept = set(ranked[:top_n]) | ({focal} if focal in totals else set())
    fm.kept = sorted(kept)

    def bucket(country: str) -> str:
        return country if country in kept else OTHER

    for y, masses in raw_mass.items():
        merged: dict[str, Fraction] = defaultdict(Fraction)
        for country, m in masses.items():
            merged[bucket(country)] += m
        fm.per_year_mass[y] = dict(merged)

    transitions: dict[tuple[int, str, int, str], Fraction] = defaultdict(Fraction)
    for t in cohort:
        for y in years[:-1]:
            src, dst = t.imputed.get(y), t.imputed.get(y + 1)
            if not src or not dst:
                continue
            share = Fraction(1, len(src) * len(dst))
            for a in src:
                for b in dst:
                    transitions[y, bucket(a), y + 1, bucket(b)] += share
    fm.transitions = dict(transitions)
    return fm


def render_alluvial(fm: FlowMatrix, path: str, title: str | None = None) -> None:
    """Draw a static alluvial chart of *fm* to *path* (format from the suffix)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.path import Path as MPath
    from matplotlib.patches import PathPatch, Rectangle

    years = sorted(fm.per_year_mass)
    order = fm.kept + ([OTHER] if any(OTHER in m for m in fm.per_year_mass.values()) else [])
    cmap = plt.get_cmap("tab20")
    colours = {c: cmap(i % 20) for i, c in enumerate(order)}
    gap = max(fm.n_scholars * 0.02, 0.01)
    bar = 0.12
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(years)), 6))

    # node positions: stacked bars per year
    spans: dict[tuple[int, str], list[float]] = {}
    peak = 0.0
    for x, y in enumerate(years):
        top = 0.0
        for c in order:
            m = float(fm.per_year_mass[y].get(c, 0))
            if m <= 0:
                continue
            spans[y, c] = [top, top]  # running cursor for outgoing / incoming ribbons
            ax.add_patch(Rectangle((x - bar / 2, top), bar, m, color=colours[c], lw=0))
            if x == 0 or x == len(years) - 1:
                ax.text(x + (-bar if x == 0 else bar), top + m / 2, c, va="center",
                        ha="right" if x == 0 else "left", fontsize=8)
            top += m + gap
        peak = max(peak, top)
    out_cursor = {k: v[0] for k, v in spans.items()}
    in_cursor = {k: v[1] for k, v in spans.items()}
    for (y0, a, y1, b), m in sorted(fm.transitions.items()):
        m = float(m)
        x0, x1 = years.index(y0) + bar / 2, years.index(y1) - bar / 2
        s0 = out_cursor[y0, a]
        s1 = in_cursor[y1, b]
        out_cursor[y0, a] += m
        in_cursor[y1, b] += m
        mid = (x0 + x1) / 2
        verts = [(x0, s0), (mid, s0), (mid, s1), (x1, s1), (x1, s1 + m), (mid, s1 + m),
                 (mid, s0 + m), (x0, s0 + m), (x0, s0)]
        codes = [MPath.MOVETO, MPath.CURVE4, MPath.CURVE4, MPath.CURVE4, MPath.LINETO,
                 MPath.CURVE4, MPath.CURVE4, MPath.CURVE4, MPath.CLOSEPOLY]
        ax.add_patch(PathPatch(MPath(verts, codes), fc=colours[a], alpha=0.35, lw=0))
    ax.set_xlim(-1, len(years))
    ax.set_ylim(0, max(peak, 1.0))
    ax.invert_yaxis()
    ax.set_xticks(range(len(years)), [str(y) for y in years])
    ax.set_yticks([])
    for side in ("left", "right", "top"):
        ax.spines[side].set_visible(False)
    ax.set_title(title or f"{fm.direction.capitalize()} scholars, {fm.focal}, cohort {fm.first_year}")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
