"""Seeded synthetic data: ARDL processes and OSV-shaped snapshots."""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .ardl import ModelData
from .osv import STUDIED_ECOSYSTEMS


def _ar1(rng: np.random.Generator, T: int, phi: float, scale: float) -> np.ndarray:
    x = np.empty(T)
    x[0] = rng.normal(scale=scale / np.sqrt(1 - phi**2))
    shocks = rng.normal(scale=scale, size=T)
    for t in range(1, T):
        x[t] = phi * x[t - 1] + shocks[t]
    return x


def simulate_ardl(
    T: int,
    alpha: float = 0.0,
    beta: Sequence[float] = (),
    gamma: Sequence[float] = (0.0,),
    phi: Sequence[float] = (0.0,),
    rho: Sequence[float] = (0.0,),
    noise: float = 0.1,
    seed: int = 0,
    regressor_persistence: float = 0.5,
    burn_in: int = 200,
) -> ModelData:
    """Draw y from an ARDL process with AR(1) Gaussian regressors.

    All series are on the identity scale, so fitting with the identity
    transform recovers the generating coefficients.
    """
    rng = np.random.default_rng(seed)
    n = T + burn_in
    regs = [_ar1(rng, n, regressor_persistence, 1.0) for _ in range(3)]
    eps = rng.normal(scale=noise, size=n)
    coefs = [np.asarray(c, dtype=float) for c in (gamma, phi, rho)]
    beta = np.asarray(beta, dtype=float)
    y = np.zeros(n)
    for t in range(n):
        value = alpha + eps[t]
        for j, b in enumerate(beta, start=1):
            if t - j >= 0:
                value += b * y[t - j]
        for c, x in zip(coefs, regs):
            for j, cj in enumerate(c):
                if t - j >= 0:
                    value += cj * x[t - j]
        y[t] = value
    keep = slice(burn_in, None)
    return ModelData(y[keep], regs[0][keep], regs[1][keep], regs[2][keep])


# Relative weights for malware uploads per ecosystem, loosely following the
# concentration in npm, PyPI and RubyGems.
_MALWARE_WEIGHTS = {"CRAN": 0.0, "Go": 0.001, "Maven": 0.001, "npm": 0.68, "PyPI": 0.29, "RubyGems": 0.028}
_VULN_WEIGHTS = {"CRAN": 0.01, "Go": 0.28, "Maven": 0.35, "npm": 0.2, "PyPI": 0.12, "RubyGems": 0.04}


def simulate_snapshot(
    root: str | Path,
    start: dt.date = dt.date(2022, 1, 1),
    end: dt.date = dt.date(2025, 3, 31),
    seed: int = 0,
    malware_rate: float = 5.0,
    vuln_rate: float = 4.0,
) -> int:
    """Write an OSV-layout snapshot of synthetic records; return the record count.

    Daily malware counts follow a Poisson process whose log-intensity is an
    AR(1) driven partly by yesterday's article count, so the resulting series
    carry genuine lag structure.
    """
    rng = np.random.default_rng(seed)
    root = Path(root)
    days = (end - start).days + 1
    ecos = [e.value for e in STUDIED_ECOSYSTEMS]
    mw = np.array([_MALWARE_WEIGHTS[e] for e in ecos])
    mw /= mw.sum()
    vw = np.array([_VULN_WEIGHTS[e] for e in ecos])
    vw /= vw.sum()

    level = 0.0
    articles_prev = 0
    count = 0
    for d in range(days):
        day = start + dt.timedelta(days=d)
        level = 0.7 * level + 0.15 * np.log1p(articles_prev) + rng.normal(scale=0.35)
        n_mal = rng.poisson(malware_rate * np.exp(level - 0.3))
        n_vuln = rng.poisson(vuln_rate)
        articles_today = 0
        for kind, n_kind, weights in (("MAL", n_mal, mw), ("GHSA", n_vuln, vw)):
            for i in range(n_kind):
                eco = ecos[rng.choice(len(ecos), p=weights)]
                if kind == "MAL":
                    rid = f"MAL-{day.year}-{d:04d}{i:03d}"
                else:
                    rid = f"GHSA-{d:04d}-{i:04d}-sim"
                refs = [{"type": "ADVISORY", "url": f"https://example.org/adv/{rid}"}
                        for _ in range(rng.poisson(0.6))]
                n_art = rng.poisson(0.25)
                refs += [{"type": "ARTICLE", "url": f"https://example.org/art/{rid}/{k}"}
                         for k in range(n_art)]
                refs.append({"type": "WEB", "url": f"https://example.org/pkg/{rid}"})
                if kind == "MAL":
                    articles_today += n_art
                stamp = f"{day.isoformat()}T{rng.integers(0, 24):02d}:00:00Z"
                doc = {
                    "id": rid,
                    "published": stamp,
                    "modified": stamp,
                    "affected": [{"package": {"ecosystem": eco, "name": f"pkg-{rid.lower()}"}}],
                    "references": refs,
                }
                out = root / eco / f"{rid}.json"
                out.parent.mkdir(parents=True, exist_ok=True)
                out.write_text(json.dumps(doc, indent=1), encoding="utf-8")
                count += 1
        articles_prev = articles_today
    return count
