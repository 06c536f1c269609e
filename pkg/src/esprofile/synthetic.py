"""Small seeded datasets for demos and end-to-end tests.

:func:`sessions` imitates the structure of e-commerce session logs: page
counts and their durations move together, bounce and exit rates are
strongly correlated, and a page-value score drives the purchase label.
"""

from __future__ import annotations

import numpy as np

from .tabular import Dataset, from_columns

MONTHS = ("Aug", "Dec", "Feb", "Jul", "Jun", "Mar", "May", "Nov", "Oct", "Sep")
VISITORS = ("New_Visitor", "Other", "Returning_Visitor")


def sessions(n: int = 500, seed: int = 0, positive_rate: float = 0.155) -> Dataset:
    """Session-like table with a boolean ``Revenue`` target.

    Roughly ``positive_rate`` of the rows are purchases. ``PageValues`` is by
    far the most informative feature. Three numeric pairs correlate above
    0.5: the two page counts with their durations, and the bounce and exit
    rates.
    """
    rng = np.random.default_rng(seed)
    revenue = rng.random(n) < positive_rate
    product = rng.poisson(25, n) + rng.poisson(10, n) * revenue
    product_dur = product * rng.gamma(9.0, 4.0, n) + rng.normal(0, 60, n).clip(-50, None)
    admin = rng.poisson(2, n)
    admin_dur = admin * rng.gamma(2.0, 30.0, n)
    bounce = rng.beta(1.2, 40, n) * np.where(revenue, 0.4, 1.0)
    exit_rate = (bounce + rng.beta(2, 60, n)).clip(0, 0.2)
    page_values = np.where(revenue, rng.gamma(2.0, 14.0, n), rng.exponential(1.0, n) * (rng.random(n) < 0.15))
    month = rng.choice(MONTHS, n)
    visitor = rng.choice(VISITORS, n, p=(0.14, 0.01, 0.85))
    weekend = rng.random(n) < 0.23
    cols = {
        "Administrative": admin,
        "Administrative_Duration": np.round(admin_dur, 3),
        "ProductRelated": product,
        "ProductRelated_Duration": np.round(product_dur.clip(0, None), 3),
        "BounceRates": np.round(bounce, 5),
        "ExitRates": np.round(exit_rate, 5),
        "PageValues": np.round(page_values, 4),
        "Month": month,
        "VisitorType": visitor,
        "Weekend": weekend,
        "Revenue": revenue,
    }
    return from_columns(cols, "Revenue", provenance=f"sessions(n={n}, seed={seed})")


def degrading_feature(n: int = 400, seed: int = 0) -> Dataset:
    """Two informative numeric features plus noise; ``y`` depends on ``signal``.

    Corrupting ``signal`` with heavy noise destroys most of the achievable
    performance, which makes it a reliable positive control for the
    significance filter.
    """
    rng = np.random.default_rng(seed)
    signal = rng.normal(0, 1, n)
    y = signal + 0.25 * rng.normal(0, 1, n) > 0.3
    cols = {
        "signal": np.round(signal, 6),
        "weak": np.round(0.3 * signal + rng.normal(0, 1, n), 6),
        "noise": np.round(rng.normal(0, 1, n), 6),
        "y": y,
    }
    return from_columns(cols, "y", provenance=f"degrading_feature(n={n}, seed={seed})")
