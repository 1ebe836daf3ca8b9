#!/usr/bin/env python3
"""
Stats Utils - Student-t tail probabilities and significance markers
"""

import numpy as np
from scipy.special import betainc


def student_t_two_sided(t, dof):
    """Two-sided p-value P(|T| >= |t|) via the regularized incomplete beta function"""
    t = np.asarray(t, dtype=float)
    dof = np.asarray(dof, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = dof / (dof + t ** 2)
    p = np.where(np.isinf(t), 0.0, betainc(dof / 2.0, 0.5, np.where(np.isinf(t), 0.0, x)))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def significance_stars(p_value: float) -> str:
    """*** < 0.001, ** < 0.01, * < 0.05, . < 0.1"""
    if p_value is None or not np.isfinite(p_value):
        return ""
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    if p_value < 0.1:
        return "."
    return ""


def format_p_value(p_value: float) -> str:
    """Fixed-point p-value, with the usual floor for tiny values"""
    if p_value is None or not np.isfinite(p_value):
        return "-"
    if p_value < 2.2e-16:
        return "< 2.2e-16"
    if p_value < 1e-4:
        return f"{p_value:.2e}"
    return f"{p_value:.4f}"
