#!/usr/bin/env python3
"""
Synthetic DGP - firm panels from a Cobb-Douglas economy with Markov productivity
"""

import logging
import math
import zlib
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from errors import InvalidConfig
from panel_io import FirmPanel, VariableSpec
from seeding import generator

logger = logging.getLogger(__name__)


class DgpConfig(BaseModel):
    """Structural parameters of the synthetic production economy

    Exit is checked from the second period on: every firm emits its first period, and a firm
    whose omega falls below ``exit_threshold`` at t >= 1 emits no row for t or later.
    """
    alpha_0: float = 1.0
    alpha_l: float = 0.6
    alpha_k: float = 0.3
    alpha_m: float = 0.2
    alpha_a: float = 0.0
    delta: float = 0.1
    rho: float = 0.7
    sigma_xi: float = 0.3
    sigma_eta: float = 0.1
    n_firms: int = 1000
    n_periods: int = 10
    # log investment = c0 + c1*omega + c2*log capital; c0 = log(delta) keeps capital stationary
    investment_coeffs: Tuple[float, float, float] = (math.log(0.1), 1.0, 1.0)
    # log labor = a + b*omega + persistent noise
    labor_coeffs: Tuple[float, float] = (1.0, 0.5)
    labor_noise_sd: float = 0.3
    labor_noise_rho: float = 0.5
    # omega = g1*(m - a_m) + g3*(m - a_m)**3 defines intermediate demand
    intermediates_coeffs: Tuple[float, float, float] = (2.0, 0.2, 3.0)
    intermediates_noise_sd: float = 0.0
    capital_mean: float = 4.0
    capital_sd: float = 1.0
    max_initial_age: int = 20
    exit_threshold: Optional[float] = None
    acf_timing: bool = False
    exogenous_inputs: bool = False
    omega0: Optional[float] = None
    seed: int = 0

    @classmethod
    def acf_scenario(cls, seed: int = 0, **overrides) -> "DgpConfig":
        """Endogenous-labor panel with labor chosen one period ahead"""
        values = dict(n_firms=1000, n_periods=10, alpha_l=0.6, alpha_k=0.3, alpha_m=0.2,
                      rho=0.7, sigma_xi=0.3, sigma_eta=0.1, labor_coeffs=(1.0, 0.5),
                      acf_timing=True, seed=seed)
        values.update(overrides)
        return cls(**values)

    def check(self) -> "DgpConfig":
        """Raise InvalidConfig naming the first offending field"""
        for name in ("alpha_l", "alpha_k", "alpha_m"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise InvalidConfig(name, f"elasticity must lie in (0, 1), got {value}")
        if not 0 <= self.delta < 1:
            raise InvalidConfig("delta", f"must lie in [0, 1), got {self.delta}")
        if not -1 < self.rho < 1:
            raise InvalidConfig("rho", f"must lie in (-1, 1), got {self.rho}")
        for name in ("sigma_xi", "sigma_eta", "labor_noise_sd", "intermediates_noise_sd", "capital_sd"):
            if getattr(self, name) < 0:
                raise InvalidConfig(name, "standard deviation must be non-negative")
        if not -1 < self.labor_noise_rho < 1:
            raise InvalidConfig("labor_noise_rho", f"must lie in (-1, 1), got {self.labor_noise_rho}")
        if self.n_firms < 1:
            raise InvalidConfig("n_firms", "must be positive")
        if self.n_periods < 1:
            raise InvalidConfig("n_periods", "must be positive")
        if self.investment_coeffs[1] <= 0:
            raise InvalidConfig("investment_coeffs", "c1 must be positive so investment rises with omega")
        if self.intermediates_coeffs[1] <= 0 or self.intermediates_coeffs[2] < 0:
            raise InvalidConfig("intermediates_coeffs", "need g1 > 0 and g3 >= 0 for a monotone demand")
        if self.max_initial_age < 0:
            raise InvalidConfig("max_initial_age", "must be non-negative")
        if self.seed < 0:
            raise InvalidConfig("seed", "must be an unsigned integer")
        return self


class SyntheticTruth(BaseModel):
    """Latent productivity, innovations and survival per emitted observation"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: pd.DataFrame = Field(description="firm_id, period, omega, xi, survived")

    @property
    def omega(self) -> np.ndarray:
        return self.frame["omega"].to_numpy()

    @property
    def survived(self) -> np.ndarray:
        return self.frame["survived"].to_numpy()


class AccountingConfig(BaseModel):
    """Low-rank factor model for synthetic balance-sheet variables"""
    n_factors: int = 3
    omega_loading: float = 0.6
    noise_sd: float = 0.3
    period_noise_sd: float = 0.3
    missing_rate: float = 0.05
    sparse_missing_rate: float = 0.5
    countries: List[str] = Field(default_factory=lambda: ["DE", "ES", "FR", "IT"])
    sectors: List[str] = Field(default_factory=lambda: ["manufacturing", "services", "trade"])
    seed: int = 0


ACCOUNTING_VARIABLES = [
    ("sales_net", "revenue"),
    ("inventory", "revenue"),
    ("accounts_receivable", "revenue"),
    ("cash", "revenue"),
    ("tangible_fixed_assets", "revenue"),
    ("intangible_assets", "revenue"),
    ("current_liabilities", "revenue"),
    ("long_term_debt", "revenue"),
    ("shareholder_funds", "revenue"),
    ("goods_sold_cost", "expense"),
    ("rd_expenses", "expense"),
    ("depreciation", "expense"),
]
SPARSE_VARIABLE = ("short_term_investments", "revenue")


def capital_accumulation(k, i, delta: float):
    """Next-period capital level (1 - delta) * k + i"""
    result = (1.0 - delta) * np.asarray(k, dtype=float) + np.asarray(i, dtype=float)
    return result if np.ndim(result) else float(result)


def investment_policy(omega, k, coeffs: Tuple[float, float, float]):
    """Investment exp(c0 + c1*omega + c2*k) for log capital k"""
    c0, c1, c2 = coeffs
    if c1 <= 0:
        raise InvalidConfig("investment_coeffs", "c1 must be positive")
    value = np.exp(c0 + c1 * np.asarray(omega, dtype=float) + c2 * np.asarray(k, dtype=float))
    return value if np.ndim(value) else float(value)


def intermediate_demand(omega, coeffs: Tuple[float, float, float]) -> np.ndarray:
    """Log intermediates m solving omega = g1*(m - a) + g3*(m - a)**3"""
    a, g1, g3 = coeffs
    omega = np.asarray(omega, dtype=float)
    if g3 == 0:
        return a + omega / g1
    p = g1 / g3
    q = -omega / g3
    root = np.sqrt((q / 2.0) ** 2 + (p / 3.0) ** 3)
    return a + np.cbrt(-q / 2.0 + root) + np.cbrt(-q / 2.0 - root)


def _simulate_firm(config: DgpConfig, firm_index: int) -> Tuple[dict, int]:
    rng = generator(config.seed, "dgp", firm_index)
    T = config.n_periods
    rho = config.rho

    # fixed draw order keeps every firm's stream independent of the config values
    stationary_sd = config.sigma_xi / math.sqrt(1.0 - rho ** 2)
    omega_prev = rng.normal(0.0, stationary_sd)
    xi = rng.normal(0.0, config.sigma_xi, size=T)
    eta = rng.normal(0.0, config.sigma_eta, size=T)
    nu_labor = rng.normal(size=T + 1)
    nu_inter = rng.normal(size=T)
    k0 = rng.normal(config.capital_mean, config.capital_sd)
    age0 = int(rng.integers(1, config.max_initial_age + 1)) if config.max_initial_age >= 1 else 1

    omega = np.empty(T)
    if config.omega0 is not None:
        omega_prev = config.omega0
        omega[0] = config.omega0
        xi[0] = config.omega0 - rho * omega_prev
    else:
        omega[0] = rho * omega_prev + xi[0]
    for t in range(1, T):
        omega[t] = rho * omega[t - 1] + xi[t]

    noise = np.empty(T)
    previous = config.labor_noise_sd * nu_labor[0]
    scale = config.labor_noise_sd * math.sqrt(1.0 - config.labor_noise_rho ** 2)
    for t in range(T):
        previous = config.labor_noise_rho * previous + scale * nu_labor[t + 1]
        noise[t] = previous

    a_l, b_l = config.labor_coeffs
    lagged = np.concatenate([[omega_prev], omega[:-1]])
    driver = lagged if config.acf_timing else omega
    if config.exogenous_inputs:
        labor = a_l + noise
        inter = config.intermediates_coeffs[0] + (config.intermediates_noise_sd or config.labor_noise_sd) * nu_inter
        policy_omega = np.zeros(T)
    else:
        labor = a_l + b_l * driver + noise
        inter = intermediate_demand(omega, config.intermediates_coeffs) + config.intermediates_noise_sd * nu_inter
        policy_omega = omega

    capital = np.empty(T)
    investment = np.empty(T)
    capital[0] = k0
    for t in range(T):
        investment[t] = investment_policy(policy_omega[t], capital[t], config.investment_coeffs)
        if t + 1 < T:
            capital[t + 1] = math.log(capital_accumulation(math.exp(capital[t]), investment[t], config.delta))

    age = age0 + np.arange(T, dtype=float)
    log_output = (config.alpha_0 + config.alpha_l * labor + config.alpha_k * capital
                  + config.alpha_m * inter + config.alpha_a * age + omega + eta)

    emitted = T
    if config.exit_threshold is not None:
        below = np.nonzero(omega[1:] < config.exit_threshold)[0]
        if below.size:
            emitted = int(below[0]) + 1
    survived = np.ones(emitted, dtype=bool)
    if emitted < T:
        survived[-1] = False

    columns = {
        "log_output": log_output[:emitted],
        "labor": labor[:emitted],
        "capital": capital[:emitted],
        "intermediates": inter[:emitted],
        "investment": investment[:emitted],
        "age": age[:emitted],
        "omega": omega[:emitted],
        "xi": xi[:emitted],
        "survived": survived,
    }
    return columns, emitted


def simulate_panel(config: DgpConfig) -> Tuple[FirmPanel, SyntheticTruth]:
    """Draw a firm panel and its latent productivity; deterministic given the seed"""
    config.check()
    width = max(6, len(str(config.n_firms)))
    pieces = []
    for index in range(config.n_firms):
        columns, emitted = _simulate_firm(config, index)
        columns["firm_id"] = np.full(emitted, f"F{index:0{width}d}")
        columns["period"] = np.arange(emitted, dtype=np.int64)
        pieces.append(pd.DataFrame(columns))
    draws = pd.concat(pieces, ignore_index=True)

    frame = pd.DataFrame({
        "firm_id": draws["firm_id"],
        "period": draws["period"],
        "output": np.exp(draws["log_output"]),
        "labor": np.exp(draws["labor"]),
        "capital": np.exp(draws["capital"]),
        "intermediates": np.exp(draws["intermediates"]),
        "investment": draws["investment"],
        "age": draws["age"],
    })
    truth = SyntheticTruth(frame=draws[["firm_id", "period", "omega", "xi", "survived"]].reset_index(drop=True))
    exits = int((~draws["survived"]).sum())
    logger.info(f"Simulated {len(frame)} observations for {config.n_firms} firms ({exits} exits), seed {config.seed}")
    return FirmPanel(frame), truth


def simulate_accounting(panel: FirmPanel, truth: SyntheticTruth, config: Optional[AccountingConfig] = None) -> FirmPanel:
    """Attach factor-model accounting variables and country/sector labels to a synthetic panel"""
    config = config or AccountingConfig()
    if not 0 <= config.missing_rate < 1 or not 0 <= config.sparse_missing_rate < 1:
        raise InvalidConfig("missing_rate", "missing rates must lie in [0, 1)")
    if config.n_factors < 1:
        raise InvalidConfig("n_factors", "need at least one factor")

    specs = ACCOUNTING_VARIABLES + [SPARSE_VARIABLE]
    p = len(specs)
    shared = generator(config.seed, "accounting")
    loadings = shared.normal(0.0, 0.5, size=(p, config.n_factors))
    levels = shared.normal(1.0, 0.5, size=p)
    signs = np.array([-1.0 if sign == "expense" else 1.0 for _, sign in specs])
    rates = np.full(p, config.missing_rate)
    rates[-1] = config.sparse_missing_rate

    frame = panel.frame
    merged = frame[["firm_id", "period"]].merge(truth.frame[["firm_id", "period", "omega"]],
                                                on=["firm_id", "period"], how="left")
    omega = merged["omega"].to_numpy()
    spread = np.nanstd(omega)
    omega_z = (omega - np.nanmean(omega)) / spread if spread > 0 else np.zeros_like(omega)
    labor = frame["labor"].to_numpy()

    values = np.empty((len(frame), p))
    countries = np.empty(len(frame), dtype=object)
    sectors = np.empty(len(frame), dtype=object)
    for firm_id, rows in frame.groupby("firm_id", sort=True).indices.items():
        rng = generator(config.seed, "accounting", zlib.crc32(firm_id.encode("utf-8")))
        firm_effect = rng.normal(size=config.n_factors)
        period_noise = rng.normal(0.0, config.period_noise_sd, size=(len(rows), config.n_factors))
        eps = rng.normal(0.0, config.noise_sd, size=(len(rows), p))
        holes = rng.random(size=(len(rows), p)) < rates
        countries[rows] = config.countries[int(rng.integers(len(config.countries)))]
        sectors[rows] = config.sectors[int(rng.integers(len(config.sectors)))]

        factors = firm_effect + period_noise
        factors[:, 0] = (config.omega_loading * omega_z[rows]
                         + math.sqrt(max(0.0, 1.0 - config.omega_loading ** 2)) * factors[:, 0])
        block = signs * labor[rows, None] * np.exp(levels + factors @ loadings.T + eps)
        block[holes] = np.nan
        values[rows] = block

    for j, (name, _) in enumerate(specs):
        frame[name] = values[:, j]
    frame["country"] = countries
    frame["sector"] = sectors
    catalog = [VariableSpec(name=name, sign=sign) for name, sign in specs]
    logger.info(f"Attached {p} accounting variables to {len(frame)} observations")
    return FirmPanel(frame, catalog, ["country", "sector"])


def write_truth(truth: SyntheticTruth, path: Union[str, Path]) -> Path:
    """Write latent productivity as CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    truth.frame.to_csv(path, index=False)
    return path
