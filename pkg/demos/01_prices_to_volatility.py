"""From a district price panel to conditional volatility.

Walks the first half of the toolkit: aggregate districts into a state
series, take log returns, summarize the distribution, and fit the
asymmetric volatility model.
"""
import numpy as np

from agrivol import (
    DistrictPanel,
    EgarchParams,
    EgarchSpec,
    Month,
    MonthlySeries,
    aggregate_districts,
    egarch_fit,
    egarch_simulate,
    log_returns,
    squared_log_returns,
    summary_stats,
)

# ------------------------------------------------------------------
# build a small synthetic panel: 5 districts sharing planted dynamics
# ------------------------------------------------------------------
n = 240
truth = EgarchParams(mu=0.004, omega=-0.505, alpha=[0.15], gamma=[-0.05], beta=[0.9])
state_returns = egarch_simulate(EgarchSpec(1, 1, 1), truth, n, seed=7).values

rng = np.random.default_rng(107)
start = Month(2005, 1)
series, coords = {}, {}
for i, name in enumerate(["Ambar", "Bhind", "Chand", "Dewas", "Eron"]):
    idio = 0.01 * rng.standard_normal(n)
    log_price = np.log(3000 + 100 * i) + np.concatenate([[0.0], np.cumsum(state_returns + idio)])[:n]
    series[name] = MonthlySeries(start, np.exp(log_price), name)
    coords[name] = (22.0 + 0.4 * i, 76.5 + 0.3 * i)
panel = DistrictPanel("Synthania", series, coords)

mean, lower, upper = aggregate_districts(panel)
print(f"panel: {len(panel.districts)} districts x {len(mean)} months")
print(f"state price range: {mean.values.min():.0f}..{mean.values.max():.0f} INR/quintal")
print(f"widest +/-2sd band: {np.max(upper.values - lower.values):.1f}")

# ------------------------------------------------------------------
# returns and their distribution
# ------------------------------------------------------------------
returns = log_returns(mean)
squared = squared_log_returns(mean)
stats = summary_stats(returns)
print(f"\nlog returns: n={stats.n} mean={stats.mean:.4f} std={stats.std:.4f}")
print(f"skewness={stats.skewness:.4f} excess kurtosis={stats.excess_kurtosis:.4f}")
print(f"largest squared return: {squared.values.max():.5f} at {squared.months()[int(np.argmax(squared.values))]}")

# ------------------------------------------------------------------
# volatility model: the log-variance recursion keeps sigma positive and
# lets negative shocks act differently from positive ones (gamma)
# ------------------------------------------------------------------
fit = egarch_fit(returns, EgarchSpec(1, 1, 1))
names = type(fit.params).names(fit.spec)
print("\nfitted parameters (truth in brackets):")
for name, value, true_val in zip(names, fit.params.to_array(), truth.to_array()):
    se = "n/a" if fit.std_errs is None else f"{fit.std_errs[names.index(name)]:.4f}"
    print(f"  {name:>6} = {value:+.4f}  (true {true_val:+.3f}, se {se})")
print(f"log-likelihood: {fit.log_likelihood:.2f}")

vol = fit.cond_vol
print(f"\nconditional volatility: min {vol.values.min():.4f}, max {vol.values.max():.4f}")
print(f"spikiest month: {vol.months()[int(np.argmax(vol.values))]}")
