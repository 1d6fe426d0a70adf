"""
Contraction rate at desk scale
==============================

The distance between the posterior mean and the truth is computed on a
grid of sample sizes and a line is fitted on the log-log scale.  The slope
is compared with the minimax exponent ``-alpha / (2 alpha + 1)``.  This
version uses 3 replicates and short chains; ``configs/rates.json`` holds the
full-size runs.
"""

from rescaled_gp.experiments import ExperimentConfig, rate_experiment

config = ExperimentConfig(
    setting="regression",
    truth={"id": "smoothed-weierstrass", "alpha": 1.0},
    n_grid=(100, 400, 1600, 6400),
    replicates=3,
    chain={"n_features": 128, "burn_in": 150, "n_iter": 300, "thin": 2, "weight_move": "gibbs"},
    seed=20240601,
    name="demo",
)
report = rate_experiment(config)

print("    n   replicate   risk      median A")
for c in report.cells:
    print(f"{c.n:5d}   {c.replicate:5d}     {c.risk:.4f}   {c.median_bandwidth:6.2f}")
print(f"\nfitted slope {report.slope:.3f} +- {report.slope_se:.3f}, "
      f"theory {-report.theory.exponent:.3f} with log power {report.theory.log_power:.3f}")
