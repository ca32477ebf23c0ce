"""Two-regime analysis of ENSO and all-India rainfall (AIR) monthly indices.

The index files are not shipped. Obtain a monthly ENSO index and the AIR series,
save them as CSV (``YYYY-MM,value`` rows or one row per year with twelve
monthly columns) and pass the paths:

    python gallery/04_enso_air.py enso.csv air.csv

The full parameter set takes a while; ``--quick`` cuts annealings and
iterations for a first look.
"""

import argparse

from regime_pcmci.climate import CLIMATE_PARAMETERS, load_climate_pair, summarize_climate
from regime_pcmci.driver import fit_annealed
from regime_pcmci.io import RunConfig

parser = argparse.ArgumentParser()
parser.add_argument("enso")
parser.add_argument("air")
parser.add_argument("--quick", action="store_true")
args = parser.parse_args()

params = dict(CLIMATE_PARAMETERS)
if args.quick:
    params.update(N_A=10, N_Q=20)
cfg = RunConfig.from_dict(params)
series = load_climate_pair(args.enso, args.air)
print(f"{series.T} common months, {series.time_index[0]} to {series.time_index[-1]}")

annealing = fit_annealed(series, cfg.driver())
summary = summarize_climate(series, annealing, cfg.tau_max, top=min(13, len(annealing.runs)))
for k in range(cfg.n_regimes):
    print(f"regime {k}: ENSO -> AIR {summary.link_effects[k]:+.2f}, "
          f"Jun-Sep share {summary.summer_fraction[k]:.0%}, Dec-Mar share {summary.winter_fraction[k]:.0%}")
print("regimes with an ENSO -> AIR link:", list(summary.link_regimes))
