"""
The impact-bsts command line
============================

Every step above is also a subcommand driven by one JSON config.  This
script writes a config, simulates a data set, and runs the analysis chain
``prescreen -> validate -> impact`` exactly as a shell user would.
"""

import json
import subprocess
import sys

from _common import OUTPUT

work = OUTPUT / "cli"
work.mkdir(exist_ok=True)
config = {
    "simulate": {
        "length": 442, "start": "2022-01-01", "level_sd": 5.0, "obs_sd": 10.0,
        "initial_level": 1000.0, "seed": 5,
        "controls": [
            {"name": "twin", "correlation": 0.99, "loc": 800, "scale": 60},
            {"name": "walk", "source": "walk"},
            {"name": "noise", "source": "noise"},
        ],
        "intervention": {"kind": "step", "start": "2023-02-05", "magnitude": -0.03},
    },
    "treated": {"csv": "simulated.csv", "column": "treated"},
    "controls": [{"csv": "simulated.csv", "columns": ["twin", "walk", "noise"]}],
    "intervention_date": "2023-02-05",
    "pre_period_days": 400,
    "post_period_days": 42,
    "trend": "local_level",
    "seasonality": {"weekly": True, "monthly": False},
    "prescreen": {"enabled": True, "max_k": 3},
    "mcmc": {"iterations": 1000, "burn_in": 200, "seed": 42},
    "validation": {"folds": 3, "horizon": 42},
    "output_dir": ".",
}
cfg = work / "config.json"
cfg.write_text(json.dumps(config, indent=2))


def impact_bsts(*args):
    cmd = [sys.executable, "-m", "impact_bsts", *args, "--config", str(cfg)]
    print("$ impact-bsts", " ".join(args))
    subprocess.run(cmd, check=True)


impact_bsts("simulate")
impact_bsts("prescreen")
impact_bsts("validate")
impact_bsts("impact")
print(json.dumps(json.loads((work / "impact.json").read_text())["relative_effect_percent"]))
