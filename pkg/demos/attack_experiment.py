"""
Attack comparison on a blockmodel
=================================

The full pipeline behind the acceptance run: proxies build the perturbation,
a fresh victim is trained per trial, and every strategy perturbs 1% of the
nodes.  Takes about half a minute.
"""
from pathlib import Path

from infmax_attack.experiment import load_config, report_markdown, run_attack_experiment

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "sbm_attack.cfg")
res = run_attack_experiment(cfg)

print(f"budget {res['budget']} nodes, cap {res['degree_cap']}, {cfg.trials} trials")
print(report_markdown(res))

# paired t-tests against the random baseline
for t in res["ttests"]:
    if "random" in (t["a"], t["b"]) and "none" not in (t["a"], t["b"]):
        print(f"{t['a']:12s} vs {t['b']:12s} p = {t['p']:.3g}")
