"""Monte Carlo IMSE comparison driven by a scenario file.

Each replicate draws from its own child seed, so the table does not depend
on the number of threads.  Scenario files live in ``demos/scenarios``.
"""
# %%
import os
import sys
from pathlib import Path

from mmqr.simulation import parse_scenario, run_scenario

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent / "scenarios" / "normal.toml"
scenario = parse_scenario(path.read_text())
scenario.N = int(os.environ.get("DEMO_REPLICATES", 5))       # quick look; the file says more
print(scenario.manifest())

# %%
table = run_scenario(scenario, threads=os.cpu_count() or 1)
print(table.to_csv())
