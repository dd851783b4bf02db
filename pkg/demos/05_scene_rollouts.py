"""Mini benchmark: the three solvers on the bundled scenes.

Runs a trimmed version of the comparison harness (2 seeds, shortened
dynamic horizon) and prints the mean +/- sd table. The full sweep lives in
the acceptance suite and the `safeik compare` CLI.
"""

import time

import safeik
from safeik.metrics import batch_compare, comparison_table

model = safeik.load_bundled_robot()

for scene, kwargs in (("dynamic", {"duration": 6.0}), ("shelf", {})):
    t0 = time.perf_counter()
    rows, per = batch_compare(["N", "P", "B"], scene, 2, model, **kwargs)
    print(f"== {scene} scene (2 seeds, {time.perf_counter() - t0:.0f} s) ==")
    print(comparison_table(rows))

print("expected pattern: violation time and penetration depth drop from N to P")
print("to B, with B paying a bounded tracking-error premium.")
print("full comparison: `safeik compare --config src/safeik/data/dynamic.yaml`")
