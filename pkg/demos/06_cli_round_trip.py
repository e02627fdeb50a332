"""Driving the command-line front end from Python and reading its files back.

Equivalent shell usage:

    sdcollapse --list-experiments
    sdcollapse run demos/experiments/singlet.yaml --out runs/singlet
"""

import json
import tempfile
from pathlib import Path

from sdcollapse.cli import main, read_table

here = Path(__file__).parent / "experiments"
main(["--list-experiments"])

with tempfile.TemporaryDirectory() as tmp:
    for name in ("born3", "collapse2", "singlet", "skewed"):
        out = Path(tmp) / name
        code = main(["run", str(here / f"{name}.yaml"), "--out", str(out)])
        summary = json.loads((out / "summary.json").read_text())
        print(f"  {summary['kind']}: exit {code}, verdict {summary['results']['verdict']}, "
              f"files {sorted(p.name for p in out.iterdir())}")

    # the trajectory table is plain CSV: t, then re/im of rho row by row
    header, data = read_table(Path(tmp) / "collapse2" / "trajectory.csv")
    print(header)
    print("final populations:", data[-1, 1], data[-1, 7])

    # an invalid file gives a JSON error record and exit code 3
    bad = Path(tmp) / "bad.yaml"
    bad.write_text("kind: born-test\namplitudes: [[0.6, 0], [0.7, 0]]\n")
    print("exit code for a non-normalized state:", main(["run", str(bad), "--out", str(Path(tmp) / "bad")]))
