"""Driving the command-line tool with an external objective program."""
import csv
import sys
import tempfile
from pathlib import Path

from heibo import cli

work = Path(tempfile.mkdtemp())

# The child reads one point per line and answers with one number per line.
child = work / "sphere.py"
child.write_text(
    "import sys\n"
    "for line in sys.stdin:\n"
    "    x = [float(v) for v in line.split()]\n"
    "    print(repr(sum((v - 0.3) ** 2 for v in x)), flush=True)\n"
)

cfg = work / "sphere.cfg"
cfg.write_text(
    f"command = {sys.executable} {child}\n"
    "lower = 0 0 0\n"
    "upper = 1 1 1\n"
    "f_min = 0\n"
    "method = HEI_MMAP\n"
    "n_ini = 10\n"
    "n_tot = 30\n"
    "seed = 2\n"
    f"output = {work / 'trace.csv'}\n"
)
print("exit code", cli.main(["run", "-c", str(cfg)]))

rows = list(csv.DictReader(open(work / "trace.csv")))
print(len(rows), "rows;", list(rows[0])[:8])
print("best", rows[-1]["best_y"], "gap", rows[-1]["gap"])

# Stability log-ratios read back from the saved trace.
cli.main(["ratio", str(work / "trace.csv"), "-o", str(work / "ratio.csv")])
print((work / "ratio.csv").read_text().splitlines()[:4])

# A bad key is a configuration error and nothing is evaluated.
bad = work / "bad.cfg"
bad.write_text("function = camel3\nspeed = 11\n")
print("exit code", cli.main(["run", "-c", str(bad)]))
