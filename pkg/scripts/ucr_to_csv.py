"""Convert UCR archive files into the curve CSV format used by seqclusfd.

Both archive layouts are accepted:

* ``.tsv`` (UCR 2018): one series per line, class label first, tab separated;
* ``.ts`` (sktime/aeon): header lines, ``@data``, then comma separated values
  followed by ``:label``.

Several input files are concatenated in the order given. The grid is
``1..N`` (or ``--start``/``--step``). Example::

    python scripts/ucr_to_csv.py ECG200_TRAIN.tsv ECG200_TEST.tsv -o ecg200.csv
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from seqclusfd.curves import SampledCurveSet, write_curves_csv  # noqa: E402


def read_tsv(path):
    rows, labels = [], []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        cells = line.replace(",", "\t").split()
        labels.append(cells[0])
        rows.append([float(c) for c in cells[1:]])
    return rows, labels


def read_ts(path):
    rows, labels = [], []
    in_data = False
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not in_data:
            in_data = line.lower() == "@data"
            continue
        values, label = line.rsplit(":", 1)
        rows.append([float(c) for c in values.split(",")])
        labels.append(label)
    return rows, labels


def _label(raw):
    try:
        return str(int(float(raw)))
    except ValueError:
        return raw


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("inputs", nargs="+")
    ap.add_argument("-o", "--output", required=True)
    ap.add_argument("--start", type=float, default=1.0)
    ap.add_argument("--step", type=float, default=1.0)
    ap.add_argument("--prefix", default="s")
    args = ap.parse_args(argv)
    rows, labels = [], []
    for p in args.inputs:
        r, lab = (read_ts if p.endswith(".ts") else read_tsv)(p)
        rows += r
        labels += lab
    values = np.array(rows, dtype=float)
    grid = args.start + args.step * np.arange(values.shape[1])
    width = len(str(len(rows) - 1))
    ids = tuple(f"{args.prefix}{i:0{width}d}" for i in range(len(rows)))
    cs = SampledCurveSet(grid, values, ids, tuple(_label(x) for x in labels))
    write_curves_csv(cs, args.output)
    print(f"{args.output}: {cs.n} curves x {cs.n_points} points")


if __name__ == "__main__":
    main()
