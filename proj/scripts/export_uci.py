"""Writes the small UCI tables bundled with scikit-learn to data/*.csv."""

import csv
import pathlib

from sklearn import datasets

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def write(name, bunch, label_name="label"):
    rows = zip(bunch.data.tolist(), bunch.target.tolist())
    names = [n.replace(" ", "_").replace("(", "").replace(")", "").replace("/", "_")
             for n in bunch.feature_names]
    with open(OUT / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [label_name])
        for x, y in rows:
            w.writerow([repr(float(v)) for v in x] + [bunch.target_names[y]])


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write("iris", datasets.load_iris(), "species")
    write("wine", datasets.load_wine(), "cultivar")
    write("breast_cancer", datasets.load_breast_cancer(), "diagnosis")
    write("digits", datasets.load_digits(), "digit")
