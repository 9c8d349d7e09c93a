#!/usr/bin/env python3
"""Materialise the two input CSV files under data/.

wdbc.csv is written from the copy of the Wisconsin Diagnostic Breast Cancer
data bundled with scikit-learn (columns: id, diagnosis, 30 features; M/B
diagnosis). compas-scores-two-years.csv is the ProPublica two-year file,
taken from the `responsibly` wheel, which bundles it unchanged.
"""
import csv
import io
import os
import subprocess
import sys
import tempfile
import zipfile

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")


def write_wdbc():
    from sklearn.datasets import load_breast_cancer

    bc = load_breast_cancer()
    path = os.path.join(DATA, "wdbc.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "diagnosis", *bc.feature_names])
        for i, (row, t) in enumerate(zip(bc.data, bc.target)):
            # sklearn encodes malignant as 0
            w.writerow([i + 1, "M" if t == 0 else "B", *[repr(float(v)) for v in row]])
    print("wrote", path)


def write_compas():
    path = os.path.join(DATA, "compas-scores-two-years.csv")
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-d", tmp, "responsibly==0.1.2"]
        )
        wheel = next(os.path.join(tmp, n) for n in os.listdir(tmp) if n.endswith(".whl"))
        with zipfile.ZipFile(wheel) as z:
            raw = z.read("responsibly/dataset/compas/compas-scores-two-years.csv")
    with open(path, "wb") as f:
        f.write(raw)
    print("wrote", path)


if __name__ == "__main__":
    os.makedirs(DATA, exist_ok=True)
    write_wdbc()
    write_compas()
