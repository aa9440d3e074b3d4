"""Export the two benchmark tables used by the test suite to data/*.csv.

diabete comes from scikit-learn's bundled copy (unscaled features).
housing is scikit-learn's California housing table; since fetching it needs
network access to figshare, it is read from the parquet copy shipped inside
the pytorch-widedeep wheel (``pip download --no-deps pytorch-widedeep``).
"""

import io
import sys
import zipfile
from pathlib import Path

import pandas as pd
from sklearn.datasets import load_diabetes

OUT = Path(__file__).resolve().parent.parent / "data"


def export_diabete():
    bunch = load_diabetes(scaled=False, as_frame=True)
    df = bunch.frame.rename(columns={"target": "y"})
    df.to_csv(OUT / "diabete.csv", index=False)


def export_housing(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("pytorch_widedeep/datasets/data/california_housing.parquet.brotli")
    df = pd.read_parquet(io.BytesIO(raw))
    df.to_csv(OUT / "housing.csv", index=False)


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    export_diabete()
    if len(sys.argv) > 1:
        export_housing(sys.argv[1])
