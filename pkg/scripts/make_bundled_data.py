"""Regenerate the example tables shipped in ``src/sedml/data``."""
from pathlib import Path

from sedml.bench.synthetic import bundled_tables
from sedml.datamodel import write_csv

DATA = Path(__file__).resolve().parents[1] / "src" / "sedml" / "data"


def main():
    complete, observed = bundled_tables(seed=0)
    write_csv(complete, DATA / "synthetic_sediment_complete.csv", header_line="# sedml-schema: concentrations/1")
    write_csv(observed, DATA / "synthetic_sediment.csv", missing_token="BDL", header_line="# sedml-schema: concentrations/1")
    print(f"observed fraction {observed.observed_fraction:.3f}")


if __name__ == "__main__":
    main()
