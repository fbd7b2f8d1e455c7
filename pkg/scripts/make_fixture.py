"""Regenerate the bundled synthetic fixture under fixtures/synthetic/."""
import argparse
from pathlib import Path

from etlinks.synthetic import write_fixture

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=str(ROOT / "fixtures" / "synthetic"))
    args = ap.parse_args()
    print(write_fixture(args.out, args.seed))
