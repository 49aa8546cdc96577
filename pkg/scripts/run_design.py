"""Grid + GA design run on the desk-scale config, with a one-line summary of the result."""
import argparse
import json
import sys
from pathlib import Path

from omckit import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "design_desk.json"))
    ap.add_argument("--out-dir", default="design_out")
    args = ap.parse_args()
    out = Path(args.out_dir)
    code = cli.main(["design", args.config, "--stage", "both", "--out-dir", str(out),
                     "--output", str(out / "report.json")])
    if code:
        sys.exit(code)
    ga = json.loads((out / "report.json").read_text())["results"]["ga"]
    win = ga["winner"]["evaluation"]["fitness"]["value"]
    base = ga["baseline"]["evaluation"]["fitness"]["value"]
    print(f"winner fitness {win:.4g} vs baseline {base:.4g}; artifacts in {out}/")


if __name__ == "__main__":
    main()
