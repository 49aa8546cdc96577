"""Rebuild the synthetic CSV corpus and the golden CLI reports under tests/golden.

Run after an intentional change to report content; review the diff before committing.
"""
import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from golden_cases import CASES, CORPUS, CORPUS_NOISE, CORPUS_SEED, REPORTS, argv  # noqa: E402

from omckit import cli, synth  # noqa: E402


def main():
    synth.write_corpus(CORPUS, CORPUS_SEED, CORPUS_NOISE)
    REPORTS.mkdir(parents=True, exist_ok=True)
    for name in CASES:
        with tempfile.TemporaryDirectory() as tmp:
            out = REPORTS / f"{name}.json"
            code = cli.main(argv(name, tmp) + ["--output", str(out)])
            if code != 0:
                raise SystemExit(f"{name}: exit {code}")
            trace = Path(tmp) / "trace.jsonl"
            if trace.exists():
                shutil.copy(trace, REPORTS / f"{name}.trace.jsonl")
        print("wrote", out.relative_to(REPORTS.parent.parent))


if __name__ == "__main__":
    main()
