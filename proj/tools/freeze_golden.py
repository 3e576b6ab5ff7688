#!/usr/bin/env python3
"""Write tests/golden/<Strategy>.txt from the prompts_<Strategy>.jsonl of a fixture run.

Usage: fsbench run --config data/fixture/config.json --offline
       tools/freeze_golden.py data/fixture/out tests/golden
Review the diff by hand before committing.
"""
import json
import sys
from pathlib import Path

STRATEGIES = ["ZeroShot", "FewShot", "CoT", "DKCoT", "ADFCoT"]


def main(run_dir, golden_dir):
    golden_dir.mkdir(parents=True, exist_ok=True)
    for s in STRATEGIES:
        bundles = [json.loads(line) for line in (run_dir / f"prompts_{s}.jsonl").read_text().splitlines() if line]
        bundles.sort(key=lambda b: b["target_article_id"])
        with (golden_dir / f"{s}.txt").open("w", newline="") as f:
            for b in bundles:
                f.write(f"=== {b['target_article_id']} ===\n")
                f.write(b["text"])
        print(f"{s}: {len(bundles)} prompts")


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
