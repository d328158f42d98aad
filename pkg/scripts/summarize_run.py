"""Print a compact summary of a finished output tree.

    python scripts/summarize_run.py OUT_DIR
"""

import argparse
import json
from pathlib import Path


def load(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir", type=Path)
    args = ap.parse_args()
    out = args.out_dir

    manifest = load(out / "manifest.json")
    stages = manifest["stages"]
    if "extract" in stages:
        e = stages["extract"]
        print(f"pages {e['pages']}  documents {e['documents']}  entities {e['entities']}  redirects {e['redirects']}")
    if "link" in stages:
        s = stages["link"]
        print(f"linked: found {s['found']}  not found {s['not_found']}  errors {s['error']}")
    if "build" in stages and stages["build"]["mapping_gaps"]:
        print("classes without a priority:", ", ".join(stages["build"]["mapping_gaps"]))

    stats = load(out / "stats.json")
    share = stats["entity_tokens"] / stats["total_tokens"] if stats["total_tokens"] else 0.0
    print(f"\ntokens {stats['total_tokens']}  entity tokens {stats['entity_tokens']} ({share:.1%})"
          f"  entities {stats['entity_count']}")
    for cls, n in stats["coarse"].items():
        print(f"  {cls:<13}{n}")

    delta_path = out / "delta.json"
    if delta_path.exists():
        delta = load(delta_path)
        print("\naugmentation        before      after      delta")
        for key in ("non_entity_tokens", "entity_tokens", "entity_count"):
            row = delta[key]
            print(f"  {key:<17}{row['before']:>8}{row['after']:>11}{row['delta']:>+11}")
        for cls, row in delta["coarse"].items():
            print(f"  {cls:<17}{row['before']:>8}{row['after']:>11}{row['delta']:>+11}")


if __name__ == "__main__":
    main()
