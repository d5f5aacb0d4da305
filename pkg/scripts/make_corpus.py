#!/usr/bin/env python3
"""Regenerate the bundled synthetic corpus under data/corpus/.

The corpus is fully determined by the seed, so re-running this script
reproduces the shipped files byte for byte.
"""

import argparse
from pathlib import Path

from docgaze.synth import generate_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out-dir",
        default=Path(__file__).resolve().parent.parent / "data" / "corpus",
        type=Path,
    )
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--images", type=int, default=12)
    parser.add_argument("--subjects", type=int, default=4)
    args = parser.parse_args()
    manifest = generate_corpus(
        args.out_dir, n_images=args.images, n_subjects=args.subjects,
        seed=args.seed,
    )
    print(f"wrote {manifest}")


if __name__ == "__main__":
    main()
