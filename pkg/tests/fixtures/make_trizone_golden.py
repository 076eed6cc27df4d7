"""Regenerate the golden inputs/outputs for the ``trizone`` CLI test.

Uses only numpy, Pillow and the per-pixel oracles in ``tests/oracles.py``;
nothing from the package under test. Run from the repository root:

    python3 tests/fixtures/make_trizone_golden.py
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))
import oracles  # noqa: E402

OUT = HERE / "trizone_cli"
PALETTE = {0: "background", 1: "face", 4: "upper", 5: "dress"}


def save_gray(name, array):
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(OUT / name)


def main():
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(20240)
    h, w = 16, 12
    parsing = rng.choice(list(PALETTE), size=(h, w), p=[0.4, 0.1, 0.2, 0.3]).astype(np.uint8)
    gen = rng.random((h, w)) < 0.5
    fg = rng.random((h, w)) < 0.7
    pred = rng.integers(0, 3, size=(h, w)).astype(np.uint8)

    save_gray("parsing.png", parsing)
    (OUT / "parsing.palette").write_text("".join(f"{k}={v}\n" for k, v in sorted(PALETTE.items())))
    save_gray("gen.png", gen * 255)
    save_gray("fg.png", fg * 255)
    save_gray("pred.png", pred)

    tryon = oracles.to_lists(parsing == 5)  # garment class "dress"
    L = oracles.to_lists
    imagi1 = oracles.imagi_round1(L(gen), L(fg), tryon)
    save_gray("expected_round1.png", oracles.zone_codes(tryon, imagi1))
    for name, union_first in (("union-first", True), ("intersect-first", False)):
        imagi2 = oracles.imagi_round2(L(pred == 2), L(pred == 1), L(fg), tryon, union_first)
        save_gray(f"expected_round2_{name}.png", oracles.zone_codes(tryon, imagi2))


if __name__ == "__main__":
    main()
