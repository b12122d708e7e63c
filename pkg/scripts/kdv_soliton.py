"""One-soliton of KdV from the vacuum: integrate the Riccati covering over z=0,
push through the auto-Backlund map and compare with 2 sech^2(x - 4t).

Prints oracle error and finite-difference residual for three grid steps."""
import argparse

from jetkit.cli import corpus_dir
from jetkit.numeric import grid_of, oracle_error, residual, soliton
from jetkit.parser import load_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", help="write the h=1/64 field as CSV")
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    p = load_problem(corpus_dir() / "kdv_abt.prob")
    T = p.morphisms[p.numeric.morphism].target
    base = grid_of(p.numeric)
    prev = None
    print(f"{'h':>8} {'oracle':>10} {'res(2)':>10} {'ratio':>6} {'res(4)':>10}")
    for k in range(args.levels):
        g = base.refined(2**k) if k else base
        src, img = soliton(p, g)
        r2, r4 = residual(T, img), residual(T, img, accuracy=4)
        ratio = f"{prev / r2:6.2f}" if prev else "      "
        print(f"{g.hx:8.5f} {oracle_error(T, img, p.numeric.oracle):10.3e} {r2:10.3e} {ratio} {r4:10.3e}")
        prev = r2
        if k == 0 and args.out:
            img.to_csv(args.out)


if __name__ == "__main__":
    main()
