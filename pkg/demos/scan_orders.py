"""Print the visit-rank grid of each scan family on a small grid.

    python3 demos/scan_orders.py [H W]
"""

import sys

from tramba import scan2d


def show(title, order):
    print(title)
    for row in order.rank_grid():
        print("  " + " ".join(f"{v:3d}" for v in row))
    print()


def main(h=6, w=8):
    shape = (h, w)
    # each family contributes two forward directions; the other two are reversals
    for kind in ("cross", "window", "dilation", "helix"):
        s = scan2d.make_scan(kind, shape, window=3, rate=2)
        show(f"{kind}, forward a", s.forward_a)
        show(f"{kind}, forward b", s.forward_b)
    cov = scan2d.helix_coverage(shape)
    print(f"helix slices reached {cov.covered_a}/{cov.shape.size} cells; "
          f"{cov.completed_a} were appended in raster order")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:3]))
