"""Print the a-priori bound constants for the plexiglass-scale example.

Compares the constants from the bound formula with the published values
and shows which of them are mutually consistent.
"""
from peridyn_fd.study import QUOTED_C1, QUOTED_C2, worked_example


def main():
    rep = worked_example()
    print("Cbar = 1.19, eps = 0.1, T = 1.5/718")
    for line in rep.lines():
        print("  " + line)
    print(f"\nformula ratio x quoted C1 = {rep.ratio * QUOTED_C1:.4g} (quoted C2 = {QUOTED_C2})")
    print(f"formula ratio x formula C1 = {rep.ratio * rep.C1:.4g}")


if __name__ == "__main__":
    main()
