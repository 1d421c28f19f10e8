"""Print system dimensions for every method and degree on n = 64 ... 512.

No assembly or solve happens; the counts come from the DOF maps.

    python scripts/dof_counts.py
"""

from smectic_fem.assembly import system_size

LEVELS = (64, 128, 256, 512)
METHODS = [("argyris", None), ("c0ip", 2), ("c0ip", 3), ("c0ip", 4), ("mixed", 1), ("mixed", 2), ("mixed", 3)]


def main():
    print("method," + ",".join(f"n={n}" for n in LEVELS))
    for method, k in METHODS:
        label = method if k is None else f"{method}{k}"
        print(label + "," + ",".join(str(system_size(method, n, k)) for n in LEVELS))


if __name__ == "__main__":
    main()
