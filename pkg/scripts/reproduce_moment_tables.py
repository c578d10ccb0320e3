"""Exact Weingarten values, tabulated constants and Haar Monte-Carlo estimates for every moment case.

Writes one CSV row per case (all values in units of the case's natural
denominator are also given as floats).
"""

import argparse
import csv
import sys

from mqsvt_spoof.moments import moment_mc, table_cases, tabulated_value


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh)
    w.writerow(["case", "t", "exact", "exact_float", "tabulated", "tabulated_float", "mc", "mc_stderr", "instances_agree"])
    for i, case in enumerate(table_cases()):
        inst = case.representative
        exact = case.exact(inst)
        tab = tabulated_value(case, inst)
        same = all(case.exact(j) == tabulated_value(case, j) for j in case.instances)
        est, se = moment_mc(inst[: case.t], inst[case.t :], case.t, args.samples, args.seed + i)
        w.writerow([case.name, case.t, str(exact), float(exact), str(tab), float(tab), est, se, same])
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
