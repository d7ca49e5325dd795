#!/usr/bin/env python3
"""Plot BER curves from `syspolar simulate` CSV output.

usage: plot_ber.py results.csv [out.png]
"""
import csv
import sys

import matplotlib.pyplot as plt


def read(path):
    with open(path) as f:
        first = f.readline()
        fields = dict(t.split("=", 1) for t in first.lstrip("#").split() if "=" in t)
        if fields.get("schema") != "1":
            sys.exit(f"{path}: unsupported schema {fields.get('schema')!r}")
        return list(csv.DictReader(f))


def main():
    rows = read(sys.argv[1])
    x = [float(r["channel_param"]) for r in rows]
    plt.semilogy(x, [float(r["ber_nonsys"]) for r in rows], "o-", label="non-systematic")
    plt.semilogy(x, [float(r["ber_sys"]) for r in rows], "s-", label="systematic")
    plt.xlabel("channel parameter")
    plt.ylabel("BER")
    plt.grid(True, which="both", alpha=0.3)
    plt.legend()
    if len(sys.argv) > 2:
        plt.savefig(sys.argv[2], dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
