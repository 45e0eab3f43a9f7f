#!/usr/bin/env python3
"""External solver adapter: solve an LP-format model with HiGHS via scipy.

Usage: highs_solve.py MODEL.lp
Writes MODEL.sol next to the model and prints its path on the last line.
Handles the LP subset written by `kfood solve --export`.
"""
import re
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

TERM = re.compile(r"([+-])?\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)?\s*([A-Za-z_][\w.]*)")


def parse_expr(text, index, names):
    coeffs = {}
    for sign, num, name in TERM.findall(text):
        c = float(num) if num else 1.0
        if sign == "-":
            c = -c
        if name not in index:
            index[name] = len(names)
            names.append(name)
        coeffs[index[name]] = coeffs.get(index[name], 0.0) + c
    return coeffs


def read_lp(path):
    sections = {}
    current = None
    with open(path) as fh:
        for raw in fh:
            line = raw.split("\\", 1)[0].rstrip()
            if not line.strip():
                continue
            head = line.strip().lower()
            if head in ("maximize", "minimize", "subject to", "bounds", "binary", "end"):
                current = head
                sections.setdefault(current, [])
                continue
            if line.startswith("   ") and sections.get(current):
                sections[current][-1] += " " + line.strip()
            else:
                sections.setdefault(current, []).append(line.strip())
    return sections


def main():
    path = sys.argv[1]
    sec = read_lp(path)
    index, names = {}, []
    sense = -1.0 if "maximize" in sec else 1.0
    obj_text = " ".join(sec.get("maximize", sec.get("minimize", [])))
    obj_text = obj_text.split(":", 1)[1]
    objective = parse_expr(obj_text, index, names)

    rows = []
    for row in sec.get("subject to", []):
        body = row.split(":", 1)[1]
        m = re.match(r"(.*?)(<=|>=|=)\s*(\S+)$", body)
        expr, cmp, rhs = m.group(1), m.group(2), float(m.group(3))
        rows.append((parse_expr(expr, index, names), cmp, rhs))

    bounds = {}
    for b in sec.get("bounds", []):
        parts = b.split()
        if len(parts) == 5:
            bounds[parts[2]] = (float(parts[0]), float(parts[4]))
        elif parts[1] == "=":
            bounds[parts[0]] = (float(parts[2]), float(parts[2]))
        elif parts[1] == ">=":
            bounds[parts[0]] = (float(parts[2]), np.inf)
    binary = set(" ".join(sec.get("binary", [])).split())
    for name in list(bounds) + sorted(binary):
        if name not in index:
            index[name] = len(names)
            names.append(name)

    n = len(names)
    c = np.zeros(n)
    for j, v in objective.items():
        c[j] = sense * v
    lo, hi = np.zeros(n), np.full(n, np.inf)
    integrality = np.zeros(n)
    for name, (l, u) in bounds.items():
        lo[index[name]], hi[index[name]] = l, u
    for name in binary:
        lo[index[name]], hi[index[name]] = 0.0, 1.0
        integrality[index[name]] = 1

    r, col, val, rl, ru = [], [], [], [], []
    for i, (coeffs, cmp, rhs) in enumerate(rows):
        for j, v in coeffs.items():
            r.append(i)
            col.append(j)
            val.append(v)
        rl.append(rhs if cmp in ("=", ">=") else -np.inf)
        ru.append(rhs if cmp in ("=", "<=") else np.inf)
    a = coo_matrix((val, (r, col)), shape=(len(rows), n)).tocsr()
    res = milp(c, constraints=LinearConstraint(a, rl, ru), bounds=Bounds(lo, hi),
               integrality=integrality, options={"mip_rel_gap": 1e-9})

    out = path.rsplit(".", 1)[0] + ".sol"
    with open(out, "w") as fh:
        if res.x is None:
            fh.write("# Status Infeasible\n")
        else:
            x = res.x.copy()
            x[integrality == 1] = np.round(x[integrality == 1])
            fh.write("# Status Optimal\n")
            value = sum(v * x[j] for j, v in objective.items())
            fh.write("# Objective value = %r\n" % float(value))
            for name, v in zip(names, x):
                fh.write("%s %r\n" % (name, float(v)))
    print("solved %d variables, %d rows" % (n, len(rows)))
    print(out)


if __name__ == "__main__":
    main()
