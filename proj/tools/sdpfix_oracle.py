#!/usr/bin/env python3
"""Independent reference solver for .sdpfix fixtures.

Parses the textual fixture format emitted by SdpProblem::serialize and solves
the program with cvxpy + Clarabel, i.e. a solver stack that shares no code
with the C++ implementation.  Used to freeze reference objectives for
regression tests.

Usage: sdpfix_oracle.py FIXTURE [--tol TOL]
Prints the solver status and the optimal objective to stdout.
"""

import argparse
import sys

import cvxpy as cp
import numpy as np


def _to_float(tok: str) -> float:
    # Fixture values are C "%a" hex floats; plain decimals also accepted.
    try:
        return float.fromhex(tok)
    except ValueError:
        return float(tok)


class Tokens:
    def __init__(self, text: str):
        self._toks = text.split()
        self._pos = 0

    def next(self) -> str:
        if self._pos >= len(self._toks):
            raise ValueError("sdpfix: unexpected end of input")
        tok = self._toks[self._pos]
        self._pos += 1
        return tok

    def next_int(self) -> int:
        return int(self.next())

    def next_val(self) -> float:
        return _to_float(self.next())


def read_dense(tk: Tokens, m: np.ndarray, tag: str) -> str:
    """Reads 'tag i j val' triplets until a different token; returns it."""
    while True:
        t = tk.next()
        if t != tag:
            return t
        i = tk.next_int()
        j = tk.next_int()
        m[i, j] = tk.next_val()


def parse_fixture(text: str) -> dict:
    tk = Tokens(text)
    if tk.next() != "sdpfix" or tk.next() != "v1":
        raise ValueError("sdpfix: bad magic")
    if tk.next() != "config_hash":
        raise ValueError("sdpfix: missing config_hash")
    tk.next()  # hash value, not checked here

    prob = {
        "blocks": [],          # list of (name, dim)
        "scalars": [],         # list of (name, lower or None)
        "obj_const": 0.0,
        "obj_blocks": {},      # block index -> C matrix
        "obj_scalars": {},     # scalar index -> coefficient
        "scons": [],           # dicts: name, rel, rhs, blocks[(b, A)], scalars[(j, a)]
        "lmis": [],            # dicts: name, dim, terms[(b, coeff, P)], sterms[(j, F)], rhs
    }

    tok = tk.next()
    while True:
        if tok == "end":
            break
        if tok == "psd_block":
            name = tk.next()
            prob["blocks"].append((name, tk.next_int()))
            tok = tk.next()
        elif tok == "scalar":
            name = tk.next()
            low = tk.next()
            prob["scalars"].append((name, None if low == "free" else _to_float(low)))
            tok = tk.next()
        elif tok == "objective_const":
            prob["obj_const"] = tk.next_val()
            tok = tk.next()
        elif tok == "obj_block":
            b = tk.next_int()
            dim = prob["blocks"][b][1]
            C = np.zeros((dim, dim))
            tok = read_dense(tk, C, "e")
            prob["obj_blocks"][b] = C
        elif tok == "obj_scalar":
            j = tk.next_int()
            prob["obj_scalars"][j] = tk.next_val()
            tok = tk.next()
        elif tok == "scon":
            name = tk.next()
            rel = tk.next()
            rhs = tk.next_val()
            con = {"name": name, "rel": rel, "rhs": rhs, "blocks": [], "scalars": []}
            tok = tk.next()
            while tok != "endc":
                if tok == "sb":
                    b = tk.next_int()
                    dim = prob["blocks"][b][1]
                    A = np.zeros((dim, dim))
                    tok = read_dense(tk, A, "e")
                    con["blocks"].append((b, A))
                elif tok == "ss":
                    j = tk.next_int()
                    con["scalars"].append((j, tk.next_val()))
                    tok = tk.next()
                else:
                    raise ValueError(f"sdpfix: unexpected token {tok!r} in scon")
            prob["scons"].append(con)
            tok = tk.next()
        elif tok == "lmi":
            name = tk.next()
            dim = tk.next_int()
            con = {"name": name, "dim": dim, "terms": [], "sterms": [],
                   "rhs": np.zeros((dim, dim))}
            tok = tk.next()
            while tok != "endc":
                if tok == "mt":
                    b = tk.next_int()
                    coeff = tk.next_val()
                    bdim = prob["blocks"][b][1]
                    P = np.zeros((bdim, dim))
                    tok = read_dense(tk, P, "p")
                    if tok != "endt":
                        raise ValueError("sdpfix: lmi term not terminated")
                    con["terms"].append((b, coeff, P))
                    tok = tk.next()
                elif tok == "st":
                    j = tk.next_int()
                    F = np.zeros((dim, dim))
                    tok = read_dense(tk, F, "e")
                    if tok != "endt":
                        raise ValueError("sdpfix: lmi scalar term not terminated")
                    con["sterms"].append((j, F))
                    tok = tk.next()
                elif tok == "rhs":
                    tok = read_dense(tk, con["rhs"], "e")
                else:
                    raise ValueError(f"sdpfix: unexpected token {tok!r} in lmi")
            prob["lmis"].append(con)
            tok = tk.next()
        else:
            raise ValueError(f"sdpfix: unexpected token {tok!r}")
    return prob


def build_cvxpy(prob: dict):
    X = [cp.Variable((d, d), PSD=True) for _, d in prob["blocks"]]
    s = [cp.Variable() for _ in prob["scalars"]]

    cons = []
    for var, (_, lower) in zip(s, prob["scalars"]):
        if lower is not None:
            cons.append(var >= lower)

    obj = cp.Constant(prob["obj_const"])
    for b, C in prob["obj_blocks"].items():
        obj = obj + cp.sum(cp.multiply(C, X[b]))
    for j, a in prob["obj_scalars"].items():
        obj = obj + a * s[j]

    for con in prob["scons"]:
        lhs = cp.Constant(0.0)
        for b, A in con["blocks"]:
            lhs = lhs + cp.sum(cp.multiply(A, X[b]))
        for j, a in con["scalars"]:
            lhs = lhs + a * s[j]
        if con["rel"] == "le":
            cons.append(lhs <= con["rhs"])
        elif con["rel"] == "ge":
            cons.append(lhs >= con["rhs"])
        elif con["rel"] == "eq":
            cons.append(lhs == con["rhs"])
        else:
            raise ValueError(f"sdpfix: bad relation {con['rel']!r}")

    # LMI convention: sum of terms must satisfy  sum <= rhs  in the PSD order.
    for con in prob["lmis"]:
        acc = -cp.Constant(con["rhs"])
        for b, coeff, P in con["terms"]:
            acc = acc + coeff * (P.T @ X[b] @ P)
        for j, F in con["sterms"]:
            acc = acc + s[j] * F
        cons.append(cp.Constant(np.zeros(acc.shape)) >> 0.5 * (acc + acc.T))

    return cp.Problem(cp.Minimize(obj), cons)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("fixture")
    ap.add_argument("--tol", type=float, default=1e-9,
                    help="Clarabel absolute/relative gap tolerance")
    args = ap.parse_args()

    with open(args.fixture, "r", encoding="utf-8") as fh:
        prob = parse_fixture(fh.read())
    cvx = build_cvxpy(prob)
    cvx.solve(solver=cp.CLARABEL,
              tol_gap_abs=args.tol, tol_gap_rel=args.tol,
              tol_feas=args.tol)
    print(f"status {cvx.status}")
    print(f"objective {cvx.value:.17g}")
    return 0 if cvx.status in ("optimal", "optimal_inaccurate") else 1


if __name__ == "__main__":
    sys.exit(main())
