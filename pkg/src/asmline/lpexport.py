"""Write a balance instance as an LP-format mixed-integer program.

The model is the path/phase formulation the native solver optimizes, for
cross-checking with any LP-format MIP solver. Variables:

* ``x<e>``     edge e is on the chosen path
* ``y<l>_<p>`` layer l (0-based) runs in phase p
* ``z<o>_<p>`` operation o (index into the joint order) runs in phase p
* ``alpha``    largest phase load
"""
from __future__ import annotations

from .balance import BalanceProblem


def _fmt(v: float) -> str:
    return repr(float(v))


def _terms(pairs) -> str:
    out = []
    for coef, var in pairs:
        sign = "-" if coef < 0 else "+"
        out.append(f"{sign} {_fmt(abs(coef))} {var}")
    text = " ".join(out)
    return text[2:] if text.startswith("+ ") else text


def export_lp(problem: BalanceProblem) -> str:
    d = problem.digraph
    L, P = d.L, problem.phases
    lines = ["\\ asmline station-balancing instance"]
    for i, j in enumerate(d.joint_order):
        lines.append(f"\\ operation {i} = joint {j}; time {_fmt(problem.times[j])}")
    lines.append("Minimize")
    obj = [((1 - problem.lam) * d.weight[e], f"x{e}") for e in range(d.n_edges)]
    obj.append((problem.lam * problem.c, "alpha"))
    lines.append(" obj: " + _terms(obj))
    lines.append("Subject To")
    lines.append(" start: " + " + ".join(f"x{e}" for e in d.out_edges[d.start]) + " = 1")
    lines.append(" end: " + " + ".join(f"x{e}" for e in d.in_edges[d.end]) + " = 1")
    for v in range(d.n_nodes):
        if v in (d.start, d.end):
            continue
        terms = [f"+ x{e}" for e in d.in_edges[v]] + [f"- x{e}" for e in d.out_edges[v]]
        lines.append(f" flow{v}: " + " ".join(terms).lstrip("+ ") + " = 0")
    for l in range(L):
        lines.append(f" layer{l}: " + " + ".join(f"y{l}_{p}" for p in range(P)) + " = 1")
    for l in range(1, L):
        lines.append(f" first{l}: y{l}_0 - y{l - 1}_0 <= 0")
        for p in range(1, P):
            lines.append(f" step{l}_{p}: y{l}_{p} - y{l - 1}_{p - 1} - y{l - 1}_{p} <= 0")
    for o in range(L):
        lines.append(f" assign{o}: " + " + ".join(f"z{o}_{p}" for p in range(P)) + " = 1")
    for e in range(d.n_edges):
        l = d.edge_layer(e) - 1
        o = d.op[e]
        for p in range(P):
            lines.append(f" link{e}_{p}: z{o}_{p} - x{e} - y{l}_{p} >= -1")
    for p in range(P):
        terms = " ".join(f"- {_fmt(problem.times[j])} z{o}_{p}" for o, j in enumerate(d.joint_order))
        lines.append(f" load{p}: alpha {terms} >= 0")
    lines.append("Bounds")
    lines.append(" alpha >= 0")
    lines.append("Binary")
    names = [f"x{e}" for e in range(d.n_edges)]
    names += [f"y{l}_{p}" for l in range(L) for p in range(P)]
    names += [f"z{o}_{p}" for o in range(L) for p in range(P)]
    for i in range(0, len(names), 10):
        lines.append(" " + " ".join(names[i:i + 10]))
    lines.append("End")
    return "\n".join(lines) + "\n"
