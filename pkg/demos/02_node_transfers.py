"""What a node lets through when supplies run short.

A node transfer problem holds oriented demands (incoming link x outgoing
link), the receiving flow of each outgoing link, and a reservation on each
outgoing link for the counterflow already walking toward the node on its
twin.  The solver maximizes the total transfer while scaling each incoming
link's movements by a single factor, so nobody jumps the queue within a link.

Three situations below: a crossing with reservations, a fair merge, and the
counterflow reservation acting as the anti-gridlock valve.
"""

import numpy as np

from pedflow import NodeFlowProblem, solve_node


def show(problem, sol, incoming, outgoing):
    print(f"{'':>4}" + "".join(f"{j:>8}" for j in outgoing) + f"{'total':>8}   reduction")
    for r, name in enumerate(incoming):
        row = "".join(f"{sol.flows[r, c]:>8.3f}" for c in range(len(outgoing)))
        print(f"{name:>4}" + row + f"{sol.flows[r].sum():>8.3f}   {sol.reductions[r]:.3f}")
    taken = sol.flows.sum(axis=0) + problem.counterflow
    print(f"{'used':>4}" + "".join(f"{v:>8.3f}" for v in taken) + "   (flows + reservations)")
    print(f"{'R':>4}" + "".join(f"{v:>8.3f}" for v in problem.supplies))
    print()


print("crossing with counterflow reservations on three exits")
demands = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.5],
    [0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0],
])
problem = NodeFlowProblem(demands, np.array([3.0, 2.0, 2.0, 1.0]),
                          np.array([1.0, 1.5, 1.0, 0.0]))
show(problem, solve_node(problem), "a b c d".split(), "a' b' c' d'".split())

print("fair merge: two equal competitors into one short exit")
problem = NodeFlowProblem(np.array([[1.0], [1.0]]), np.array([1.0]))
show(problem, solve_node(problem), ["i1", "i2"], ["j"])

print("the same merge when one competitor only wants 0.2")
problem = NodeFlowProblem(np.array([[0.2], [2.0]]), np.array([1.0]))
show(problem, solve_node(problem), ["i1", "i2"], ["j"])

print("anti-gridlock valve: the reservation shrinks what may enter")
for reserved in (0.0, 1.0, 2.0):
    problem = NodeFlowProblem(np.array([[3.0]]), np.array([2.0]), np.array([reserved]))
    sol = solve_node(problem)
    note = " (supply fully reserved)" if sol.total == 0 else ""
    print(f"  reservation {reserved:.1f}: transfer {sol.total:.1f}{note}")
