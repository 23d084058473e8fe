"""Reference optima for the frozen l1-logistic instances in test_elasso.cpp.

The instances are generated by the same 64-bit LCG as the C++ test, so the
data is identical. The objective is

    -loglik/N + rho * sum_k sd_k |beta_k|

with sd_k the population standard deviation of predictor k, and is solved by
cvxpy with Clarabel at tight tolerances.
"""
import cvxpy as cp
import numpy as np

MASK = (1 << 64) - 1


class Lcg:
    def __init__(self, seed):
        self.state = seed & MASK

    def uniform(self):
        self.state = (self.state * 6364136223846793005 + 1442695040888963407) & MASK
        return (self.state >> 11) / float(1 << 53)


def instance_60x4():
    g = Lcg(20240611)
    rows = []
    for _ in range(60):
        x0 = int(g.uniform() < 0.5)
        x1 = x0 if g.uniform() < 0.8 else 1 - x0
        x2 = int(g.uniform() < 0.35)
        x3 = int(g.uniform() < 0.2 + 0.3 * x0 + 0.3 * x2)
        rows.append([x0, x1, x2, x3])
    return np.array(rows, dtype=float)


def instance_50x3():
    g = Lcg(777)
    rows = []
    for _ in range(50):
        x0 = int(g.uniform() < 0.5)
        x2 = int(g.uniform() < 0.4)
        rows.append([x0, x0, x2])
    return np.array(rows, dtype=float)


def solve(a, node, rho):
    y = a[:, node]
    x = np.delete(a, node, axis=1)
    n = x.shape[0]
    sd = x.std(axis=0)
    tau = cp.Variable()
    beta = cp.Variable(x.shape[1])
    eta = tau + x @ beta
    loss = cp.sum(cp.logistic(eta) - cp.multiply(y, eta)) / n
    obj = loss + rho * cp.sum(cp.multiply(sd, cp.abs(beta)))
    prob = cp.Problem(cp.Minimize(obj))
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
    return prob.value, tau.value, beta.value


if __name__ == "__main__":
    for name, a, node, rho in [("60x4", instance_60x4(), 0, 0.05), ("50x3", instance_50x3(), 0, 0.05)]:
        val, tau, beta = solve(a, node, rho)
        print(name, "objective=%.15g" % val, "tau=%.10g" % tau, "beta=", ["%.10g" % b for b in beta])
