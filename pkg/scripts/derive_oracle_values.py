"""Independent reference values frozen into the test-suite.

Pure Python, no imports from the package: every number here is computed by a
different route than the library (closed forms, hand-sized linear systems,
and an exact count-chain solution of Tiger instead of a belief grid).
Run ``python3 scripts/derive_oracle_values.py`` to reprint them.
"""

import math

GAMMA = 0.95


def bayes_tiger_listen():
    b = (0.5, 0.5)
    lik = (0.85, 0.15)
    z = b[0] * lik[0] + b[1] * lik[1]
    return b[0] * lik[0] / z, b[1] * lik[1] / z


def lipschitz_example():
    R_max, g, L_R, L_P, alpha = 1.0, 0.5, 1.0, 1.0, 1.0
    V = R_max / (1 - g)
    return max((L_R + g * V * L_P) / alpha, R_max + g * (2 - g) / (1 - g) * V)


def estimate_example():
    L, d, q, U = 100.0, 0.1, 50.0, 200.0
    return (min(L * d + q, U) + U) / 2


def two_sample_loop(g=0.9, r1=1.0, r2=3.0):
    # q1 = r1 + g q2, q2 = r2 + g q1
    det = 1 - g * g
    return (r1 + g * r2) / det, (r2 + g * r1) / det


def complexity_example():
    Q, eps, k, N, delta, R = 200.0, 1.0, 1, 10, 0.1, 10.0
    return (2 * Q / eps) * (k * N + math.log(2 / delta)) * math.log(R / eps)


def tiger_latent_q(g=GAMMA):
    # per-game latent MDP, tiger on the left, native units
    v = 10.0  # opening the right door is immediately optimal
    return {"listen": -1 + g * v, "open-left": -100.0, "open-right": 10.0}


def tiger_qmdp_after_listen():
    q = tiger_latent_q()
    b = 0.85
    return {
        "listen": q["listen"],
        "open-left": b * q["open-left"] + (1 - b) * q["open-right"],
        "open-right": b * q["open-right"] + (1 - b) * q["open-left"],
    }


def tiger_count_chain(continuing, g=GAMMA, n_max=40, iters=5000):
    """Exact Tiger value: the belief is a function of (#heard-left - #heard-right)."""
    ratio = 0.15 / 0.85

    def p_left(n):
        return 1.0 / (1.0 + ratio**n)

    V = {n: 0.0 for n in range(-n_max, n_max + 1)}
    for _ in range(iters):
        reset = V[0] if continuing else 0.0
        new = {}
        for n in V:
            p = p_left(n)
            hear_left = p * 0.85 + (1 - p) * 0.15
            up, down = min(n + 1, n_max), max(n - 1, -n_max)
            listen = -1 + g * (hear_left * V[up] + (1 - hear_left) * V[down])
            open_right = p * 10 + (1 - p) * -100 + g * reset
            open_left = p * -100 + (1 - p) * 10 + g * reset
            new[n] = max(listen, open_left, open_right)
        V = new
    return V[0]


def chain_slip0_end_value(g=GAMMA):
    return 10 / (1 - g)


def lightdark_path_return(g=GAMMA):
    # three Lefts to the wall, one vertical move, four Rights; paid on the eighth step
    return 10 * g**7


if __name__ == "__main__":
    print("bayes tiger listen", bayes_tiger_listen())
    print("lipschitz example L_Q", lipschitz_example())
    print("estimate example", estimate_example())
    print("two-sample loop", repr(two_sample_loop()))
    print("complexity example m", repr(complexity_example()))
    print("tiger latent q", tiger_latent_q())
    print("tiger qmdp after listen", tiger_qmdp_after_listen())
    print("tiger episodic V(b0)", repr(tiger_count_chain(False)))
    print("tiger continuing V(b0)", repr(tiger_count_chain(True)))
    print("chain slip 0 Q(s5, A)", chain_slip0_end_value())
    print("lightdark sigma=0 return", repr(lightdark_path_return()))
