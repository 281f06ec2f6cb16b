"""Smoke test for the rankone extension module.

Build and install first:
    pip install --no-build-isolation -e crates/py
"""

import math
import random

import numpy as np

import rankone


def check(name, cond, detail=""):
    print(f"[{'ok' if cond else 'FAIL'}] {name} {detail}".rstrip())
    if not cond:
        raise SystemExit(1)


def main():
    check("db_to_linear", abs(rankone.db_to_linear(10.0) - 10.0) < 1e-12)

    rng = random.Random(4)
    a = [[rng.uniform(-1, 1) for _ in range(5)] for _ in range(5)]
    a = [[0.5 * (a[i][j] + a[j][i]) for j in range(5)] for i in range(5)]
    t = rankone.max_eigenvalue_sdp(a)
    lam = float(np.linalg.eigvalsh(np.array(a)).max())
    check("max eigenvalue via SDP", abs(t - lam) < 1e-6, f"{t:.9f} vs {lam:.9f}")

    v = np.array([1.0 + 2.0j, -0.5j, 0.3])
    w = np.outer(v, v.conj()).tolist()
    check("rot of an outer product", rankone.rot_ratio(w) < 1e-12)
    x = np.array(rankone.extract_rank_one(w))
    check("rank-one extraction", np.allclose(np.outer(x, x.conj()), np.array(w)))

    cfg = rankone.SystemConfig(3, 2, 10.0, seed=7)
    for sc in ("perfect", "sproc", "chance"):
        sol = rankone.solve(sc, cfg, certify=True)
        check(f"solve {sc}", sol.is_optimal() and sol.rot_w < 1e-4 and sol.certificate_pass, repr(sol))
        power = sum(float(np.vdot(b, b).real) for b in sol.beams)
        check(f"{sc} power matches objective", math.isclose(power, sol.objective, rel_tol=1e-6))

    c = rankone.complexity("perfect", 2, 3)
    # β = U + U·M, C_fact = 2·M⁶
    check("complexity", c["beta"] == 8 and c["c_fact"] == 2 * 3**6, str(c))

    rows = rankone.run_sweep("perfect", trials=3, seed=1, sinr_db=[0.0, 10.0])
    check("sweep rows", len(rows) == 6 and all(r["status"] == "Optimal" for r in rows))

    tr = rankone.ris_alternate(rankone.SystemConfig(3, 2, 6.0, seed=2), n=4)
    obj = tr["objective"]
    check("ris monotone", all(b <= a + 1e-8 for a, b in zip(obj, obj[1:])), f"{len(obj)} iterations")
    check("ris phases in unit disc", all(abs(z) <= 1.0 + 1e-12 for z in tr["theta"]))

    print("smoke test passed")


if __name__ == "__main__":
    main()
