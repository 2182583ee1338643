"""Smoke test for the Python bindings.

Build first:  pip install --no-build-isolation -e crates/py
"""

import json
import math

import demon_ledger_py as dl


def close(a, b, tol=1e-9):
    assert abs(a - b) <= tol * max(1.0, abs(b)), (a, b)


def main():
    close(dl.entropy([[0.5, 0], [0, 0.5]]), math.log(2))
    close(dl.entropy([[0.75, 0], [0, 0.25]]), 0.562335144618808)
    close(dl.relative_entropy([[1, 0], [0, 0]], [[0.5, 0], [0, 0.5]]), math.log(2))
    assert math.isinf(dl.relative_entropy([[0.5, 0], [0, 0.5]], [[1, 0], [0, 0]]))
    bell = [[0.5 if i in (0, 3) and j in (0, 3) else 0 for j in range(4)] for i in range(4)]
    close(dl.mutual_information(bell, (2, 2)), 2 * math.log(2))

    null = dl.Protocol.scenario("null").run()
    for name in ("w_ext_a", "w_in_mk", "w_tot"):
        assert abs(null.scalar(name)) < 1e-12, name

    ce = dl.Protocol.scenario("counterexample")
    rep = ce.run()
    assert rep.verdict("measurement_shannon_form")[0] == "fail"
    close(rep.scalar("ds_amk_02"), -math.log(2))
    close(rep.in_bits().scalar("j_go"), 1.0)

    sz = dl.Protocol.scenario("szilard", stages=16)
    back = dl.Protocol.from_json(sz.to_json())
    assert back.issues() == []
    a, b = sz.run(), back.run()
    assert a.scalars() == b.scalars()
    outcome, lhs, rhs, _ = a.verdict("extracted_work_bound")
    assert outcome == "pass" and lhs <= rhs + 1e-9

    r = dl.Protocol.random(7, pointer_class="generic").run()
    assert r.verdict("extracted_work_identity")[0] == "pass"

    s1 = dl.search(24, seed=3)
    s2 = dl.search(24, seed=3)
    assert s1 == s2
    strata = json.loads(s1)["strata"]
    assert sum(st["samples"] for st in strata.values()) == 24

    print("python smoke test ok:", dl.__version__)


if __name__ == "__main__":
    main()
