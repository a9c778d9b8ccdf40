"""Smoke test for the tunesel_py extension module."""

import math
import tempfile
from pathlib import Path

import tunesel_py as ts


def main() -> None:
    report = ts.corpus_bleu(["the cat sat on the mat"], [["the cat sat on a mat"]])
    assert abs(report["bleu"] - 0.537285) < 1e-6, report
    assert report["bp"] == 1.0

    plus1 = ts.sentence_bleu("the cat sat on the mat", ["the cat sat on a mat"])
    assert abs(plus1 - 0.638943) < 1e-6, plus1
    assert ts.sentence_bleu("a b", ["a b c"], scheme="plus1-bp") > ts.sentence_bleu("a b", ["a b c"])

    lengths = [2, 5, 9, 14]
    assert ts.select_by_length(lengths, "longest") == [2, 3]
    assert ts.select_by_length(lengths, "middle") == [1, 2]
    assert len(ts.select_by_length(lengths, "random", seed=4)) == 2

    assert math.isclose(ts.pearson([0.0, 1.0, 2.0], [1.0, 3.0, 5.0]), 1.0)
    assert ts.kendall_tau([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == -1.0

    try:
        ts.select_by_length(lengths, "longest", fraction=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("fraction 0 must be rejected")

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = ts.synth(str(tmp / "task"), [("n_tuning", "60"), ("n_test", "40"), ("seed", "3")])
        assert cfg["n_tuning"] == "60" and cfg["expressive"] is True
        assert (tmp / "task" / "tune.nbest").exists()

        plan = "\n".join(
            [
                "tune = task/tune",
                "test = task/test",
                "init = task/init.weights",
                "optimizers = mert",
                "conditions = shortest, longest",
                "reruns = 1",
                "iterations = 3",
            ]
        )
        rows = ts.run_experiment(plan, str(tmp / "out"), base_dir=str(tmp))
        assert len(rows) == 8, rows
        assert {r["tune_condition"] for r in rows} == {"shortest", "longest"}
        assert all(0.0 <= r["bleu"] <= 1.0 for r in rows)
        assert (tmp / "out" / "summary.csv").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()
