"""Smoke test for the recal extension module."""

import json
import math
import pathlib

import recal

FIXTURE = pathlib.Path(__file__).resolve().parents[1] / "crates" / "core" / "fixtures" / "example_paper.json"


def main():
    class0 = recal.binomial_dist(16, 0.4)
    class1 = recal.binomial_dist(16, 0.55)
    source = recal.SourceModel.from_class_conditionals(class0, class1, 0.01)
    target = recal.TargetSpec(recal.vasicek_mixture_dist(16, 0.3, 0.3), 0.05)
    assert len(source.feature_dist) == 17
    assert abs(source.implied_auc() - 0.802) < 5e-4

    for name in recal.method_names():
        r = recal.recalibrate(name, source, target)
        assert r.converged, r
        print(f"{name:15s} mean={r.achieved_mean:.3f} auc={r.implied_auc:.3f} params={r.params}")

    fjs = recal.recalibrate("fjs", source, target)
    assert abs(fjs.achieved_mean - 0.05) < 1e-8
    lo, hi = recal.functional_bounds(0.05)
    value = recal.functional_mean(target.feature_dist, fjs.posterior)
    assert lo <= value <= hi and abs(hi - math.sqrt(0.05)) < 1e-15

    out = recal.run_scenario_json(FIXTURE.read_text())
    assert out["exit_code"] == 0
    assert len(out["table_csv"].splitlines()) == 10
    assert json.loads(out["diagnostics_json"])["all_converged"]

    try:
        recal.TargetSpec(target.feature_dist, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("q = 0 accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
