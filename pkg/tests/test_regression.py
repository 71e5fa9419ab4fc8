"""Golden-fixture regression: the three shipped configs reproduce their stored summary hashes.

Hashes cover the summary rounded to 8 significant digits. See the README for
regenerating them after a deliberate numerical change.
"""
import json

from viscshock import diagnostics as dg

from conftest import CONFIGS

GOLDEN = json.loads((CONFIGS / "golden_hashes.json").read_text())


def _compare(name, res):
    stored = GOLDEN[name]
    got = dg.summary_hash(res.summary)
    if got != stored["hash"]:
        # point at the first differing entry before failing on the hash
        ref = stored["summary"]
        assert res.summary["checks"] == ref["checks"]
        assert res.summary["constants"] == ref["constants"]
        assert res.summary["final"] == ref["final"]
    assert got == stored["hash"]


def test_burgers_bump_golden(main_run):
    _compare("burgers_bump_n2", main_run)


def test_perturbed_g_golden(perturbed_g_run):
    assert perturbed_g_run.summary["all_pass"]
    _compare("perturbed_g_bump_n2", perturbed_g_run)


def test_shifted_profile_golden(shifted_run):
    c = shifted_run.summary["constants"]
    assert c["x_bound"] > 2.0
    _compare("shifted_profile_n2", shifted_run)
