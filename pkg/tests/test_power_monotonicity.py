"""Directional power invariant: smaller violations reject less often."""

import os

import pytest

from drumtest.simulate import DgpSpec, run_experiment

N_JOBS = min(2, os.cpu_count() or 1)


@pytest.mark.slow
def test_smaller_violation_rejects_less_at_small_samples():
    """At ten agents per menu path, the mildly inconsistent generator's
    rejection rate stays below the strongly inconsistent one's."""
    sims, reps = 200, 199
    strong = run_experiment([DgpSpec("binary1")], [10], sims=sims, reps=reps,
                            seed=77, n_jobs=N_JOBS).entries[0]["rejection_rate"]
    mild = run_experiment([DgpSpec("binary2")], [10], sims=sims, reps=reps,
                          seed=78, n_jobs=N_JOBS).entries[0]["rejection_rate"]
    print(f"[invariant] binary2@10 rate {mild:.3f} <= binary1@10 rate {strong:.3f}")
    assert mild <= strong
    assert strong >= 0.95
