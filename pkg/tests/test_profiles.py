import pytest

from trialgrid.cohort import MatchedCohort
from trialgrid.metrics import OutcomeVector
from trialgrid.profiles import (
    TemporalProfile,
    aggregate_group,
    profile_candidate,
)

from conftest import lab, make_patient, make_store


def matched(*pairs):
    return MatchedCohort(0, tuple(pairs), caliper=1.0, discarded_treated=0)


def make_profile(cid, male=0.5, age_bin=3, age_p=1.0, kidney=(), liver=(), hr=1.0):
    hist = [0.0] * 10
    hist[age_bin] = age_p
    return TemporalProfile(
        candidate_id=cid,
        gender_dist={"treatment": {"male": male, "female": 1 - male},
                     "control": {"male": male, "female": 1 - male}},
        age_hist={"treatment": list(hist), "control": list(hist)},
        kidney_curve={"treatment": list(kidney), "control": list(kidney)},
        liver_curve={"treatment": list(liver), "control": list(liver)},
        hr=hr,
        hr_ci95=(hr * 0.8, hr * 1.25),
    )


def make_outcome(cid, status="ok", n=100, diversity=1.0, kidney=1.2, liver=0.9):
    return OutcomeVector(
        candidate_id=cid, n_patients=n, diversity=diversity,
        hazard=None, kidney_rr=kidney, liver_rr=liver, status=status,
        reason=None if status == "ok" else "empty_arm",
    )


class TestProfileCandidate:
    def _store(self):
        patients = [
            make_patient("t1", age=35, gender="male",
                         labs={"SCr": lab("SCr", [(0, 2.0), (1, 1.0)]),
                               "AST": lab("AST", [(0, 20.0), (1, 20.0)])}),
            make_patient("t2", age=62, gender="female",
                         labs={"SCr": lab("SCr", [(0, 1.0), (1, 1.0)]),
                               "AST": lab("AST", [(0, 50.0), (1, 20.0)])}),
            make_patient("t3", age=44, gender="male",
                         labs={"SCr": lab("SCr", [(0, 1.0), (1, 1.0)]),
                               "AST": lab("AST", [(0, 20.0), (1, 20.0)])}),
            make_patient("c1", age=58, gender="female",
                         labs={"SCr": lab("SCr", [(0, 1.0), (1, 2.0)]),
                               "AST": lab("AST", [(0, 20.0), (1, 20.0)])}),
            make_patient("c2", age=29, gender="male",
                         labs={"SCr": lab("SCr", [(0, 1.0), (1, 1.0)]),
                               "AST": lab("AST", [(0, 20.0), (1, 20.0)])}),
            make_patient("c3", age=91, gender="female",
                         labs={"SCr": lab("SCr", [(0, 1.0), (1, 1.0)]),
                               "AST": lab("AST", [(0, 20.0), (1, 20.0)])}),
        ]
        return make_store(patients)

    def test_gender_and_age_distributions(self):
        m = matched(("t1", "c1"), ("t2", "c2"), ("t3", "c3"))
        profile = profile_candidate(self._store(), m, None, 48.0)
        assert profile.gender_dist["treatment"]["male"] == pytest.approx(2 / 3)
        assert profile.gender_dist["control"]["female"] == pytest.approx(2 / 3)
        # treated ages 35, 62, 44 -> bins 3, 6, 4
        hist = profile.age_hist["treatment"]
        assert hist[3] == hist[4] == hist[6] == pytest.approx(1 / 3)
        assert sum(hist) == pytest.approx(1.0)
        # control age 91 pools into the last bin
        assert profile.age_hist["control"][9] == pytest.approx(1 / 3)

    def test_abnormal_fraction_curves(self):
        m = matched(("t1", "c1"), ("t2", "c2"), ("t3", "c3"))
        profile = profile_candidate(self._store(), m, None, 48.0)
        # day 0: only t1 has abnormal SCr among 3 treated
        assert profile.kidney_curve["treatment"][0] == (0, pytest.approx(1 / 3))
        assert profile.kidney_curve["treatment"][1] == (1, pytest.approx(0.0))
        # control: only c1 abnormal on day 1
        assert profile.kidney_curve["control"][1] == (1, pytest.approx(1 / 3))
        # liver: t2 abnormal AST on day 0
        assert profile.liver_curve["treatment"][0] == (0, pytest.approx(1 / 3))

    def test_hr_passthrough(self):
        m = matched(("t1", "c1"))

        class Fit:
            hr = 0.8
            ci95 = (0.5, 1.28)

        profile = profile_candidate(self._store(), m, Fit(), 48.0)
        assert profile.hr == 0.8
        assert profile.hr_ci95 == (0.5, 1.28)
        assert profile.to_dict()["hr_ci95"] == [0.5, 1.28]


class TestAggregateGroup:
    def test_single_member_sd_zero(self):
        profiles = [make_profile(0, male=0.4)]
        group = aggregate_group(profiles, [make_outcome(0)])
        mean, sd = group.gender_dist["treatment"]["male"]
        assert mean == pytest.approx(0.4)
        assert sd == 0.0

    def test_mean_and_population_sd(self):
        profiles = [make_profile(0, male=0.2), make_profile(1, male=0.4)]
        outcomes = [make_outcome(0), make_outcome(1)]
        group = aggregate_group(profiles, outcomes)
        mean, sd = group.gender_dist["control"]["male"]
        assert mean == pytest.approx(0.3)
        assert sd == pytest.approx(0.1)

    def test_metric_means_skip_degenerate(self):
        profiles = [make_profile(i) for i in range(3)]
        outcomes = [
            make_outcome(0, n=100, diversity=1.0),
            make_outcome(1, n=200, diversity=2.0),
            make_outcome(2, status="degenerate", n=999, diversity=9.0),
        ]
        group = aggregate_group(profiles, outcomes)
        assert group.metric_means["n"] == pytest.approx(150.0)
        assert group.metric_means["diversity"] == pytest.approx(1.5)
        assert group.metric_means["kidney_rr"] == pytest.approx(1.2)

    def test_all_degenerate_means_none(self):
        profiles = [make_profile(0)]
        group = aggregate_group(profiles, [make_outcome(0, status="degenerate")])
        assert group.metric_means["n"] is None

    def test_curve_points_absent_in_some_members(self):
        profiles = [
            make_profile(0, kidney=[(0, 0.2), (1, 0.4)]),
            make_profile(1, kidney=[(0, 0.4), (1, None)]),
        ]
        group = aggregate_group(profiles, [make_outcome(0), make_outcome(1)])
        curve = group.kidney_curve["treatment"]
        assert curve[0] == (0, pytest.approx(0.3), pytest.approx(0.1))
        # day 1 falls back to the single present member
        assert curve[1][1] == pytest.approx(0.4)
        assert curve[1][2] == 0.0

    def test_member_order_invariant_means(self):
        profiles = [make_profile(i, male=0.1 * (i + 1)) for i in range(4)]
        outcomes = [make_outcome(i, n=50 * (i + 1)) for i in range(4)]
        fwd = aggregate_group(profiles, outcomes)
        rev = aggregate_group(profiles[::-1], outcomes[::-1])
        assert fwd.metric_means == rev.metric_means
        assert fwd.gender_dist["treatment"]["male"][0] == pytest.approx(
            rev.gender_dist["treatment"]["male"][0]
        )

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            aggregate_group([], [])

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            aggregate_group([make_profile(0)], [])
