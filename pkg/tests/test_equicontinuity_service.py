import numpy as np
import pytest
from pytest import approx

from app.models import (
    BinaryShift,
    CirclePoint,
    ConstantSource,
    DichotomyConfig,
    ErgodicityVerdict,
    GapScheme,
    ModulusProfile,
    PeriodicSource,
    RealTrace,
    Scheme,
    SensitivityReport,
    ShiftPoint,
    Verdict,
)
from app.services import (
    PairSampler,
    averaging_service,
    equicontinuity_service,
    measures_service,
    systems_service,
)
from app.services.equicontinuity_service import (
    DELTA_GRID,
    INSIDE_MARGIN,
    LOG_GROWTH_MARGIN,
    EquicontinuityService,
)
from app.utils.errors import DomainError, SamplerError

from conftest import PHI

EPS_GRID = [2.0 ** -i for i in range(1, 11)]


class ExhaustedSampler(PairSampler):
    def ball_pairs(self, delta, count, stream=0):
        raise SamplerError("no pairs at this radius")


def circle_gap_oracle(grid_size=2000):
    """Midpoint rule for the mean of min(|x - y|, 1 - |x - y|) over the unit square"""
    t = (np.arange(grid_size) + 0.5) / grid_size
    gap = np.abs(t[:, None] - t[None, :])
    return float(np.minimum(gap, 1.0 - gap).mean())


# -- samplers -----------------------------------------------------------------------

def test_ball_pairs_stay_inside_the_ball(rotation, constant_shift):
    for sys in (rotation, constant_shift):
        sampler = PairSampler(sys, seed=3)
        for delta in (0.5, 2.0 ** -7, 2.0 ** -15):
            for x, y in sampler.ball_pairs(delta, 32):
                assert 0.0 < systems_service.distance(sys, x, y) < delta


def test_ball_pairs_are_stratified(rotation):
    pairs = PairSampler(rotation, seed=1).ball_pairs(0.25, 16)
    distances = sorted(systems_service.distance(rotation, x, y) for x, y in pairs)
    for i, d in enumerate(distances):
        assert i / 16 * 0.25 * INSIDE_MARGIN <= d + 1e-12
        assert d <= (i + 1) / 16 * 0.25


def test_sampler_streams_are_reproducible(doubling):
    sampler = PairSampler(doubling, seed=11)
    assert sampler.measure_pairs(5, stream=2) == PairSampler(doubling, seed=11).measure_pairs(5, stream=2)
    assert sampler.measure_pairs(5, stream=2) != sampler.measure_pairs(5, stream=3)


def test_sampler_needs_a_positive_count(rotation):
    sampler = PairSampler(rotation)
    with pytest.raises(SamplerError):
        sampler.ball_pairs(0.1, 0)
    with pytest.raises(SamplerError):
        sampler.measure_pairs(0)


# -- pair gaps ----------------------------------------------------------------------

def test_rotation_pair_gap_is_the_distance(rotation):
    pairs = PairSampler(rotation, seed=4).measure_pairs(100)
    for x, y in pairs:
        d = systems_service.distance(rotation, x, y)
        for scheme in GapScheme:
            assert equicontinuity_service.pair_gap(rotation, x, y, 0, 100_000, scheme) == approx(d, abs=1e-12)


def test_cesaro_log_gap(rotation, block_shift):
    x, y = CirclePoint(position=0.1), CirclePoint(position=0.35)
    gaps = equicontinuity_service.cesaro_log_gap(rotation, x, y, [10, 100, 1000])
    assert max(gaps) < 1e-12
    with pytest.raises(DomainError):
        equicontinuity_service.cesaro_log_gap(rotation, x, y, [100, 10])

    zeros = ShiftPoint(source=ConstantSource(symbol=0))
    block = ShiftPoint(source=block_shift.source)
    # early on the block point sits at distance 1/2 or 1 from 0^inf
    assert max(equicontinuity_service.cesaro_log_gap(block_shift, block, zeros, [3, 7, 15, 31])) > 0.01


def test_weyl_gap_series_takes_the_worst_window():
    trace = RealTrace(values=np.r_[np.zeros(50), np.ones(50)], bound=1.0)
    plain = equicontinuity_service.gap_series(trace, [10, 100], GapScheme.CESARO)
    weyl = equicontinuity_service.gap_series(trace, [10, 100], GapScheme.WEYL_CESARO)
    assert plain.tolist() == approx([0.0, 0.5])
    assert weyl.tolist() == approx([1.0, 0.5])


# -- modulus and sensitivity -----------------------------------------------------------

def test_rotation_modulus_is_the_identity(rotation):
    profile = equicontinuity_service.modulus_profile(
        rotation, EPS_GRID, PairSampler(rotation, seed=0), 10_000, GapScheme.CESARO, 16
    )
    assert profile.delta_of_eps == EPS_GRID
    assert profile.complete
    assert not profile.sampler_exhausted
    assert all(gap < eps for gap, eps in zip(profile.max_gap_at_delta, EPS_GRID))


def test_modulus_rejects_bad_eps_grids(rotation):
    sampler = PairSampler(rotation)
    with pytest.raises(DomainError):
        equicontinuity_service.modulus_profile(rotation, [], sampler, 100, GapScheme.CESARO, 4)
    with pytest.raises(DomainError):
        equicontinuity_service.modulus_profile(rotation, [0.1, 0.2], sampler, 100, GapScheme.CESARO, 4)


def test_modulus_reports_an_exhausted_sampler(rotation):
    profile = equicontinuity_service.modulus_profile(
        rotation, [0.5, 0.25], ExhaustedSampler(rotation), 100, GapScheme.CESARO, 4
    )
    assert profile.sampler_exhausted
    assert profile.delta_of_eps == [None, None]
    assert not profile.complete


def test_sensitivity_of_rotation_is_zero(rotation):
    report = equicontinuity_service.sensitivity_estimate(
        rotation, PairSampler(rotation), 2000, GapScheme.CESARO, 30
    )
    assert report.eps_estimate < 2.0 ** -10
    assert report.mode == "ball"
    assert report.radius == 2.0 ** -10
    assert not report.degenerate


def test_sensitivity_needs_enough_pairs(rotation):
    with pytest.raises(DomainError):
        equicontinuity_service.sensitivity_estimate(rotation, PairSampler(rotation), 100, GapScheme.CESARO, 29)
    with pytest.raises(DomainError):
        equicontinuity_service.sensitivity_estimate(
            rotation, PairSampler(rotation), 100, GapScheme.CESARO, 30, mode="cube"
        )


def test_doubling_sensitivity_small(doubling):
    pairs = PairSampler(doubling, seed=2).measure_pairs(100)
    gaps = [equicontinuity_service.pair_gap(doubling, x, y, 0, 10_000, GapScheme.CESARO) for x, y in pairs]
    assert np.mean(gaps) == approx(2.0 * circle_gap_oracle(), abs=0.02)


@pytest.mark.slow
def test_doubling_sensitivity_constant(doubling):
    oracle = circle_gap_oracle()
    assert oracle == approx(0.25, abs=1e-6)
    pairs = PairSampler(doubling, seed=0).measure_pairs(1000)
    cesaro = [equicontinuity_service.pair_gap(doubling, x, y, 0, 100_000, GapScheme.CESARO) for x, y in pairs]
    log = [equicontinuity_service.pair_gap(doubling, x, y, 0, 100_000, GapScheme.LOGARITHMIC) for x, y in pairs]
    assert np.mean(cesaro) == approx(2.0 * oracle, abs=0.02)
    assert np.mean(log) == approx(np.mean(cesaro), abs=0.05)


def test_doubling_measure_mode_sensitivity(doubling):
    report = equicontinuity_service.sensitivity_estimate(
        doubling, PairSampler(doubling), 4000, GapScheme.CESARO, 30, mode="measure", quantile=0.5
    )
    assert report.radius is None
    assert report.eps_estimate == approx(0.5, abs=0.05)


def test_ball_and_measure_sensitivity_agree(doubling):
    sampler = PairSampler(doubling, seed=8)
    ball = equicontinuity_service.sensitivity_estimate(doubling, sampler, 4000, GapScheme.CESARO, 30, quantile=0.5)
    measure = equicontinuity_service.sensitivity_estimate(
        doubling, sampler, 4000, GapScheme.CESARO, 30, mode="measure", quantile=0.5
    )
    assert ball.eps_estimate == approx(measure.eps_estimate, abs=0.05)


# -- dichotomy ---------------------------------------------------------------------

def test_rotation_is_mean_equicontinuous(rotation):
    result = equicontinuity_service.dichotomy_classify(rotation, DichotomyConfig(n_eval=2000))
    assert result.verdict == Verdict.MEAN_EQUICONTINUOUS
    assert result.profile.delta_of_eps == [2.0 ** -i for i in range(1, 7)]
    assert not result.conflicting


def test_doubling_is_mean_sensitive(doubling):
    result = equicontinuity_service.dichotomy_classify(doubling, DichotomyConfig(n_eval=2000))
    assert result.verdict == Verdict.MEAN_SENSITIVE
    assert result.sensitivity.eps_estimate >= 0.05
    assert not result.profile.complete


def test_conflicting_evidence_is_undetermined(rotation, monkeypatch):
    service = EquicontinuityService()
    complete = ModulusProfile(
        eps_grid=[0.5], delta_of_eps=[0.5], max_gap_at_delta=[0.4], scheme=GapScheme.CESARO, n_eval=10, sample_count=2
    )
    sensitive = SensitivityReport(
        eps_estimate=0.3, pair_count=30, horizon=10, scheme=GapScheme.CESARO, quantile_used=0.1, mode="ball"
    )
    monkeypatch.setattr(service, "modulus_profile", lambda *args, **kwargs: complete)
    monkeypatch.setattr(service, "sensitivity_estimate", lambda *args, **kwargs: sensitive)
    result = service.dichotomy_classify(rotation)
    assert result.verdict == Verdict.UNDETERMINED
    assert result.conflicting


# -- unique ergodicity ---------------------------------------------------------------

def test_rotation_is_uniquely_ergodic(rotation, rng):
    family = measures_service.default_family(rotation)
    starts = [systems_service.sample_point(rotation, rng) for _ in range(10)]
    cesaro = equicontinuity_service.unique_ergodicity_test(rotation, starts, 100_000, Scheme.ARITHMETIC, family)
    log = equicontinuity_service.unique_ergodicity_test(rotation, starts, 100_000, Scheme.LOGARITHMIC, family)
    assert cesaro.verdict == log.verdict == ErgodicityVerdict.CONSISTENT
    assert cesaro.max_pairwise_rho <= 0.01
    assert log.reference_n == 1000
    assert log.effective_tol > log.tol
    assert log.max_pairwise_rho <= log.effective_tol
    assert cesaro.reference_n is None and cesaro.effective_tol == cesaro.tol


def test_fixed_points_are_not_uniquely_ergodic(constant_shift):
    family = measures_service.default_family(constant_shift)
    starts = [ShiftPoint(source=ConstantSource(symbol=0)), ShiftPoint(source=ConstantSource(symbol=1))]
    for scheme in Scheme:
        report = equicontinuity_service.unique_ergodicity_test(constant_shift, starts, 100_000, scheme, family)
        assert report.verdict == ErgodicityVerdict.INCONSISTENT
        assert report.max_pairwise_rho >= 0.1
        assert report.start_count == 2


def test_fixed_point_and_periodic_orbit_are_not_uniquely_ergodic():
    sys = BinaryShift(source=ConstantSource(symbol=0))
    starts = [
        ShiftPoint(source=ConstantSource(symbol=0)),
        ShiftPoint(source=PeriodicSource(word="0" * 15 + "1")),
    ]
    family = measures_service.default_family(sys)
    reports = {
        scheme: equicontinuity_service.unique_ergodicity_test(sys, starts, 100_000, scheme, family, tol=0.01)
        for scheme in Scheme
    }
    assert reports[Scheme.ARITHMETIC].verdict == reports[Scheme.LOGARITHMIC].verdict
    assert reports[Scheme.LOGARITHMIC].verdict == ErgodicityVerdict.INCONSISTENT

    # the startup spread fades like 1/H_n, a second invariant measure does not
    log = reports[Scheme.LOGARITHMIC]
    harmonic = averaging_service.harmonic
    assert log.max_pairwise_rho * harmonic(log.n) > LOG_GROWTH_MARGIN * log.reference_rho * harmonic(log.reference_n)
    assert log.max_pairwise_rho > log.effective_tol


def test_threads_do_not_change_results(rotation, rng):
    family = measures_service.default_family(rotation)
    starts = [systems_service.sample_point(rotation, rng) for _ in range(6)]
    serial, parallel = EquicontinuityService(), EquicontinuityService()
    serial.threads, parallel.threads = 1, 4
    a = serial.unique_ergodicity_test(rotation, starts, 5000, Scheme.LOGARITHMIC, family)
    b = parallel.unique_ergodicity_test(rotation, starts, 5000, Scheme.LOGARITHMIC, family)
    assert a == b


def test_unique_ergodicity_needs_starts(rotation):
    with pytest.raises(DomainError):
        equicontinuity_service.unique_ergodicity_test(
            rotation, [], 100, Scheme.ARITHMETIC, measures_service.default_family(rotation)
        )


# -- discontinuous observable on the golden rotation ---------------------------------------

def test_oxtoby_membership():
    centres = [(j * PHI) % 1.0 for j in (1, 2, 3)]
    assert equicontinuity_service.oxtoby_membership(PHI, np.array(centres)).all()
    # radius of interval 1 is 1/8
    assert not equicontinuity_service.oxtoby_membership(PHI, np.array([(PHI + 0.13) % 1.0]), intervals=1)[0]


def test_oxtoby_experiment():
    report = equicontinuity_service.oxtoby_experiment(PHI, 10_000, 100_000)
    assert report.avg_at_zero >= 0.999
    assert report.m_of_U_estimate <= 0.5 + 3.0 * report.m_of_U_stderr
    assert report.gap >= 0.4
    assert abs(report.avg_at_random_start - report.m_of_U_estimate) < 0.1


def test_oxtoby_needs_a_horizon():
    with pytest.raises(DomainError):
        equicontinuity_service.oxtoby_experiment(PHI, 9, 100)
    with pytest.raises(DomainError):
        equicontinuity_service.oxtoby_experiment(PHI, 100, 0)


def test_delta_grid_is_dyadic():
    assert DELTA_GRID[0] == 0.5
    assert DELTA_GRID[-1] == 2.0 ** -20
    assert len(DELTA_GRID) == 20
