import numpy as np

from lyapsearch.lyapunov import CATALOG, monotonicity_check, run_certificate


def test_catalog_has_nine_entries():
    assert len(CATALOG) == 9


def test_all_certificates_non_increasing(lyapunov_increases):
    for name, increase in lyapunov_increases.items():
        assert increase <= 1e-8, f"{name}: {increase:+.3e}"


def test_certificate_dominates_weighted_gap():
    # E was built to sit above e^gamma (f - f*); spot-check a couple of entries.
    for name, weight in (("sc-nag", lambda t, k: np.exp(k * t)),
                         ("nag-convex", lambda t, k: t ** k)):
        spec = CATALOG[name]
        traj, energy = run_certificate(name)
        k = spec.k_opt(1.0, 4.0)
        assert np.all(energy >= weight(traj.times, k) * traj.gaps - 1e-12)


def test_detector_flags_rate_beyond_monotone_range():
    # The certificate's integrand stays PSD up to k = (4/3) sqrt(mu), so the
    # first numerically visible increases need a rate well above that.
    increase = monotonicity_check("sc-nag", k=1.6)
    assert increase > 1e-4


def test_monotone_strictly_past_certified_rate():
    # Between sqrt(mu) and (4/3) sqrt(mu): PSD of the boundary form fails, yet
    # E still cannot increase; only the rate-domination property is lost.
    assert monotonicity_check("sc-nag", k=1.2) <= 1e-8
