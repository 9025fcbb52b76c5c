import pytest

import impnoise as ip
from helpers import make_chain_config

ROUNDTRIP_TRUTH = dict(m=(14.0, 22.0, 34.0), entry=(4e-5, 2e-5, 1e-5),
                       dwell=(10.0, 20.0, 70.0))
ROUNDTRIP_DURATIONS = (10.0, 30.0, 100.0)
ROUNDTRIP_SEED = 6
ROUNDTRIP_N = 10_000_000


@pytest.fixture(scope="session")
def roundtrip_case():
    """One shared generate-and-refit round trip (heavy, built once)."""
    cfg = make_chain_config(**ROUNDTRIP_TRUTH)
    chain = ip.build_chain(cfg)
    trace, path = ip.generate(chain, ROUNDTRIP_N, seed=ROUNDTRIP_SEED)
    report = ip.fit_chain(trace, ip.FitOptions(threshold_mode="universal"))
    return dict(config=cfg, chain=chain, trace=trace, path=path, report=report)
