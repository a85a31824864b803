import sys
from pathlib import Path

from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

# compiled kernels make first calls slow; timing is not what these tests check
settings.register_profile("sim", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("sim")
