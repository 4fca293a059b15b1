"""Shared pytest configuration.

Hypothesis runs derandomized so the suite is reproducible end to end: the
package's own guarantees are about determinism, and the tests hold
themselves to the same standard.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "govlab",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("govlab")
