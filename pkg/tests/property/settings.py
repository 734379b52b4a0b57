"""Hypothesis settings profiles for the property tests.

Import these instead of inline @settings(...). Numerical checks are slow to
evaluate, so every tier disables the per-example deadline.

Tiers:
- STANDARD_SETTINGS: 50 examples - closed-form Gaussian properties
- QUICK_SETTINGS: 10 examples - Fock-space properties at small cutoffs
- SLOW_SETTINGS: 3 examples - properties that integrate a diffusion
"""

from hypothesis import HealthCheck, settings

STANDARD_SETTINGS = settings(max_examples=50, deadline=None)

QUICK_SETTINGS = settings(
    max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)

SLOW_SETTINGS = settings(
    max_examples=3, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
