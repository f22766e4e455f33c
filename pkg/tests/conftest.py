"""Shared test configuration.

Property tests run under the "dev" hypothesis profile by default; set
HYPOTHESIS_PROFILE=ci for more examples.
"""
import os

from hypothesis import settings

settings.register_profile("dev", max_examples=20, deadline=None)
settings.register_profile("ci", max_examples=100, deadline=None)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))
