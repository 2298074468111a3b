import pytest
from hypothesis import settings
from hypothesis import strategies as st

from coincidence import config
from coincidence.specs import ChannelSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

prob = st.floats(0.0, 1.0, allow_nan=False)
small_prob = st.floats(0.0, 0.1, allow_nan=False)


@st.composite
def channel_specs(draw, noise=prob):
    return ChannelSpec(
        p_avalanche=draw(prob),
        p_dark_count=draw(noise),
        p_background=draw(noise),
        p_path=draw(prob),
    )


@pytest.fixture(scope="session")
def reference():
    return config.load("reference")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: (l.startswith("[info]"), l.split("criterion ")[-1][:2])):
            terminalreporter.write_line(line)
