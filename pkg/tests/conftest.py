"""Session fixtures and the acceptance-criteria summary printer."""

import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def record_acceptance(number: int, name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("========== acceptance criteria ==========")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"criterion {number:2d} [{status}] {name}{suffix}")


@pytest.fixture(scope="session")
def speech_audio():
    """Clean 2-5 s speech at 16 kHz for analysis-synthesis experiments.

    Set DDSP_SPEECH_WAV to use a real recording; the default is a
    deterministic formant-synthesized utterance (the build environment
    ships no audio corpora).
    """
    import os

    path = os.environ.get("DDSP_SPEECH_WAV")
    if path:
        from ddsp_voxkit.audio_io import read_wav

        return read_wav(path)
    from helpers import formant_speech

    return formant_speech()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
