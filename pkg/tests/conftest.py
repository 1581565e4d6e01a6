import pytest

from survmon.presets import running_example, running_example_full
from survmon.scenario import build_scenario
from survmon.synthesis import SynthOptions, synthesize


@pytest.fixture(scope="session")
def scenario():
    return build_scenario(running_example())


@pytest.fixture(scope="session")
def scenario_full_ws():
    return build_scenario(running_example_full())


@pytest.fixture(scope="session")
def exists_parts(scenario):
    opts = SynthOptions(input_quant="exists", max_iters=20)
    return {pid: synthesize(scenario, [pid], opts) for pid in ("1", "2")}


@pytest.fixture(scope="session")
def exists_full(scenario):
    # the full-system maximal set is not finitely polyhedral (uncertainty
    # trade-offs bend the boundary), so the iterate is capped past the
    # per-part convergence depth
    opts = SynthOptions(input_quant="exists", max_iters=10)
    return synthesize(scenario, ["1", "2"], opts)


@pytest.fixture(scope="session")
def forall_parts(scenario):
    opts = SynthOptions(input_quant="forall_admissible", max_iters=6)
    return {pid: synthesize(scenario, [pid], opts) for pid in ("1", "2")}


@pytest.fixture(scope="session")
def forall_full(scenario):
    opts = SynthOptions(input_quant="forall_admissible", max_iters=6)
    return synthesize(scenario, ["1", "2"], opts)


@pytest.fixture(scope="session")
def tiny_config():
    """One-part scenario that synthesizes in well under a second."""
    return {
        "name": "tiny",
        "workspace": [[0.0, 2.0], [0.0, 1.0]],
        "input_set": [[-0.5, 0.5], [-0.5, 0.5]],
        "sampling_time": 1.0,
        "parts": [
            {"id": "1", "obs": {"box": [[0.0, 1.0], [0.0, 1.0]]},
             "a": [0.6, 0.8], "b": [1.1, 1.25], "z_crit": 2.0, "z_init": 0.2},
        ],
        "sim": {"start": [1.5, 0.5]},
    }


@pytest.fixture(scope="session")
def tiny_scenario(tiny_config):
    return build_scenario(tiny_config)
