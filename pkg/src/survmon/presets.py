"""Built-in scenario configurations for the two-part patrol workspace."""

from __future__ import annotations


def running_example() -> dict:
    """Reduced two-part scenario: both square footprints plus the corridor
    between them, three cells total. This is the desk-scale configuration
    used throughout the test suite; the full-system state is (x, z1, z2, u).
    """
    return {
        "name": "running-example-reduced",
        "workspace": [[0.3, 4.7], [0.8, 2.2]],
        "input_set": [[-0.6, 0.6], [-0.6, 0.6]],
        "sampling_time": 1.0,
        "parts": [
            {"id": "1", "obs": {"square": {"center": [1.0, 1.5], "half_side": 0.7}},
             "a": [0.65, 0.80], "b": [1.05, 1.15], "z_crit": 4.0, "z_init": 0.4},
            {"id": "2", "obs": {"square": {"center": [4.0, 1.5], "half_side": 0.7}},
             "a": [0.65, 0.80], "b": [1.05, 1.15], "z_crit": 4.0, "z_init": 0.4},
        ],
        "cells": [
            {"id": "obs1", "box": [[0.3, 1.7], [0.8, 2.2]]},
            {"id": "mid", "box": [[1.7, 3.3], [0.8, 2.2]]},
            {"id": "obs2", "box": [[3.3, 4.7], [0.8, 2.2]]},
        ],
        "sim": {
            "start": [2.5, 1.5],
            "objects": {"obs1": 3, "obs2": 3},
        },
    }


def running_example_full() -> dict:
    """Same parts on the full 5 m x 3.5 m workspace with auto-generated
    cells (slab decomposition refined against both footprints)."""
    cfg = running_example()
    cfg["name"] = "running-example-full"
    cfg["workspace"] = [[0.0, 5.0], [0.0, 3.5]]
    cfg.pop("cells")
    cfg["sim"]["start"] = [2.5, 0.5]
    return cfg
