"""Shared fixtures: the heavy Monte-Carlo tables used by both the module
invariant tests and the acceptance gate are computed once per session."""

import os

import pytest

from meanscan.harness import (
    ExperimentGrid,
    run_identification,
    run_mixture_power,
    run_size_power,
)

ACCEPT_SEED = 20260808
WORKERS = min(8, os.cpu_count() or 1)


@pytest.fixture(scope="session")
def table1_cells():
    """Size/power cells of the main Gaussian design at alpha = 0.05."""
    grid_a = ExperimentGrid(
        n_values=(60,),
        p_values=(100,),
        T_values=(100,),
        delta_values=(0.0, 0.2, 0.3),
        replications=500,
        alpha=0.05,
        workers=WORKERS,
        base_seed=ACCEPT_SEED,
        J=2,
        change_fracs=(0.4,),
    )
    grid_b = ExperimentGrid(
        n_values=(30,),
        p_values=(200,),
        T_values=(150,),
        delta_values=(0.3,),
        replications=500,
        alpha=0.05,
        workers=WORKERS,
        base_seed=ACCEPT_SEED,
        J=2,
        change_fracs=(0.4,),
    )
    table_a = run_size_power(grid_a, variance_mode="ustat")
    table_b = run_size_power(grid_b, variance_mode="ustat")
    return {
        "size": table_a.rate(0.0, 60, 100, 100),
        "power_02": table_a.rate(0.2, 60, 100, 100),
        "power_03": table_a.rate(0.3, 60, 100, 100),
        "power_03_hard": table_b.rate(0.3, 30, 200, 150),
        "replications": 500,
    }


@pytest.fixture(scope="session")
def mixture_cells():
    """Mixture-model power cells tested with the pairwise statistic."""
    common = dict(
        replications=300,
        alpha=0.05,
        workers=WORKERS,
        base_seed=ACCEPT_SEED,
        J=2,
        change_fracs=(0.4, 0.7),
        mixture_probs=(0.3, 0.3, 0.4),
    )
    strong = run_mixture_power(
        ExperimentGrid(
            n_values=(60,),
            p_values=(100,),
            T_values=(100,),
            delta_values=((0.5, 0.7, 0.8),),
            **common,
        )
    )
    weak = run_mixture_power(
        ExperimentGrid(
            n_values=(30,),
            p_values=(50,),
            T_values=(50,),
            delta_values=((0.25, 0.35, 0.4),),
            **common,
        )
    )
    return {
        "strong": strong.rate((0.5, 0.7, 0.8), 60, 100, 100),
        "weak": weak.rate((0.25, 0.35, 0.4), 30, 50, 50),
        "replications": 300,
    }


@pytest.fixture(scope="session")
def identification_curves():
    """Two-change identification sweep over (delta, n, p) at T = 100."""
    grid = ExperimentGrid(
        n_values=(30, 60),
        p_values=(50, 200),
        T_values=(100,),
        delta_values=(0.5, 0.6),
        replications=100,
        alpha=0.05,
        workers=WORKERS,
        base_seed=ACCEPT_SEED,
        J=2,
        change_fracs=(0.4, 0.7),
        min_len=6,
    )
    return run_identification(grid, variance_mode="ustat")
