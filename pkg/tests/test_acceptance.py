"""Acceptance suite: every criterion at its stated tolerance.

Each test prints its one-line verdict (run pytest with -s or check the
captured output on failure); the same runners back the `check` subcommand
and the /check endpoint.
"""

import pytest

from chflow.acceptance import CRITERIA


def _run(cid):
    result = CRITERIA[cid]()
    print(f"[{'PASS' if result.passed else 'FAIL'}] criterion {cid} "
          f"({result.name}): {result.details}")
    assert result.passed, result.details


def test_criterion_01_mass_conservation():
    _run(1)


def test_criterion_02_energy_dissipation_and_balance():
    _run(2)


def test_criterion_03_elliptic_correctness():
    _run(3)


def test_criterion_04_norm_equivalence():
    _run(4)


def test_criterion_05_continuous_dependence():
    _run(5)


def test_criterion_06_separation():
    _run(6)


def test_criterion_07_convergence_to_equilibrium():
    _run(7)


def test_criterion_08_gronwall_oracles():
    _run(8)


def test_criterion_09_corrected_constant_scan():
    _run(9)


def test_criterion_10_interpolation_scaling():
    _run(10)


def test_criterion_11_determinism():
    _run(11)
