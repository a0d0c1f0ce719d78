import numpy as np
import pytest

from manifold_ssl.dataset import ClinicalRecord, VitalStatus, derive_labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def balanced_assignment(n_pos, n_neg, n_unl=0, threshold=1825):
    records = []
    for i in range(n_pos):
        records.append(ClinicalRecord(f"P{i:03d}", VitalStatus.DECEASED, survival_days=threshold + 10))
    for i in range(n_neg):
        records.append(ClinicalRecord(f"N{i:03d}", VitalStatus.DECEASED, survival_days=threshold - 10))
    for i in range(n_unl):
        records.append(ClinicalRecord(f"U{i:03d}", VitalStatus.ALIVE, last_followup_days=threshold - 10))
    return derive_labels(records, threshold)


ACCEPTANCE_LINES = []


def record(criterion: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion} [{name}]: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def surrogate_run(tmp_path_factory):
    """Bundled multi-modal surrogate, 30 repetitions through the CLI; (exit code, seconds, report dir)."""
    import time

    from manifold_ssl.cli import main

    d = tmp_path_factory.mktemp("surrogate")
    assert main(["synth", "--preset", "multimodal_manifold", "--seed", "1", "--out", str(d)]) == 0
    cfg = (d / "config.ini").read_text().replace("repetitions = 1", "repetitions = 30")
    (d / "config.ini").write_text(cfg)
    t0 = time.perf_counter()
    code = main(["run", "--config", str(d / "config.ini"), "--out", str(d / "out")])
    return code, time.perf_counter() - t0, d / "out"
