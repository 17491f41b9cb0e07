import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[dict]()

TITLES = {
    1: "manufactured convergence",
    2: "patch test",
    3: "conditioning scaling",
    4: "worst-case sliver conditioning",
    5: "ghost-penalty exactness",
    6: "cut-cell quadrature exactness",
    7: "free-beam eigenvalue",
    8: "frequency response",
    9: "two-grid eigenvalue",
    10: "fibre reinforcement",
    11: "solver oracles",
}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance(request):
    """Record (criterion, part, ok, detail); summarized after the run."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(criterion: int, part: str, ok: bool, detail: str = ""):
        store.setdefault(criterion, []).append((part, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c in sorted(TITLES):
        parts = store.get(c)
        if not parts:
            tr.write_line(f"criterion {c:2d} {TITLES[c]}: NOT RUN")
            continue
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {c:2d} {TITLES[c]}: {'PASS' if ok else 'FAIL'}")
        for part, pok, detail in parts:
            tr.write_line(f"    [{'pass' if pok else 'FAIL'}] {part}: {detail}")
