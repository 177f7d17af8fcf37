import os

import pytest

from hmit.dataset import AttributeSchema, load_table

# filled by test_acceptance, printed once at the end of the run
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    old = os.environ.get("HMIT_CACHE_DIR")
    os.environ["HMIT_CACHE_DIR"] = str(tmp_path_factory.mktemp("hmit-cache"))
    yield
    if old is None:
        os.environ.pop("HMIT_CACHE_DIR", None)
    else:
        os.environ["HMIT_CACHE_DIR"] = old


@pytest.fixture
def toy():
    """6 rows where a=1 and b=1 imply c=1 in four of them; row 5 misses c."""
    text = "a,b,c,cls\n1,1,1,y\n1,1,1,y\n1,1,1,n\n1,1,1,n\n0,0,0,y\n1,1,?,n\n"
    hint = [AttributeSchema(n, is_class=n == "cls") for n in ("a", "b", "c", "cls")]
    return load_table(text.encode(), schema_hint=hint)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
