from src.harness.selftest import CHECKS, run_selftest


class TestSelftest:
    def test_all_checks_pass(self):
        results = run_selftest()

        assert len(results) == len(CHECKS)
        assert [name for name, ok, _ in results if not ok] == []

    def test_failure_is_reported(self, monkeypatch):
        def broken():
            raise RuntimeError("boom")

        monkeypatch.setattr("src.harness.selftest.CHECKS", [("broken", broken)])

        assert run_selftest() == [("broken", False, "RuntimeError: boom")]
