from ksdtransport.selfcheck import CHECKS, run_checks


def test_all_checks_pass():
    results = run_checks()
    assert len(results) == len(CHECKS) >= 12
    failed = [r for r in results if not r.passed]
    assert not failed, failed


def test_names_are_unique_and_selectable():
    names = [n for n, _ in CHECKS]
    assert len(set(names)) == len(names)
    picked = run_checks({"stein.anchor_200", "eval.emd_vs_brute_force"})
    assert [r.name for r in picked] == ["stein.anchor_200", "eval.emd_vs_brute_force"]


def test_crashing_check_counts_as_failure(monkeypatch):
    import ksdtransport.selfcheck as sc

    def crash():
        raise RuntimeError("boom")
    monkeypatch.setattr(sc, "CHECKS", [("crash", crash)])
    (r,) = sc.run_checks()
    assert not r.passed and "boom" in r.detail
