import json

import numpy as np
import pytest
from scipy import stats

from uncm.leaks import (
    Account,
    CleanRules,
    CredentialLeak,
    LeakCollection,
    clean,
    filter_by_tld,
    filter_english,
    leak_id_from_filename,
    load_collection,
    looks_hashed,
    save_collection,
    split_train_test,
)
from uncm.synth import benchmark_spec, synth_generate


def _leak(i, accounts, tld="com"):
    return CredentialLeak(f"leak{i}.{tld}", accounts, {"tld": tld})


def _accounts(n, prefix="user", domain="mail.com", password="hunter2"):
    return [Account(f"{prefix}{i}@{domain}", password) for i in range(n)]


# -- loading ----------------------------------------------------------------


def test_load_colon_lines(tmp_path):
    f = tmp_path / "site1.cc.txt"
    f.write_text("a@b.cc:pass1\nnoseparator\nc@d.cc:with:colons\n")
    coll = load_collection(tmp_path, "colon-lines")
    leak = coll.leaks[0]
    assert leak.id == "site1.cc"
    assert leak.tld == "cc"
    assert leak.accounts[0] == Account("a@b.cc", "pass1")
    assert leak.accounts[1] == Account("c@d.cc", "with:colons")
    assert any("1 malformed" in note for note in coll.provenance)


def test_load_json_lines_preserves_extra(tmp_path):
    f = tmp_path / "site2.fr.txt"
    f.write_text(json.dumps({"email": "a@b.cc", "password": "p", "name": "Ann"}) + "\n")
    coll = load_collection(tmp_path, "json-lines")
    assert coll.leaks[0].accounts[0].extra == {"name": "Ann"}


def test_load_tsv(tmp_path):
    f = tmp_path / "site3.de.txt"
    f.write_text("a@b.de\tpw\t" + json.dumps({"name": "Bob"}) + "\nc@d.de\tpw2\n")
    coll = load_collection(tmp_path, "tsv")
    assert coll.leaks[0].accounts[0].extra == {"name": "Bob"}
    assert coll.leaks[0].accounts[1].extra is None


def test_file_with_no_parseable_accounts_skipped(tmp_path):
    (tmp_path / "bad.com.txt").write_text("garbage\nmore garbage\n")
    (tmp_path / "good.com.txt").write_text("a@b.com:x\n")
    coll = load_collection(tmp_path, "colon-lines")
    assert len(coll.leaks) == 1
    assert any("skipped bad.com.txt" in note for note in coll.provenance)


def test_leak_id_from_filename():
    assert leak_id_from_filename("629cb8f3.pl.txt") == ("629cb8f3.pl", "pl")
    assert leak_id_from_filename("noext.txt") == ("noext", "")


def test_save_load_round_trip(tmp_path):
    coll = LeakCollection([_leak(1, _accounts(3), "pl")])
    for fmt in ("colon-lines", "tsv", "json-lines"):
        out = tmp_path / fmt
        save_collection(coll, out, fmt)
        loaded = load_collection(out, fmt)
        assert [a.email for a in loaded.leaks[0].accounts] == [
            a.email for a in coll.leaks[0].accounts
        ]
        assert loaded.leaks[0].tld == "pl"


# -- cleaning -----------------------------------------------------------------


def test_hash_regex_drops_md5_of_password():
    assert looks_hashed("5f4dcc3b5aa765d61d8327deb882cf99")  # md5("password")
    assert looks_hashed("a" * 40)
    assert looks_hashed("0" * 64)
    assert looks_hashed("$2b$10$abcdefghijklmnopqrstuv")
    assert not looks_hashed("hunter2")
    assert not looks_hashed("5F4DCC3B5AA765D61D8327DEB882CF99")  # uppercase hex
    accounts = _accounts(150) + [Account("h@x.com", "5f4dcc3b5aa765d61d8327deb882cf99")]
    result = clean(LeakCollection([_leak(1, accounts)]))
    assert result.report["hashed_accounts_dropped"] == 1
    assert all(
        a.password != "5f4dcc3b5aa765d61d8327deb882cf99"
        for a in result.collection.leaks[0].accounts
    )


def test_email_in_more_than_150_leaks_dropped():
    bot = Account("bot@mail.com", "pw")
    leaks = [
        CredentialLeak(f"l{i}.com", _accounts(100, prefix=f"u{i}x") + [bot],
                       {"tld": "com"})
        for i in range(151)
    ]
    result = clean(LeakCollection(leaks))
    assert result.report["bot_accounts_dropped"] == 151
    for leak in result.collection.leaks:
        assert all(a.email != "bot@mail.com" for a in leak.accounts)


def test_leak_under_100_accounts_dropped():
    big = _leak(1, _accounts(100))
    small = _leak(2, _accounts(99, prefix="other"))
    result = clean(LeakCollection([big, small]))
    assert result.report["small_leaks_dropped"] == 1
    assert [l.id for l in result.collection.leaks] == ["leak1.com"]


def test_duplicate_leak_overlap_drops_smaller():
    shared = [Account(f"s{i}@m.com", f"pw{i}") for i in range(100)]
    big = CredentialLeak("big.com", shared + _accounts(20, prefix="uniq"),
                         {"tld": "com"})
    dup = CredentialLeak("dup.com", [Account(f"d{i}@m.com", f"pw{i}") for i in range(100)],
                         {"tld": "com"})
    result = clean(LeakCollection([big, dup]))
    assert result.report["duplicate_leaks_dropped"] == 1
    assert [l.id for l in result.collection.leaks] == ["big.com"]


def test_clean_is_idempotent():
    leaks = [
        _leak(1, _accounts(120) + [Account("h@x.com", "a" * 32)]),
        _leak(2, _accounts(99, prefix="small")),
    ]
    once = clean(LeakCollection(leaks))
    twice = clean(once.collection)
    assert [l.id for l in once.collection.leaks] == [l.id for l in twice.collection.leaks]
    assert once.collection.n_accounts() == twice.collection.n_accounts()


def test_anomaly_hook_default_off_and_applies_when_set():
    # distinct password sets so the duplicate rule stays out of the way
    one = [Account(f"a{i}@m.com", f"alpha{i}") for i in range(120)]
    two = [Account(f"b{i}@m.com", f"beta{i}") for i in range(120)]
    leaks = [_leak(1, one), _leak(2, two)]
    default = clean(LeakCollection(leaks))
    assert default.report["anomalous_leaks_dropped"] == 0
    assert len(default.collection.leaks) == 2
    hooked = clean(
        LeakCollection(leaks),
        CleanRules(anomaly_hook=lambda leak: leak.id != "leak2.com"),
    )
    assert hooked.report["anomalous_leaks_dropped"] == 1


# -- splitting -----------------------------------------------------------------


def _ten_leaks():
    return LeakCollection(
        [_leak(i, _accounts(30, prefix=f"l{i}u")) for i in range(10)]
    )


def test_split_fraction_floor_minimum_one():
    train, test = split_train_test(_ten_leaks(), 0.1, rng=0)
    assert len(test.leaks) == 1
    assert len(train.leaks) == 9
    train2, test2 = split_train_test(_ten_leaks(), 0.01, rng=0)
    assert len(test2.leaks) == 1  # floor would give 0; minimum applies


def test_split_removes_train_emails_from_test():
    shared = Account("both@mail.com", "pw")
    leaks = [
        CredentialLeak(f"l{i}.com", _accounts(20, prefix=f"u{i}") + [shared],
                       {"tld": "com"})
        for i in range(10)
    ]
    train, test = split_train_test(LeakCollection(leaks), 0.2, rng=1)
    train_emails = {a.email for l in train.leaks for a in l.accounts}
    test_emails = {a.email for l in test.leaks for a in l.accounts}
    assert "both@mail.com" in train_emails
    assert "both@mail.com" not in test_emails
    assert not train_emails & test_emails


def test_split_reproducible_and_partitioning():
    coll = _ten_leaks()
    a_train, a_test = split_train_test(coll, 0.3, rng=7)
    b_train, b_test = split_train_test(coll, 0.3, rng=7)
    assert [l.id for l in a_train.leaks] == [l.id for l in b_train.leaks]
    assert [l.id for l in a_test.leaks] == [l.id for l in b_test.leaks]
    all_ids = {l.id for l in coll.leaks}
    assert {l.id for l in a_train.leaks} | {l.id for l in a_test.leaks} == all_ids
    assert not {l.id for l in a_train.leaks} & {l.id for l in a_test.leaks}


def test_split_needs_two_leaks():
    with pytest.raises(ValueError):
        split_train_test(LeakCollection([_leak(1, _accounts(5))]), 0.5, 0)


# -- filters -------------------------------------------------------------------


def test_filter_by_tld():
    coll = LeakCollection([_leak(1, _accounts(5), "pl"), _leak(2, _accounts(5), "com")])
    kept = filter_by_tld(coll, ".pl")
    assert [l.id for l in kept.leaks] == ["leak1.pl"]
    assert filter_by_tld(coll, "xx").leaks == []
    again = filter_by_tld(kept, "pl")
    assert [l.id for l in again.leaks] == ["leak1.pl"]  # idempotent


def test_filter_english_keeps_mostly_english_com_leak():
    accounts = _accounts(99, domain="mail.com") + [Account("u@mail.de", "p")]
    coll = LeakCollection([_leak(1, accounts, "com")])
    assert len(filter_english(coll).leaks) == 1  # 1% foreign


def test_filter_english_drops_five_percent_foreign():
    accounts = _accounts(95, domain="mail.com") + [
        Account(f"f{i}@mail.de", "p") for i in range(5)
    ]
    coll = LeakCollection([_leak(1, accounts, "com")])
    assert filter_english(coll).leaks == []


def test_filter_english_drops_non_english_site_tld():
    accounts = _accounts(100, domain="mail.com")
    coll = LeakCollection([_leak(1, accounts, "de")])
    assert filter_english(coll).leaks == []


# -- synthesis -----------------------------------------------------------------


def test_synth_counts_and_determinism():
    spec = benchmark_spec(n_leaks=3, leak_size=(40, 40))
    a = synth_generate(spec, np.random.default_rng(5))
    b = synth_generate(spec, np.random.default_rng(5))
    assert len(a.leaks) == 6  # 2 communities x 3 leaks
    assert a.n_accounts() == 240
    assert [l.id for l in a.leaks] == [l.id for l in b.leaks]
    for la, lb in zip(a.leaks, b.leaks):
        assert [(x.email, x.password) for x in la.accounts] == [
            (x.email, x.password) for x in lb.accounts
        ]


def test_synth_community_distributions_differ():
    spec = benchmark_spec(n_leaks=1, leak_size=(10_000, 10_000))
    coll = synth_generate(spec, np.random.default_rng(6))
    by_community = {}
    for leak in coll.leaks:
        by_community[leak.metadata["community"]] = "".join(leak.passwords())
    chars = sorted(set("".join(by_community.values())))
    counts = []
    for text in by_community.values():
        counts.append([text.count(c) + 1 for c in chars])
    counts = np.array(counts, dtype=float)
    # scale to a common total, then test homogeneity of the two unigram
    # distributions
    counts[1] *= counts[0].sum() / counts[1].sum()
    _, pvalue = stats.chisquare(counts[0], counts[1])
    assert pvalue < 0.001


def test_synth_metadata_carries_ground_truth():
    spec = benchmark_spec(n_leaks=2, leak_size=(30, 30))
    coll = synth_generate(spec, np.random.default_rng(7))
    communities = {l.metadata["community"] for l in coll.leaks}
    assert communities == {"aurora", "breeze"}
    assert all(l.metadata["source"] == "synthetic" for l in coll.leaks)


def test_synth_invalid_spec_rejected():
    from uncm.synth import SynthSpec

    with pytest.raises(ValueError):
        synth_generate(SynthSpec(communities=[]), np.random.default_rng(0))
