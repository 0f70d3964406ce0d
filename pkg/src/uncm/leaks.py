"""Credential-leak ingestion, cleaning, splitting, and filtering.

File formats (one leak per file, filename "<leakid>.<tld>.txt"):
  colon-lines  UTF-8 "email:password", first ':' separates
  tsv          email TAB password [TAB extra-json]
  json-lines   {"email": ..., "password": ..., <extra modalities>}
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .emails import MalformedEmail, parse_email


@dataclass
class Account:
    email: str
    password: str
    extra: dict[str, str] | None = None


@dataclass
class CredentialLeak:
    id: str
    accounts: list[Account]
    metadata: dict = field(default_factory=dict)

    @property
    def tld(self) -> str:
        return str(self.metadata.get("tld", "")).lower().lstrip(".")

    def passwords(self) -> list[str]:
        return [a.password for a in self.accounts]

    def emails(self) -> list[str]:
        return [a.email for a in self.accounts]


@dataclass
class LeakCollection:
    leaks: list[CredentialLeak]
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [leak.id for leak in self.leaks]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate leak ids in collection")

    def __len__(self) -> int:
        return len(self.leaks)

    def n_accounts(self) -> int:
        return sum(len(leak.accounts) for leak in self.leaks)

    def all_passwords(self) -> list[str]:
        return [p for leak in self.leaks for p in leak.passwords()]


# -- loading -----------------------------------------------------------


def _parse_line(line: str, fmt: str) -> Account | None:
    line = line.rstrip("\n\r")
    if not line:
        return None
    if fmt == "colon-lines":
        sep = line.find(":")
        if sep <= 0:
            return None
        return Account(email=line[:sep], password=line[sep + 1 :])
    if fmt == "tsv":
        parts = line.split("\t")
        if len(parts) < 2:
            return None
        extra = None
        if len(parts) >= 3 and parts[2]:
            try:
                extra = json.loads(parts[2])
            except json.JSONDecodeError:
                return None
        return Account(email=parts[0], password=parts[1], extra=extra)
    if fmt == "json-lines":
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            return None
        if not isinstance(record, dict) or "email" not in record or "password" not in record:
            return None
        extra = {
            k: str(v) for k, v in record.items() if k not in ("email", "password")
        }
        return Account(
            email=str(record["email"]),
            password=str(record["password"]),
            extra=extra or None,
        )
    raise ValueError(f"unknown format {fmt!r}")


def leak_id_from_filename(name: str) -> tuple[str, str]:
    """"<leakid>.<tld>.txt" -> (leakid.tld, tld); tld may be empty."""
    stem = name[:-4] if name.endswith(".txt") else name
    dot = stem.rfind(".")
    if dot <= 0:
        return stem, ""
    return stem, stem[dot + 1 :]


def load_collection(path, fmt: str = "colon-lines") -> LeakCollection:
    """One leak per file; malformed lines are counted and skipped, files
    with zero parseable accounts are skipped with a provenance note."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    files = sorted(p.glob("*.txt")) if p.is_dir() else [p]
    leaks = []
    notes = []
    for f in files:
        accounts = []
        bad = 0
        for line in f.read_text(encoding="utf-8", errors="replace").splitlines():
            if not line.strip():
                continue
            account = _parse_line(line, fmt)
            if account is None:
                bad += 1
            else:
                accounts.append(account)
        leak_id, tld = leak_id_from_filename(f.name)
        if not accounts:
            notes.append(f"skipped {f.name}: no parseable accounts")
            continue
        if bad:
            notes.append(f"{f.name}: skipped {bad} malformed lines")
        leaks.append(
            CredentialLeak(
                id=leak_id, accounts=accounts, metadata={"tld": tld, "source": f.name}
            )
        )
    return LeakCollection(leaks=leaks, provenance=notes)


def save_collection(collection: LeakCollection, path, fmt: str = "colon-lines") -> None:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for leak in collection.leaks:
        name = leak.id if leak.id.endswith(f".{leak.tld}") or not leak.tld else f"{leak.id}.{leak.tld}"
        f = out / f"{name}.txt"
        if fmt == "colon-lines":
            lines = [f"{a.email}:{a.password}" for a in leak.accounts]
        elif fmt == "tsv":
            lines = [
                "\t".join(
                    [a.email, a.password]
                    + ([json.dumps(a.extra, sort_keys=True)] if a.extra else [])
                )
                for a in leak.accounts
            ]
        elif fmt == "json-lines":
            lines = [
                json.dumps(
                    {"email": a.email, "password": a.password, **(a.extra or {})},
                    sort_keys=True,
                )
                for a in leak.accounts
            ]
        else:
            raise ValueError(f"unknown format {fmt!r}")
        f.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- cleaning -----------------------------------------------------------

HASH_PATTERNS = (
    re.compile(r"^[0-9a-f]{32}$"),  # MD5
    re.compile(r"^[0-9a-f]{40}$"),  # SHA1
    re.compile(r"^[0-9a-f]{64}$"),  # SHA256
)
BCRYPT_PREFIX = "$2"


@dataclass
class CleanRules:
    max_email_leaks: int = 150
    min_leak_size: int = 100
    dup_overlap: float = 0.9
    # optional model-based anomaly detector (leak -> keep?); default off
    anomaly_hook: object = None


def looks_hashed(password: str) -> bool:
    if password.startswith(BCRYPT_PREFIX):
        return True
    return any(p.match(password) for p in HASH_PATTERNS)


@dataclass
class CleanResult:
    collection: LeakCollection
    report: dict


def clean(collection: LeakCollection, rules: CleanRules | None = None) -> CleanResult:
    """Apply, in order: hash-pattern account removal, bot-account removal
    (email in more than `max_email_leaks` leaks), small-leak removal,
    near-duplicate-leak removal. Idempotent."""
    rules = rules or CleanRules()
    report = {
        "hashed_accounts_dropped": 0,
        "bot_accounts_dropped": 0,
        "small_leaks_dropped": 0,
        "duplicate_leaks_dropped": 0,
        "anomalous_leaks_dropped": 0,
    }
    # 1. hash-looking passwords
    stage1 = []
    for leak in collection.leaks:
        kept = [a for a in leak.accounts if not looks_hashed(a.password)]
        report["hashed_accounts_dropped"] += len(leak.accounts) - len(kept)
        stage1.append(CredentialLeak(leak.id, kept, dict(leak.metadata)))
    # 2. emails present in too many distinct leaks
    email_leaks: Counter[str] = Counter()
    for leak in stage1:
        for email in set(a.email for a in leak.accounts):
            email_leaks[email] += 1
    bots = {e for e, c in email_leaks.items() if c > rules.max_email_leaks}
    stage2 = []
    for leak in stage1:
        kept = [a for a in leak.accounts if a.email not in bots]
        report["bot_accounts_dropped"] += len(leak.accounts) - len(kept)
        stage2.append(CredentialLeak(leak.id, kept, dict(leak.metadata)))
    # 3. undersized leaks
    stage3 = [leak for leak in stage2 if len(leak.accounts) >= rules.min_leak_size]
    report["small_leaks_dropped"] = len(stage2) - len(stage3)
    # 4. near-duplicate leaks: password-multiset overlap |A&B| / min(|A|,|B|)
    password_bags = [Counter(leak.passwords()) for leak in stage3]
    drop: set[int] = set()
    for i in range(len(stage3)):
        if i in drop:
            continue
        for j in range(i + 1, len(stage3)):
            if j in drop:
                continue
            inter = sum((password_bags[i] & password_bags[j]).values())
            smaller = min(len(stage3[i].accounts), len(stage3[j].accounts))
            if smaller and inter / smaller > rules.dup_overlap:
                victim = i if len(stage3[i].accounts) < len(stage3[j].accounts) else j
                drop.add(victim)
                if victim == i:
                    break
    stage4 = [leak for k, leak in enumerate(stage3) if k not in drop]
    report["duplicate_leaks_dropped"] = len(drop)
    if rules.anomaly_hook is not None:
        kept = [leak for leak in stage4 if rules.anomaly_hook(leak)]
        report["anomalous_leaks_dropped"] = len(stage4) - len(kept)
        stage4 = kept
    report["leaks_remaining"] = len(stage4)
    report["accounts_remaining"] = sum(len(leak.accounts) for leak in stage4)
    return CleanResult(
        collection=LeakCollection(
            leaks=stage4, provenance=collection.provenance + ["cleaned"]
        ),
        report=report,
    )


# -- splitting and filtering ---------------------------------------------


def split_train_test(
    collection: LeakCollection, test_fraction: float = 0.1, rng=None
) -> tuple[LeakCollection, LeakCollection]:
    """Uniform leak-level partition; every test account whose email also
    appears anywhere in the train partition is removed, and test leaks
    left empty are dropped."""
    if len(collection.leaks) < 2:
        raise ValueError("need at least 2 leaks to split")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    n_test = max(1, math.floor(len(collection.leaks) * test_fraction))
    order = rng.permutation(len(collection.leaks))
    test_idx = set(int(i) for i in order[:n_test])
    train_leaks = [l for i, l in enumerate(collection.leaks) if i not in test_idx]
    test_leaks = [l for i, l in enumerate(collection.leaks) if i in test_idx]
    train_emails = {a.email for leak in train_leaks for a in leak.accounts}
    cleaned_test = []
    for leak in test_leaks:
        kept = [a for a in leak.accounts if a.email not in train_emails]
        if kept:
            cleaned_test.append(CredentialLeak(leak.id, kept, dict(leak.metadata)))
    return (
        LeakCollection(train_leaks, collection.provenance + ["train split"]),
        LeakCollection(cleaned_test, collection.provenance + ["test split"]),
    )


def filter_by_tld(collection: LeakCollection, tld: str) -> LeakCollection:
    want = tld.lower().lstrip(".")
    kept = [leak for leak in collection.leaks if leak.tld == want]
    return LeakCollection(kept, collection.provenance + [f"tld={want}"])


ENGLISH_TLDS = frozenset({"us", "uk", "au", "net", "org", "com"})
ENGLISH_FOREIGN_FRACTION = 0.02


def _email_tld(email: str) -> str:
    try:
        domain = parse_email(email).domain
    except MalformedEmail:
        return ""
    return domain.lstrip(".")


def filter_english(collection: LeakCollection) -> LeakCollection:
    """Keep leaks whose site tld is in the English set and whose fraction
    of account-email tlds outside that set is at most 2%."""
    kept = []
    for leak in collection.leaks:
        if leak.tld not in ENGLISH_TLDS:
            continue
        if not leak.accounts:
            continue
        foreign = sum(
            1 for a in leak.accounts if _email_tld(a.email) not in ENGLISH_TLDS
        )
        if foreign / len(leak.accounts) <= ENGLISH_FOREIGN_FRACTION:
            kept.append(leak)
    return LeakCollection(kept, collection.provenance + ["english filter"])
