"""Policy taxonomy: granular violation classes grouped under broad categories.

Each policy carries an egregiousness tier (used by hint ranking) and a
hint_enabled flag (whether the pipeline generates hints for it). The taxonomy
is immutable after load and safe for concurrent reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .util import content_hash

_POLICY_FIELDS = {"id", "name", "category", "egregiousness", "hint_enabled"}


class TaxonomyError(ValueError):
    """Raised when a taxonomy file fails validation; message names the offending record."""


@dataclass(frozen=True)
class Policy:
    id: str
    name: str
    category: str
    egregiousness: int
    hint_enabled: bool


@dataclass(frozen=True)
class PolicyTaxonomy:
    policies: tuple[Policy, ...]
    version: str

    def __post_init__(self) -> None:
        if not self.policies:
            raise TaxonomyError("empty taxonomy")
        ids = [p.id for p in self.policies]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise TaxonomyError(f"duplicate policy id {dup!r}")

    def get(self, policy_id: str) -> Policy:
        try:
            return self._by_id[policy_id]
        except KeyError:
            raise TaxonomyError(f"unknown policy id {policy_id!r}") from None

    @property
    def _by_id(self) -> dict[str, Policy]:
        # cached on first use; the instance is frozen so this is safe
        cache = self.__dict__.get("_idx")
        if cache is None:
            cache = {p.id: p for p in self.policies}
            object.__setattr__(self, "_idx", cache)
        return cache

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.policies]

    def hint_enabled_ids(self) -> list[str]:
        return [p.id for p in self.policies if p.hint_enabled]

    @property
    def categories(self) -> list[str]:
        return sorted({p.category for p in self.policies})


def _parse_policy(rec: object, index: int) -> Policy:
    where = f"record {index}"
    if not isinstance(rec, dict):
        raise TaxonomyError(f"{where}: expected an object, got {type(rec).__name__}")
    rid = rec.get("id", "<missing id>")
    where = f"record {index} (id={rid!r})"
    missing = _POLICY_FIELDS - rec.keys()
    if missing:
        raise TaxonomyError(f"{where}: missing fields {sorted(missing)}")
    unknown = rec.keys() - _POLICY_FIELDS
    if unknown:
        raise TaxonomyError(f"{where}: unknown fields {sorted(unknown)}")
    if not isinstance(rec["id"], str) or not rec["id"]:
        raise TaxonomyError(f"{where}: id must be a non-empty string")
    if not isinstance(rec["name"], str) or not rec["name"]:
        raise TaxonomyError(f"{where}: name must be a non-empty string")
    if not isinstance(rec["category"], str) or not rec["category"]:
        raise TaxonomyError(f"{where}: category must be a non-empty string")
    egr = rec["egregiousness"]
    if isinstance(egr, bool) or not isinstance(egr, int):
        raise TaxonomyError(f"{where}: egregiousness must be an integer")
    if egr < 1:
        raise TaxonomyError(f"{where}: egregiousness must be >= 1, got {egr}")
    if not isinstance(rec["hint_enabled"], bool):
        raise TaxonomyError(f"{where}: hint_enabled must be a boolean")
    return Policy(
        id=rec["id"],
        name=rec["name"],
        category=rec["category"],
        egregiousness=egr,
        hint_enabled=rec["hint_enabled"],
    )


def taxonomy_from_records(records: list) -> PolicyTaxonomy:
    """Validate raw records and build a taxonomy ordered by policy id."""
    if not isinstance(records, list):
        raise TaxonomyError("taxonomy file must contain a JSON array of policy objects")
    if not records:
        raise TaxonomyError("empty taxonomy")
    policies = [_parse_policy(rec, i) for i, rec in enumerate(records)]
    seen: dict[str, int] = {}
    for i, p in enumerate(policies):
        if p.id in seen:
            raise TaxonomyError(f"record {i} (id={p.id!r}): duplicate policy id (first at record {seen[p.id]})")
        seen[p.id] = i
    policies.sort(key=lambda p: p.id)
    version = content_hash([serialize_policy(p) for p in policies])
    return PolicyTaxonomy(policies=tuple(policies), version=version)


def load_taxonomy(path: str | Path) -> PolicyTaxonomy:
    """Load and validate a taxonomy file. Any invalid record rejects the whole file."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise TaxonomyError(f"cannot read taxonomy file {path}: {e}") from e
    try:
        records = json.loads(raw)
    except json.JSONDecodeError as e:
        raise TaxonomyError(f"taxonomy parse error in {path}: {e}") from e
    return taxonomy_from_records(records)


def serialize_policy(p: Policy) -> dict:
    return {
        "id": p.id,
        "name": p.name,
        "category": p.category,
        "egregiousness": p.egregiousness,
        "hint_enabled": p.hint_enabled,
    }


def save_taxonomy(taxonomy: PolicyTaxonomy, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([serialize_policy(p) for p in taxonomy.policies], indent=2) + "\n",
        encoding="utf-8",
    )


def egregiousness_tier(taxonomy: PolicyTaxonomy, policy_id: str) -> int:
    """Tier of the given policy; higher means more egregious."""
    return taxonomy.get(policy_id).egregiousness
