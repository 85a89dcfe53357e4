import json

import pytest

from hintloop.taxonomy import (
    TaxonomyError,
    egregiousness_tier,
    load_taxonomy,
    save_taxonomy,
    taxonomy_from_records,
)


def make_records(n=4):
    return [
        {
            "id": f"cat{i % 2}.policy{i}",
            "name": f"Policy {i}",
            "category": f"Category{i % 2}",
            "egregiousness": (i % 3) + 1,
            "hint_enabled": i % 2 == 0,
        }
        for i in range(n)
    ]


def test_load_default_file_has_18_policies_4_categories(taxonomy):
    assert len(taxonomy.policies) == 18
    assert len(taxonomy.categories) == 4


def test_ordering_is_deterministic_by_id(tmp_path):
    records = make_records(6)
    records.reverse()
    path = tmp_path / "tax.json"
    path.write_text(json.dumps(records))
    tax = load_taxonomy(path)
    assert tax.ids == sorted(tax.ids)


def test_round_trip_identity(tmp_path, taxonomy):
    path = tmp_path / "tax.json"
    save_taxonomy(taxonomy, path)
    assert load_taxonomy(path) == taxonomy


def test_empty_list_rejected():
    with pytest.raises(TaxonomyError, match="empty taxonomy"):
        taxonomy_from_records([])


def test_duplicate_id_rejected_with_diagnostic():
    records = make_records(2)
    records[1]["id"] = records[0]["id"]
    with pytest.raises(TaxonomyError, match="duplicate policy id") as exc:
        taxonomy_from_records(records)
    assert records[0]["id"] in str(exc.value)


def test_egregiousness_below_one_rejected():
    records = make_records(2)
    records[1]["egregiousness"] = 0
    with pytest.raises(TaxonomyError, match="egregiousness") as exc:
        taxonomy_from_records(records)
    assert records[1]["id"] in str(exc.value)


def test_unknown_fields_rejected():
    records = make_records(1)
    records[0]["playbook_url"] = "http://x"
    with pytest.raises(TaxonomyError, match="unknown fields"):
        taxonomy_from_records(records)


def test_missing_fields_rejected():
    records = make_records(1)
    del records[0]["hint_enabled"]
    with pytest.raises(TaxonomyError, match="missing fields"):
        taxonomy_from_records(records)


def test_parse_error_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("[{not json")
    with pytest.raises(TaxonomyError, match="parse error"):
        load_taxonomy(path)


def test_bool_egregiousness_rejected():
    records = make_records(1)
    records[0]["egregiousness"] = True
    with pytest.raises(TaxonomyError, match="integer"):
        taxonomy_from_records(records)


def test_tier_lookup(taxonomy):
    assert egregiousness_tier(taxonomy, "violence.graphic") == 3
    assert egregiousness_tier(taxonomy, "profanity.mild") == 1


def test_tier_lookup_unknown_policy(taxonomy):
    with pytest.raises(TaxonomyError, match="unknown policy"):
        egregiousness_tier(taxonomy, "nonexistent")


def test_every_listed_id_resolves(taxonomy):
    for pid in taxonomy.ids:
        assert egregiousness_tier(taxonomy, pid) >= 1
