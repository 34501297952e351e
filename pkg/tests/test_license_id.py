import json

import pytest

from qareuse.exceptions import ConfigurationError
from qareuse.license_id import (
    LicenseCatalog, LicenseEntry, default_catalog, identify, identify_header, primary_license,
    same_license, satisfies_sharealike, scan_project_root, tokenize
)
from qareuse.models import FileRecord, LicenseFinding, LicenseScope

from .conftest import license_notice

CATALOG_IDS = [entry.license_id for entry in default_catalog().entries]


def finding(license_id, scope=LicenseScope.FILE_HEADER):
    return LicenseFinding(license_id, 1.0, (), scope)


class TestIdentify:
    def test_apache_header(self):
        findings = identify('// Licensed under the Apache License, Version 2.0 (the "License");',
                            LicenseScope.FILE_HEADER)
        assert findings[0].license_id == "Apache-2.0"
        assert findings[0].confidence == 0.5
        assert findings[0].evidence[0].line_start == 1

    def test_empty_text_is_unknown(self):
        findings = identify("", LicenseScope.FILE_HEADER)
        assert len(findings) == 1
        assert findings[0].is_unknown
        assert findings[0].confidence == 0.0

    def test_post_body_citation(self):
        findings = identify("<p>Code is CC BY-SA 3.0, as all posts.</p>", LicenseScope.POST_BODY)
        assert [(f.license_id, f.scope) for f in findings] == [
            ("CC-BY-SA-3.0", LicenseScope.POST_BODY)]

    def test_phrase_may_wrap_lines_and_comment_markers(self):
        text = " * This program is free software under the GNU General Public\n" \
               " * License version 3, either version 3 of the License.\n"
        findings = identify(text, LicenseScope.FILE_HEADER)
        assert findings[0].license_id == "GPL-3.0"
        assert findings[0].confidence == 1.0
        assert (findings[0].evidence[0].line_start, findings[0].evidence[0].line_end) == (1, 2)

    def test_floor_filters_partial_matches(self):
        text = "Apache License, Version 2.0"
        assert identify(text, LicenseScope.FILE_HEADER, floor=0.75)[0].is_unknown

    @pytest.mark.parametrize("license_id", CATALOG_IDS)
    def test_every_notice_identifies_its_license(self, license_id):
        findings = identify(license_notice(license_id), LicenseScope.PROJECT_ROOT)
        assert findings[0].license_id == license_id
        assert findings[0].confidence == 1.0
        assert all(f.confidence < 1.0 for f in findings[1:])

    def test_tokenize_ignores_punctuation(self):
        assert tokenize("BY-SA,\n3.0") == [("by", 1), ("sa", 1), ("3", 2), ("0", 2)]

    def test_header_region_only(self):
        text = "\n".join(["// code"] * 70 + [license_notice("MIT")])
        record = FileRecord("app", "A.java", text, (1, 60))
        assert identify_header(record)[0].is_unknown
        record = FileRecord("app", "A.java", license_notice("MIT") + text, (1, 60))
        assert primary_license(identify_header(record)) == "MIT"


class TestProjectRoot:
    def test_license_and_readme(self, tmp_path):
        (tmp_path / "LICENSE").write_text(license_notice("GPL-2.0"), encoding="utf-8")
        (tmp_path / "README.md").write_text("Parts are under the Apache License, Version 2.0\n",
                                            encoding="utf-8")
        findings = scan_project_root(tmp_path)
        assert [f.license_id for f in findings] == ["GPL-2.0", "Apache-2.0"]
        assert all(f.scope is LicenseScope.PROJECT_ROOT for f in findings)
        assert primary_license(findings) == "GPL-2.0"

    def test_no_license_files(self, tmp_path):
        (tmp_path / "Main.java").write_text(license_notice("MIT"), encoding="utf-8")
        findings = scan_project_root(tmp_path)
        assert findings[0].is_unknown
        assert primary_license(findings) == "UNKNOWN"


class TestSharealike:
    @pytest.mark.parametrize("license_id, expected", [
        ("CC-BY-SA-4.0", True),
        ("CC-BY-SA-3.0", True),
        ("CC-BY-SA-2.5", False),
        ("GPL-3.0", False),
        ("UNKNOWN", False),
    ])
    def test_version_floor(self, license_id, expected):
        assert satisfies_sharealike([finding(license_id)]) is expected

    def test_any_finding_suffices(self):
        assert satisfies_sharealike([finding("MIT"), finding("CC-BY-SA-4.0")])
        assert not satisfies_sharealike([])


@pytest.mark.parametrize("a, b, expected", [
    ("MIT", "MIT", True),
    ("GPL-2.0", "GPL-3.0", False),
    ("UNKNOWN", "UNKNOWN", False),
])
def test_same_license(a, b, expected):
    assert same_license(a, b) is expected


class TestCatalog:
    def entry(self, **overrides):
        data = {"license_id": "Zlib", "family": "Zlib", "version": None,
                "phrases": ["zlib License", "altered source versions must be plainly marked"]}
        data.update(overrides)
        return data

    def test_load_directory(self, tmp_path):
        (tmp_path / "zlib.json").write_text(json.dumps(self.entry()), encoding="utf-8")
        catalog = LicenseCatalog.load(tmp_path)
        assert len(catalog) == 1 and "Zlib" in catalog
        findings = identify("Released under the zlib license.", LicenseScope.FILE_HEADER,
                            catalog=catalog)
        assert findings[0].license_id == "Zlib"

    def test_duplicate_ids_are_rejected(self):
        entry = LicenseEntry.from_dict(self.entry())
        with pytest.raises(ConfigurationError):
            LicenseCatalog([entry, entry])

    def test_empty_phrase_is_rejected(self):
        with pytest.raises(ConfigurationError):
            LicenseEntry.from_dict(self.entry(phrases=["--"]))

    def test_empty_directory(self, tmp_path):
        with pytest.raises(ConfigurationError):
            LicenseCatalog.load(tmp_path)

    def test_bundled_catalog(self):
        catalog = default_catalog()
        assert {"Apache-2.0", "MIT", "GPL-2.0", "GPL-3.0", "BSD-3-Clause",
                "CC-BY-SA-2.5", "CC-BY-SA-3.0", "CC-BY-SA-4.0"} <= set(CATALOG_IDS)
        assert catalog.get("CC-BY-SA-4.0").version == (4, 0)
