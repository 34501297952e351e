import pytest

from qareuse.exceptions import InconsistencyRowError, ManifestError, RepositoryError
from qareuse.models import CloneConfig
from qareuse.repo_ingest import (
    ScanStats, extract_app_snippets, index_history, load_inconsistencies,
    load_or_build_index, load_release_manifest, order_releases, parse_added_lines,
    scan_release
)

from .conftest import requires_git, statements, utc


def source(lines):
    return "\n".join(lines) + "\n"


class TestScanRelease:
    def test_extension_filter(self, tmp_path):
        for name in ("A.java", "pkg/B.java", "pkg/deep/C.JAVA", "README.md", "build.gradle"):
            path = tmp_path / "app" / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("class X {}\n", encoding="utf-8")

        release = scan_release(tmp_path / "app", "v1", utc(2015, 1, 1))

        assert release.app_id == "app"
        assert [f.path for f in release.files] == ["A.java", "pkg/B.java", "pkg/deep/C.JAVA"]

    def test_empty_tree(self, tmp_path):
        assert scan_release(tmp_path, "v1", utc(2015, 1, 1), app_id="x").files == ()

    def test_invalid_bytes_are_replaced(self, tmp_path, caplog):
        (tmp_path / "Bad.java").write_bytes(b"class Bad { // caf\xe9 }\n")
        stats = ScanStats()
        release = scan_release(tmp_path, "v1", utc(2015, 1, 1), stats=stats)
        assert "�" in release.files[0].text
        assert stats.lossy == 1
        assert "Invalid UTF-8" in caplog.text

    def test_git_directory_is_skipped(self, tmp_path):
        (tmp_path / ".git").mkdir()
        (tmp_path / ".git" / "Hidden.java").write_text("class H {}\n", encoding="utf-8")
        assert scan_release(tmp_path, "v1", utc(2015, 1, 1)).files == ()

    def test_missing_directory_is_fatal(self, tmp_path):
        with pytest.raises(RepositoryError):
            scan_release(tmp_path / "absent", "v1", utc(2015, 1, 1))


def test_extract_app_snippets(tmp_path):
    body = "\n".join(f"        int v{i} = {i};" for i in range(12))
    (tmp_path / "src").mkdir()
    (tmp_path / "src" / "Demo.java").write_text(
        f"package demo;\n\npublic class Demo {{\n    public void run() {{\n{body}\n    }}\n}}\n",
        encoding="utf-8")
    release = scan_release(tmp_path, "r1", utc(2015, 1, 1), app_id="demo")

    snippets = extract_app_snippets(release, CloneConfig())

    assert [s.snippet_id for s in snippets] == [
        "app/demo/r1/src/Demo.java#L3-L18",
        "app/demo/r1/src/Demo.java#L4-L17",
    ]
    method = snippets[1]
    assert method.origin.line_range == (4, 17)
    assert method.raw_text.splitlines()[0] == "    public void run() {"
    assert method.created_at is None
    assert extract_app_snippets(release, CloneConfig(), paths={"src/Other.java"}) == []


def test_parse_added_lines_groups_runs():
    patch = "\n".join([
        "--- a/F.java",
        "+++ b/F.java",
        "@@ -1,3 +1,4 @@",
        " keep",
        "+one",
        "+two",
        "-gone",
        "+three",
        "@@ -10,1 +11,1 @@",
        "+four",
    ])
    assert parse_added_lines(patch) == [["one", "two"], ["three"], ["four"]]


@requires_git
class TestIndexHistory:
    def test_single_commit_adds_every_line(self, git_repo):
        repo = git_repo()
        sha = repo.commit(utc(2015, 1, 15, 12), {"src/F.java": source(statements(20))})

        index = index_history(repo.path)

        commits = index.commits_for("src/F.java")
        assert [c.commit_id for c in commits] == [sha]
        assert commits[0].added_lines == tuple(statements(20))
        assert commits[0].commit_date == utc(2015, 1, 15, 12)
        assert index.head == sha
        assert index.contributors == {"Alice"}

    def test_modification_adds_only_new_lines(self, git_repo):
        repo = git_repo()
        lines = statements(20)
        repo.commit(utc(2015, 1, 1), {"src/F.java": source(lines)})
        for position in (4, 9, 14):
            lines[position] = f"int w{position} = {position * 10};"
        repo.commit(utc(2015, 2, 1), {"src/F.java": source(lines)}, author="Bob")

        commits = index_history(repo.path).commits_for("src/F.java")

        assert sorted(commits[1].added_lines) == sorted(
            ["int w4 = 40;", "int w9 = 90;", "int w14 = 140;"])

    def test_deletion_adds_nothing(self, git_repo):
        repo = git_repo()
        lines = statements(20)
        repo.commit(utc(2015, 1, 1), {"src/F.java": source(lines)})
        repo.commit(utc(2015, 2, 1), {"src/F.java": source(lines[:15])})

        commits = index_history(repo.path).commits_for("src/F.java")

        assert len(commits) == 2
        assert commits[1].added_lines == ()

    def test_rename_carries_entries(self, git_repo):
        repo = git_repo()
        first = repo.commit(utc(2015, 1, 1), {"src/Old.java": source(statements(20))})
        moved = repo.commit(utc(2015, 2, 1), rename={"src/Old.java": "src/New.java"})

        commits = index_history(repo.path).commits_for("src/New.java")

        assert [c.commit_id for c in commits] == [first, moved]
        assert commits[1].renamed_from == "src/Old.java"

    def test_extension_and_path_filters(self, git_repo):
        repo = git_repo()
        repo.commit(utc(2015, 1, 1), {"README.md": "hi\n", "src/A.java": source(statements(3)),
                                      "src/B.java": source(statements(3))})
        index = index_history(repo.path, paths={"src/A.java"})
        assert list(index.entries) == ["src/A.java"]

    def test_missing_repository(self, tmp_path):
        with pytest.raises(RepositoryError):
            index_history(tmp_path / "nowhere")

    def test_index_is_cached_per_head(self, git_repo, tmp_path):
        repo = git_repo()
        repo.commit(utc(2015, 1, 1), {"src/F.java": source(statements(5))})
        cache = tmp_path / "cache"

        built = load_or_build_index(repo.path, cache)
        assert len(list(cache.glob("*.json"))) == 1
        assert load_or_build_index(repo.path, cache).to_dict() == built.to_dict()

        repo.commit(utc(2015, 2, 1), {"src/G.java": source(statements(5))})
        load_or_build_index(repo.path, cache)
        assert len(list(cache.glob("*.json"))) == 2


class TestLoadInconsistencies:
    def write(self, tmp_path, *rows):
        table = tmp_path / "table.csv"
        table.write_text("app_id,path,line_start,line_end\n" + "\n".join(rows) + "\n",
                         encoding="utf-8")
        return table

    def test_row_becomes_range(self, tmp_path):
        ranges = load_inconsistencies(self.write(tmp_path, "appA,src/F.java,25,40"))
        assert [(r.app_id, r.path, r.line_range) for r in ranges] == [
            ("appA", "src/F.java", (25, 40))]
        assert ranges[0].line_count == 16

    def test_inverted_range_is_rejected_with_line_number(self, tmp_path):
        table = self.write(tmp_path, "appA,src/F.java,1,2", "appA,src/F.java,40,25")
        with pytest.raises(InconsistencyRowError) as info:
            load_inconsistencies(table)
        assert info.value.line_number == 3

    def test_lenient_mode_skips_bad_rows(self, tmp_path):
        table = self.write(tmp_path, "appA,src/F.java,x,2", "appA,src/F.java,3,4")
        assert len(load_inconsistencies(table, strict=False)) == 1

    def test_unknown_files_are_dropped(self, tmp_path, caplog):
        table = self.write(tmp_path, "appA,src/F.java,1,5", "appA,src/Gone.java,1,5",
                           "appA,src/F.java,1,500")
        ranges = load_inconsistencies(table, known_files={("appA", "src/F.java"): 100})
        assert len(ranges) == 1
        assert "unknown file" in caplog.text

    def test_missing_column(self, tmp_path):
        table = tmp_path / "table.csv"
        table.write_text("app_id,path,line_start\nappA,F.java,1\n", encoding="utf-8")
        with pytest.raises(InconsistencyRowError):
            load_inconsistencies(table)


class TestReleaseManifest:
    def test_csv_manifest(self, tmp_path):
        manifest = tmp_path / "releases.csv"
        manifest.write_text(
            "app_id,release_id,release_date,tree,repo\n"
            "a,v2,2015-06-01,trees/a2,repos/a\n"
            "a,v1,2015-01-01,trees/a1,\n"
            "b,v1,2014-01-01T10:00:00Z,trees/b1,\n",
            encoding="utf-8")

        releases = load_release_manifest(manifest)

        assert releases[0].tree == (tmp_path / "trees" / "a2").resolve()
        assert releases[0].repo == (tmp_path / "repos" / "a").resolve()
        assert releases[1].repo is None
        ordered = order_releases(releases)
        assert list(ordered) == ["a", "b"]
        assert [r.release_id for r in ordered["a"]] == ["v1", "v2"]

    def test_json_manifest(self, tmp_path):
        manifest = tmp_path / "releases.json"
        manifest.write_text('{"releases": [{"app_id": "a", "release_id": "v1", '
                            '"release_date": "2015-01-01", "tree": "t"}]}', encoding="utf-8")
        assert [r.app_id for r in load_release_manifest(manifest)] == ["a"]

    def test_same_date_orders_by_release_id(self, tmp_path):
        manifest = tmp_path / "releases.csv"
        manifest.write_text("app_id,release_id,release_date,tree\n"
                            "a,v10,2015-01-01,t\na,v09,2015-01-01,t\n", encoding="utf-8")
        ordered = order_releases(load_release_manifest(manifest))
        assert [r.release_id for r in ordered["a"]] == ["v09", "v10"]

    @pytest.mark.parametrize("rows", [
        "a,v1,2015-01-01,t\na,v1,2015-02-01,t\n",
        "a,v1,not-a-date,t\n",
        "a,v1,,t\n",
    ])
    def test_invalid_manifests(self, tmp_path, rows):
        manifest = tmp_path / "releases.csv"
        manifest.write_text("app_id,release_id,release_date,tree\n" + rows, encoding="utf-8")
        with pytest.raises(ManifestError):
            load_release_manifest(manifest)
