import html
import logging
import os
import shutil
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import pytest
from hypothesis import settings

from qareuse.license_id import default_catalog
from qareuse.models import AppFileOrigin, CodeSnippet, Post, QAPostOrigin
from qareuse.qa_ingest import write_dump

if "CI" in os.environ:
    settings.register_profile("ci", deadline=None, max_examples=settings.default.max_examples * 5)
    settings.load_profile("ci")

UTC = timezone.utc

requires_git = pytest.mark.skipif(shutil.which("git") is None, reason="git executable not found")


def utc(*args: int) -> datetime:
    return datetime(*args, tzinfo=UTC)


def statements(count: int, prefix: str = "v", start: int = 0) -> List[str]:
    """Distinct Java statements, one per line"""
    return [f"int {prefix}{i} = {i};" for i in range(start, start + count)]


def code_block(lines: Sequence[str]) -> str:
    return "<pre><code>" + html.escape("\n".join(lines) + "\n") + "</code></pre>"


def qa_snippet(snippet_id: str, lines: Sequence[str], created_at: Optional[datetime] = None,
               post_id: int = 1, block_index: int = 0, post_type: int = 1) -> CodeSnippet:
    return CodeSnippet(
        snippet_id=snippet_id,
        origin=QAPostOrigin(post_id, block_index, post_type),
        raw_text="\n".join(lines),
        normalized_lines=tuple(lines),
        created_at=created_at or utc(2014, 1, 1),
    )


def app_snippet(snippet_id: str, lines: Sequence[str], app_id: str = "app",
                path: str = "src/A.java", start: int = 1, raw_text: Optional[str] = None,
                release_id: Optional[str] = "r1") -> CodeSnippet:
    return CodeSnippet(
        snippet_id=snippet_id,
        origin=AppFileOrigin(app_id, path, start, start + len(lines) - 1, release_id),
        raw_text=raw_text if raw_text is not None else "\n".join(lines),
        normalized_lines=tuple(lines),
    )


def license_notice(license_id: str) -> str:
    return default_catalog().get(license_id).notice


class GitRepoBuilder:
    """Scripts a git repository commit by commit with fixed dates and authors"""

    def __init__(self, path: Path):
        from git import Repo

        self.path = path
        self.repo = Repo.init(str(path))
        self.commits: List[str] = []

    def commit(self, when: datetime, files: Optional[Dict[str, str]] = None,
               remove: Iterable[str] = (), rename: Optional[Dict[str, str]] = None,
               author: str = "Alice", message: str = "change") -> str:
        from git import Actor

        index = self.repo.index
        for old, new in (rename or {}).items():
            (self.path / new).parent.mkdir(parents=True, exist_ok=True)
            index.move([old, new])
        for name, text in (files or {}).items():
            target = self.path / name
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding="utf-8")
            index.add([name])
        removed = list(remove)
        if removed:
            index.remove(removed, working_tree=True)

        stamp = f"{int(when.timestamp())} +0000"
        actor = Actor(author, f"{author.lower()}@example.com")
        commit = index.commit(message, author=actor, committer=actor,
                              author_date=stamp, commit_date=stamp)
        self.commits.append(commit.hexsha)
        return commit.hexsha


@pytest.fixture
def git_repo(tmp_path):
    """Factory of scripted repositories under ``tmp_path``"""
    def make(name: str = "repo") -> GitRepoBuilder:
        return GitRepoBuilder(tmp_path / name)
    return make


@pytest.fixture
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


READ_ALL = """\
    public static String readAll(InputStream in) throws IOException {
        BufferedReader reader = new BufferedReader(new InputStreamReader(in));
        StringBuilder out = new StringBuilder();
        String line;
        while ((line = reader.readLine()) != null) {
            out.append(line);
            out.append('\\n');
        }
        reader.close();
        return out.toString();
    }
"""

MERGE_SORTED = """\
    public int[] mergeSorted(int[] left, int[] right) {
        int[] result = new int[left.length + right.length];
        int i = 0, j = 0, k = 0;
        while (i < left.length && j < right.length) {
            if (left[i] <= right[j]) {
                result[k++] = left[i++];
            } else {
                result[k++] = right[j++];
            }
        }
        while (i < left.length) {
            result[k++] = left[i++];
        }
        while (j < right.length) {
            result[k++] = right[j++];
        }
        return result;
    }
"""


def java_class(package: str, name: str, body: str, header: str = "") -> str:
    return f"{header}package {package};\n\nimport java.io.*;\n\npublic class {name} {{\n{body}}}\n"


def _filler_posts(start_id: int, count: int, base: datetime) -> List[Post]:
    posts = []
    for offset in range(count):
        post_id = start_id + offset
        kind = offset % 4
        if kind == 0:
            body = "<p>How do I configure the build?</p>"
            tags = frozenset({"java", "gradle"})
        elif kind == 1:
            body = "<p>Use <code>adb logcat</code> to see the log.</p>"
            tags = frozenset({"android"})
        elif kind == 2:
            # nine statement decoy
            body = "<p>Try this:</p>" + code_block(statements(9, prefix=f"d{post_id}_"))
            tags = frozenset({"java"})
        else:
            body = code_block([f"print({i})" for i in range(12)])
            tags = frozenset({"python"})
        posts.append(Post(post_id, base + timedelta(hours=offset), tags, body, post_type=1,
                          owner_display_name=f"user{post_id}"))
    return posts


def build_mini_corpus(root: Path) -> Path:
    """
    Write a dump of 200 posts and three scripted apps, return the pipeline manifest

    - alpha (GPL-3.0) took ``readAll`` from a 2014-04-10 post on 2015-01-15
    - beta (Apache-2.0) wrote ``mergeSorted`` on 2013-05-01; Bob posted it on 2014-03-01
    - gamma (MIT) took ``mergeSorted`` from that post on 2015-06-01
    """
    root.mkdir(parents=True, exist_ok=True)
    posts = [
        Post(1, utc(2014, 4, 10, 9), frozenset({"java", "android"}),
             "<p>Read a stream into a string:</p>" + code_block(READ_ALL.splitlines()),
             post_type=1, owner_display_name="Dana"),
        Post(2, utc(2014, 3, 1, 9), frozenset({"java"}),
             "<p>Merging two sorted arrays:</p>" + code_block(MERGE_SORTED.splitlines()),
             post_type=1, owner_display_name="Bob"),
    ]
    posts.extend(_filler_posts(3, 198, utc(2013, 1, 1)))
    with open(root / "posts.xml", "wb") as stream:
        write_dump(posts, stream)

    apps = {
        "alpha": ("GPL-3.0", "Alice", [
            (utc(2014, 1, 1, 12), {"README.md": "alpha\n"}),
            (utc(2015, 1, 15, 12), {"src/IoUtil.java": java_class("org.alpha", "IoUtil",
                                                                    READ_ALL)}),
        ]),
        "beta": ("Apache-2.0", "Bob", [
            (utc(2013, 5, 1, 12), {"src/Merge.java": java_class("org.beta", "Merge",
                                                                 MERGE_SORTED)}),
        ]),
        "gamma": ("MIT", "Carol", [
            (utc(2015, 6, 1, 12), {"src/Sorting.java": java_class("org.gamma", "Sorting",
                                                                    MERGE_SORTED)}),
        ]),
    }
    rows = ["app_id,release_id,release_date,tree,repo"]
    for app_id, (license_id, author, history) in apps.items():
        builder = GitRepoBuilder(root / app_id)
        first = True
        for when, files in history:
            if first:
                files = dict(files, LICENSE=license_notice(license_id))
                first = False
            builder.commit(when, files, author=author)
        old = root / f"{app_id}-r1"
        old.mkdir()
        (old / "README.md").write_text(f"{app_id} first release\n", encoding="utf-8")
        rows.append(f"{app_id},r1,2012-01-01T00:00:00Z,{app_id}-r1,")
        rows.append(f"{app_id},r2,2016-01-01T00:00:00Z,{app_id},{app_id}")
    (root / "releases.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (root / "inconsistencies.csv").write_text(
        "app_id,path,line_start,line_end\nalpha,src/IoUtil.java,8,12\n", encoding="utf-8")

    manifest = root / "pipeline.json"
    manifest.write_text(
        '{"dump": "posts.xml", "releases": "releases.csv", '
        '"inconsistencies": "inconsistencies.csv", "format": "JSON"}\n',
        encoding="utf-8",
    )
    return manifest


@pytest.fixture
def mini_corpus(tmp_path):
    return build_mini_corpus(tmp_path / "corpus")
