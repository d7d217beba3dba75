"""Built-in tool handlers for the supported categories.

Submodules hold the typed operations; :mod:`triphase.toolkit.handlers`
adapts routed instructions onto them and wires the default chains into
a Router.
"""

from triphase.toolkit.files import (
    archive_ops,
    file_ops_execute,
    file_write,
    make_dir,
)
from triphase.toolkit.sandbox import SandboxSpec, cli_execute
from triphase.toolkit.urlsafety import Blocklist, UrlError, score_url
from triphase.toolkit.web import (
    FetchReport,
    SearchStrategy,
    WebReadError,
    WebSearchOutcome,
    web_read,
    web_search,
)

__all__ = [
    "archive_ops", "file_ops_execute", "file_write", "make_dir",
    "SandboxSpec", "cli_execute",
    "Blocklist", "UrlError", "score_url",
    "FetchReport", "SearchStrategy", "WebReadError", "WebSearchOutcome",
    "web_read", "web_search",
]
