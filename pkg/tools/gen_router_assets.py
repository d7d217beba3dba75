#!/usr/bin/env python3
"""Regenerate the router data assets (categories, aliases, corpus).

One-off maintenance script; the JSON files it writes are the shipped
artifacts. Keeping generation here avoids hand-count errors in the
alias table and the routing corpus group sizes.
"""

from __future__ import annotations

import json
from pathlib import Path

ASSETS = Path(__file__).resolve().parents[1] / "src" / "triphase" / "assets"

CATEGORIES = [
    # (name, domain, supported by built-in handlers)
    ("file_ops", "file_system", True),
    ("file_write", "file_system", True),
    ("archive", "file_system", True),
    ("binary_read", "file_system", True),
    ("web_search", "web", True),
    ("web_read", "web", True),
    ("browser", "web", False),
    ("wechat", "communication", False),
    ("gui_auto", "desktop_gui", False),
    ("app_control", "desktop_gui", False),
    ("auto_input", "desktop_gui", False),
    ("image_gen", "media", False),
    ("image_read", "media", False),
    ("speech_tts", "media", False),
    ("speech_stt", "media", False),
    ("video_analyze", "media", False),
    ("audio_analyze", "media", False),
    ("cli", "system", True),
    ("classify", "system", True),
    ("network", "system", True),
    # Reconstructed names (count fixed at 24; these four are data-flagged
    # additions covering capabilities the category table groups elsewhere).
    ("wifi", "system", False),
    ("ftp", "system", False),
    ("ocr", "media", False),
    ("screenshot", "desktop_gui", False),
]

RECONSTRUCTED = ["wifi", "ftp", "ocr", "screenshot"]

ALIASES: dict[str, list[str]] = {
    "cli": [
        "shell", "terminal", "cmd", "powershell", "bash", "command",
        "command_line", "console", "run_command", "execute", "exec",
        "subprocess", "sh", "zsh", "pwsh", "run_shell", "shell_command",
        "system_command", "cmdline", "run",
    ],
    "file_ops": [
        "file", "files", "filesystem", "file_system", "file_manager", "fs",
        "file_operation", "file_operations", "list_files", "list_dir",
        "directory", "dir_list", "copy_file", "move_file", "delete_file",
        "rename_file", "file_meta", "folder_ops", "manage_files", "folder",
    ],
    "file_write": [
        "write_file", "create_file", "save_file", "write", "save",
        "file_create", "new_file", "write_text", "save_text",
        "overwrite_file",
    ],
    "archive": [
        "zip", "unzip", "compress", "extract", "decompress", "tar",
        "archive_ops", "zip_file", "unzip_file", "compression",
    ],
    "binary_read": [
        "binary", "read_binary", "binary_file", "hexdump", "file_info",
        "binary_info", "binary_meta",
    ],
    "web_search": [
        "search", "google", "websearch", "search_web", "internet_search",
        "web_query", "search_engine", "duckduckgo", "bing", "online_search",
        "find_online", "query_web", "search_internet", "lookup",
    ],
    "web_read": [
        "download", "fetch", "scrape", "read_url", "fetch_url", "get_url",
        "http_get", "read_page", "url_read", "web_fetch", "webpage",
        "read_web", "crawl", "curl", "wget",
    ],
    "browser": [
        "browse", "open_url", "open_browser", "navigate", "chrome",
        "web_browser", "browser_automation", "visit", "goto_url",
        "browse_web",
    ],
    "wechat": ["weixin", "wechat_msg", "send_wechat", "wechat_message"],
    "gui_auto": [
        "gui", "mouse", "keyboard", "click", "type_text", "automation",
        "desktop_auto", "gui_automation", "mouse_click", "keypress",
        "hotkey",
    ],
    "app_control": [
        "app", "application", "open_app", "launch", "launch_app",
        "close_app", "window", "window_control", "focus_window",
        "start_app",
    ],
    "auto_input": [
        "input", "form_input", "fill_form", "autofill", "text_input",
        "enter_text",
    ],
    "image_gen": [
        "generate_image", "image_generation", "draw", "text_to_image",
        "txt2img", "create_image", "make_image",
    ],
    "image_read": [
        "vision", "analyze_image", "image_analysis", "read_image",
        "describe_image", "look_at_image", "image_understand", "view_image",
    ],
    "speech_tts": [
        "tts", "text_to_speech", "speak", "say", "voice_output",
        "synthesize_speech",
    ],
    "speech_stt": [
        "stt", "speech_to_text", "transcribe", "listen", "voice_input",
        "asr", "transcription",
    ],
    "video_analyze": [
        "video", "analyze_video", "video_analysis", "watch_video",
        "video_understand",
    ],
    "audio_analyze": [
        "audio", "analyze_audio", "audio_analysis", "listen_audio",
        "sound_analysis",
    ],
    "classify": [
        "classification", "categorize", "classify_text", "label",
        "text_classification", "sentiment",
    ],
    "network": [
        "ping", "dns", "port_scan", "nslookup", "traceroute",
        "network_probe", "net", "port_check", "network_scan", "dns_lookup",
    ],
    "wifi": ["wi_fi", "wireless", "wifi_scan"],
    "ftp": ["ftp_client", "ftp_transfer"],
    "ocr": ["read_text_from_image", "text_recognition", "ocr_read"],
    "screenshot": ["screen_capture", "capture_screen", "grab_screen",
                   "print_screen"],
}


def build_corpus() -> dict:
    cli_to_file_ops = [
        ("cli", "copy C:\\data\\a.txt to D:\\backup\\a.txt", []),
        ("cli", "move /var/log/app.log to /tmp/app.log", []),
        ("shell", "delete C:\\temp\\old_report.docx", []),
        ("cmd", "dir /b C:\\data", ["/b"]),
        ("terminal", "list /home/user/documents", []),
        ("cli", "rename C:\\projects\\draft.md to C:\\projects\\final.md", []),
        ("powershell", "mkdir D:\\archive\\2024", []),
        ("cli", "dir -l /etc/nginx", ["-l"]),
        ("cli", "copy ./notes.txt to ./notes.bak", []),
        ("bash", "delete /tmp/scratch/cache.bin", []),
        ("cli", "move C:\\Users\\me\\Desktop\\img.png to C:\\Users\\me\\Pictures\\img.png", []),
        ("cmd", 'list "C:\\my data\\reports"', []),
    ]
    browse_to_browser = [
        ("browse", "open https://dashboard.example.com/metrics"),
        ("browse", "go to https://github.com/torvalds/linux/pulls"),
        ("browse", "https://mail.example.com"),
    ]
    web_read_to_browser = [
        ("web_read", "read https://www.amazon.com/dp/B0EXAMPLE"),
        ("web_read", "fetch https://item.taobao.com/item.htm?id=12345"),
    ]
    alias_cases = [
        ("shell", "echo hello", "cli"),
        ("terminal", "git status", "cli"),
        ("cmd", "python --version", "cli"),
        ("powershell", "Get-Process", "cli"),
        ("bash", "uptime", "cli"),
        ("console", "whoami", "cli"),
        ("exec", "date", "cli"),
        ("command", "hostname", "cli"),
        ("subprocess", "uname -a", "cli"),
        ("run_command", "df -h", "cli"),
        ("file", "show the downloads folder contents", "file_ops"),
        ("files", "how big is the backups folder", "file_ops"),
        ("filesystem", "count entries in the photos folder", "file_ops"),
        ("fs", "what is in my documents", "file_ops"),
        ("file_manager", "show metadata for report.docx", "file_ops"),
        ("list_files", "enumerate the music collection", "file_ops"),
        ("directory", "browse project tree", "file_ops"),
        ("folder", "inspect the staging area", "file_ops"),
        ("write_file", "create summary.txt containing the word done", "file_write"),
        ("create_file", "make an empty placeholder note", "file_write"),
        ("save_file", "persist the draft as draft.md", "file_write"),
        ("write", "store the text hello world in hello.txt", "file_write"),
        ("save", "keep this snippet as snippet.py", "file_write"),
        ("zip", "compress the reports folder", "archive"),
        ("unzip", "unpack bundle.zip into workspace", "archive"),
        ("compress", "shrink the logs directory", "archive"),
        ("extract", "pull everything out of data.tar", "archive"),
        ("binary", "inspect header of firmware.bin", "binary_read"),
        ("hexdump", "show first bytes of image.dat", "binary_read"),
        ("file_info", "what kind of file is blob.out", "binary_read"),
        ("search", "latest rust release notes", "web_search"),
        ("google", "weather in osaka tomorrow", "web_search"),
        ("websearch", "best practices for sqlite backups", "web_search"),
        ("lookup", "python 3.13 new features", "web_search"),
        ("duckduckgo", "open source licenses comparison", "web_search"),
        ("download", "download https://example.org/whitepaper.pdf", "web_read"),
        ("fetch", "fetch https://example.com/changelog", "web_read"),
        ("scrape", "scrape https://news.example.net/today", "web_read"),
        ("curl", "curl https://api.example.com/status", "web_read"),
        ("classification", "label this ticket as bug or feature", "classify"),
        ("categorize", "sort this feedback into praise or complaint", "classify"),
        ("sentiment", "is this review positive or negative", "classify"),
        ("ping", "ping 127.0.0.1", "network"),
        ("dns", "resolve localhost", "network"),
        ("port_scan", "check port 8080 on 127.0.0.1", "network"),
        ("nslookup", "lookup loopback.test", "network"),
        ("tts", "read this paragraph aloud", "speech_tts"),
    ]
    assert len(alias_cases) == 47, len(alias_cases)

    direct_instr = {
        "file_ops": [
            "list the downloads folder",
            "show metadata for the quarterly report",
            "tidy duplicate names in the inbox folder",
            "check whether budget.xlsx exists",
            "report the size of the media library",
        ],
        "file_write": [
            "create notes.txt with a shopping list",
            "overwrite status.txt with the word ready",
            "write a two line readme for the demo",
            "save the meeting minutes to minutes.md",
        ],
        "archive": [
            "compress the invoices folder",
            "extract backup.zip to the restore area",
            "bundle the exports directory",
            "unpack the release tarball",
        ],
        "binary_read": [
            "describe the header of core.img",
            "what format is mystery.blob",
            "report the size of installer.pkg",
        ],
        "web_search": [
            "local first software design patterns",
            "compare wayland and x11 performance",
            "sqlite wal mode tradeoffs",
            "rust async runtime comparison",
            "best lightweight window managers",
        ],
        "web_read": [
            "read https://example.org/article",
            "fetch https://docs.example.com/guide/intro",
            "summarize https://blog.example.net/post/42",
            "get https://example.com/release-notes",
        ],
        "browser": [
            "open https://app.example.com/console",
            "navigate to https://intranet.example.org/wiki",
            "visit https://status.example.io",
        ],
        "wechat": [
            "send good morning to the family group",
            "read the latest message from Li",
        ],
        "gui_auto": [
            "click the save button in the dialog",
            "press ctrl shift s",
        ],
        "app_control": [
            "open the calculator app",
            "focus the music player window",
        ],
        "auto_input": [
            "fill the login form with the saved profile",
            "type the address into the shipping field",
        ],
        "image_gen": [
            "generate a watercolor of a lighthouse",
            "draw a diagram of the pipeline",
        ],
        "image_read": [
            "describe the chart in slide 3",
            "what text is on this poster",
        ],
        "speech_tts": [
            "speak the summary out loud",
            "read the alert message aloud",
        ],
        "speech_stt": [
            "transcribe the voice memo",
            "turn this recording into text",
        ],
        "video_analyze": [
            "summarize the screen recording",
            "what happens in clip.mp4",
        ],
        "audio_analyze": [
            "identify the song in sample.wav",
            "describe the background noise",
        ],
        "cli": [
            "echo build finished",
            "git log --oneline -5",
            "python -m this",
            "uname -r",
            "printenv PATH",
        ],
        "classify": [
            "classify this email as urgent or normal",
            "is this sentence formal or casual",
            "tag the report as internal or public",
        ],
        "network": [
            "ping 127.0.0.1 twice",
            "resolve the name localhost",
            "probe port 9 on 127.0.0.1",
            "trace the route to the gateway",
        ],
        "wifi": ["list nearby wireless networks", "reconnect to the lab wifi"],
        "ftp": ["mirror the release directory", "upload the build artifact"],
        "ocr": ["read the text in scan.png", "extract the table from the receipt"],
        "screenshot": ["capture the current screen", "grab the active window"],
    }
    direct_cases = []
    for canonical, instructions in direct_instr.items():
        for instr in instructions:
            direct_cases.append((canonical, instr, canonical))
    # Pad deterministically to exactly 89 with cli/web_search variety.
    extra = [
        ("cli", "date --utc", "cli"),
        ("cli", "cal 2025", "cli"),
        ("web_search", "ergonomic split keyboard reviews", "web_search"),
        ("web_search", "how does raft leader election work", "web_search"),
        ("file_ops", "count the screenshots taken today", "file_ops"),
        ("file_write", "jot down the wifi password hint", "file_write"),
        ("network", "check if port 631 is open locally", "network"),
        ("classify", "bucket this log line as info warning or error", "classify"),
        ("web_read", "read https://example.org/faq", "web_read"),
        ("browser", "open https://example.com/login", "browser"),
        ("cli", "true", "cli"),
        ("file_ops", "verify the export folder is empty", "file_ops"),
        ("web_search", "tokyo coffee roasters open late", "web_search"),
        ("archive", "compress the audit trail", "archive"),
        ("cli", "id -un", "cli"),
        ("network", "resolve ipv6 localhost", "network"),
        ("file_ops", "show the oldest file in projects", "file_ops"),
        ("web_search", "difference between tcp and quic", "web_search"),
        ("cli", "pwd", "cli"),
        ("classify", "is this subject line spam or ham", "classify"),
        ("web_read", "read https://example.com/terms", "web_read"),
    ]
    direct_cases.extend(extra)
    direct_cases = direct_cases[:89]
    assert len(direct_cases) == 89, len(direct_cases)

    negative = [
        ("cli", "run setup.exe"),
        ("cli", "execute installer.exe in silent mode"),
        ("cli", "launch updater.exe"),
        ("cli", "start service.exe now"),
        ("cli", "git checkout feature/login"),
        ("cli", "echo a && b"),
        ("cli", "curl https://example.com/api"),
        ("cli", "python -m pytest -q"),
        ("cli", "grep -rn TODO src"),
        ("cli", "make -j4 release"),
        ("cli", "docker ps -a"),
        ("cli", "npm run build"),
        ("cli", "cargo test --workspace"),
        ("cli", "systemctl status sshd"),
        ("cli", "tail -n 20 readme"),
        ("file_ops", "list the biggest files in downloads"),
        ("file_ops", "delete temporary files older than 7 days"),
        ("file_ops", "rename the vacation albums consistently"),
        ("file_ops", "show hidden items in the config folder"),
        ("file_ops", "report disk usage of the backups"),
        ("web_read", "read https://example.org/article"),
        ("web_read", "fetch https://docs.example.com/api/reference"),
        ("web_read", "get https://example.net/feed.xml"),
        ("browser", "open https://app.example.com/console"),
        ("browser", "visit https://status.example.io/history"),
        ("browser", "navigate to https://wiki.example.org/start"),
        ("web_search", "best mechanical keyboards 2025"),
        ("web_search", "rust vs go for network services"),
        ("web_search", "self hosted photo backup options"),
        ("classify", "label this ticket as bug or feature"),
        ("classify", "is this commit message conventional"),
        ("network", "ping 10.0.0.1"),
        ("network", "resolve localhost"),
        ("network", "probe port 8443 on 127.0.0.1"),
        ("image_read", "describe the chart in slide 3"),
        ("image_gen", "draw a floor plan sketch"),
        ("speech_tts", "speak the weather summary"),
        ("speech_stt", "transcribe standup.m4a"),
        ("video_analyze", "summarize demo.mov"),
        ("audio_analyze", "what instrument is playing"),
        ("wechat", "send the invoice to accounting"),
        ("gui_auto", "double click the tray icon"),
        ("app_control", "close the editor window"),
        ("auto_input", "fill the search box with kittens"),
        ("archive", "compress the legal folder"),
        ("binary_read", "inspect rom.bin header"),
        ("file_write", "write ok into health.txt"),
        ("wifi", "show saved wireless profiles"),
        ("ftp", "push the nightly build"),
        ("screenshot", "capture the second monitor"),
    ]
    assert len(negative) == 50, len(negative)

    entries = []
    for raw, instr, flags in cli_to_file_ops:
        entries.append({"group": "cli_to_file_ops", "raw_type": raw,
                        "instruction": instr, "expected": "file_ops",
                        "expect_correction": True, "expect_flags": flags})
    for raw, instr in browse_to_browser:
        entries.append({"group": "browse_to_browser", "raw_type": raw,
                        "instruction": instr, "expected": "browser",
                        "expect_correction": False, "expect_flags": []})
    for raw, instr in web_read_to_browser:
        entries.append({"group": "web_read_to_browser", "raw_type": raw,
                        "instruction": instr, "expected": "browser",
                        "expect_correction": True, "expect_flags": []})
    for raw, instr, expected in alias_cases:
        entries.append({"group": "alias", "raw_type": raw,
                        "instruction": instr, "expected": expected,
                        "expect_correction": False, "expect_flags": []})
    for raw, instr, expected in direct_cases:
        entries.append({"group": "direct", "raw_type": raw,
                        "instruction": instr, "expected": expected,
                        "expect_correction": False, "expect_flags": []})
    assert len(entries) == 153, len(entries)

    negative_entries = [
        {"raw_type": raw, "instruction": instr} for raw, instr in negative
    ]
    return {"positive": entries, "negative": negative_entries}


def main() -> None:
    ASSETS.mkdir(parents=True, exist_ok=True)

    categories = {
        "categories": [
            {"name": n, "domain": d, "supported": s} for n, d, s in CATEGORIES
        ],
        "reconstructed": RECONSTRUCTED,
    }
    (ASSETS / "categories.json").write_text(
        json.dumps(categories, indent=2) + "\n")

    flat: dict[str, str] = {}
    for canonical, names in ALIASES.items():
        for alias in names:
            assert alias not in flat, f"duplicate alias {alias}"
            flat[alias] = canonical
    canonical_names = {n for n, _, _ in CATEGORIES}
    overlap = set(flat) & canonical_names
    assert not overlap, f"aliases shadowing canonical names: {overlap}"
    assert len(flat) >= 130, len(flat)
    (ASSETS / "aliases.json").write_text(
        json.dumps(dict(sorted(flat.items())), indent=2) + "\n")

    corpus = build_corpus()
    (ASSETS / "routing_corpus.json").write_text(
        json.dumps(corpus, indent=2) + "\n")

    print(f"categories: {len(CATEGORIES)}  aliases: {len(flat)}  "
          f"corpus: {len(corpus['positive'])}+{len(corpus['negative'])}")


if __name__ == "__main__":
    main()
