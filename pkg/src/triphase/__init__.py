"""triphase: local-first plan/review/execute orchestration engine."""

__version__ = "0.1.0"
