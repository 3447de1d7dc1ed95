from __future__ import annotations

import pytest

from irframes.gallery import get_entry


class _Validated:
    """Validation results of default gallery entries, computed once per session."""

    def __init__(self):
        self._cache = {}

    def __call__(self, name):
        if name not in self._cache:
            entry = get_entry(name)
            cert, data = entry.validate()
            self._cache[name] = (entry, cert, data)
        return self._cache[name]


@pytest.fixture(scope="session")
def validated():
    return _Validated()
