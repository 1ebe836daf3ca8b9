#!/usr/bin/env python3
"""
Check Runner - runs the test_* functions of a test script and prints a summary
"""

import inspect
import logging
import sys
import tempfile
from pathlib import Path


def run_checks(namespace: dict, title: str) -> int:
    """Call every test_* function in the namespace; nonzero when any fails"""
    logging.basicConfig(level=logging.WARNING)
    print(f"🧪 {title}")
    passed, failed = 0, []
    for name, func in sorted(namespace.items()):
        if not name.startswith("test_") or not callable(func):
            continue
        try:
            if "tmp_path" in inspect.signature(func).parameters:
                with tempfile.TemporaryDirectory() as tmp:
                    func(Path(tmp))
            else:
                func()
        except Exception as e:
            failed.append(name)
            print(f"❌ {name}: {type(e).__name__}: {e}")
        else:
            passed += 1
            print(f"✅ {name}")
    print(f"\n🏁 {passed} passed, {len(failed)} failed")
    return 1 if failed else 0


def main(namespace: dict, title: str) -> None:
    sys.exit(run_checks(namespace, title))
