"""Shared pytest wiring for the acceptance suites.

The acceptance tests report one [PASS]/[FAIL] line per guarantee, and
those lines must survive default output capture (which grabs the real
file descriptors, so even sys.__stderr__ writes disappear). Routing the
lines through the capture manager prints them to the live terminal in
any capture mode."""

import sys

_capture_manager = None


def pytest_configure(config):
    global _capture_manager
    _capture_manager = config.pluginmanager.getplugin("capturemanager")


def emit_verdict(line: str) -> None:
    if _capture_manager is None:
        print(line, file=sys.__stderr__, flush=True)
        return
    with _capture_manager.global_and_fixture_disabled():
        print(line, flush=True)
