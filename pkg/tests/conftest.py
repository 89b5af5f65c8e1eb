def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance check lines after the usual summary."""
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
