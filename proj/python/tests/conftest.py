import logora


def pytest_report_header(config):
    return f"logora extension: {logora._core.__file__}"
