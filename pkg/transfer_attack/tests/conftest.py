def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale MNIST runs (need GATK_MNIST_DIR)")
