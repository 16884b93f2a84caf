# Unit and integration suites; run with python -m unittest discover -s tests.
