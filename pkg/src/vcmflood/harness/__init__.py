"""Configuration, test cases, time loop, outputs and comparisons."""
